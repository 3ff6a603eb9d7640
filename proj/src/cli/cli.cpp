#include "scoremix/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "report_io.hpp"
#include "scoremix/error.hpp"
#include "scoremix/kernels.hpp"
#include "scoremix/parallel.hpp"
#include "scoremix/rng.hpp"

namespace smx::cli {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Global {
  std::size_t threads = 0;
  bool quiet = false;
};

// Everything a report needs besides its result payload.
struct Run {
  const CLI::App* leaf = nullptr;
  std::string name;
  std::vector<fs::path> inputs;
  json seeds = json::object();
  Clock::time_point start = Clock::now();
  std::size_t workers = 1;
};

void collect_flags(const CLI::App* app, json& flags) {
  for (const CLI::Option* opt : app->get_options()) {
    const auto& lnames = opt->get_lnames();
    if (lnames.empty() || lnames.front() == "help" || lnames.front() == "version") continue;
    const std::string key = "--" + lnames.front();
    if (opt->count() > 0) {
      const auto& res = opt->results();
      if (opt->get_expected_min() == 0) {
        flags[key] = true;
      } else if (res.size() == 1) {
        flags[key] = res.front();
      } else {
        flags[key] = res;
      }
    } else {
      const std::string def = opt->get_default_str();
      flags[key] = def.empty() ? json(nullptr) : json(def);
    }
  }
}

json manifest(const Run& run) {
  json flags = json::object();
  for (const CLI::App* app = run.leaf; app; app = app->get_parent()) collect_flags(app, flags);
  json digests = json::object();
  for (const auto& p : run.inputs) digests[p.string()] = sha256_file(p);
  return {{"subcommand", run.name},
          {"flags", flags},
          {"inputs", digests},
          {"version", kVersion},
          {"seeds", run.seeds},
          {"workers", run.workers},
          {"isa", std::string(kernels::to_string(kernels::active().isa))},
          {"duration_seconds", std::chrono::duration<double>(Clock::now() - run.start).count()}};
}

void emit(const Run& run, json result, const std::string& out_path, const Global& g, std::ostream& os) {
  json report{{"manifest", manifest(run)}, {"result", std::move(result)}};
  const std::string text = report.dump(2) + "\n";
  if (!out_path.empty()) {
    write_text(out_path, text);
  } else if (!g.quiet) {
    os << text;
  }
}

EmbeddingMatrix load(Run& run, const std::string& path, const std::string& format,
                     const std::string& labels = {}) {
  run.inputs.emplace_back(path);
  std::optional<fs::path> lp;
  if (!labels.empty()) {
    lp = labels;
    run.inputs.emplace_back(labels);
  }
  const auto fmt = format.empty() ? format_for_path(path) : parse_format(format);
  return load_embeddings(path, fmt, lp);
}

CLI::Option* add_format(CLI::App* sub, std::string& target) {
  return sub->add_option("--format", target, "Embedding format {binary|csv}; inferred from extension if omitted")
      ->check(CLI::IsMember({"binary", "csv"}));
}

// ---------------------------------------------------------------- align

struct AlignOpts {
  std::string x, y, format, metric = "all", route = "features", metric_e = "cosine", metric_c = "cosine", pairs_csv,
                              out;
  double tau = kDefaultCknnaTau;
  std::optional<std::uint64_t> baseline_seed;
};

void run_align(Run& run, const AlignOpts& o, const Global& g, std::ostream& os) {
  const auto x = load(run, o.x, o.format);
  const auto y = load(run, o.y, o.format);
  const bool all = o.metric == "all";
  const bool tau_from_flag = run.leaf->get_option("--tau")->count() > 0;
  json r = json::object();
  if (all || o.metric == "cka") {
    const auto route = o.route == "gram" ? CkaRoute::gram : CkaRoute::features;
    r["cka"] = to_json(linear_cka(x, y, route));
    r["cka"]["route"] = o.route;
  }
  if (all || o.metric == "cknna") {
    r["cknna"] = to_json(cknna(x, y, o.tau));
    r["cknna"]["tau_source"] = tau_from_flag ? "flag" : "default";
  }
  if (all || o.metric == "dcor") {
    const auto lists = distance_correlation_lists(x, y, parse_metric(o.metric_e), parse_metric(o.metric_c));
    const auto stats = correlation_stats(lists);
    r["distance_correlation"] = {{"pairs", lists.e.size()},
                                 {"metric_e", o.metric_e},
                                 {"metric_c", o.metric_c},
                                 {"pearson", stats.pearson},
                                 {"spearman", stats.spearman}};
    if (!o.pairs_csv.empty()) write_text(o.pairs_csv, pair_lists_csv(lists));
  }
  if (o.baseline_seed) {
    run.seeds["baseline"] = *o.baseline_seed;
    const auto base = random_baseline(x.rows(), x.cols(), *o.baseline_seed);
    r["random_baseline"] = {{"seed", *o.baseline_seed}, {"cka_with_y", linear_cka(base, y).value}};
  }
  emit(run, r, o.out, g, os);
}

// ---------------------------------------------------------------- mine

struct MineOpts {
  std::string embeddings, format, metric = "cosine", reducer = "sum", direction = "max", out, csv;
  std::size_t m = 2, topk = 10, block = 512, verify = 0;
  Tiling tiling;
  bool exact_merge = false;
  std::uint64_t seed = 0;
};

void run_mine(Run& run, const MineOpts& o, const Global& g, std::ostream& os) {
  const auto e = load(run, o.embeddings, o.format);
  const auto metric = parse_metric(o.metric);
  const auto reducer = parse_reducer(o.reducer);
  const auto direction = parse_direction(o.direction);
  MpletReport report;
  if (o.m == 2) {
    report = mine_pairs(e, metric, direction, o.topk, o.block, g.threads, reducer);
  } else {
    TripleOptions opts{o.tiling, o.exact_merge, g.threads};
    report = mine_triples(e, metric, reducer, direction, o.topk, opts);
    if (o.m == 4) {
      const MinerStats triple_stats = report.stats;
      report = expand_quads(report, e, metric, reducer, direction);
      report.stats.saturated_columns = triple_stats.saturated_columns;
    }
  }
  json r = to_json(report);
  r["stats"] = to_json(report.stats);
  if (o.verify > 0) {
    run.seeds["verify"] = o.seed;
    r["verification"] = to_json(verify_stochastic(e, report, o.verify, o.seed));
  }
  if (!o.csv.empty()) write_text(o.csv, mplet_csv(report));
  emit(run, r, o.out, g, os);
}

// ---------------------------------------------------------------- theorem

struct TheoremOpts {
  double rho = 0.0, delta = 0.0, residual = 0.0;
  std::uint64_t n = 0, slice = 0;
  std::string kind = "cosine", out;
  std::optional<std::size_t> topk;
  // simulate / overlap
  std::string embeddings, x, y, format, metric = "cosine", pairs_csv;
  std::size_t d = 8, triplets = 20, trials = 10000;
  std::uint64_t seed = 0;
  std::optional<double> margin;
};

std::uint64_t slice_of(const TheoremOpts& o) {
  if (o.slice > 0) return o.slice;
  if (o.n >= 2) return slice_dimension(o.n);
  throw Error(ErrorCode::invalid_argument, "give --n (items, >= 2) or --N (slice dimension)");
}

void run_bound(Run& run, const TheoremOpts& o, const Global& g, std::ostream& os) {
  const auto kind = parse_mask_kind(o.kind);
  const auto slice = slice_of(o);
  json r{{"kind", to_string(kind)},
         {"rho", o.rho},
         {"margin", o.delta},
         {"slice_dim", slice},
         {"c_mask", mask_constant(kind, slice)},
         {"lower_bound", universal_lower_bound(o.rho, o.delta, slice, kind)}};
  if (o.n > 0) r["n_items"] = o.n;
  if (o.topk) {
    const double expected = static_cast<double>(*o.topk) * r["lower_bound"].get<double>();
    r["top_k"] = *o.topk;
    r["expected_overlap"] = expected;
    r["expected_overlap_rounded"] = static_cast<std::int64_t>(std::llround(expected));
  }
  emit(run, r, o.out, g, os);
}

void run_exact(Run& run, const TheoremOpts& o, const Global& g, std::ostream& os) {
  const auto kind = parse_mask_kind(o.kind);
  const auto slice = slice_of(o);
  json r{{"kind", to_string(kind)},
         {"rho", o.rho},
         {"margin", o.delta},
         {"residual_norm", o.residual},
         {"slice_dim", slice},
         {"exact_probability", exact_preservation_probability(o.rho, o.delta, o.residual, slice)},
         {"lower_bound", universal_lower_bound(o.rho, o.delta, slice, kind)}};
  emit(run, r, o.out, g, os);
}

void run_simulate(Run& run, const TheoremOpts& o, const Global& g, std::ostream& os) {
  const auto kind = parse_mask_kind(o.kind);
  run.seeds["simulate"] = o.seed;
  EmbeddingMatrix e;
  if (!o.embeddings.empty()) {
    e = load(run, o.embeddings, o.format);
  } else {
    if (o.n < 3) throw Error(ErrorCode::invalid_argument, "give --embeddings or --n >= 3");
    e = random_baseline(o.n, o.d, derive_seed(o.seed, {1}));
  }
  const auto gram = kind == MaskKind::cosine ? cosine_gram(e) : centered_normalized_gram(e);
  const auto triplets = random_positive_triplets(gram, o.triplets, kind, derive_seed(o.seed, {2}));
  const auto sim = simulate_misalignment(gram, o.rho, triplets, o.trials, derive_seed(o.seed, {3}), g.threads);
  json r = to_json(sim);
  std::size_t within = 0, defined = 0;
  for (std::size_t t = 0; t < sim.frequency.size(); ++t) {
    if (!std::isfinite(sim.exact[t])) continue;
    ++defined;
    const double p = sim.exact[t];
    within += std::abs(sim.frequency[t] - p) <= 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(sim.trials));
  }
  r["within_three_sigma"] = defined ? static_cast<double>(within) / static_cast<double>(defined) : 0.0;
  r["energy_z"] = sim.energy_stderr > 0.0 ? (sim.mean_energy - (1.0 - o.rho * o.rho)) / sim.energy_stderr : 0.0;
  emit(run, r, o.out, g, os);
}

void run_overlap(Run& run, const TheoremOpts& o, const Global& g, std::ostream& os) {
  const auto x = load(run, o.x, o.format);
  const auto y = load(run, o.y, o.format);
  if (!o.topk) throw Error(ErrorCode::invalid_argument, "--topk is required");
  const auto a = topk_overlap_analysis(x, y, parse_metric(o.metric), *o.topk, o.margin, g.threads);
  if (!o.pairs_csv.empty()) write_text(o.pairs_csv, overlap_pairs_csv(a));
  emit(run, to_json(a, false), o.out, g, os);
}

// ---------------------------------------------------------------- sample

struct SampleOpts {
  std::string class_a, class_b, weak, grid, out, report;
  std::optional<double> alpha, beta, lambda;
  double guidance = 1.0, sigma_min = 0.002, sigma_max = 80.0, rho_s = 7.0;
  std::size_t steps = 64, n = 16;
  std::uint64_t seed = 0;
};

void run_sample(Run& run, const SampleOpts& o, const Global& g, std::ostream& os) {
  auto cls = [&](const std::string& arg) {
    if (fs::is_regular_file(arg)) run.inputs.emplace_back(arg);
    return class_from_argument(arg);
  };
  const GaussianClass a = cls(o.class_a);
  const GaussianClass b = cls(o.class_b);
  std::optional<GaussianClass> weak;
  if (!o.weak.empty()) weak = cls(o.weak);
  if (o.guidance != 1.0 && !weak) throw Error(ErrorCode::invalid_argument, "--guidance needs --weak-class");
  run.seeds["sample"] = o.seed;

  std::vector<double> alphas, betas;
  json spec;
  if (!o.grid.empty()) {
    const auto comma = o.grid.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::parse_error, "grid must be 'a0:a1:step,b0:b1:step'", o.grid);
    alphas = parse_range(o.grid.substr(0, comma));
    betas = parse_range(o.grid.substr(comma + 1));
    spec = {{"grid", o.grid}};
  } else {
    MixSpec m = o.lambda ? MixSpec::from_lambda(*o.lambda)
                         : (o.alpha || o.beta ? MixSpec::from_weights(o.alpha.value_or(0.0), o.beta.value_or(0.0))
                                              : MixSpec::from_lambda(0.5));
    alphas = {m.alpha};
    betas = {m.beta};
    spec = {{"alpha", m.alpha}, {"beta", m.beta}};
    if (m.lambda) spec["lambda"] = *m.lambda;
  }
  const auto schedule = karras_schedule(o.sigma_min, o.sigma_max, o.steps, o.rho_s);
  const auto cells = grid_sweep(a, b, alphas, betas, schedule, o.n, o.seed, g.threads, weak ? &*weak : nullptr, o.guidance);

  std::ostringstream csv;
  csv << "cell_alpha,cell_beta,sample_index";
  for (std::size_t t = 0; t < a.dim(); ++t) csv << ",x_" << t;
  csv << ",log_density_a,log_density_b,log_density_mix_reference\n";
  json summary = json::array();
  for (const auto& cell : cells) {
    const auto ref = mix_reference(a, b, *cell.batch.spec);
    std::vector<double> mean(a.dim(), 0.0);
    for (std::size_t s = 0; s < cell.batch.size(); ++s) {
      const auto& p = cell.batch.points[s];
      csv << format_double(cell.alpha) << ',' << format_double(cell.beta) << ',' << s;
      for (std::size_t t = 0; t < p.size(); ++t) {
        csv << ',' << format_double(p[t]);
        mean[t] += p[t] / static_cast<double>(cell.batch.size());
      }
      csv << ',' << format_double(log_density(p, a)) << ',' << format_double(log_density(p, b)) << ','
          << format_double(log_density(p, ref)) << '\n';
    }
    summary.push_back({{"alpha", cell.alpha}, {"beta", cell.beta}, {"n", cell.batch.size()}, {"mean", mean}});
  }
  if (!o.out.empty()) write_text(o.out, csv.str());
  json r{{"dim", a.dim()}, {"mix", spec}, {"schedule", to_json(schedule)}, {"cells", summary}};
  if (weak) r["guidance"] = o.guidance;
  emit(run, r, o.report, g, os);
}

// ---------------------------------------------------------------- select

struct SelectOpts {
  std::string embeddings, conditions, format, strategy = "random", metric_embed = "cosine", metric_cond = "cosine", out,
                                              manifest, report;
  std::size_t count = 10, samples_per_pair = 20;
  std::uint64_t seed = 0;
};

void run_select(Run& run, const SelectOpts& o, const Global& g, std::ostream& os) {
  const auto e = load(run, o.embeddings, o.format);
  std::optional<EmbeddingMatrix> c;
  if (!o.conditions.empty()) c = load(run, o.conditions, o.format);
  SelectionSpec spec{parse_strategy(o.strategy), parse_metric(o.metric_embed), parse_metric(o.metric_cond), o.count,
                     o.seed, g.threads};
  run.seeds["select"] = o.seed;
  const auto result = select_classes(e, c ? &*c : nullptr, spec);
  const auto rows = pairing_manifest(result, o.samples_per_pair, o.seed);
  if (!o.out.empty()) write_text(o.out, selection_csv(result));
  if (!o.manifest.empty()) write_text(o.manifest, manifest_csv(rows));
  json r = to_json(result);
  r["samples_per_pair"] = o.samples_per_pair;
  r["manifest_rows"] = rows.size();
  emit(run, r, o.report, g, os);
}

// ---------------------------------------------------------------- genmetrics

struct GenOpts {
  std::string features, labels, targets, target_labels, format, out;
  bool strict = false;
};

void run_genmetrics(Run& run, const GenOpts& o, const Global& g, std::ostream& os) {
  ClassFeatureSet set;
  set.features = load(run, o.features, o.format);
  run.inputs.emplace_back(o.labels);
  set.labels = load_labels(o.labels);
  set.targets = load(run, o.targets, o.format, o.target_labels);
  emit(run, to_json(eval_metrics(set, o.strict)), o.out, g, os);
}

// ---------------------------------------------------------------- convert

struct ConvertOpts {
  std::string in, out, in_format, out_format, labels;
};

void run_convert(Run& run, const ConvertOpts& o, const Global& g, std::ostream& os) {
  const auto e = load(run, o.in, o.in_format, o.labels);
  const auto fmt = o.out_format.empty() ? format_for_path(o.out) : parse_format(o.out_format);
  save_embeddings(e, o.out, fmt);
  emit(run, {{"rows", e.rows()}, {"cols", e.cols()}, {"output", o.out}, {"output_format", fmt == EmbeddingFormat::csv ? "csv" : "binary"}},
       "", g, os);
}

// ---------------------------------------------------------------- bench

struct BenchOpts {
  std::size_t n = 2000, d = 64, topk = 100;
  std::string reducer = "sum", metric = "cosine", isa = "auto", out;
  Tiling tiling;
  bool exact_merge = false;
  std::uint64_t seed = 0;
};

void run_bench(Run& run, const BenchOpts& o, const Global& g, std::ostream& os) {
  run.seeds["bench"] = o.seed;
  const auto e = random_baseline(o.n, o.d, o.seed);
  std::vector<kernels::Isa> isas;
  if (o.isa == "auto") isas = {kernels::active().isa};
  if (o.isa == "scalar" || o.isa == "both") isas.push_back(kernels::Isa::scalar);
  if (o.isa == "avx2" || o.isa == "both") isas.push_back(kernels::Isa::avx2);
  const auto previous = kernels::active().isa;
  json runs = json::array();
  std::optional<MpletReport> first;
  bool identical = true;
  for (auto isa : isas) {
    if (!kernels::set_active(isa)) throw Error(ErrorCode::invalid_argument, "ISA not available on this CPU", std::string(kernels::to_string(isa)));
    const auto report = mine_triples(e, parse_metric(o.metric), parse_reducer(o.reducer), Direction::max, o.topk,
                                     TripleOptions{o.tiling, o.exact_merge, g.threads});
    runs.push_back({{"isa", kernels::to_string(isa)}, {"exactness", to_string(report.exactness)}, {"stats", to_json(report.stats)}});
    if (!first) {
      first = report;
    } else {
      for (std::size_t k = 0; k < report.entries.size(); ++k) {
        identical = identical && report.entries[k].indices == first->entries[k].indices &&
                    report.entries[k].score == first->entries[k].score;
      }
    }
  }
  kernels::set_active(previous);
  emit(run, {{"n", o.n}, {"d", o.d}, {"top_k", o.topk}, {"runs", runs}, {"reports_identical", identical}}, o.out, g, os);
}

int domain_error(std::ostream& err, ErrorCode code, const std::string& message, const std::string& context) {
  err << json{{"code", to_string(code)}, {"message", message}, {"context", context}}.dump() << "\n";
  return 1;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ScoreMix geometry toolkit: alignment, order-preservation bounds, m-plet mining, analytic sampling"};
  app.name("smx");
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", kVersion);

  Global g;
  app.add_option("--threads", g.threads, "Worker threads (0 = SMX_THREADS or hardware)");
  app.add_flag("--quiet", g.quiet, "Do not print the report to stdout");

  const auto metric_names = CLI::IsMember({"cosine", "euclidean", "l2", "squared_euclidean", "sqeuclidean"});

  AlignOpts ao;
  auto* align = app.add_subcommand("align", "CKA / CKNNA / distance correlation between two spaces");
  align->add_option("--x,--embeddings", ao.x, "First representation")->required()->check(CLI::ExistingFile);
  align->add_option("--y,--conditions", ao.y, "Second representation")->required()->check(CLI::ExistingFile);
  add_format(align, ao.format);
  align->add_option("--metric", ao.metric, "cka | cknna | dcor | all")->check(CLI::IsMember({"cka", "cknna", "dcor", "all"}));
  align->add_option("--tau", ao.tau, "CKNNA temperature")->check(CLI::PositiveNumber);
  align->add_option("--route", ao.route, "CKA evaluation route")->check(CLI::IsMember({"features", "gram"}));
  align->add_option("--metric-e", ao.metric_e, "Distance in the first space")->check(metric_names);
  align->add_option("--metric-c", ao.metric_c, "Distance in the second space")->check(metric_names);
  align->add_option("--pairs-csv", ao.pairs_csv, "Write i,j,dist_emb,dist_cond");
  align->add_option("--baseline-seed", ao.baseline_seed, "Also score a random Gaussian baseline");
  align->add_option("--out", ao.out, "Report path (default stdout)");

  MineOpts mo;
  auto* mine = app.add_subcommand("mine", "Extreme pair / triple / quad mining");
  mine->add_option("--embeddings", mo.embeddings)->required()->check(CLI::ExistingFile);
  add_format(mine, mo.format);
  mine->add_option("--metric", mo.metric)->check(metric_names);
  mine->add_option("--m", mo.m, "Subset size")->check(CLI::IsMember({2, 3, 4}));
  mine->add_option("--reducer", mo.reducer)->check(CLI::IsMember({"sum", "mean", "std", "min", "max"}));
  mine->add_option("--direction", mo.direction)->check(CLI::IsMember({"min", "max"}));
  mine->add_option("--topk", mo.topk)->check(CLI::PositiveNumber);
  mine->add_option("--block", mo.block, "Pair tile size")->check(CLI::PositiveNumber);
  mine->add_option("--tile-i", mo.tiling.tile_i)->check(CLI::PositiveNumber);
  mine->add_option("--tile-j", mo.tiling.tile_j)->check(CLI::PositiveNumber);
  mine->add_option("--cols-per-batch", mo.tiling.columns_per_batch)->check(CLI::PositiveNumber);
  mine->add_option("--per-column", mo.tiling.candidates_per_column, "Candidates M per column")->check(CLI::PositiveNumber);
  mine->add_flag("--exact-merge", mo.exact_merge, "Re-mine columns that could hide frontier triples");
  mine->add_option("--verify", mo.verify, "Stochastic verification samples");
  mine->add_option("--seed", mo.seed);
  mine->add_option("--out", mo.out, "Report path (default stdout)");
  mine->add_option("--csv", mo.csv, "Entries as CSV");

  TheoremOpts to;
  auto* theorem = app.add_subcommand("theorem", "Order-preservation probabilities and validation");
  theorem->require_subcommand(1);
  auto* bound = theorem->add_subcommand("bound", "Universal lower bound");
  auto* exact = theorem->add_subcommand("exact", "Exact preservation probability");
  auto* simulate = theorem->add_subcommand("simulate", "Monte-Carlo check of the exact formula");
  auto* overlap = theorem->add_subcommand("overlap", "Top-K pair overlap vs the bound");
  for (auto* sub : {bound, exact, simulate}) {
    sub->add_option("--rho", to.rho)->required()->check(CLI::Range(0.0, 1.0));
    sub->add_option("--n", to.n, "Number of items");
    sub->add_option("--kind", to.kind)->check(CLI::IsMember({"cosine", "squared_euclidean", "sqeuclidean"}));
    sub->add_option("--out", to.out);
  }
  for (auto* sub : {bound, exact}) {
    sub->add_option("--delta,--margin", to.delta)->required();
    sub->add_option("--N", to.slice, "Slice dimension (instead of --n)");
  }
  bound->add_option("--topk", to.topk, "Also report expected overlap at this K");
  exact->add_option("--residual", to.residual)->required();
  simulate->add_option("--embeddings", to.embeddings)->check(CLI::ExistingFile);
  add_format(simulate, to.format);
  simulate->add_option("--d", to.d, "Dimension of random items");
  simulate->add_option("--triplets", to.triplets);
  simulate->add_option("--trials", to.trials)->check(CLI::PositiveNumber);
  simulate->add_option("--seed", to.seed);
  overlap->add_option("--x", to.x)->required()->check(CLI::ExistingFile);
  overlap->add_option("--y", to.y)->required()->check(CLI::ExistingFile);
  add_format(overlap, to.format);
  overlap->add_option("--metric", to.metric)->check(metric_names);
  overlap->add_option("--topk", to.topk)->required();
  overlap->add_option("--margin", to.margin, "Effective margin (default: mean frontier gap)");
  overlap->add_option("--pairs-csv", to.pairs_csv, "Top-K pair lists of both spaces");
  overlap->add_option("--out", to.out);

  SampleOpts so;
  auto* sample = app.add_subcommand("sample", "Mixed-score sampling from analytic Gaussian classes");
  sample->add_option("--class-a", so.class_a, "Inline spec 'w;mean;cov|...' or class file")->required();
  sample->add_option("--class-b", so.class_b)->required();
  auto* o_alpha = sample->add_option("--alpha", so.alpha);
  auto* o_beta = sample->add_option("--beta", so.beta);
  auto* o_lambda = sample->add_option("--lambda", so.lambda)->excludes(o_alpha)->excludes(o_beta);
  sample->add_option("--grid", so.grid, "'a0:a1:step,b0:b1:step'")->excludes(o_alpha)->excludes(o_beta)->excludes(o_lambda);
  sample->add_option("--guidance", so.guidance);
  sample->add_option("--weak-class", so.weak);
  sample->add_option("--steps", so.steps);
  sample->add_option("--sigma-min", so.sigma_min);
  sample->add_option("--sigma-max", so.sigma_max);
  sample->add_option("--rho-s", so.rho_s);
  sample->add_option("--n", so.n)->check(CLI::PositiveNumber);
  sample->add_option("--seed", so.seed);
  sample->add_option("--out", so.out, "Points CSV");
  sample->add_option("--report", so.report, "Report path (default stdout)");

  SelectOpts sel;
  auto* select = app.add_subcommand("select", "Class pair / triple selection and pairing manifest");
  select->add_option("--embeddings", sel.embeddings)->required()->check(CLI::ExistingFile);
  select->add_option("--conditions", sel.conditions)->check(CLI::ExistingFile);
  add_format(select, sel.format);
  select->add_option("--strategy", sel.strategy);
  select->add_option("--metric-embed", sel.metric_embed)->check(metric_names);
  select->add_option("--metric-cond", sel.metric_cond)->check(metric_names);
  select->add_option("--count", sel.count)->check(CLI::PositiveNumber);
  select->add_option("--samples-per-pair", sel.samples_per_pair)->check(CLI::PositiveNumber);
  select->add_option("--seed", sel.seed);
  select->add_option("--out", sel.out, "Selected tuples CSV");
  select->add_option("--manifest", sel.manifest, "Pairing manifest CSV");
  select->add_option("--report", sel.report, "Report path (default stdout)");

  GenOpts go;
  auto* gen = app.add_subcommand("genmetrics", "Fidelity / diversity / bias / coverage metrics");
  gen->add_option("--features", go.features)->required()->check(CLI::ExistingFile);
  gen->add_option("--labels", go.labels)->required()->check(CLI::ExistingFile);
  gen->add_option("--targets", go.targets)->required()->check(CLI::ExistingFile);
  gen->add_option("--target-labels", go.target_labels, "Class ids of the target rows")->check(CLI::ExistingFile);
  add_format(gen, go.format);
  gen->add_flag("--strict-coverage", go.strict);
  gen->add_option("--out", go.out);

  ConvertOpts co;
  auto* convert = app.add_subcommand("convert", "Convert between SMX1 binary and CSV");
  convert->add_option("--in", co.in)->required()->check(CLI::ExistingFile);
  convert->add_option("--out", co.out)->required();
  convert->add_option("--in-format", co.in_format)->check(CLI::IsMember({"binary", "csv"}));
  convert->add_option("--out-format", co.out_format)->check(CLI::IsMember({"binary", "csv"}));
  convert->add_option("--labels", co.labels)->check(CLI::ExistingFile);

  BenchOpts bo;
  auto* bench = app.add_subcommand("bench", "Triple-miner throughput on random data");
  bench->add_option("--n", bo.n);
  bench->add_option("--d", bo.d);
  bench->add_option("--topk", bo.topk);
  bench->add_option("--reducer", bo.reducer)->check(CLI::IsMember({"sum", "mean", "std", "min", "max"}));
  bench->add_option("--metric", bo.metric)->check(metric_names);
  bench->add_option("--isa", bo.isa)->check(CLI::IsMember({"auto", "scalar", "avx2", "both"}));
  bench->add_option("--tile-i", bo.tiling.tile_i)->check(CLI::PositiveNumber);
  bench->add_option("--tile-j", bo.tiling.tile_j)->check(CLI::PositiveNumber);
  bench->add_option("--cols-per-batch", bo.tiling.columns_per_batch)->check(CLI::PositiveNumber);
  bench->add_flag("--exact-merge", bo.exact_merge);
  bench->add_option("--seed", bo.seed);
  bench->add_option("--out", bo.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  Run run;
  run.workers = resolve_workers(g.threads);
  try {
    auto leaf = [&](CLI::App* sub, const std::string& name) {
      run.leaf = sub;
      run.name = name;
    };
    if (*align) {
      leaf(align, "align");
      run_align(run, ao, g, out);
    } else if (*mine) {
      leaf(mine, "mine");
      run_mine(run, mo, g, out);
    } else if (*bound) {
      leaf(bound, "theorem bound");
      run_bound(run, to, g, out);
    } else if (*exact) {
      leaf(exact, "theorem exact");
      run_exact(run, to, g, out);
    } else if (*simulate) {
      leaf(simulate, "theorem simulate");
      run_simulate(run, to, g, out);
    } else if (*overlap) {
      leaf(overlap, "theorem overlap");
      run_overlap(run, to, g, out);
    } else if (*sample) {
      leaf(sample, "sample");
      run_sample(run, so, g, out);
    } else if (*select) {
      leaf(select, "select");
      run_select(run, sel, g, out);
    } else if (*gen) {
      leaf(gen, "genmetrics");
      run_genmetrics(run, go, g, out);
    } else if (*convert) {
      leaf(convert, "convert");
      run_convert(run, co, g, out);
    } else if (*bench) {
      leaf(bench, "bench");
      run_bench(run, bo, g, out);
    }
  } catch (const Error& e) {
    return domain_error(err, e.code(), e.what(), e.context());
  } catch (const std::exception& e) {
    return domain_error(err, ErrorCode::invalid_argument, e.what(), run.name);
  }
  return 0;
}

}  // namespace smx::cli

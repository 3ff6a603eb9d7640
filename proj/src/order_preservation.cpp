#include "scoremix/order_preservation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "scoremix/alignment_metrics.hpp"
#include "scoremix/error.hpp"
#include "scoremix/parallel.hpp"
#include "scoremix/rng.hpp"

namespace smx {
namespace {

void require_rho(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw Error(ErrorCode::out_of_range, "rho must lie in [0, 1]", "rho=" + std::to_string(rho));
  }
}

void require_margin(double margin) {
  if (!(margin > 0.0) || !std::isfinite(margin)) {
    throw Error(ErrorCode::invalid_argument, "margin must be positive", "margin=" + std::to_string(margin));
  }
}

void require_slice(std::uint64_t slice_dim) {
  if (slice_dim < 2) {
    throw Error(ErrorCode::invalid_argument, "slice dimension N must be >= 2", "N=" + std::to_string(slice_dim));
  }
}

void require_indices(const TripletMask& mask, std::size_t n) {
  const std::size_t top = std::max({mask.i, mask.j, mask.k});
  if (top >= n) {
    throw Error(ErrorCode::out_of_range, "mask index outside the Gram",
                "max index " + std::to_string(top) + ", n=" + std::to_string(n));
  }
}

double mask_dot(const TripletMask& mask, const double* m, std::size_t n) {
  double s = 0.0;
  for (const auto& e : mask.entries) s += e.value * m[e.row * n + e.col];
  return s;
}

struct RankedPair {
  double score;
  std::uint32_t i, j;
};

std::vector<RankedPair> ranked_pairs_from_gram(const NormalizedGram& g, MaskKind kind) {
  std::vector<RankedPair> out;
  out.reserve(g.n * (g.n - 1) / 2);
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t j = i + 1; j < g.n; ++j) {
      const double s = kind == MaskKind::cosine ? -g(i, j) : (g(i, i) + g(j, j)) - 2.0 * g(i, j);
      out.push_back({s, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
    }
  }
  std::sort(out.begin(), out.end(), [](const RankedPair& a, const RankedPair& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  return out;
}

void fill_overlap(OverlapAnalysis& out, std::optional<double> margin, double rho) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> xs;
  for (const auto& e : out.top_x) xs.emplace(e.indices[0], e.indices[1]);
  out.overlap = 0;
  for (const auto& e : out.top_y) out.overlap += xs.count({e.indices[0], e.indices[1]});
  out.jaccard = static_cast<double>(out.overlap) / static_cast<double>(2 * out.top_k - out.overlap);
  out.cka = rho;
  out.margin_from_gaps = !margin.has_value();
  out.effective_margin = margin ? *margin : 0.5 * (out.mean_gap_x + out.mean_gap_y);
  if (!(out.effective_margin > 0.0)) {
    throw Error(ErrorCode::degenerate_input, "effective margin is not positive; supply one explicitly",
                "margin=" + std::to_string(out.effective_margin));
  }
  out.p_lower_bound = universal_lower_bound(std::clamp(rho, 0.0, 1.0), out.effective_margin, out.slice_dim, out.kind);
  out.expected_overlap = static_cast<double>(out.top_k) * out.p_lower_bound;
}

void require_topk(std::size_t top_k, std::uint64_t pairs) {
  if (top_k < 1 || top_k > pairs) {
    throw Error(ErrorCode::out_of_range, "top_k must be in [1, n(n-1)/2]",
                "top_k=" + std::to_string(top_k) + ", pairs=" + std::to_string(pairs));
  }
}

}  // namespace

std::string_view to_string(MaskKind kind) {
  return kind == MaskKind::cosine ? "cosine" : "squared_euclidean";
}

MaskKind parse_mask_kind(std::string_view text) {
  if (text == "cosine" || text == "cos") return MaskKind::cosine;
  if (text == "squared_euclidean" || text == "sqeuclidean" || text == "euclidean") return MaskKind::squared_euclidean;
  throw Error(ErrorCode::invalid_argument, "unknown mask kind", std::string(text));
}

TripletMask TripletMask::make(std::size_t i, std::size_t j, std::size_t k, MaskKind kind) {
  if (i == j || i == k || j == k) {
    throw Error(ErrorCode::invalid_argument, "triplet indices must be distinct",
                "(" + std::to_string(i) + ";" + std::to_string(j) + "," + std::to_string(k) + ")");
  }
  TripletMask m;
  m.i = i;
  m.j = j;
  m.k = k;
  m.kind = kind;
  if (kind == MaskKind::squared_euclidean) {
    m.entries = {{j, j, 1.0}, {k, k, -1.0}, {i, j, -1.0}, {j, i, -1.0}, {i, k, 1.0}, {k, i, 1.0}};
  } else {
    m.entries = {{i, j, 0.5}, {j, i, 0.5}, {i, k, -0.5}, {k, i, -0.5}};
  }
  return m;
}

double TripletMask::frobenius_sq() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.value * e.value;
  return s;
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double centered_margin(const TripletMask& mask, const NormalizedGram& gram) {
  require_indices(mask, gram.n);
  return mask_dot(mask, gram.values.data(), gram.n);
}

double residual_norm(const TripletMask& mask, const NormalizedGram& gram) {
  require_indices(mask, gram.n);
  const std::size_t n = gram.n;
  std::vector<double> t(n * n, 0.0);
  for (const auto& e : mask.entries) t[e.row * n + e.col] += e.value;
  double_center(t, n);
  double c = 0.0;
  for (std::size_t p = 0; p < t.size(); ++p) c += t[p] * gram.values[p];
  double s = 0.0;
  for (std::size_t p = 0; p < t.size(); ++p) {
    const double r = t[p] - c * gram.values[p];
    s += r * r;
  }
  return std::sqrt(s);
}

double exact_preservation_probability(double rho, double margin, double residual, std::uint64_t slice_dim) {
  require_rho(rho);
  require_margin(margin);
  require_slice(slice_dim);
  if (rho == 1.0) return 1.0;
  if (!(residual > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "residual norm must be positive", "residual=" + std::to_string(residual));
  }
  const double z = rho * margin * std::sqrt(static_cast<double>(slice_dim - 1)) / (residual * std::sqrt(1.0 - rho * rho));
  return std_normal_cdf(z);
}

double mask_constant(MaskKind kind, std::uint64_t slice_dim) {
  require_slice(slice_dim);
  return (kind == MaskKind::cosine ? 2.0 : 12.0) / static_cast<double>(slice_dim - 1);
}

double universal_lower_bound(double rho, double margin, std::uint64_t slice_dim, MaskKind kind) {
  require_rho(rho);
  require_margin(margin);
  const double c = mask_constant(kind, slice_dim);
  if (rho == 1.0) return 1.0;
  return std_normal_cdf(rho * margin / std::sqrt(c * (1.0 - rho)));
}

std::uint64_t slice_dimension(std::uint64_t n_items) { return n_items * (n_items - 1) / 2; }

MisalignmentModel MisalignmentModel::make(double rho, std::size_t n_items) {
  require_rho(rho);
  MisalignmentModel m;
  m.rho = rho;
  m.n_items = n_items;
  m.slice_dim = slice_dimension(n_items);
  require_slice(m.slice_dim);
  m.sigma_sq = (1.0 - rho * rho) / static_cast<double>(m.slice_dim - 1);
  return m;
}

PreservationReport preservation_report(const TripletMask& mask, const NormalizedGram& gram, double rho) {
  PreservationReport r;
  r.kind = mask.kind;
  r.margin = centered_margin(mask, gram);
  r.residual_norm = residual_norm(mask, gram);
  const std::uint64_t n_slice = slice_dimension(gram.n);
  r.exact_probability = exact_preservation_probability(rho, r.margin, r.residual_norm, n_slice);
  r.lower_bound = universal_lower_bound(rho, r.margin, n_slice, mask.kind);
  return r;
}

namespace {

// E = sigma * (P(G) - <P(G), K^> K^) for a slice-isotropic symmetric G.
double draw_residual(const NormalizedGram& gram, double sigma, Rng& rng, std::vector<double>& e) {
  const std::size_t n = gram.n;
  std::normal_distribution<double> normal(0.0, 1.0);
  e.assign(n * n, 0.0);
  const double off = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < n; ++i) {
    e[i * n + i] = normal(rng);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double z = normal(rng) * off;
      e[i * n + j] = z;
      e[j * n + i] = z;
    }
  }
  double_center(e, n);
  double c = 0.0;
  for (std::size_t p = 0; p < e.size(); ++p) c += e[p] * gram.values[p];
  double energy = 0.0;
  for (std::size_t p = 0; p < e.size(); ++p) {
    e[p] = sigma * (e[p] - c * gram.values[p]);
    energy += e[p] * e[p];
  }
  return energy;
}

}  // namespace

std::vector<TripletMask> random_positive_triplets(const NormalizedGram& gram, std::size_t count, MaskKind kind,
                                                  std::uint64_t seed) {
  if (gram.n < 3) throw Error(ErrorCode::invalid_argument, "triplets need n >= 3", "n=" + std::to_string(gram.n));
  Rng rng(derive_seed(seed, {0x747269706c6574ULL}));
  std::uniform_int_distribution<std::size_t> pick(0, gram.n - 1);
  std::vector<TripletMask> out;
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > 1000 * (count + 10)) {
      throw Error(ErrorCode::degenerate_input, "could not find triplets with nonzero margin",
                  "found " + std::to_string(out.size()) + " of " + std::to_string(count));
    }
    const std::size_t i = pick(rng), j = pick(rng), k = pick(rng);
    if (i == j || i == k || j == k) continue;
    auto mask = TripletMask::make(i, j, k, kind);
    const double margin = centered_margin(mask, gram);
    if (margin == 0.0) continue;
    out.push_back(margin > 0.0 ? std::move(mask) : TripletMask::make(i, k, j, kind));
  }
  return out;
}

NormalizedGram draw_misaligned_gram(const NormalizedGram& gram, double rho, std::uint64_t seed) {
  const auto model = MisalignmentModel::make(rho, gram.n);
  Rng rng(seed);
  std::vector<double> e;
  draw_residual(gram, std::sqrt(model.sigma_sq), rng, e);
  NormalizedGram out;
  out.n = gram.n;
  out.values.resize(e.size());
  double s = 0.0;
  for (std::size_t p = 0; p < e.size(); ++p) {
    out.values[p] = rho * gram.values[p] + e[p];
    s += out.values[p] * out.values[p];
  }
  out.frob_norm_of_source = std::sqrt(s);
  return out;
}

SimulationResult simulate_misalignment(const NormalizedGram& gram, double rho,
                                       const std::vector<TripletMask>& triplets, std::size_t trials,
                                       std::uint64_t seed, std::size_t workers) {
  if (trials < 1) throw Error(ErrorCode::invalid_argument, "trials must be >= 1");
  double self = 0.0;
  for (double v : gram.values) self += v * v;
  if (gram.n < 3 || std::abs(self - 1.0) > 1e-8) {
    throw Error(ErrorCode::degenerate_input, "Gram must be normalized with n >= 3",
                "n=" + std::to_string(gram.n) + ", ||K||^2=" + std::to_string(self));
  }
  SimulationResult out;
  out.trials = trials;
  out.model = MisalignmentModel::make(rho, gram.n);
  const std::size_t t_count = triplets.size();
  for (const auto& t : triplets) {
    out.margin.push_back(centered_margin(t, gram));
    out.residual.push_back(residual_norm(t, gram));
    const bool defined = out.margin.back() > 0.0 && (rho == 1.0 || out.residual.back() > 0.0);
    out.exact.push_back(defined ? exact_preservation_probability(rho, out.margin.back(), out.residual.back(),
                                                                 out.model.slice_dim)
                                : std::numeric_limits<double>::quiet_NaN());
  }

  const double sigma = std::sqrt(out.model.sigma_sq);
  std::vector<std::uint8_t> hits(trials * t_count, 0);
  std::vector<double> energy(trials), align(trials);
  workers = std::min(resolve_workers(workers), trials);
  std::vector<std::vector<double>> scratch(workers);
  parallel_for(trials, workers, [&](std::size_t trial, std::size_t w) {
    Rng rng(derive_seed(seed, {trial}));
    auto& e = scratch[w];
    energy[trial] = draw_residual(gram, sigma, rng, e);
    double ek = 0.0;
    for (std::size_t p = 0; p < e.size(); ++p) ek += e[p] * gram.values[p];
    align[trial] = std::abs((rho * self + ek) - rho);
    for (std::size_t t = 0; t < t_count; ++t) {
      const double delta_l = rho * out.margin[t] + mask_dot(triplets[t], e.data(), gram.n);
      hits[trial * t_count + t] = delta_l > 0.0;
    }
  });

  out.frequency.assign(t_count, 0.0);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    for (std::size_t t = 0; t < t_count; ++t) out.frequency[t] += hits[trial * t_count + t];
    out.mean_energy += energy[trial];
    out.max_alignment_error = std::max(out.max_alignment_error, align[trial]);
  }
  for (double& f : out.frequency) f /= static_cast<double>(trials);
  out.mean_energy /= static_cast<double>(trials);
  if (trials > 1) {
    double ss = 0.0;
    for (double v : energy) ss += (v - out.mean_energy) * (v - out.mean_energy);
    out.energy_stderr = std::sqrt(ss / static_cast<double>(trials - 1) / static_cast<double>(trials));
  }
  return out;
}

std::size_t gap_window(std::size_t top_k) { return std::max<std::size_t>(1, std::min<std::size_t>(top_k / 10, 1000)); }

double frontier_gap(const std::vector<double>& descending, std::size_t top_k, std::size_t window) {
  if (descending.empty()) return 0.0;
  const std::size_t lo = top_k > window ? top_k - window : 1;
  const std::size_t hi = std::min(top_k + window, descending.size());
  if (hi <= lo) return 0.0;
  return (descending[lo - 1] - descending[hi - 1]) / static_cast<double>(hi - lo);
}

OverlapAnalysis topk_overlap_analysis(const EmbeddingMatrix& x, const EmbeddingMatrix& y, DistanceMetric metric,
                                      std::size_t top_k, std::optional<double> margin, std::size_t workers) {
  if (x.rows() != y.rows()) {
    throw Error(ErrorCode::invalid_argument, "representations must cover the same items",
                std::to_string(x.rows()) + " vs " + std::to_string(y.rows()) + " rows");
  }
  const std::uint64_t pairs = slice_dimension(x.rows());
  require_topk(top_k, pairs);
  OverlapAnalysis out;
  out.top_k = top_k;
  out.slice_dim = pairs;
  out.kind = metric == DistanceMetric::cosine ? MaskKind::cosine : MaskKind::squared_euclidean;
  out.gap_window = gap_window(top_k);
  const std::size_t depth = static_cast<std::size_t>(std::min<std::uint64_t>(pairs, top_k + out.gap_window));

  auto side = [&](const EmbeddingMatrix& e, std::vector<MpletEntry>& top, double& gap) {
    auto report = mine_pairs(e, metric, Direction::max, depth, 512, workers, Reducer::mean);
    std::vector<double> scores;
    scores.reserve(report.entries.size());
    for (const auto& en : report.entries) scores.push_back(en.score);
    gap = frontier_gap(scores, top_k, out.gap_window);
    report.entries.resize(top_k);
    top = std::move(report.entries);
  };
  side(x, out.top_x, out.mean_gap_x);
  side(y, out.top_y, out.mean_gap_y);

  const double rho = metric == DistanceMetric::cosine ? linear_cka(row_normalize(x), row_normalize(y)).value
                                                      : linear_cka(x, y).value;
  fill_overlap(out, margin, rho);
  return out;
}

OverlapAnalysis topk_overlap_analysis(const NormalizedGram& k, const NormalizedGram& l, MaskKind kind,
                                      std::size_t top_k, std::optional<double> margin) {
  if (k.n != l.n) {
    throw Error(ErrorCode::invalid_argument, "Gram sizes differ", std::to_string(k.n) + " vs " + std::to_string(l.n));
  }
  const std::uint64_t pairs = slice_dimension(k.n);
  require_topk(top_k, pairs);
  OverlapAnalysis out;
  out.top_k = top_k;
  out.slice_dim = pairs;
  out.kind = kind;
  out.gap_window = gap_window(top_k);

  auto side = [&](const NormalizedGram& g, std::vector<MpletEntry>& top, double& gap) {
    const auto ranked = ranked_pairs_from_gram(g, kind);
    std::vector<double> scores;
    scores.reserve(ranked.size());
    for (const auto& r : ranked) scores.push_back(r.score);
    gap = frontier_gap(scores, top_k, out.gap_window);
    for (std::size_t r = 0; r < top_k; ++r) top.push_back({{ranked[r].i, ranked[r].j}, ranked[r].score});
  };
  side(k, out.top_x, out.mean_gap_x);
  side(l, out.top_y, out.mean_gap_y);
  fill_overlap(out, margin, gram_alignment(k, l));
  return out;
}

}  // namespace smx

#include "report_io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "scoremix/error.hpp"

namespace smx::cli {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open input", path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string format_double(double v) {
  std::array<char, 64> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

json to_json(const AlignmentScore& s) {
  json j{{"metric", s.metric == AlignmentMetric::cka ? "cka" : "cknna"}, {"value", s.value}, {"n_items", s.n_items}};
  if (s.tau) j["tau"] = *s.tau;
  return j;
}

json to_json(const MinerStats& s) {
  return {{"isa", s.isa},
          {"workers", s.workers},
          {"tiles", s.tiles},
          {"columns", s.columns},
          {"evaluations", s.evaluations},
          {"seconds", s.seconds},
          {"evaluations_per_second", s.evaluations_per_second},
          {"tile_seconds", {{"min", s.tile_seconds_min}, {"mean", s.tile_seconds_mean}, {"max", s.tile_seconds_max}}},
          {"saturated_columns", s.saturated_columns},
          {"remined_columns", s.remined_columns}};
}

json to_json(const MpletReport& r) {
  json entries = json::array();
  for (std::size_t k = 0; k < r.entries.size(); ++k) {
    entries.push_back({{"rank", k + 1}, {"indices", r.entries[k].indices}, {"score", r.entries[k].score}});
  }
  return {{"m", r.m},
          {"direction", to_string(r.direction)},
          {"metric", to_string(r.metric)},
          {"reducer", to_string(r.reducer)},
          {"top_k", r.top_k},
          {"exactness", to_string(r.exactness)},
          {"tiling",
           {{"tile_i", r.tiling.tile_i},
            {"tile_j", r.tiling.tile_j},
            {"columns_per_batch", r.tiling.columns_per_batch},
            {"candidates_per_column", r.tiling.candidates_per_column}}},
          {"entries", entries}};
}

json to_json(const VerificationReport& v) {
  return {{"samples", v.samples},
          {"top1_violations", v.top1_violations},
          {"exceedances_total", v.exceedances_total},
          {"exceedances_known", v.exceedances_known},
          {"exceedances_new", v.exceedances_new},
          {"worst_exceedance_margin", v.worst_exceedance_margin}};
}

json to_json(const PreservationReport& p) {
  return {{"kind", to_string(p.kind)},
          {"margin", p.margin},
          {"residual_norm", p.residual_norm},
          {"exact_probability", p.exact_probability},
          {"lower_bound", p.lower_bound}};
}

json to_json(const SimulationResult& s) {
  json triplets = json::array();
  for (std::size_t t = 0; t < s.frequency.size(); ++t) {
    const double p = s.exact[t];
    json row{{"margin", s.margin[t]}, {"residual_norm", s.residual[t]}, {"frequency", s.frequency[t]}};
    if (std::isfinite(p)) {
      row["exact_probability"] = p;
      row["three_sigma"] = 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(s.trials));
    }
    triplets.push_back(row);
  }
  return {{"trials", s.trials},
          {"rho", s.model.rho},
          {"n_items", s.model.n_items},
          {"slice_dim", s.model.slice_dim},
          {"sigma_sq", s.model.sigma_sq},
          {"mean_energy", s.mean_energy},
          {"energy_stderr", s.energy_stderr},
          {"expected_energy", 1.0 - s.model.rho * s.model.rho},
          {"max_alignment_error", s.max_alignment_error},
          {"triplets", triplets}};
}

json to_json(const OverlapAnalysis& o, bool include_pairs) {
  json j{{"cka", o.cka},
         {"top_k", o.top_k},
         {"overlap", o.overlap},
         {"jaccard", o.jaccard},
         {"mean_gap_x", o.mean_gap_x},
         {"mean_gap_y", o.mean_gap_y},
         {"gap_window", o.gap_window},
         {"effective_margin", o.effective_margin},
         {"margin_source", o.margin_from_gaps ? "frontier_gaps" : "flag"},
         {"kind", to_string(o.kind)},
         {"slice_dim", o.slice_dim},
         {"p_lower_bound", o.p_lower_bound},
         {"expected_overlap", o.expected_overlap}};
  if (include_pairs) {
    auto pairs = [](const std::vector<MpletEntry>& v) {
      json a = json::array();
      for (const auto& e : v) a.push_back({{"indices", e.indices}, {"score", e.score}});
      return a;
    };
    j["top_x"] = pairs(o.top_x);
    j["top_y"] = pairs(o.top_y);
  }
  return j;
}

json to_json(const SelectionResult& r) {
  json tuples = json::array();
  for (std::size_t t = 0; t < r.tuples.size(); ++t) tuples.push_back({{"indices", r.tuples[t]}, {"score", r.scores[t]}});
  json j{{"strategy", to_string(r.strategy)}, {"count", r.tuples.size()}, {"mean_embed_distance", r.mean_embed_distance},
         {"selected", tuples}};
  j["mean_cond_distance"] = r.mean_cond_distance ? json(*r.mean_cond_distance) : json(nullptr);
  return j;
}

json to_json(const EvalMetrics& m) {
  auto summary = [](const std::vector<double>& v) {
    const auto s = mean_std(v);
    return json{{"mean", s.mean}, {"std", s.std}, {"per_class", v}};
  };
  std::vector<int> covered(m.covered.begin(), m.covered.end());
  return {{"classes", m.class_ids},
          {"counts", m.counts},
          {"m_align", summary(m.m_align)},
          {"m_ics", summary(m.m_ics)},
          {"m_shift", summary(m.m_shift)},
          {"m_coverage", m.m_coverage},
          {"covered", covered},
          {"strict_coverage", m.strict_coverage}};
}

json to_json(const NoiseSchedule& s) {
  return {{"sigma_min", s.sigma_min}, {"sigma_max", s.sigma_max}, {"steps", s.steps}, {"rho_s", s.rho_s}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot open output", path.string());
  out << text;
  if (!out) throw Error(ErrorCode::io_error, "write failed", path.string());
}

std::string mplet_csv(const MpletReport& r) {
  std::ostringstream os;
  os << "rank";
  for (std::size_t t = 0; t < r.m; ++t) os << ",i" << t;
  os << ",score\n";
  for (std::size_t k = 0; k < r.entries.size(); ++k) {
    os << k + 1;
    for (auto v : r.entries[k].indices) os << ',' << v;
    os << ',' << format_double(r.entries[k].score) << '\n';
  }
  return os.str();
}

std::string pair_lists_csv(const DistancePairLists& lists) {
  std::ostringstream os;
  os << "i,j,dist_emb,dist_cond\n";
  for (std::size_t p = 0; p < lists.e.size(); ++p) {
    os << lists.pair_index[p].first << ',' << lists.pair_index[p].second << ',' << format_double(lists.e[p]) << ','
       << format_double(lists.c[p]) << '\n';
  }
  return os.str();
}

std::string overlap_pairs_csv(const OverlapAnalysis& o) {
  std::ostringstream os;
  os << "space,rank,i,j,score\n";
  for (auto [name, list] : {std::pair{"x", &o.top_x}, std::pair{"y", &o.top_y}}) {
    for (std::size_t k = 0; k < list->size(); ++k) {
      const auto& e = (*list)[k];
      os << name << ',' << k + 1 << ',' << e.indices[0] << ',' << e.indices[1] << ',' << format_double(e.score) << '\n';
    }
  }
  return os.str();
}

std::string selection_csv(const SelectionResult& r) {
  std::ostringstream os;
  const std::size_t m = r.tuples.empty() ? 2 : r.tuples.front().size();
  os << "rank";
  for (std::size_t t = 0; t < m; ++t) os << ",i" << t;
  os << ",score\n";
  for (std::size_t k = 0; k < r.tuples.size(); ++k) {
    os << k + 1;
    for (auto v : r.tuples[k]) os << ',' << v;
    os << ',' << format_double(r.scores[k]) << '\n';
  }
  return os.str();
}

std::string manifest_csv(const std::vector<ManifestRow>& rows) {
  std::ostringstream os;
  os << "tuple_index,indices,sample_index,seed\n";
  for (const auto& r : rows) {
    os << r.tuple_index << ',';
    for (std::size_t t = 0; t < r.tuple.size(); ++t) os << (t ? ";" : "") << r.tuple[t];
    os << ',' << r.sample_index << ',' << r.seed << '\n';
  }
  return os.str();
}

}  // namespace smx::cli

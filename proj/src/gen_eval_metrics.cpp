#include "scoremix/gen_eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "scoremix/error.hpp"

namespace smx {

double snr_weight(double sigma, double k) {
  if (!(k > 0.0)) throw Error(ErrorCode::invalid_argument, "k must be positive", "k=" + std::to_string(k));
  return std::exp(-k * sigma * sigma);
}

double ramp_weight(std::int64_t n_cur, std::int64_t n_start, std::int64_t n_ramp) {
  if (n_ramp < 1) throw Error(ErrorCode::invalid_argument, "n_ramp must be >= 1", "n_ramp=" + std::to_string(n_ramp));
  const double r = static_cast<double>(n_cur - n_start) / static_cast<double>(n_ramp);
  return std::min(std::max(0.0, r), 1.0);
}

double edm2_weight(double sigma, double sigma_data) {
  if (!(sigma > 0.0) || !(sigma_data > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "sigma and sigma_data must be positive",
                "sigma=" + std::to_string(sigma) + " sigma_data=" + std::to_string(sigma_data));
  }
  const double p = sigma * sigma_data;
  return (sigma * sigma + sigma_data * sigma_data) / (p * p);
}

double alignment_loss(std::span<const double> f, std::span<const double> c) {
  if (f.size() != c.size()) {
    throw Error(ErrorCode::invalid_argument, "vector dimensions differ",
                std::to_string(f.size()) + " vs " + std::to_string(c.size()));
  }
  const double nf = norm2(f);
  const double nc = norm2(c);
  if (!(nf > 0.0) || !(nc > 0.0)) throw Error(ErrorCode::degenerate_input, "zero vector in alignment loss");
  return std::clamp(1.0 - dot(f, c) / (nf * nc), 0.0, 2.0);
}

double total_loss_combine(double l_diff, double l_align, const LossWeights& w, double sigma, std::int64_t n_cur) {
  return l_diff + w.lambda_align * ramp_weight(n_cur, w.n_start, w.n_ramp) * snr_weight(sigma, w.k_snr) * l_align;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(values.size()));
  return out;
}

EvalMetrics eval_metrics(const ClassFeatureSet& set, bool strict_coverage) {
  const ClassCenters gen = class_centers(set.features, set.labels);
  const EmbeddingMatrix unit = row_normalize(set.features);
  const EmbeddingMatrix targets = row_normalize(set.targets);
  if (targets.cols() != unit.cols()) {
    throw Error(ErrorCode::invalid_argument, "targets and features differ in dimension",
                std::to_string(targets.cols()) + " vs " + std::to_string(unit.cols()));
  }
  const std::size_t classes = gen.class_ids.size();

  // target row of each evaluated class
  std::vector<std::size_t> target_row(classes);
  if (set.targets.has_labels()) {
    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t r = 0; r < set.targets.rows(); ++r) by_id.emplace(set.targets.labels()[r], r);
    for (std::size_t c = 0; c < classes; ++c) {
      auto it = by_id.find(gen.class_ids[c]);
      if (it == by_id.end()) throw Error(ErrorCode::invalid_argument, "class has no target center", gen.class_ids[c]);
      target_row[c] = it->second;
    }
  } else {
    if (set.targets.rows() != classes) {
      throw Error(ErrorCode::invalid_argument, "unlabeled targets need one row per class",
                  std::to_string(set.targets.rows()) + " targets for " + std::to_string(classes) + " classes");
    }
    for (std::size_t c = 0; c < classes; ++c) target_row[c] = c;
  }

  EvalMetrics out;
  out.class_ids = gen.class_ids;
  out.counts = gen.counts;
  out.strict_coverage = strict_coverage;
  out.m_align.assign(classes, 0.0);
  out.m_ics.assign(classes, 0.0);
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t c = 0; c < classes; ++c) slot.emplace(gen.class_ids[c], c);
  for (std::size_t i = 0; i < unit.rows(); ++i) {
    const std::size_t c = slot.at(set.labels[i]);
    out.m_align[c] += 1.0 - dot(unit.row(i), targets.row(target_row[c]));
    out.m_ics[c] += dot(unit.row(i), gen.centers.row(c));
  }
  std::size_t hits = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    out.m_align[c] /= static_cast<double>(gen.counts[c]);
    out.m_ics[c] /= static_cast<double>(gen.counts[c]);
    out.m_shift.push_back(1.0 - dot(gen.centers.row(c), targets.row(target_row[c])));

    std::size_t best = 0;
    double best_sim = -std::numeric_limits<double>::infinity();
    auto consider = [&](std::size_t row) {
      const double s = dot(gen.centers.row(c), targets.row(row));
      if (s > best_sim) {
        best_sim = s;
        best = row;
      }
    };
    if (strict_coverage) {
      for (std::size_t r = 0; r < targets.rows(); ++r) consider(r);
    } else {
      for (std::size_t o = 0; o < classes; ++o) consider(target_row[o]);
    }
    out.covered.push_back(best == target_row[c]);
    hits += out.covered.back();
  }
  out.m_coverage = static_cast<double>(hits) / static_cast<double>(classes);
  return out;
}

}  // namespace smx

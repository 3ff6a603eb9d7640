#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scoremix/tensor_core.hpp"

namespace smx {

struct LossWeights {
  double k_snr = 1.0;
  std::int64_t n_start = 0;
  std::int64_t n_ramp = 1;
  double lambda_align = 1.0;
  double sigma_data = 0.5;
};

/// exp(-k sigma^2).
double snr_weight(double sigma, double k);
/// min(max(0, (n_cur - n_start) / n_ramp), 1).
double ramp_weight(std::int64_t n_cur, std::int64_t n_start, std::int64_t n_ramp);
/// (sigma^2 + sigma_data^2) / (sigma sigma_data)^2.
double edm2_weight(double sigma, double sigma_data);
/// 1 - cos(f, c).
double alignment_loss(std::span<const double> f, std::span<const double> c);
/// l_diff + lambda * w_ramp(n_cur) * w_snr(sigma) * l_align.
double total_loss_combine(double l_diff, double l_align, const LossWeights& weights, double sigma, std::int64_t n_cur);

/// Generated features with their class labels, and target centers. Targets
/// with labels are matched to classes by id; unlabeled targets are matched
/// by row to classes in first-appearance order.
struct ClassFeatureSet {
  EmbeddingMatrix features;
  std::vector<std::string> labels;
  EmbeddingMatrix targets;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

MeanStd mean_std(std::span<const double> values);

struct EvalMetrics {
  std::vector<std::string> class_ids;
  std::vector<std::size_t> counts;
  std::vector<double> m_align;
  std::vector<double> m_ics;
  std::vector<double> m_shift;
  std::vector<bool> covered;
  double m_coverage = 0.0;
  bool strict_coverage = false;
};

/// Strict coverage takes the nearest target over every target row instead of
/// only the evaluated classes.
EvalMetrics eval_metrics(const ClassFeatureSet& set, bool strict_coverage = false);

}  // namespace smx

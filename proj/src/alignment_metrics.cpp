#include "scoremix/alignment_metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "scoremix/error.hpp"
#include "scoremix/rng.hpp"

namespace smx {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_same_rows(const EmbeddingMatrix& x, const EmbeddingMatrix& y) {
  if (x.rows() != y.rows()) {
    throw Error(ErrorCode::invalid_argument, "representations must cover the same items",
                std::to_string(x.rows()) + " vs " + std::to_string(y.rows()) + " rows");
  }
}

RowMajor column_centered(const EmbeddingMatrix& x) {
  RowMajor m = Eigen::Map<const RowMajor>(x.data().data(), static_cast<Eigen::Index>(x.rows()),
                                          static_cast<Eigen::Index>(x.cols()));
  m.rowwise() -= m.colwise().mean();
  return m;
}

double frobenius_cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (!(aa > 0.0) || !(bb > 0.0)) {
    throw Error(ErrorCode::degenerate_input, "centered kernel is zero", "n=" + std::to_string(a.size()));
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

}  // namespace

double gram_alignment(const NormalizedGram& k, const NormalizedGram& l) {
  if (k.n != l.n) {
    throw Error(ErrorCode::invalid_argument, "Gram sizes differ",
                std::to_string(k.n) + " vs " + std::to_string(l.n));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < k.values.size(); ++i) s += k.values[i] * l.values[i];
  return s;
}

AlignmentScore linear_cka(const EmbeddingMatrix& x, const EmbeddingMatrix& y, CkaRoute route) {
  require_same_rows(x, y);
  AlignmentScore score;
  score.metric = AlignmentMetric::cka;
  score.n_items = x.rows();
  if (route == CkaRoute::gram) {
    score.value = gram_alignment(centered_normalized_gram(x), centered_normalized_gram(y));
    return score;
  }
  const RowMajor xc = column_centered(x);
  const RowMajor yc = column_centered(y);
  const double xx = (xc.transpose() * xc).norm();
  const double yy = (yc.transpose() * yc).norm();
  if (!(xx > 0.0) || !(yy > 0.0)) {
    throw Error(ErrorCode::degenerate_input, "centered Gram is zero (all rows identical)",
                "n=" + std::to_string(x.rows()));
  }
  score.value = (xc.transpose() * yc).squaredNorm() / (xx * yy);
  return score;
}

std::vector<double> soft_neighbor_kernel(const EmbeddingMatrix& x, double tau) {
  const std::size_t n = x.rows();
  const EmbeddingMatrix unit = row_normalize(x);
  std::vector<double> a(n * n, 0.0);
  std::vector<double> logits(n);
  for (std::size_t i = 0; i < n; ++i) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      logits[k] = dot(unit.row(i), unit.row(k)) / tau;
      peak = std::max(peak, logits[k]);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      logits[k] = std::exp(logits[k] - peak);
      total += logits[k];
    }
    for (std::size_t k = 0; k < n; ++k) a[i * n + k] = k == i ? 0.0 : logits[k] / total;
  }
  return a;
}

AlignmentScore cknna(const EmbeddingMatrix& x, const EmbeddingMatrix& y, double tau) {
  require_same_rows(x, y);
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorCode::invalid_argument, "tau must be positive", "tau=" + std::to_string(tau));
  }
  if (x.rows() < 3) {
    throw Error(ErrorCode::invalid_argument, "CKNNA needs at least 3 items", "n=" + std::to_string(x.rows()));
  }
  const std::size_t n = x.rows();
  std::vector<double> ax = soft_neighbor_kernel(x, tau);
  std::vector<double> ay = soft_neighbor_kernel(y, tau);
  double_center(ax, n);
  double_center(ay, n);
  AlignmentScore score;
  score.metric = AlignmentMetric::cknna;
  score.tau = tau;
  score.n_items = n;
  score.value = frobenius_cosine(ax, ay);
  return score;
}

DistancePairLists distance_correlation_lists(const EmbeddingMatrix& e, const EmbeddingMatrix& c,
                                             DistanceMetric metric_e, DistanceMetric metric_c) {
  require_same_rows(e, c);
  const std::size_t l = e.rows();
  if (l < 2) throw Error(ErrorCode::invalid_argument, "need at least 2 items", "l=" + std::to_string(l));
  const DistanceGeometry ge(e, metric_e);
  const DistanceGeometry gc(c, metric_c);
  DistancePairLists out;
  const std::size_t pairs = l * (l - 1) / 2;
  out.e.resize(pairs);
  out.c.resize(pairs);
  out.pair_index.resize(pairs);
  std::size_t pos = 0;
  for (std::size_t i = 0; i + 1 < l; ++i) {
    const IndexRange row{i, i + 1};
    const IndexRange cols{i + 1, l};
    ge.block(row, cols, out.e.data() + pos, cols.size());
    gc.block(row, cols, out.c.data() + pos, cols.size());
    for (std::size_t j = i + 1; j < l; ++j) {
      out.pair_index[pos + (j - i - 1)] = {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)};
    }
    pos += cols.size();
  }
  return out;
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw Error(ErrorCode::invalid_argument, "correlation needs two aligned lists of length >= 2",
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) {
    throw Error(ErrorCode::degenerate_input, "zero variance in correlation input",
                saa > 0.0 ? "second list" : "first list");
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> fractional_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

CorrelationStats correlation_stats(const DistancePairLists& lists) {
  CorrelationStats s;
  s.pearson = pearson_correlation(lists.e, lists.c);
  const auto re = fractional_ranks(lists.e);
  const auto rc = fractional_ranks(lists.c);
  s.spearman = pearson_correlation(re, rc);
  return s;
}

EmbeddingMatrix random_baseline(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x52616e644eULL}));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n * d);
  for (double& x : v) x = normal(rng);
  return EmbeddingMatrix(n, d, std::move(v));
}

}  // namespace smx

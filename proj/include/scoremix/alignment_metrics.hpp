#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "scoremix/tensor_core.hpp"

namespace smx {

enum class AlignmentMetric { cka, cknna };

struct AlignmentScore {
  double value = 0.0;
  AlignmentMetric metric = AlignmentMetric::cka;
  std::optional<double> tau;  // CKNNA only
  std::size_t n_items = 0;
};

/// Default CKNNA temperature used by the CLI when --tau is not given.
inline constexpr double kDefaultCknnaTau = 0.07;

enum class CkaRoute {
  gram,      // <K^, L^>_F on materialized n x n centered Grams
  features,  // ||Xc^T Yc||_F^2 / (||Xc^T Xc||_F ||Yc^T Yc||_F), O(n d^2)
};

/// Linear CKA between two representations of the same n items.
AlignmentScore linear_cka(const EmbeddingMatrix& x, const EmbeddingMatrix& y,
                          CkaRoute route = CkaRoute::features);
double gram_alignment(const NormalizedGram& k, const NormalizedGram& l);

/// Soft-neighbour kernel alignment: row-softmax of unit-row cosine
/// similarities at temperature tau (zero diagonal), double-centered, then
/// compared by Frobenius cosine.
AlignmentScore cknna(const EmbeddingMatrix& x, const EmbeddingMatrix& y, double tau);

/// The soft-neighbour kernel A_X itself (row-major n x n), exposed for tests.
std::vector<double> soft_neighbor_kernel(const EmbeddingMatrix& x, double tau);

struct DistancePairLists {
  std::vector<double> e;
  std::vector<double> c;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pair_index;
};

/// Pairwise distances in both spaces for every i < j, in lexicographic order.
DistancePairLists distance_correlation_lists(const EmbeddingMatrix& e, const EmbeddingMatrix& c,
                                             DistanceMetric metric_e, DistanceMetric metric_c);

struct CorrelationStats {
  double pearson = 0.0;
  double spearman = 0.0;
};

CorrelationStats correlation_stats(const DistancePairLists& lists);
double pearson_correlation(std::span<const double> a, std::span<const double> b);
/// 1-based ranks; ties share their average rank.
std::vector<double> fractional_ranks(std::span<const double> values);

/// n x d i.i.d. standard normal entries, reproducible for a seed.
EmbeddingMatrix random_baseline(std::size_t n, std::size_t d, std::uint64_t seed);

}  // namespace smx

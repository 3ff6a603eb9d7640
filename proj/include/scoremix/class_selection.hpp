#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "scoremix/mplet_miner.hpp"
#include "scoremix/tensor_core.hpp"

namespace smx {

enum class Strategy {
  random,
  close_embed,
  dist_embed,
  close_cond,
  dist_cond,
  combined_top,
  combined_worst,
  triples_sum_max,
  triples_sum_min,
};

std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view text);
bool needs_conditions(Strategy strategy);

struct SelectionSpec {
  Strategy strategy = Strategy::random;
  DistanceMetric metric_embed = DistanceMetric::cosine;
  DistanceMetric metric_cond = DistanceMetric::cosine;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
};

struct SelectionResult {
  Strategy strategy = Strategy::random;
  std::vector<std::vector<std::uint32_t>> tuples;  // each sorted ascending
  std::vector<double> scores;
  double mean_embed_distance = 0.0;
  std::optional<double> mean_cond_distance;
};

/// Pair or triple selection. `conditions` is required by the condition-space
/// and combined strategies and, when given, adds the condition-space mean.
SelectionResult select_classes(const EmbeddingMatrix& embed, const EmbeddingMatrix* conditions,
                               const SelectionSpec& spec);

SelectionResult select_pairs(const EmbeddingMatrix& embed, const EmbeddingMatrix* conditions,
                             const SelectionSpec& spec);

/// Rank-sum selection: r_c ranks pairs by ascending condition distance, r_e
/// by descending embedding distance (1-based, ties by pair order); "top"
/// keeps the smallest r_c + r_e, "worst" the largest.
SelectionResult select_combined(const EmbeddingMatrix& embed, const EmbeddingMatrix& conditions,
                                DistanceMetric metric_embed, DistanceMetric metric_cond, std::size_t count,
                                bool top, std::size_t workers = 0);

/// Sum-reducer cosine triples from the miner.
SelectionResult select_triples(const EmbeddingMatrix& embed, Direction direction, std::size_t count,
                               std::size_t workers = 0);

struct ManifestRow {
  std::size_t tuple_index = 0;
  std::vector<std::uint32_t> tuple;
  std::size_t sample_index = 0;
  std::uint64_t seed = 0;
};

/// samples_per_pair rows per selected tuple, seeds derived from
/// (seed, tuple_index, sample_index).
std::vector<ManifestRow> pairing_manifest(const SelectionResult& result, std::size_t samples_per_pair,
                                          std::uint64_t seed);

}  // namespace smx

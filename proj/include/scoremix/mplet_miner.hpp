#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scoremix/tensor_core.hpp"
#include "scoremix/types.hpp"

namespace smx {

enum class Exactness { exact, column_exact, greedy };
std::string_view to_string(Exactness exactness);

struct Tiling {
  std::size_t tile_i = 512;
  std::size_t tile_j = 512;
  std::size_t columns_per_batch = 4096;
  std::size_t candidates_per_column = 1;  // M
};

struct MpletEntry {
  std::vector<std::uint32_t> indices;  // sorted ascending
  double score = 0.0;
};

/// Timing and work counters of one mining run.
struct MinerStats {
  std::string isa;
  std::size_t workers = 0;
  std::size_t tiles = 0;
  std::size_t columns = 0;
  std::uint64_t evaluations = 0;
  double seconds = 0.0;
  double tile_seconds_min = 0.0;
  double tile_seconds_mean = 0.0;
  double tile_seconds_max = 0.0;
  double evaluations_per_second = 0.0;
  std::size_t saturated_columns = 0;
  std::size_t remined_columns = 0;
};

/// Ranked top-K m-plets. Entries are sorted best first; equal scores are
/// ordered lexicographically by index tuple, and no index set repeats.
struct MpletReport {
  std::size_t m = 2;
  Direction direction = Direction::max;
  DistanceMetric metric = DistanceMetric::cosine;
  Reducer reducer = Reducer::sum;
  std::size_t top_k = 0;
  std::vector<MpletEntry> entries;
  Exactness exactness = Exactness::exact;
  Tiling tiling;
  MinerStats stats;
};

/// True when (score_a, a) ranks strictly before (score_b, b).
bool ranks_before(double score_a, std::span<const std::uint32_t> a, double score_b,
                  std::span<const std::uint32_t> b, Direction direction);

/// Reduces the C(m,2) pairwise distances of one m-plet. Values are summed in
/// ascending order so the result is independent of their input order.
double reduce_scores(std::span<const double> distances, Reducer reducer);

/// Score of one index set, built from DistanceGeometry::distance.
double score_mplet(const DistanceGeometry& geometry, std::span<const std::uint32_t> indices, Reducer reducer);

/// Exact top-K pairs over all i < j, evaluated in block x block tiles.
MpletReport mine_pairs(const EmbeddingMatrix& e, DistanceMetric metric, Direction direction,
                       std::size_t top_k, std::size_t block = 512, std::size_t workers = 0,
                       Reducer reducer = Reducer::mean);

struct TripleOptions {
  Tiling tiling;
  bool exact_merge = false;
  std::size_t workers = 0;  // 0 = SMX_THREADS / hardware
};

/// Top-K triples via per-column exact reductions: every pair column (i, j)
/// contributes its best M completions k over all k not in {i, j}.
/// The report is marked exact when no column could hide a better triple
/// behind its M-th candidate; exact_merge re-mines such columns until it is.
MpletReport mine_triples(const EmbeddingMatrix& e, DistanceMetric metric, Reducer reducer,
                         Direction direction, std::size_t top_k, const TripleOptions& options = {});

/// Greedy m=4: each triple grows by its best fourth index.
MpletReport expand_quads(const MpletReport& triples, const EmbeddingMatrix& e, DistanceMetric metric,
                         Reducer reducer, Direction direction);

struct VerificationReport {
  std::size_t samples = 0;
  std::size_t top1_violations = 0;
  std::size_t exceedances_total = 0;
  std::size_t exceedances_known = 0;
  std::size_t exceedances_new = 0;
  double worst_exceedance_margin = 0.0;
};

/// Scores `samples` uniformly random m-plets and counts those ranking ahead
/// of the report's rank-1 entry or its K-th entry.
VerificationReport verify_stochastic(const EmbeddingMatrix& e, const MpletReport& report,
                                     std::size_t samples, std::uint64_t seed);

}  // namespace smx

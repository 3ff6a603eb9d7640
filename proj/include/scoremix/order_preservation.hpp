#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "scoremix/mplet_miner.hpp"
#include "scoremix/tensor_core.hpp"

namespace smx {

enum class MaskKind { squared_euclidean, cosine };
std::string_view to_string(MaskKind kind);
MaskKind parse_mask_kind(std::string_view text);

struct MaskEntry {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Sparse symmetric mask T with <T, K> equal to a triplet margin on K.
///   squared_euclidean: d^2(i,j) - d^2(i,k)   (||T||_F^2 = 6)
///   cosine:            M_ij - M_ik            (||T||_F^2 = 1)
struct TripletMask {
  std::size_t i = 0, j = 0, k = 0;
  MaskKind kind = MaskKind::squared_euclidean;
  std::vector<MaskEntry> entries;

  static TripletMask make(std::size_t i, std::size_t j, std::size_t k, MaskKind kind);
  double frobenius_sq() const;
};

/// Phi(z), the standard normal CDF.
double std_normal_cdf(double z);

/// <T, K^>; the mask does not need centering because K^ already is.
double centered_margin(const TripletMask& mask, const NormalizedGram& gram);

/// ||HTH - <HTH, K^> K^||_F.
double residual_norm(const TripletMask& mask, const NormalizedGram& gram);

/// Phi(rho * margin * sqrt(N-1) / (residual * sqrt(1 - rho^2))); rho = 1 gives 1.
double exact_preservation_probability(double rho, double margin, double residual, std::uint64_t slice_dim);

/// 12/(N-1) for squared-Euclidean masks, 2/(N-1) for cosine masks.
double mask_constant(MaskKind kind, std::uint64_t slice_dim);

/// Phi(rho * margin / sqrt(c_mask * (1 - rho))); rho = 1 gives 1.
double universal_lower_bound(double rho, double margin, std::uint64_t slice_dim, MaskKind kind);

/// N = n(n-1)/2, the dimension of the centered symmetric slice.
std::uint64_t slice_dimension(std::uint64_t n_items);

struct MisalignmentModel {
  double rho = 0.0;
  std::size_t n_items = 0;
  std::uint64_t slice_dim = 0;
  double sigma_sq = 0.0;

  static MisalignmentModel make(double rho, std::size_t n_items);
};

struct PreservationReport {
  double exact_probability = 0.0;
  double lower_bound = 0.0;
  double margin = 0.0;
  double residual_norm = 0.0;
  MaskKind kind = MaskKind::squared_euclidean;
};

PreservationReport preservation_report(const TripletMask& mask, const NormalizedGram& gram, double rho);

struct SimulationResult {
  std::size_t trials = 0;
  MisalignmentModel model;
  std::vector<double> frequency;   // per triplet, fraction of trials with Delta_L > 0
  std::vector<double> margin;      // Delta_K per triplet
  std::vector<double> residual;    // ||Pi_perp T_c|| per triplet
  std::vector<double> exact;       // exact probability per triplet (NaN when undefined)
  double mean_energy = 0.0;        // mean ||E||_F^2
  double energy_stderr = 0.0;
  double max_alignment_error = 0.0;  // max |<L^, K^> - rho|
};

/// Monte-Carlo draws of L^ = rho K^ + E with E isotropic on the slice
/// orthogonal to K^. Trial t uses its own stream derived from (seed, t).
SimulationResult simulate_misalignment(const NormalizedGram& gram, double rho,
                                       const std::vector<TripletMask>& triplets, std::size_t trials,
                                       std::uint64_t seed, std::size_t workers = 0);

/// `count` random triplets (i; j, k) with strictly positive margin on the
/// Gram, j and k swapped where needed. Deterministic for a seed.
std::vector<TripletMask> random_positive_triplets(const NormalizedGram& gram, std::size_t count, MaskKind kind,
                                                  std::uint64_t seed);

/// One draw of L^ (row-major n x n), as used by the simulator.
NormalizedGram draw_misaligned_gram(const NormalizedGram& gram, double rho, std::uint64_t seed);

struct OverlapAnalysis {
  double cka = 0.0;
  std::size_t top_k = 0;
  std::size_t overlap = 0;
  double jaccard = 0.0;
  double mean_gap_x = 0.0;
  double mean_gap_y = 0.0;
  std::size_t gap_window = 0;
  double effective_margin = 0.0;
  bool margin_from_gaps = true;
  MaskKind kind = MaskKind::cosine;
  std::uint64_t slice_dim = 0;
  double p_lower_bound = 0.0;
  double expected_overlap = 0.0;
  std::vector<MpletEntry> top_x;
  std::vector<MpletEntry> top_y;
};

/// Half-width of the frontier window used for the gap estimate.
std::size_t gap_window(std::size_t top_k);

/// Mean adjacent gap of a descending score list around rank K:
/// (s[K-w] - s[K+w]) / (2w) with 1-based ranks clamped to the list.
double frontier_gap(const std::vector<double>& descending, std::size_t top_k, std::size_t window);

/// Top-K most distant pairs in both spaces, their overlap, and the overlap
/// expected from the universal lower bound at the effective margin.
OverlapAnalysis topk_overlap_analysis(const EmbeddingMatrix& x, const EmbeddingMatrix& y, DistanceMetric metric,
                                      std::size_t top_k, std::optional<double> margin = std::nullopt,
                                      std::size_t workers = 0);

/// Same on two centered Grams directly; pairs are ranked by the quantity the
/// mask kind measures (d^2 from the Gram, or -M_ij for cosine).
OverlapAnalysis topk_overlap_analysis(const NormalizedGram& k, const NormalizedGram& l, MaskKind kind,
                                      std::size_t top_k, std::optional<double> margin = std::nullopt);

}  // namespace smx

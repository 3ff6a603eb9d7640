#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace smx {

struct GaussianComponent {
  double weight = 1.0;
  std::vector<double> mean;
  std::vector<double> cov;  // d x d, row-major
};

/// Gaussian mixture with exact noise-smoothed scores. Weights must sum to 1
/// and every covariance must be symmetric positive definite.
class GaussianClass {
 public:
  GaussianClass() = default;
  explicit GaussianClass(std::vector<GaussianComponent> components);

  static GaussianClass single(std::vector<double> mean, std::vector<double> cov);
  static GaussianClass isotropic(std::vector<double> mean, double variance);

  std::size_t dim() const noexcept { return dim_; }
  const std::vector<GaussianComponent>& components() const noexcept { return components_; }

 private:
  std::size_t dim_ = 0;
  std::vector<GaussianComponent> components_;
};

/// grad_x log sum_m w_m N(x; mu_m, Sigma_m + sigma^2 I).
std::vector<double> analytic_score(std::span<const double> x, double sigma, const GaussianClass& cls);

/// log sum_m w_m N(x; mu_m, Sigma_m + sigma^2 I); sigma = 0 is the clean density.
double log_density(std::span<const double> x, const GaussianClass& cls, double sigma = 0.0);

struct MixSpec {
  double alpha = 0.5;
  double beta = 0.5;
  std::optional<double> lambda;

  static MixSpec from_lambda(double lambda);
  static MixSpec from_weights(double alpha, double beta);
};

/// alpha * S_A + beta * S_B. A zero weight drops its term entirely.
std::vector<double> mixed_score(std::span<const double> x, double sigma, const GaussianClass& a,
                                const GaussianClass& b, const MixSpec& spec);

/// s_weak + g (s_main - s_weak).
std::vector<double> guided_score(std::span<const double> s_main, std::span<const double> s_weak, double g);

/// Class whose components are A's and B's with weights scaled by
/// alpha/(alpha+beta) and beta/(alpha+beta) (equal halves when both are 0).
GaussianClass mix_reference(const GaussianClass& a, const GaussianClass& b, const MixSpec& spec);

struct NoiseSchedule {
  std::vector<double> sigmas;  // T decreasing values followed by 0
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  std::size_t steps = 64;
  double rho_s = 7.0;
};

NoiseSchedule karras_schedule(double sigma_min, double sigma_max, std::size_t steps, double rho_s);

using ScoreFn = std::function<std::vector<double>(std::span<const double>, double)>;

struct SampleBatch {
  std::size_t dim = 0;
  std::vector<std::vector<double>> points;
  std::uint64_t seed = 0;
  std::optional<MixSpec> spec;
  NoiseSchedule schedule;

  std::size_t size() const noexcept { return points.size(); }
};

/// Initial state of sample `index`: sigma_max * N(0, I) from its own stream.
std::vector<double> initial_noise(std::size_t dim, double sigma_max, std::uint64_t seed, std::size_t index);

/// Deterministic second-order (Heun) integration of the probability-flow ODE
/// from sigma_max to 0; the last step is Euler.
SampleBatch heun_sample(const ScoreFn& score, std::size_t dim, const NoiseSchedule& schedule,
                        std::size_t n_samples, std::uint64_t seed, std::size_t workers = 0);

struct GridCell {
  double alpha = 0.0;
  double beta = 0.0;
  SampleBatch batch;
};

/// One batch per (alpha, beta); every cell starts from the same noise.
/// With a weak class the mixed score is guided against it at scale `guidance`.
std::vector<GridCell> grid_sweep(const GaussianClass& a, const GaussianClass& b, const std::vector<double>& alphas,
                                 const std::vector<double>& betas, const NoiseSchedule& schedule,
                                 std::size_t n_per_cell, std::uint64_t seed, std::size_t workers = 0,
                                 const GaussianClass* weak = nullptr, double guidance = 1.0);

/// Inclusive range "start:stop:step".
std::vector<double> parse_range(std::string_view text);

/// Inline class: components separated by '|', each "w;m1,m2,...;cov" with
/// cov a scalar (c I), d diagonal entries, or d*d row-major entries.
GaussianClass parse_class_spec(std::string_view text);

/// Text class file: per component a weight line, a mean line and d
/// covariance rows. Blank lines and lines starting with '#' are skipped.
GaussianClass load_class_file(const std::filesystem::path& path);

/// A path that exists is read as a class file, anything else parsed inline.
GaussianClass class_from_argument(std::string_view text);

}  // namespace smx

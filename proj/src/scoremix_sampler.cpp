#include "scoremix/scoremix_sampler.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "scoremix/error.hpp"
#include "scoremix/parallel.hpp"
#include "scoremix/rng.hpp"

namespace smx {
namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ComponentTerm {
  double log_weighted;  // log w + log N(x; mu, S)
  Vec solved;           // S^{-1} (x - mu)
};

ComponentTerm component_term(std::span<const double> x, double sigma, const GaussianComponent& c) {
  const auto d = static_cast<Eigen::Index>(c.mean.size());
  Mat s = Eigen::Map<const Mat>(c.cov.data(), d, d);
  s.diagonal().array() += sigma * sigma;
  const Eigen::LLT<Mat> llt(s);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::degenerate_input, "smoothed covariance is not positive definite",
                "sigma=" + std::to_string(sigma));
  }
  const Vec diff = Eigen::Map<const Vec>(x.data(), d) - Eigen::Map<const Vec>(c.mean.data(), d);
  ComponentTerm t;
  t.solved = llt.solve(diff);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  t.log_weighted = std::log(c.weight) -
                   0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + log_det + diff.dot(t.solved));
  return t;
}

void require_dim(std::span<const double> x, const GaussianClass& cls) {
  if (x.size() != cls.dim()) {
    throw Error(ErrorCode::invalid_argument, "point dimension does not match the class",
                std::to_string(x.size()) + " vs " + std::to_string(cls.dim()));
  }
}

double parse_number(std::string_view text, std::string_view what) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::parse_error, "expected a finite number", std::string(what) + ": '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = text.find(sep, start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<double> parse_numbers(std::string_view text, char sep, std::string_view what) {
  std::vector<double> out;
  for (auto part : split(text, sep)) out.push_back(parse_number(part, what));
  return out;
}

std::vector<double> expand_covariance(const std::vector<double>& values, std::size_t d, std::string_view where) {
  std::vector<double> cov(d * d, 0.0);
  if (values.size() == 1) {
    for (std::size_t i = 0; i < d; ++i) cov[i * d + i] = values[0];
  } else if (values.size() == d) {
    for (std::size_t i = 0; i < d; ++i) cov[i * d + i] = values[i];
  } else if (values.size() == d * d) {
    cov = values;
  } else {
    throw Error(ErrorCode::parse_error, "covariance needs 1, d or d*d values",
                std::string(where) + ": got " + std::to_string(values.size()) + " for d=" + std::to_string(d));
  }
  return cov;
}

}  // namespace

GaussianClass::GaussianClass(std::vector<GaussianComponent> components) : components_(std::move(components)) {
  if (components_.empty()) throw Error(ErrorCode::invalid_argument, "class needs at least one component");
  dim_ = components_.front().mean.size();
  if (dim_ == 0) throw Error(ErrorCode::invalid_argument, "class dimension must be >= 1");
  double total = 0.0;
  for (std::size_t m = 0; m < components_.size(); ++m) {
    const auto& c = components_[m];
    const std::string where = "component " + std::to_string(m);
    if (c.mean.size() != dim_ || c.cov.size() != dim_ * dim_) {
      throw Error(ErrorCode::invalid_argument, "component dimensions disagree", where);
    }
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
      throw Error(ErrorCode::invalid_argument, "component weight must be positive", where);
    }
    for (double v : c.mean) {
      if (!std::isfinite(v)) throw Error(ErrorCode::non_finite, "non-finite mean", where);
    }
    const auto d = static_cast<Eigen::Index>(dim_);
    const Mat s = Eigen::Map<const Mat>(c.cov.data(), d, d);
    if (!s.allFinite() || (s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, s.cwiseAbs().maxCoeff())) {
      throw Error(ErrorCode::invalid_argument, "covariance must be finite and symmetric", where);
    }
    const Eigen::SelfAdjointEigenSolver<Mat> eig(s, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 1e-10)) {
      throw Error(ErrorCode::invalid_argument, "covariance must be positive definite",
                  where + ": smallest eigenvalue " + std::to_string(eig.eigenvalues().minCoeff()));
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw Error(ErrorCode::invalid_argument, "component weights must sum to 1", "sum=" + std::to_string(total));
  }
}

GaussianClass GaussianClass::single(std::vector<double> mean, std::vector<double> cov) {
  return GaussianClass({GaussianComponent{1.0, std::move(mean), std::move(cov)}});
}

GaussianClass GaussianClass::isotropic(std::vector<double> mean, double variance) {
  const std::size_t d = mean.size();
  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) cov[i * d + i] = variance;
  return single(std::move(mean), std::move(cov));
}

std::vector<double> analytic_score(std::span<const double> x, double sigma, const GaussianClass& cls) {
  require_dim(x, cls);
  if (!(sigma >= 0.0)) throw Error(ErrorCode::invalid_argument, "sigma must be >= 0", "sigma=" + std::to_string(sigma));
  const auto& comps = cls.components();
  std::vector<ComponentTerm> terms;
  terms.reserve(comps.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (const auto& c : comps) {
    terms.push_back(component_term(x, sigma, c));
    peak = std::max(peak, terms.back().log_weighted);
  }
  Vec grad = Vec::Zero(static_cast<Eigen::Index>(cls.dim()));
  if (terms.size() == 1) {
    grad = -terms.front().solved;
  } else {
    double total = 0.0;
    for (auto& t : terms) {
      t.log_weighted = std::exp(t.log_weighted - peak);
      total += t.log_weighted;
    }
    for (const auto& t : terms) grad -= (t.log_weighted / total) * t.solved;
  }
  return {grad.data(), grad.data() + grad.size()};
}

double log_density(std::span<const double> x, const GaussianClass& cls, double sigma) {
  require_dim(x, cls);
  std::vector<double> logs;
  double peak = -std::numeric_limits<double>::infinity();
  for (const auto& c : cls.components()) {
    logs.push_back(component_term(x, sigma, c).log_weighted);
    peak = std::max(peak, logs.back());
  }
  double s = 0.0;
  for (double l : logs) s += std::exp(l - peak);
  return peak + std::log(s);
}

MixSpec MixSpec::from_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::out_of_range, "lambda must lie in [0, 1]", "lambda=" + std::to_string(lambda));
  }
  return {1.0 - lambda, lambda, lambda};
}

MixSpec MixSpec::from_weights(double alpha, double beta) {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw Error(ErrorCode::out_of_range, "alpha and beta must be finite and >= 0",
                "alpha=" + std::to_string(alpha) + " beta=" + std::to_string(beta));
  }
  return {alpha, beta, std::nullopt};
}

std::vector<double> mixed_score(std::span<const double> x, double sigma, const GaussianClass& a,
                                const GaussianClass& b, const MixSpec& spec) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::invalid_argument, "mixed classes must share a dimension",
                std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  std::vector<double> out(a.dim(), 0.0);
  if (spec.alpha != 0.0) {
    const auto sa = analytic_score(x, sigma, a);
    for (std::size_t t = 0; t < out.size(); ++t) out[t] = spec.alpha * sa[t];
  }
  if (spec.beta != 0.0) {
    const auto sb = analytic_score(x, sigma, b);
    if (spec.alpha != 0.0) {
      for (std::size_t t = 0; t < out.size(); ++t) out[t] += spec.beta * sb[t];
    } else {
      for (std::size_t t = 0; t < out.size(); ++t) out[t] = spec.beta * sb[t];
    }
  }
  return out;
}

std::vector<double> guided_score(std::span<const double> s_main, std::span<const double> s_weak, double g) {
  if (s_main.size() != s_weak.size()) {
    throw Error(ErrorCode::invalid_argument, "score dimensions differ",
                std::to_string(s_main.size()) + " vs " + std::to_string(s_weak.size()));
  }
  std::vector<double> out(s_main.size());
  if (g == 1.0) {
    out.assign(s_main.begin(), s_main.end());
    return out;
  }
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = s_weak[t] + g * (s_main[t] - s_weak[t]);
  return out;
}

GaussianClass mix_reference(const GaussianClass& a, const GaussianClass& b, const MixSpec& spec) {
  if (a.dim() != b.dim()) throw Error(ErrorCode::invalid_argument, "mixed classes must share a dimension");
  const double total = spec.alpha + spec.beta;
  const double wa = total > 0.0 ? spec.alpha / total : 0.5;
  const double wb = total > 0.0 ? spec.beta / total : 0.5;
  std::vector<GaussianComponent> comps;
  for (auto [cls, w] : {std::pair{&a, wa}, std::pair{&b, wb}}) {
    if (w == 0.0) continue;
    for (auto c : cls->components()) {
      c.weight *= w;
      comps.push_back(std::move(c));
    }
  }
  double sum = 0.0;
  for (const auto& c : comps) sum += c.weight;
  for (auto& c : comps) c.weight /= sum;
  return GaussianClass(std::move(comps));
}

NoiseSchedule karras_schedule(double sigma_min, double sigma_max, std::size_t steps, double rho_s) {
  if (!(sigma_min > 0.0) || !(sigma_max > sigma_min) || !std::isfinite(sigma_max)) {
    throw Error(ErrorCode::invalid_argument, "need 0 < sigma_min < sigma_max",
                "sigma_min=" + std::to_string(sigma_min) + " sigma_max=" + std::to_string(sigma_max));
  }
  if (steps < 2) throw Error(ErrorCode::invalid_argument, "need at least 2 steps", "T=" + std::to_string(steps));
  if (!(rho_s > 0.0)) throw Error(ErrorCode::invalid_argument, "rho_s must be positive", "rho_s=" + std::to_string(rho_s));
  NoiseSchedule s{{}, sigma_min, sigma_max, steps, rho_s};
  const double hi = std::pow(sigma_max, 1.0 / rho_s);
  const double lo = std::pow(sigma_min, 1.0 / rho_s);
  s.sigmas.resize(steps + 1);
  for (std::size_t i = 0; i < steps; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(steps - 1);
    s.sigmas[i] = std::pow(hi + f * (lo - hi), rho_s);
  }
  s.sigmas.front() = sigma_max;
  s.sigmas[steps - 1] = sigma_min;
  s.sigmas.back() = 0.0;
  for (std::size_t i = 0; i + 1 < steps; ++i) {
    if (!(s.sigmas[i] > s.sigmas[i + 1])) {
      throw Error(ErrorCode::degenerate_input, "schedule is not strictly decreasing", "index " + std::to_string(i));
    }
  }
  return s;
}

std::vector<double> initial_noise(std::size_t dim, double sigma_max, std::uint64_t seed, std::size_t index) {
  Rng rng(derive_seed(seed, {0x6e6f697365ULL, index}));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(dim);
  for (double& v : x) v = sigma_max * normal(rng);
  return x;
}

SampleBatch heun_sample(const ScoreFn& score, std::size_t dim, const NoiseSchedule& schedule,
                        std::size_t n_samples, std::uint64_t seed, std::size_t workers) {
  if (n_samples < 1) throw Error(ErrorCode::invalid_argument, "n_samples must be >= 1");
  if (schedule.sigmas.size() < 2 || schedule.sigmas.back() != 0.0) {
    throw Error(ErrorCode::invalid_argument, "schedule must end with sigma = 0");
  }
  SampleBatch batch;
  batch.dim = dim;
  batch.seed = seed;
  batch.schedule = schedule;
  batch.points.resize(n_samples);
  const auto& sig = schedule.sigmas;

  parallel_for(n_samples, workers, [&](std::size_t index, std::size_t) {
    std::vector<double> x = initial_noise(dim, sig.front(), seed, index);
    std::vector<double> xt(dim), d(dim);
    for (std::size_t i = 0; i + 1 < sig.size(); ++i) {
      const double s0 = sig[i];
      const double s1 = sig[i + 1];
      const double h = s1 - s0;
      const auto sc = score(x, s0);
      for (std::size_t t = 0; t < dim; ++t) {
        d[t] = -s0 * sc[t];
        xt[t] = x[t] + h * d[t];
      }
      if (s1 > 0.0) {
        const auto sc2 = score(xt, s1);
        for (std::size_t t = 0; t < dim; ++t) x[t] = x[t] + h * ((d[t] + -s1 * sc2[t]) / 2.0);
      } else {
        x = xt;
      }
      for (double v : x) {
        if (!std::isfinite(v)) {
          throw Error(ErrorCode::non_finite, "non-finite sampler state",
                      "sample " + std::to_string(index) + ", step " + std::to_string(i));
        }
      }
    }
    batch.points[index] = std::move(x);
  });
  return batch;
}

std::vector<GridCell> grid_sweep(const GaussianClass& a, const GaussianClass& b, const std::vector<double>& alphas,
                                 const std::vector<double>& betas, const NoiseSchedule& schedule,
                                 std::size_t n_per_cell, std::uint64_t seed, std::size_t workers,
                                 const GaussianClass* weak, double guidance) {
  if (weak && weak->dim() != a.dim()) throw Error(ErrorCode::invalid_argument, "weak class dimension differs");
  if (alphas.empty() || betas.empty()) throw Error(ErrorCode::invalid_argument, "alpha and beta lists must be nonempty");
  std::vector<GridCell> cells;
  for (double beta : betas) {
    for (double alpha : alphas) {
      const MixSpec spec = MixSpec::from_weights(alpha, beta);
      auto fn = [&](std::span<const double> x, double sigma) {
        auto s = mixed_score(x, sigma, a, b, spec);
        if (!weak) return s;
        return guided_score(s, analytic_score(x, sigma, *weak), guidance);
      };
      GridCell cell{alpha, beta, heun_sample(fn, a.dim(), schedule, n_per_cell, seed, workers)};
      cell.batch.spec = spec;
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

std::vector<double> parse_range(std::string_view text) {
  const auto parts = split(text, ':');
  if (parts.size() != 3) throw Error(ErrorCode::parse_error, "range must be start:stop:step", std::string(text));
  const double start = parse_number(parts[0], "range start");
  const double stop = parse_number(parts[1], "range stop");
  const double step = parse_number(parts[2], "range step");
  if (!(step > 0.0) || stop < start) throw Error(ErrorCode::invalid_argument, "range needs step > 0 and stop >= start", std::string(text));
  std::vector<double> out;
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) {
    // round to the step's decimal grid so 0.2*3 prints as 0.6
    const double v = start + static_cast<double>(i) * step;
    out.push_back(std::round(v * 1e12) / 1e12);
  }
  return out;
}

GaussianClass parse_class_spec(std::string_view text) {
  std::vector<GaussianComponent> comps;
  const auto blocks = split(text, '|');
  for (std::size_t m = 0; m < blocks.size(); ++m) {
    const std::string where = "component " + std::to_string(m);
    const auto fields = split(blocks[m], ';');
    if (fields.size() != 3) throw Error(ErrorCode::parse_error, "component must be 'w;mean;cov'", where);
    GaussianComponent c;
    c.weight = parse_number(fields[0], where + " weight");
    c.mean = parse_numbers(fields[1], ',', where + " mean");
    c.cov = expand_covariance(parse_numbers(fields[2], ',', where + " cov"), c.mean.size(), where);
    comps.push_back(std::move(c));
  }
  return GaussianClass(std::move(comps));
}

GaussianClass load_class_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open class file", path.string());
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.emplace_back(no, line);
  }
  std::vector<GaussianComponent> comps;
  std::size_t pos = 0;
  auto sep_of = [](const std::string& s) { return s.find(',') != std::string::npos ? ',' : ' '; };
  auto numbers = [&](const std::pair<std::size_t, std::string>& l) {
    std::string s = l.second;
    const char sep = sep_of(s);
    std::vector<double> out;
    const std::string where = path.string() + ":" + std::to_string(l.first);
    if (sep == ',') return parse_numbers(s, ',', where);
    std::istringstream ss(s);
    std::string tok;
    while (ss >> tok) out.push_back(parse_number(tok, where));
    return out;
  };
  while (pos < lines.size()) {
    if (pos + 2 > lines.size()) throw Error(ErrorCode::parse_error, "incomplete component", path.string());
    GaussianComponent c;
    const auto w = numbers(lines[pos]);
    if (w.size() != 1) {
      throw Error(ErrorCode::parse_error, "weight line must hold one value", path.string() + ":" + std::to_string(lines[pos].first));
    }
    c.weight = w[0];
    c.mean = numbers(lines[pos + 1]);
    const std::size_t d = c.mean.size();
    if (pos + 2 + d > lines.size()) {
      throw Error(ErrorCode::parse_error, "expected " + std::to_string(d) + " covariance rows", path.string());
    }
    for (std::size_t r = 0; r < d; ++r) {
      const auto row = numbers(lines[pos + 2 + r]);
      if (row.size() != d) {
        throw Error(ErrorCode::parse_error, "covariance row has the wrong length",
                    path.string() + ":" + std::to_string(lines[pos + 2 + r].first));
      }
      c.cov.insert(c.cov.end(), row.begin(), row.end());
    }
    comps.push_back(std::move(c));
    pos += 2 + d;
  }
  if (comps.empty()) throw Error(ErrorCode::parse_error, "class file has no components", path.string());
  return GaussianClass(std::move(comps));
}

GaussianClass class_from_argument(std::string_view text) {
  std::error_code ec;
  const std::filesystem::path p{std::string(text)};
  if (text.find(';') == std::string_view::npos && std::filesystem::is_regular_file(p, ec)) return load_class_file(p);
  return parse_class_spec(text);
}

}  // namespace smx

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "scoremix/tensor_core.hpp"
#include "scoremix/types.hpp"

namespace smx::test {

inline EmbeddingMatrix gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> v(n * d);
  for (auto& x : v) x = z(rng);
  return EmbeddingMatrix(n, d, std::move(v));
}

inline EmbeddingMatrix line(std::initializer_list<double> xs) {
  return EmbeddingMatrix(xs.size(), 1, std::vector<double>(xs));
}

// Textbook distances, straight from the raw rows.
inline double naive_distance(std::span<const double> a, std::span<const double> b, DistanceMetric metric) {
  double s = 0.0, na = 0.0, nb = 0.0, ab = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    s += (a[t] - b[t]) * (a[t] - b[t]);
    na += a[t] * a[t];
    nb += b[t] * b[t];
    ab += a[t] * b[t];
  }
  switch (metric) {
    case DistanceMetric::euclidean: return std::sqrt(s);
    case DistanceMetric::squared_euclidean: return s;
    case DistanceMetric::cosine: return 1.0 - ab / std::sqrt(na * nb);
  }
  return 0.0;
}

inline std::vector<double> naive_distance_matrix(const EmbeddingMatrix& e, DistanceMetric metric) {
  const std::size_t n = e.rows();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) d[i * n + j] = naive_distance(e.row(i), e.row(j), metric);
  return d;
}

inline double naive_reduce(std::vector<double> v, Reducer r) {
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  switch (r) {
    case Reducer::sum: return sum;
    case Reducer::mean: return mean;
    case Reducer::min: return *std::min_element(v.begin(), v.end());
    case Reducer::max: return *std::max_element(v.begin(), v.end());
    case Reducer::std: {
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      return std::sqrt(ss / static_cast<double>(v.size()));
    }
  }
  return 0.0;
}

struct Ranked {
  std::vector<std::uint32_t> idx;
  double score;
};

// Full enumeration of every m-subset, sorted best first with lexicographic ties.
inline std::vector<Ranked> brute_force(const EmbeddingMatrix& e, std::size_t m, DistanceMetric metric, Reducer r,
                                       Direction dir, std::size_t k) {
  const std::size_t n = e.rows();
  const auto d = naive_distance_matrix(e, metric);
  std::vector<Ranked> all;
  std::vector<std::uint32_t> idx(m);
  auto score = [&] {
    std::vector<double> v;
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b) v.push_back(d[idx[a] * n + idx[b]]);
    return naive_reduce(v, r);
  };
  if (m == 2) {
    for (idx[0] = 0; idx[0] < n; ++idx[0])
      for (idx[1] = idx[0] + 1; idx[1] < n; ++idx[1]) all.push_back({idx, score()});
  } else {
    for (idx[0] = 0; idx[0] < n; ++idx[0])
      for (idx[1] = idx[0] + 1; idx[1] < n; ++idx[1])
        for (idx[2] = idx[1] + 1; idx[2] < n; ++idx[2]) all.push_back({idx, score()});
  }
  std::sort(all.begin(), all.end(), [&](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return dir == Direction::max ? a.score > b.score : a.score < b.score;
    return a.idx < b.idx;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("smx_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace smx::test

#include <doctest.h>

#include <cstring>

#include "scoremix/kernels.hpp"
#include "scoremix/mplet_miner.hpp"
#include "support.hpp"

using namespace smx;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> v(n);
  for (auto& x : v) x = z(rng);
  return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Restores the dispatch table when a test leaves.
struct IsaGuard {
  kernels::Isa saved = kernels::active().isa;
  ~IsaGuard() { kernels::set_active(saved); }
};

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar table is always present") {
  CHECK(kernels::scalar_table().isa == kernels::Isa::scalar);
  CHECK(kernels::set_active(kernels::Isa::scalar));
  CHECK(kernels::active().isa == kernels::Isa::scalar);
  kernels::set_active(kernels::avx2_table() ? kernels::Isa::avx2 : kernels::Isa::scalar);
}

TEST_CASE("avx2 kernels match scalar bitwise") {
  const auto* simd = kernels::avx2_table();
  if (!simd) {
    MESSAGE("AVX2 unavailable; equivalence not exercised");
    return;
  }
  const auto& ref = kernels::scalar_table();

  SUBCASE("dot_block") {
    for (std::size_t rows : {1, 3, 8, 13})
      for (std::size_t cols : {1, 4, 7, 33})
        for (std::size_t depth : {1, 5, 64}) {
          auto a = noise(rows * depth, rows * 100 + depth);
          auto bt = noise(depth * cols, cols * 7 + depth);
          std::vector<double> x(rows * (cols + 2), -1.0), y = x;
          ref.dot_block(a.data(), rows, depth, bt.data(), cols, cols, depth, x.data(), cols + 2);
          simd->dot_block(a.data(), rows, depth, bt.data(), cols, cols, depth, y.data(), cols + 2);
          CHECK(same_bits(x, y));
        }
  }

  SUBCASE("dots_to_distances") {
    for (auto metric : {DistanceMetric::cosine, DistanceMetric::euclidean, DistanceMetric::squared_euclidean}) {
      const std::size_t rows = 9, cols = 23, ld = 25;
      auto blk = noise(rows * ld, 11);
      auto rs = noise(rows, 12), cs = noise(cols, 13);
      for (auto& v : rs) v = v * v + 1.0;
      for (auto& v : cs) v = v * v + 1.0;
      auto x = blk, y = blk;
      ref.dots_to_distances(x.data(), rows, cols, ld, rs.data(), cs.data(), metric);
      simd->dots_to_distances(y.data(), rows, cols, ld, rs.data(), cs.data(), metric);
      CHECK(same_bits(x, y));
    }
  }

  SUBCASE("score_triple_column") {
    for (auto reducer : {Reducer::sum, Reducer::mean, Reducer::std, Reducer::min, Reducer::max})
      for (std::size_t n : {1, 2, 3, 4, 5, 17, 100}) {
        auto ik = noise(n, n), jk = noise(n, n + 1);
        for (std::size_t t = 0; t < n; t += 3) jk[t] = ik[t];  // exact ties inside the triple
        std::vector<double> x(n), y(n);
        ref.score_triple_column(0.25, ik.data(), jk.data(), n, reducer, x.data());
        simd->score_triple_column(0.25, ik.data(), jk.data(), n, reducer, y.data());
        CHECK(same_bits(x, y));
      }
  }

  SUBCASE("arg_best, including ties and infinities") {
    for (std::size_t n : {1, 2, 5, 8, 31, 64}) {
      auto v = noise(n, 40 + n);
      for (bool maximize : {true, false}) {
        CHECK(ref.arg_best(v.data(), n, maximize) == simd->arg_best(v.data(), n, maximize));
        auto tied = v;
        for (auto& t : tied) t = std::round(t);
        CHECK(ref.arg_best(tied.data(), n, maximize) == simd->arg_best(tied.data(), n, maximize));
        tied[0] = maximize ? -INFINITY : INFINITY;
        CHECK(ref.arg_best(tied.data(), n, maximize) == simd->arg_best(tied.data(), n, maximize));
      }
    }
  }
}

TEST_CASE("miner output is identical under both ISAs") {
  if (!kernels::avx2_table()) return;
  IsaGuard guard;
  auto e = test::gaussian(70, 6, 99);
  for (auto reducer : {Reducer::sum, Reducer::std, Reducer::min}) {
    kernels::set_active(kernels::Isa::scalar);
    auto a = mine_triples(e, DistanceMetric::cosine, reducer, Direction::max, 40, {{32, 16, 64, 2}, true, 2});
    auto pa = mine_pairs(e, DistanceMetric::euclidean, Direction::min, 30, 16, 2);
    kernels::set_active(kernels::Isa::avx2);
    auto b = mine_triples(e, DistanceMetric::cosine, reducer, Direction::max, 40, {{32, 16, 64, 2}, true, 2});
    auto pb = mine_pairs(e, DistanceMetric::euclidean, Direction::min, 30, 16, 2);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t k = 0; k < a.entries.size(); ++k) {
      CHECK(a.entries[k].indices == b.entries[k].indices);
      CHECK(a.entries[k].score == b.entries[k].score);
    }
    for (std::size_t k = 0; k < pa.entries.size(); ++k) {
      CHECK(pa.entries[k].indices == pb.entries[k].indices);
      CHECK(pa.entries[k].score == pb.entries[k].score);
    }
  }
}

}

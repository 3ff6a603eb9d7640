#include <doctest.h>

#include <cstring>
#include <fstream>

#include "scoremix/error.hpp"
#include "scoremix/tensor_core.hpp"
#include "support.hpp"

using namespace smx;
using doctest::Approx;

TEST_SUITE("tensor_core") {

TEST_CASE("csv parse") {
  auto m = parse_csv_embeddings("1,0\n0,1\n0,0");
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 2);
  CHECK(m(1, 1) == 1.0);
}

TEST_CASE("csv errors carry positions") {
  try {
    parse_csv_embeddings("1,2\n3\n");
    FAIL("ragged row accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse_error);
    CHECK(e.context() == "line 2");
  }
  CHECK_THROWS_AS(parse_csv_embeddings(""), Error);
  CHECK_THROWS_AS(parse_csv_embeddings("1,nan\n"), Error);
  CHECK_THROWS_AS(parse_csv_embeddings("1,abc\n"), Error);
}

TEST_CASE("binary round trip is bit exact") {
  std::vector<double> v;
  for (int i = 0; i < 8; ++i) v.push_back(static_cast<float>(0.1 * i - 0.3));
  EmbeddingMatrix m(2, 4, v);
  auto bytes = encode_binary_embeddings(m);
  CHECK(bytes.size() == 24 + 32);
  CHECK(std::memcmp(bytes.data(), "SMX1", 4) == 0);
  auto back = parse_binary_embeddings(bytes);
  CHECK(back.rows() == 2);
  CHECK(back.cols() == 4);
  CHECK(back.data() == m.data());
  CHECK(encode_binary_embeddings(back) == bytes);
}

TEST_CASE("binary truncated payload") {
  auto bytes = encode_binary_embeddings(EmbeddingMatrix(2, 4, std::vector<double>(8, 1.0)));
  bytes.resize(bytes.size() - 4);
  try {
    parse_binary_embeddings(bytes);
    FAIL("truncated payload accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse_error);
    CHECK(e.context() == "row 1, column 3");
  }
  auto bad = encode_binary_embeddings(EmbeddingMatrix(1, 1, {1.0}));
  bad[0] = 'X';
  CHECK_THROWS_AS(parse_binary_embeddings(bad), Error);
}

TEST_CASE("file round trip with labels") {
  auto dir = test::scratch_dir("tensor_io");
  auto m = test::gaussian(5, 3, 1);
  save_embeddings(m, dir / "a.bin", EmbeddingFormat::binary);
  save_embeddings(m, dir / "a.csv", EmbeddingFormat::csv);
  std::ofstream(dir / "labels.txt") << "a\nb\nc\nd\ne\n";
  auto b = load_embeddings(dir / "a.bin", format_for_path(dir / "a.bin"), dir / "labels.txt");
  auto c = load_embeddings(dir / "a.csv", format_for_path(dir / "a.csv"));
  CHECK(b.labels().size() == 5);
  CHECK(b.labels()[4] == "e");
  // binary stores float32; csv keeps doubles
  for (std::size_t i = 0; i < m.data().size(); ++i) {
    CHECK(b.data()[i] == static_cast<double>(static_cast<float>(m.data()[i])));
    CHECK(c.data()[i] == m.data()[i]);
  }
  std::ofstream(dir / "short.txt") << "a\nb\n";
  CHECK_THROWS_AS(load_embeddings(dir / "a.bin", EmbeddingFormat::binary, dir / "short.txt"), Error);
  CHECK_THROWS_AS(load_embeddings(dir / "missing.bin", EmbeddingFormat::binary), Error);
}

TEST_CASE("row_normalize") {
  auto n = row_normalize(EmbeddingMatrix(1, 2, {3.0, 4.0}));
  CHECK(n(0, 0) == Approx(0.6).epsilon(1e-15));
  CHECK(n(0, 1) == Approx(0.8).epsilon(1e-15));
  auto g = row_normalize(test::gaussian(6, 4, 2));
  auto again = row_normalize(g);
  for (std::size_t i = 0; i < g.data().size(); ++i) CHECK(std::abs(again.data()[i] - g.data()[i]) <= 1e-12);
  try {
    row_normalize(EmbeddingMatrix(2, 2, {1.0, 0.0, 0.0, 0.0}));
    FAIL("zero row accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate_input);
    CHECK(e.context() == "row 1");
  }
}

// H X X^T H / ||.||_F with H = I - 11^T/n materialized.
static std::vector<double> gram_oracle(const EmbeddingMatrix& x) {
  const std::size_t n = x.rows();
  std::vector<double> h(n * n), k(n * n), hk(n * n, 0.0), out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      h[i * n + j] = (i == j ? 1.0 : 0.0) - 1.0 / static_cast<double>(n);
      double s = 0.0;
      for (std::size_t t = 0; t < x.cols(); ++t) s += x(i, t) * x(j, t);
      k[i * n + j] = s;
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t t = 0; t < n; ++t) hk[i * n + j] += h[i * n + t] * k[t * n + j];
  double f = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t t = 0; t < n; ++t) out[i * n + j] += hk[i * n + t] * h[t * n + j];
      f += out[i * n + j] * out[i * n + j];
    }
  for (auto& v : out) v /= std::sqrt(f);
  return out;
}

TEST_CASE("centered_normalized_gram") {
  auto g = centered_normalized_gram(EmbeddingMatrix(3, 2, {1, 2, 1, 2, -3, 0.5}));
  double frob = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    double rs = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      rs += g(i, j);
      frob += g(i, j) * g(i, j);
    }
    CHECK(std::abs(rs) <= 1e-12);
  }
  CHECK(std::sqrt(frob) == Approx(1.0).epsilon(1e-12));

  EmbeddingMatrix x(4, 2, {1, 2, 3, -1, 0, 4, -2, 2});
  auto got = centered_normalized_gram(x);
  auto want = gram_oracle(x);
  for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(got.values[i] - want[i]) <= 1e-12);

  CHECK_THROWS_AS(centered_normalized_gram(EmbeddingMatrix(3, 2, {1, 1, 1, 1, 1, 1})), Error);
}

TEST_CASE("gram invariants on random inputs") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto g = centered_normalized_gram(test::gaussian(5 + seed, 1 + seed % 4, seed));
    double frob = 0.0;
    for (std::size_t i = 0; i < g.n; ++i) {
      double rs = 0.0;
      for (std::size_t j = 0; j < g.n; ++j) {
        rs += g(i, j);
        frob += g(i, j) * g(i, j);
      }
      CHECK(std::abs(rs) <= 1e-8);
    }
    CHECK(std::abs(std::sqrt(frob) - 1.0) <= 1e-10);
  }
}

TEST_CASE("cosine_gram") {
  auto e = test::gaussian(7, 3, 3);
  auto a = cosine_gram(e);
  auto b = centered_normalized_gram(row_normalize(e));
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(std::abs(a.values[i] - b.values[i]) <= 1e-12);

  // orthonormal rows: (I - 11^T/n) / sqrt(n - 1)
  const std::size_t n = 4;
  std::vector<double> eye(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0;
  auto o = cosine_gram(EmbeddingMatrix(n, n, eye));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double want = ((i == j ? 1.0 : 0.0) - 0.25) / std::sqrt(3.0);
      CHECK(std::abs(o(i, j) - want) <= 1e-12);
    }

  std::vector<double> scaled = e.data();
  for (auto& v : scaled) v *= 5.0;
  auto s = cosine_gram(EmbeddingMatrix(7, 3, scaled));
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(std::abs(a.values[i] - s.values[i]) <= 1e-12);
}

TEST_CASE("pairwise_distance_block") {
  auto pts = test::line({0.0, 1.0, 3.0});
  auto d = pairwise_distance_block(pts, {0, 3}, {0, 3}, DistanceMetric::euclidean);
  const double want[3][3] = {{0, 1, 3}, {1, 0, 2}, {3, 2, 0}};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(d(i, j) == want[i][j]);

  auto e = test::gaussian(10, 5, 4);
  for (auto metric : {DistanceMetric::cosine, DistanceMetric::euclidean, DistanceMetric::squared_euclidean}) {
    auto full = pairwise_distance_block(e, {0, 10}, {0, 10}, metric);
    auto part = pairwise_distance_block(e, {2, 7}, {4, 10}, metric);
    auto swapped = pairwise_distance_block(e, {4, 10}, {2, 7}, metric);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(std::abs(full(i, i)) <= 1e-12);
      for (std::size_t j = 0; j < 10; ++j)
        CHECK(std::abs(full(i, j) - test::naive_distance(e.row(i), e.row(j), metric)) <= 1e-10);
    }
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t c = 0; c < 6; ++c) {
        CHECK(part(r, c) == full(2 + r, 4 + c));
        CHECK(std::abs(part(r, c) - swapped(c, r)) <= 1e-12);
      }
  }
  CHECK_THROWS_AS(pairwise_distance_block(e, {0, 11}, {0, 1}, DistanceMetric::cosine), Error);
}

TEST_CASE("unit rows: squared euclidean is twice cosine") {
  auto u = row_normalize(test::gaussian(12, 6, 5));
  auto sq = pairwise_distance_block(u, {0, 12}, {0, 12}, DistanceMetric::squared_euclidean);
  auto co = pairwise_distance_block(u, {0, 12}, {0, 12}, DistanceMetric::cosine);
  for (std::size_t i = 0; i < 144; ++i) CHECK(std::abs(sq.values[i] - 2.0 * co.values[i]) <= 1e-10);
}

TEST_CASE("DistanceGeometry: scalar distance equals block entry bitwise") {
  auto e = test::gaussian(37, 9, 6);
  for (auto metric : {DistanceMetric::cosine, DistanceMetric::euclidean, DistanceMetric::squared_euclidean}) {
    DistanceGeometry g(e, metric);
    std::vector<double> out(37 * 37);
    g.block({0, 37}, {0, 37}, out.data(), 37);
    for (std::size_t i = 0; i < 37; ++i)
      for (std::size_t j = 0; j < 37; ++j) {
        CHECK(out[i * 37 + j] == g.distance(i, j));
        CHECK(g.distance(i, j) == g.distance(j, i));
        CHECK(std::abs(g.distance(i, j) - test::naive_distance(e.row(i), e.row(j), metric)) <= 1e-10);
      }
  }
}

TEST_CASE("class_centers") {
  std::vector<std::string> labels{"b", "a"};
  auto one = class_centers(EmbeddingMatrix(2, 2, {3, 4, 0, 2}), labels);
  CHECK(one.class_ids == labels);
  CHECK(one.centers(0, 0) == Approx(0.6));
  CHECK(one.centers(1, 1) == Approx(1.0));

  auto sym = class_centers(EmbeddingMatrix(2, 2, {1, 0, 0, 1}), {"x", "x"});
  CHECK(sym.centers.rows() == 1);
  CHECK(sym.counts[0] == 2);
  CHECK(sym.centers(0, 0) == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(sym.centers(0, 1) == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));

  CHECK_THROWS_AS(class_centers(EmbeddingMatrix(2, 2, {1, 0, -1, 0}), {"x", "x"}), Error);
  CHECK_THROWS_AS(class_centers(EmbeddingMatrix(2, 2, {1, 0, 0, 1}), {"x"}), Error);
}

TEST_CASE("matrix invariants") {
  CHECK_THROWS_AS(EmbeddingMatrix(0, 2, {}), Error);
  CHECK_THROWS_AS(EmbeddingMatrix(1, 2, {1.0}), Error);
  CHECK_THROWS_AS(EmbeddingMatrix(1, 1, {std::nan("")}), Error);
  CHECK_THROWS_AS(EmbeddingMatrix(2, 1, {1.0, 2.0}, {"a", "a"}), Error);
}

}

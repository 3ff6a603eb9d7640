#include <doctest.h>

#include <numbers>

#include "scoremix/error.hpp"
#include "scoremix/gen_eval_metrics.hpp"
#include "support.hpp"

using namespace smx;

namespace {

std::vector<double> unit(std::span<const double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  std::vector<double> out(v.begin(), v.end());
  for (auto& x : out) x /= std::sqrt(n);
  return out;
}

double dotv(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_SUITE("gen_eval_metrics") {

TEST_CASE("snr_weight") {
  CHECK(snr_weight(0.0, 3.0) == 1.0);
  CHECK(std::abs(snr_weight(1.0, std::numbers::ln2) - 0.5) <= 1e-15);
  double prev = 2.0;
  for (double s = 0.0; s < 5.0; s += 0.05) {
    const double w = snr_weight(s, 0.7);
    CHECK(w < prev);
    CHECK(w > 0.0);
    CHECK(w <= 1.0);
    prev = w;
  }
}

TEST_CASE("ramp_weight") {
  CHECK(ramp_weight(100, 100, 50) == 0.0);
  CHECK(ramp_weight(150, 100, 50) == 1.0);
  CHECK(ramp_weight(125, 100, 50) == 0.5);
  CHECK(ramp_weight(-5, 100, 50) == 0.0);
  CHECK(ramp_weight(1000000, 100, 50) == 1.0);
  CHECK_THROWS_AS(ramp_weight(1, 0, 0), Error);
}

TEST_CASE("edm2_weight") {
  CHECK(edm2_weight(0.5, 0.5) == 8.0);
  for (double s : {0.1, 0.7, 3.0}) {
    CHECK(std::abs(edm2_weight(s, s) - 2.0 / (s * s)) <= 1e-12 * edm2_weight(s, s));
    CHECK(edm2_weight(s, 0.3) == edm2_weight(0.3, s));
  }
  CHECK_THROWS_AS(edm2_weight(0.0, 0.5), Error);
}

TEST_CASE("alignment_loss") {
  const std::vector<double> c{0.6, 0.8}, neg{-0.6, -0.8}, orth{-0.8, 0.6}, scaled{3.0, 4.0}, zero{0.0, 0.0};
  CHECK(alignment_loss(c, c) == 0.0);
  CHECK(alignment_loss(neg, c) == 2.0);
  CHECK(std::abs(alignment_loss(orth, c) - 1.0) <= 1e-15);
  CHECK(std::abs(alignment_loss(scaled, c)) <= 1e-15);
  CHECK_THROWS_AS(alignment_loss(zero, c), Error);
}

TEST_CASE("total_loss_combine") {
  LossWeights w;
  w.n_start = 100;
  w.n_ramp = 10;
  w.lambda_align = 2.0;
  CHECK(total_loss_combine(0.3, 0.9, w, 0.4, 50) == 0.3);
  LossWeights off = w;
  off.lambda_align = 0.0;
  CHECK(total_loss_combine(0.3, 0.9, off, 0.4, 500) == 0.3);
  CHECK(total_loss_combine(0.3, 0.5, w, 0.0, 110) == 0.3 + 1.0);
  CHECK(total_loss_combine(0.3, 0.0, w, 0.2, 500) == 0.3);
  const double expect = 0.3 + 2.0 * 0.5 * std::exp(-0.25) * 0.9;
  CHECK(std::abs(total_loss_combine(0.3, 0.9, w, 0.5, 105) - expect) <= 1e-15);
}

TEST_CASE("mean_std") {
  const double v[] = {1.0, 2.0, 3.0, 4.0};
  auto m = mean_std(v);
  CHECK(m.mean == 2.5);
  CHECK(m.std == std::sqrt(1.25));
}

TEST_CASE("identity fixture") {
  std::vector<double> eye(9, 0.0);
  for (int i = 0; i < 3; ++i) eye[i * 4] = 1.0;
  ClassFeatureSet set{EmbeddingMatrix(3, 3, eye), {"a", "b", "c"}, EmbeddingMatrix(3, 3, eye)};
  auto m = eval_metrics(set);
  for (int k = 0; k < 3; ++k) {
    CHECK(m.m_align[k] == 0.0);
    CHECK(m.m_ics[k] == 1.0);
    CHECK(m.m_shift[k] == 0.0);
  }
  CHECK(m.m_coverage == 1.0);
}

TEST_CASE("swapped centroids miss coverage") {
  EmbeddingMatrix feats(4, 2, {0, 1, 0.1, 1, 1, 0, 1, 0.1});
  EmbeddingMatrix targets(2, 2, {1, 0, 0, 1});
  auto m = eval_metrics({feats, {"a", "a", "b", "b"}, targets});
  CHECK(m.m_coverage == 0.0);
  CHECK_FALSE(m.covered[0]);
  // labeled targets are matched by id regardless of row order
  EmbeddingMatrix named(2, 2, {0, 1, 1, 0}, {"a", "b"});
  CHECK(eval_metrics({feats, {"a", "a", "b", "b"}, named}).m_coverage == 1.0);
}

TEST_CASE("random fixture vs per-formula loops") {
  const std::size_t classes = 5, per = 7, d = 6;
  auto feats = test::gaussian(classes * per, d, 1);
  auto targets = test::gaussian(classes, d, 2);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < classes * per; ++i) labels.push_back("c" + std::to_string(i % classes));
  auto m = eval_metrics({feats, labels, targets});
  auto strict = eval_metrics({feats, labels, targets}, true);
  CHECK(strict.strict_coverage);
  for (std::size_t k = 0; k < classes; ++k) {
    const auto t = unit(targets.row(k));
    std::vector<std::vector<double>> fs;
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = k; i < classes * per; i += classes) {
      fs.push_back(unit(feats.row(i)));
      for (std::size_t q = 0; q < d; ++q) mean[q] += fs.back()[q];
    }
    const auto cgen = unit(mean);
    double align = 0.0, ics = 0.0;
    for (const auto& f : fs) {
      align += 1.0 - dotv(f, t);
      ics += dotv(f, cgen);
    }
    CHECK(m.class_ids[k] == "c" + std::to_string(k));
    CHECK(m.counts[k] == per);
    CHECK(std::abs(m.m_align[k] - align / per) <= 1e-10);
    CHECK(std::abs(m.m_ics[k] - ics / per) <= 1e-10);
    CHECK(std::abs(m.m_shift[k] - (1.0 - dotv(cgen, t))) <= 1e-10);
    std::size_t best = 0;
    for (std::size_t j = 1; j < classes; ++j)
      if (dotv(cgen, unit(targets.row(j))) > dotv(cgen, unit(targets.row(best)))) best = j;
    CHECK(m.covered[k] == (best == k));
    CHECK(m.m_align[k] >= 0.0);
    CHECK(m.m_align[k] <= 2.0);
  }

  // permuting rows within classes changes nothing
  std::vector<double> perm = feats.data();
  for (std::size_t q = 0; q < d; ++q) std::swap(perm[0 * d + q], perm[classes * d + q]);
  auto p = eval_metrics({EmbeddingMatrix(classes * per, d, perm), labels, targets});
  for (std::size_t k = 0; k < classes; ++k) {
    CHECK(std::abs(p.m_align[k] - m.m_align[k]) <= 1e-12);
    CHECK(std::abs(p.m_ics[k] - m.m_ics[k]) <= 1e-12);
  }
}

TEST_CASE("strict coverage looks at every target") {
  // one evaluated class; a second target row is closer than its own
  EmbeddingMatrix feats(1, 2, {1, 0.05});
  EmbeddingMatrix targets(2, 2, {0.6, 0.8, 1, 0}, {"a", "z"});
  CHECK(eval_metrics({feats, {"a"}, targets}).m_coverage == 1.0);
  CHECK(eval_metrics({feats, {"a"}, targets}, true).m_coverage == 0.0);
}

TEST_CASE("errors") {
  EmbeddingMatrix feats(2, 2, {1, 0, -1, 0});
  CHECK_THROWS_AS(eval_metrics({feats, {"a", "a"}, EmbeddingMatrix(1, 2, {1, 0})}), Error);
  CHECK_THROWS_AS(eval_metrics({feats, {"a"}, EmbeddingMatrix(1, 2, {1, 0})}), Error);
  CHECK_THROWS_AS(eval_metrics({EmbeddingMatrix(1, 2, {1, 0}), {"a"}, EmbeddingMatrix(1, 3, {1, 0, 0})}), Error);
}

}

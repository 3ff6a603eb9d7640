#include <doctest.h>

#include <numeric>
#include <set>

#include "scoremix/class_selection.hpp"
#include "scoremix/error.hpp"
#include "scoremix/mplet_miner.hpp"
#include "support.hpp"

using namespace smx;

namespace {

SelectionSpec spec_for(Strategy s, std::size_t count, DistanceMetric m = DistanceMetric::cosine) {
  SelectionSpec spec;
  spec.strategy = s;
  spec.metric_embed = m;
  spec.metric_cond = m;
  spec.count = count;
  spec.seed = 17;
  return spec;
}

using Tuples = std::vector<std::vector<std::uint32_t>>;

Tuples as_tuples(const std::vector<test::Ranked>& r) {
  Tuples t;
  for (const auto& x : r) t.push_back(x.idx);
  return t;
}

}  // namespace

TEST_SUITE("class_selection") {

TEST_CASE("strategy names") {
  for (auto s : {Strategy::random, Strategy::close_embed, Strategy::dist_embed, Strategy::close_cond, Strategy::dist_cond,
                 Strategy::combined_top, Strategy::combined_worst, Strategy::triples_sum_max, Strategy::triples_sum_min})
    CHECK(parse_strategy(to_string(s)) == s);
  CHECK_THROWS_AS(parse_strategy("nearest"), Error);
  CHECK(needs_conditions(Strategy::dist_cond));
  CHECK_FALSE(needs_conditions(Strategy::dist_embed));
}

TEST_CASE("two classes give the only pair") {
  auto e = test::gaussian(2, 3, 1);
  for (auto s : {Strategy::random, Strategy::close_embed, Strategy::dist_embed, Strategy::close_cond, Strategy::dist_cond,
                 Strategy::combined_top, Strategy::combined_worst}) {
    auto r = select_classes(e, &e, spec_for(s, 1));
    REQUIRE(r.tuples.size() == 1);
    CHECK(r.tuples[0] == std::vector<std::uint32_t>{0, 1});
  }
}

TEST_CASE("number line") {
  auto pts = test::line({0.0, 1.0, 3.0});
  auto r = select_classes(pts, nullptr, spec_for(Strategy::dist_embed, 1, DistanceMetric::euclidean));
  CHECK(r.tuples[0] == std::vector<std::uint32_t>{0, 2});
  CHECK(r.mean_embed_distance == 3.0);
  CHECK_FALSE(r.mean_cond_distance.has_value());
  CHECK_THROWS_AS(select_classes(pts, nullptr, spec_for(Strategy::close_embed, 4)), Error);
  CHECK_THROWS_AS(select_classes(pts, nullptr, spec_for(Strategy::close_cond, 1)), Error);
}

TEST_CASE("distance strategies match sorted pair lists") {
  auto e = test::gaussian(100, 6, 2);
  auto c = test::gaussian(100, 4, 3);
  auto close_e = select_classes(e, &c, spec_for(Strategy::close_embed, 40));
  auto dist_e = select_classes(e, &c, spec_for(Strategy::dist_embed, 40));
  auto close_c = select_classes(e, &c, spec_for(Strategy::close_cond, 40, DistanceMetric::euclidean));
  auto dist_c = select_classes(e, &c, spec_for(Strategy::dist_cond, 40, DistanceMetric::euclidean));
  CHECK(close_e.tuples == as_tuples(test::brute_force(e, 2, DistanceMetric::cosine, Reducer::mean, Direction::min, 40)));
  CHECK(dist_e.tuples == as_tuples(test::brute_force(e, 2, DistanceMetric::cosine, Reducer::mean, Direction::max, 40)));
  CHECK(close_c.tuples ==
        as_tuples(test::brute_force(c, 2, DistanceMetric::euclidean, Reducer::mean, Direction::min, 40)));
  CHECK(dist_c.tuples == as_tuples(test::brute_force(c, 2, DistanceMetric::euclidean, Reducer::mean, Direction::max, 40)));
  CHECK(dist_e.mean_embed_distance > close_e.mean_embed_distance);
  CHECK(dist_e.mean_cond_distance.has_value());
  std::set<std::vector<std::uint32_t>> a(close_e.tuples.begin(), close_e.tuples.end());
  for (const auto& t : dist_e.tuples) CHECK(a.count(t) == 0);
}

TEST_CASE("random selection") {
  auto e = test::gaussian(30, 3, 4);
  for (std::size_t count : {1, 10, 300, 435}) {
    auto r = select_classes(e, nullptr, spec_for(Strategy::random, count));
    CHECK(r.tuples.size() == count);
    std::set<std::vector<std::uint32_t>> uniq(r.tuples.begin(), r.tuples.end());
    CHECK(uniq.size() == count);
    for (const auto& t : r.tuples) CHECK(t[0] < t[1]);
    CHECK(select_classes(e, nullptr, spec_for(Strategy::random, count)).tuples == r.tuples);
  }
  auto s1 = spec_for(Strategy::random, 10), s2 = s1;
  s2.seed = 18;
  CHECK(select_classes(e, nullptr, s1).tuples != select_classes(e, nullptr, s2).tuples);
}

TEST_CASE("combined: constructed dominance") {
  // pair (0,1) is the closest in conditions and the farthest in embeddings
  EmbeddingMatrix emb(3, 1, {0.0, 10.0, 4.0});
  EmbeddingMatrix cond(3, 1, {0.0, 0.1, 5.0});
  auto r = select_combined(emb, cond, DistanceMetric::euclidean, DistanceMetric::euclidean, 1, true);
  CHECK(r.tuples[0] == std::vector<std::uint32_t>{0, 1});
  CHECK(r.scores[0] == 2.0);
}

TEST_CASE("combined matches rank-sum enumeration") {
  auto e = test::gaussian(50, 5, 5);
  auto c = test::gaussian(50, 3, 6);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  std::vector<double> de, dc;
  for (std::uint32_t i = 0; i < 50; ++i)
    for (std::uint32_t j = i + 1; j < 50; ++j) {
      pairs.emplace_back(i, j);
      de.push_back(test::naive_distance(e.row(i), e.row(j), DistanceMetric::cosine));
      dc.push_back(test::naive_distance(c.row(i), c.row(j), DistanceMetric::euclidean));
    }
  const std::size_t p = pairs.size();
  std::vector<std::size_t> rc(p), re(p);
  // rank = 1 + number of pairs strictly ahead, plus earlier pairs with equal value
  for (std::size_t a = 0; a < p; ++a) {
    rc[a] = re[a] = 1;
    for (std::size_t b = 0; b < p; ++b) {
      rc[a] += dc[b] < dc[a] || (dc[b] == dc[a] && b < a);
      re[a] += de[b] > de[a] || (de[b] == de[a] && b < a);
    }
  }
  for (bool top : {true, false}) {
    std::vector<std::size_t> idx(p);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return top ? rc[a] + re[a] < rc[b] + re[b] : rc[a] + re[a] > rc[b] + re[b];
    });
    auto r = select_combined(e, c, DistanceMetric::cosine, DistanceMetric::euclidean, 25, top);
    REQUIRE(r.tuples.size() == 25);
    for (std::size_t t = 0; t < 25; ++t) {
      CHECK(r.tuples[t] == std::vector<std::uint32_t>{pairs[idx[t]].first, pairs[idx[t]].second});
      CHECK(r.scores[t] == static_cast<double>(rc[idx[t]] + re[idx[t]]));
    }
  }
  auto same = select_combined(e, e, DistanceMetric::cosine, DistanceMetric::cosine, 30, true);
  std::set<std::vector<std::uint32_t>> uniq(same.tuples.begin(), same.tuples.end());
  CHECK(uniq.size() == 30);
  CHECK(select_combined(e, e, DistanceMetric::cosine, DistanceMetric::cosine, 30, true).tuples == same.tuples);
  CHECK_THROWS_AS(select_combined(e, test::gaussian(49, 3, 1), DistanceMetric::cosine, DistanceMetric::cosine, 1, true),
                  Error);
}

TEST_CASE("triples") {
  auto three = test::gaussian(3, 4, 7);
  auto one = select_triples(three, Direction::max, 1);
  CHECK(one.tuples == Tuples{{0, 1, 2}});

  auto e = test::gaussian(80, 6, 8);
  for (auto dir : {Direction::max, Direction::min}) {
    auto r = select_triples(e, dir, 30);
    CHECK(r.tuples == as_tuples(test::brute_force(e, 3, DistanceMetric::cosine, Reducer::sum, dir, 30)));
    auto mined = mine_triples(e, DistanceMetric::cosine, Reducer::sum, dir, 30, {{}, true, 0});
    for (std::size_t t = 0; t < 30; ++t) {
      CHECK(r.tuples[t] == mined.entries[t].indices);
      CHECK(r.scores[t] == mined.entries[t].score);
    }
  }
}

TEST_CASE("pairing manifest") {
  SelectionResult r;
  for (std::uint32_t i = 0; i < 10000; ++i) r.tuples.push_back({i, i + 1});
  auto rows = pairing_manifest(r, 20, 5);
  CHECK(rows.size() == 200000);
  CHECK(rows[21].tuple_index == 1);
  CHECK(rows[21].sample_index == 1);
  CHECK(rows[21].tuple == std::vector<std::uint32_t>{1, 2});
  std::set<std::uint64_t> seeds;
  for (const auto& row : rows) seeds.insert(row.seed);
  CHECK(seeds.size() == rows.size());

  SelectionResult single;
  single.tuples = {{3, 9}};
  auto m1 = pairing_manifest(single, 1, 42);
  REQUIRE(m1.size() == 1);
  auto m2 = pairing_manifest(single, 1, 42);
  CHECK(m1[0].seed == m2[0].seed);
  CHECK(pairing_manifest(single, 1, 43)[0].seed != m1[0].seed);
  CHECK_THROWS_AS(pairing_manifest(single, 0, 1), Error);
}

}

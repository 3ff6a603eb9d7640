#include "scoremix/class_selection.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "scoremix/alignment_metrics.hpp"
#include "scoremix/error.hpp"
#include "scoremix/rng.hpp"

namespace smx {
namespace {

constexpr std::pair<Strategy, std::string_view> kNames[] = {
    {Strategy::random, "random"},
    {Strategy::close_embed, "close_embed"},
    {Strategy::dist_embed, "dist_embed"},
    {Strategy::close_cond, "close_cond"},
    {Strategy::dist_cond, "dist_cond"},
    {Strategy::combined_top, "combined_top"},
    {Strategy::combined_worst, "combined_worst"},
    {Strategy::triples_sum_max, "triples_sum_max"},
    {Strategy::triples_sum_min, "triples_sum_min"},
};

double mean_tuple_distance(const DistanceGeometry& g, const std::vector<std::vector<std::uint32_t>>& tuples) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& t : tuples) {
    for (std::size_t a = 0; a < t.size(); ++a) {
      for (std::size_t b = a + 1; b < t.size(); ++b) {
        total += g.distance(t[a], t[b]);
        ++count;
      }
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

void attach_means(SelectionResult& r, const EmbeddingMatrix& embed, const EmbeddingMatrix* conditions,
                  const SelectionSpec& spec) {
  r.mean_embed_distance = mean_tuple_distance(DistanceGeometry(embed, spec.metric_embed), r.tuples);
  if (conditions) r.mean_cond_distance = mean_tuple_distance(DistanceGeometry(*conditions, spec.metric_cond), r.tuples);
}

void require_conditions(const EmbeddingMatrix& embed, const EmbeddingMatrix* conditions, Strategy s) {
  if (needs_conditions(s) && !conditions) {
    throw Error(ErrorCode::invalid_argument, "strategy needs a condition matrix", std::string(to_string(s)));
  }
  if (conditions && conditions->rows() != embed.rows()) {
    throw Error(ErrorCode::invalid_argument, "embeddings and conditions must have the same rows",
                std::to_string(embed.rows()) + " vs " + std::to_string(conditions->rows()));
  }
}

void require_pair_count(std::size_t n, std::size_t count) {
  const std::uint64_t pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  if (n < 2 || count < 1 || count > pairs) {
    throw Error(ErrorCode::out_of_range, "count must be in [1, n(n-1)/2]",
                "count=" + std::to_string(count) + ", pairs=" + std::to_string(pairs));
  }
}

SelectionResult from_report(const MpletReport& report, Strategy strategy) {
  SelectionResult r;
  r.strategy = strategy;
  for (const auto& e : report.entries) {
    r.tuples.push_back(e.indices);
    r.scores.push_back(e.score);
  }
  return r;
}

// (i, j) of the p-th pair in lexicographic order, i < j.
std::pair<std::uint32_t, std::uint32_t> unrank_pair(std::uint64_t p, std::uint64_t n) {
  std::uint64_t i = 0;
  std::uint64_t row = n - 1;
  while (p >= row) {
    p -= row;
    ++i;
    --row;
  }
  return {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i + 1 + p)};
}

}  // namespace

std::string_view to_string(Strategy strategy) {
  for (const auto& [s, name] : kNames) {
    if (s == strategy) return name;
  }
  return "?";
}

Strategy parse_strategy(std::string_view text) {
  for (const auto& [s, name] : kNames) {
    if (name == text) return s;
  }
  throw Error(ErrorCode::invalid_argument, "unknown selection strategy", std::string(text));
}

bool needs_conditions(Strategy s) {
  return s == Strategy::close_cond || s == Strategy::dist_cond || s == Strategy::combined_top ||
         s == Strategy::combined_worst;
}

SelectionResult select_pairs(const EmbeddingMatrix& embed, const EmbeddingMatrix* conditions,
                             const SelectionSpec& spec) {
  require_conditions(embed, conditions, spec.strategy);
  const std::size_t n = embed.rows();
  require_pair_count(n, spec.count);
  SelectionResult r;
  switch (spec.strategy) {
    case Strategy::random: {
      const std::uint64_t pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
      Rng rng(derive_seed(spec.seed, {0x72616e646f6dULL}));
      std::set<std::uint64_t> chosen;
      if (spec.count * 2 > pairs) {
        std::vector<std::uint64_t> all(pairs);
        std::iota(all.begin(), all.end(), std::uint64_t{0});
        for (std::size_t t = 0; t < spec.count; ++t) {
          std::uniform_int_distribution<std::uint64_t> pick(t, pairs - 1);
          std::swap(all[t], all[pick(rng)]);
          chosen.insert(all[t]);
        }
      } else {
        std::uniform_int_distribution<std::uint64_t> pick(0, pairs - 1);
        while (chosen.size() < spec.count) chosen.insert(pick(rng));
      }
      const DistanceGeometry g(embed, spec.metric_embed);
      r.strategy = Strategy::random;
      for (auto p : chosen) {
        const auto [i, j] = unrank_pair(p, n);
        r.tuples.push_back({i, j});
        r.scores.push_back(g.distance(i, j));
      }
      break;
    }
    case Strategy::close_embed:
    case Strategy::dist_embed: {
      const auto dir = spec.strategy == Strategy::dist_embed ? Direction::max : Direction::min;
      r = from_report(mine_pairs(embed, spec.metric_embed, dir, spec.count, 512, spec.workers), spec.strategy);
      break;
    }
    case Strategy::close_cond:
    case Strategy::dist_cond: {
      const auto dir = spec.strategy == Strategy::dist_cond ? Direction::max : Direction::min;
      r = from_report(mine_pairs(*conditions, spec.metric_cond, dir, spec.count, 512, spec.workers), spec.strategy);
      break;
    }
    case Strategy::combined_top:
    case Strategy::combined_worst:
      return select_combined(embed, *conditions, spec.metric_embed, spec.metric_cond, spec.count,
                             spec.strategy == Strategy::combined_top, spec.workers);
    case Strategy::triples_sum_max:
    case Strategy::triples_sum_min:
      throw Error(ErrorCode::invalid_argument, "triple strategy passed to pair selection", std::string(to_string(spec.strategy)));
  }
  attach_means(r, embed, conditions, spec);
  return r;
}

SelectionResult select_combined(const EmbeddingMatrix& embed, const EmbeddingMatrix& conditions,
                                DistanceMetric metric_embed, DistanceMetric metric_cond, std::size_t count,
                                bool top, std::size_t) {
  if (embed.rows() != conditions.rows()) {
    throw Error(ErrorCode::invalid_argument, "embeddings and conditions must have the same rows",
                std::to_string(embed.rows()) + " vs " + std::to_string(conditions.rows()));
  }
  require_pair_count(embed.rows(), count);
  const auto lists = distance_correlation_lists(embed, conditions, metric_embed, metric_cond);
  const std::size_t pairs = lists.e.size();
  std::vector<std::uint32_t> order(pairs);
  std::vector<std::uint64_t> rank_sum(pairs, 0);

  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return lists.c[a] < lists.c[b]; });
  for (std::size_t r = 0; r < pairs; ++r) rank_sum[order[r]] += r + 1;
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return lists.e[a] > lists.e[b]; });
  for (std::size_t r = 0; r < pairs; ++r) rank_sum[order[r]] += r + 1;

  std::iota(order.begin(), order.end(), 0u);
  auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (rank_sum[a] != rank_sum[b]) return top ? rank_sum[a] < rank_sum[b] : rank_sum[a] > rank_sum[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(), better);

  SelectionResult r;
  r.strategy = top ? Strategy::combined_top : Strategy::combined_worst;
  double se = 0.0, sc = 0.0;
  for (std::size_t t = 0; t < count; ++t) {
    const auto p = order[t];
    r.tuples.push_back({lists.pair_index[p].first, lists.pair_index[p].second});
    r.scores.push_back(static_cast<double>(rank_sum[p]));
    se += lists.e[p];
    sc += lists.c[p];
  }
  r.mean_embed_distance = se / static_cast<double>(count);
  r.mean_cond_distance = sc / static_cast<double>(count);
  return r;
}

SelectionResult select_triples(const EmbeddingMatrix& embed, Direction direction, std::size_t count,
                               std::size_t workers) {
  TripleOptions opts;
  opts.exact_merge = true;
  opts.workers = workers;
  const auto report = mine_triples(embed, DistanceMetric::cosine, Reducer::sum, direction, count, opts);
  SelectionResult r = from_report(report, direction == Direction::max ? Strategy::triples_sum_max : Strategy::triples_sum_min);
  r.mean_embed_distance = mean_tuple_distance(DistanceGeometry(embed, DistanceMetric::cosine), r.tuples);
  return r;
}

SelectionResult select_classes(const EmbeddingMatrix& embed, const EmbeddingMatrix* conditions,
                               const SelectionSpec& spec) {
  if (spec.strategy == Strategy::triples_sum_max || spec.strategy == Strategy::triples_sum_min) {
    require_conditions(embed, conditions, spec.strategy);
    SelectionResult r = select_triples(
        embed, spec.strategy == Strategy::triples_sum_max ? Direction::max : Direction::min, spec.count, spec.workers);
    attach_means(r, embed, conditions, SelectionSpec{spec.strategy, DistanceMetric::cosine, spec.metric_cond});
    return r;
  }
  return select_pairs(embed, conditions, spec);
}

std::vector<ManifestRow> pairing_manifest(const SelectionResult& result, std::size_t samples_per_pair,
                                          std::uint64_t seed) {
  if (samples_per_pair < 1) throw Error(ErrorCode::invalid_argument, "samples_per_pair must be >= 1");
  std::vector<ManifestRow> rows;
  rows.reserve(result.tuples.size() * samples_per_pair);
  for (std::size_t p = 0; p < result.tuples.size(); ++p) {
    for (std::size_t s = 0; s < samples_per_pair; ++s) {
      rows.push_back({p, result.tuples[p], s, derive_seed(seed, {p, s})});
    }
  }
  return rows;
}

}  // namespace smx

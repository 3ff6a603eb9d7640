#include "scoremix/mplet_miner.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_set>

#include "scoremix/error.hpp"
#include "scoremix/kernels.hpp"
#include "scoremix/parallel.hpp"
#include "scoremix/rng.hpp"

namespace smx {
namespace {

using Tuple = std::array<std::uint32_t, 4>;  // sorted indices, unused slots 0

struct Candidate {
  double score = 0.0;
  Tuple idx{};
};

struct RanksBefore {
  Direction direction;
  bool operator()(const Candidate& a, const Candidate& b) const {
    if (a.score != b.score) return direction == Direction::max ? a.score > b.score : a.score < b.score;
    return a.idx < b.idx;
  }
};

struct TupleHash {
  std::size_t operator()(const Tuple& t) const noexcept {
    std::uint64_t h = 0;
    for (auto v : t) h = mix64(h ^ v);
    return static_cast<std::size_t>(h);
  }
};

// Bounded best-K set. The heap front is the worst retained candidate.
class TopK {
 public:
  TopK(std::size_t k, Direction direction) : k_(k), order_{direction} { heap_.reserve(std::min<std::size_t>(k, 1 << 16)); }

  bool full() const { return heap_.size() >= k_; }
  const Candidate& worst() const { return heap_.front(); }
  bool admits(const Candidate& c) const { return !full() || order_(c, heap_.front()); }

  void offer(const Candidate& c) {
    if (!admits(c)) return;
    if (!seen_.insert(c.idx).second) return;
    if (full()) {
      std::pop_heap(heap_.begin(), heap_.end(), order_);
      seen_.erase(heap_.back().idx);
      heap_.back() = c;
    } else {
      heap_.push_back(c);
    }
    std::push_heap(heap_.begin(), heap_.end(), order_);
  }

  void absorb(const TopK& other) {
    for (const auto& c : other.heap_) offer(c);
  }

  std::vector<Candidate> sorted() const {
    std::vector<Candidate> out = heap_;
    std::sort(out.begin(), out.end(), order_);
    return out;
  }

 private:
  std::size_t k_;
  RanksBefore order_;
  std::vector<Candidate> heap_;
  std::unordered_set<Tuple, TupleHash> seen_;
};

Tuple sorted_triple(std::size_t a, std::size_t b, std::size_t c) {
  std::array<std::uint32_t, 3> v{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                                 static_cast<std::uint32_t>(c)};
  std::sort(v.begin(), v.end());
  return {v[0], v[1], v[2], 0};
}

std::vector<MpletEntry> to_entries(const std::vector<Candidate>& list, std::size_t m) {
  std::vector<MpletEntry> out;
  out.reserve(list.size());
  for (const auto& c : list) out.push_back({{c.idx.begin(), c.idx.begin() + m}, c.score});
  return out;
}

std::size_t pair_count(std::size_t m) { return m * (m - 1) / 2; }

std::uint64_t choose3(std::uint64_t n) { return n < 3 ? 0 : n * (n - 1) / 2 * (n - 2) / 3; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct WorkerClock {
  std::size_t tiles = 0;
  std::uint64_t evaluations = 0;
  double tmin = std::numeric_limits<double>::infinity();
  double tmax = 0.0;
  double tsum = 0.0;

  void add_tile(double s) {
    ++tiles;
    tmin = std::min(tmin, s);
    tmax = std::max(tmax, s);
    tsum += s;
  }
};

void fill_stats(MinerStats& stats, const std::vector<WorkerClock>& clocks, std::size_t workers, double seconds) {
  stats.isa = std::string(kernels::to_string(kernels::active().isa));
  stats.workers = workers;
  stats.seconds = seconds;
  double tmin = std::numeric_limits<double>::infinity(), tmax = 0.0, tsum = 0.0;
  for (const auto& c : clocks) {
    stats.tiles += c.tiles;
    stats.evaluations += c.evaluations;
    tmin = std::min(tmin, c.tmin);
    tmax = std::max(tmax, c.tmax);
    tsum += c.tsum;
  }
  if (stats.tiles > 0) {
    stats.tile_seconds_min = tmin;
    stats.tile_seconds_max = tmax;
    stats.tile_seconds_mean = tsum / static_cast<double>(stats.tiles);
  }
  stats.evaluations_per_second = seconds > 0.0 ? static_cast<double>(stats.evaluations) / seconds : 0.0;
}

double pair_score(double d, Reducer reducer) { return reducer == Reducer::std ? 0.0 : d; }

}  // namespace

std::string_view to_string(Exactness exactness) {
  switch (exactness) {
    case Exactness::exact: return "exact";
    case Exactness::column_exact: return "column_exact";
    case Exactness::greedy: return "greedy";
  }
  return "?";
}

bool ranks_before(double score_a, std::span<const std::uint32_t> a, double score_b,
                  std::span<const std::uint32_t> b, Direction direction) {
  if (score_a != score_b) return direction == Direction::max ? score_a > score_b : score_a < score_b;
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

double reduce_scores(std::span<const double> distances, Reducer reducer) {
  std::size_t m = 2;
  while (pair_count(m) < distances.size()) ++m;
  if (distances.empty() || pair_count(m) != distances.size()) {
    throw Error(ErrorCode::invalid_argument, "distance list length must be C(m,2) for some m >= 2",
                "length " + std::to_string(distances.size()));
  }
  std::array<double, 16> small{};
  std::vector<double> large;
  double* v = small.data();
  if (distances.size() > small.size()) {
    large.assign(distances.begin(), distances.end());
    v = large.data();
  } else {
    std::copy(distances.begin(), distances.end(), small.begin());
  }
  const std::size_t len = distances.size();
  std::sort(v, v + len);
  switch (reducer) {
    case Reducer::min: return v[0];
    case Reducer::max: return v[len - 1];
    case Reducer::sum:
    case Reducer::mean:
    case Reducer::std: {
      double sum = v[0];
      for (std::size_t t = 1; t < len; ++t) sum = sum + v[t];
      if (reducer == Reducer::sum) return sum;
      const double mean = sum / static_cast<double>(len);
      if (reducer == Reducer::mean) return mean;
      double ss = (v[0] - mean) * (v[0] - mean);
      for (std::size_t t = 1; t < len; ++t) ss = ss + (v[t] - mean) * (v[t] - mean);
      return std::sqrt(ss / static_cast<double>(len));
    }
  }
  return 0.0;
}

double score_mplet(const DistanceGeometry& geometry, std::span<const std::uint32_t> indices, Reducer reducer) {
  std::vector<double> d;
  d.reserve(pair_count(indices.size()));
  for (std::size_t a = 0; a < indices.size(); ++a) {
    for (std::size_t b = a + 1; b < indices.size(); ++b) d.push_back(geometry.distance(indices[a], indices[b]));
  }
  return reduce_scores(d, reducer);
}

MpletReport mine_pairs(const EmbeddingMatrix& e, DistanceMetric metric, Direction direction,
                       std::size_t top_k, std::size_t block, std::size_t workers, Reducer reducer) {
  const std::size_t n = e.rows();
  if (n < 2) throw Error(ErrorCode::invalid_argument, "pair mining needs at least 2 items", "n=" + std::to_string(n));
  const std::uint64_t available = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  if (top_k < 1 || top_k > available) {
    throw Error(ErrorCode::out_of_range, "top_k must be in [1, n(n-1)/2]",
                "top_k=" + std::to_string(top_k) + ", pairs=" + std::to_string(available));
  }
  if (block < 1) throw Error(ErrorCode::invalid_argument, "block size must be >= 1");

  const auto t0 = std::chrono::steady_clock::now();
  const DistanceGeometry geometry(e, metric);
  const std::size_t nb = (n + block - 1) / block;
  std::vector<std::pair<std::size_t, std::size_t>> tiles;
  for (std::size_t a = 0; a < nb; ++a) {
    for (std::size_t b = a; b < nb; ++b) tiles.emplace_back(a, b);
  }
  workers = std::min(resolve_workers(workers), tiles.size());
  std::vector<TopK> local(workers, TopK(top_k, direction));
  std::vector<WorkerClock> clocks(workers);
  std::vector<std::vector<double>> buffers(workers);
  const RanksBefore order{direction};

  parallel_for(tiles.size(), workers, [&](std::size_t item, std::size_t w) {
    const auto tt = std::chrono::steady_clock::now();
    const auto [a, b] = tiles[item];
    const IndexRange rows{a * block, std::min(n, (a + 1) * block)};
    const IndexRange cols{b * block, std::min(n, (b + 1) * block)};
    auto& buf = buffers[w];
    buf.resize(rows.size() * cols.size());
    geometry.block(rows, cols, buf.data(), cols.size());
    auto& top = local[w];
    std::uint64_t evals = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::size_t i = rows.begin + r;
      const std::size_t c0 = a == b ? r + 1 : 0;
      for (std::size_t c = c0; c < cols.size(); ++c) {
        Candidate cand{pair_score(buf[r * cols.size() + c], reducer),
                       {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(cols.begin + c), 0, 0}};
        if (top.full() && !order(cand, top.worst())) continue;
        top.offer(cand);
      }
      evals += cols.size() - c0;
    }
    clocks[w].evaluations += evals;
    clocks[w].add_tile(seconds_since(tt));
  });

  TopK global(top_k, direction);
  for (const auto& l : local) global.absorb(l);

  MpletReport report;
  report.m = 2;
  report.direction = direction;
  report.metric = metric;
  report.reducer = reducer;
  report.top_k = top_k;
  report.entries = to_entries(global.sorted(), 2);
  report.exactness = Exactness::exact;
  report.tiling = {block, block, block, 1};
  fill_stats(report.stats, clocks, workers, seconds_since(t0));
  report.stats.columns = n - 1;
  return report;
}

namespace {

struct ColumnRecord {
  std::uint32_t i;
  std::uint32_t j;
  Candidate mth;  // the last candidate the column emitted
};

// Best `limit` completions k of column (i, j), best first; ties by lower k,
// which is lexicographic order of the sorted triple.
void column_best(const double* scores, std::size_t n, std::size_t i, std::size_t j, std::size_t limit,
                 Direction direction, std::vector<std::uint32_t>& ks) {
  ks.clear();
  for (std::size_t k = 0; k < n; ++k) {
    if (k != i && k != j) ks.push_back(static_cast<std::uint32_t>(k));
  }
  limit = std::min(limit, ks.size());
  auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return direction == Direction::max ? scores[a] > scores[b] : scores[a] < scores[b];
    return a < b;
  };
  std::partial_sort(ks.begin(), ks.begin() + static_cast<std::ptrdiff_t>(limit), ks.end(), better);
  ks.resize(limit);
}

}  // namespace

MpletReport mine_triples(const EmbeddingMatrix& e, DistanceMetric metric, Reducer reducer,
                         Direction direction, std::size_t top_k, const TripleOptions& options) {
  const std::size_t n = e.rows();
  const Tiling& tiling = options.tiling;
  if (n < 3) throw Error(ErrorCode::invalid_argument, "triple mining needs at least 3 items", "n=" + std::to_string(n));
  if (tiling.tile_i < 1 || tiling.tile_j < 1 || tiling.columns_per_batch < 1 || tiling.candidates_per_column < 1) {
    throw Error(ErrorCode::invalid_argument, "tile sizes, columns per batch and M must all be >= 1",
                "tile_i=" + std::to_string(tiling.tile_i) + " tile_j=" + std::to_string(tiling.tile_j) +
                    " cols_per_batch=" + std::to_string(tiling.columns_per_batch) +
                    " M=" + std::to_string(tiling.candidates_per_column));
  }
  if (n > std::numeric_limits<std::uint32_t>::max()) throw Error(ErrorCode::out_of_range, "too many items");
  const std::uint64_t available = choose3(n);
  if (top_k < 1 || top_k > available) {
    throw Error(ErrorCode::out_of_range, "top_k must be in [1, C(n,3)]",
                "top_k=" + std::to_string(top_k) + ", triples=" + std::to_string(available));
  }

  const auto t0 = std::chrono::steady_clock::now();
  const DistanceGeometry geometry(e, metric);
  const auto& kern = kernels::active();
  const bool maximize = direction == Direction::max;
  const double sentinel = maximize ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  const std::size_t ti = tiling.tile_i;
  const std::size_t tj = tiling.tile_j;
  const std::size_t per_column = tiling.candidates_per_column;
  const RanksBefore order{direction};

  std::vector<std::pair<std::size_t, std::size_t>> tiles;
  for (std::size_t a = 0; a * ti < n; ++a) {
    for (std::size_t b = 0; b * tj < n; ++b) {
      const std::size_t j_end = std::min(n, (b + 1) * tj);
      if (a * ti + 1 < j_end) tiles.emplace_back(a, b);
    }
  }
  const std::size_t workers = std::min(resolve_workers(options.workers), tiles.size());

  struct Worker {
    std::vector<double> di, dj, scores;
    std::vector<std::uint32_t> ks;
    std::vector<Candidate> batch;
    std::vector<ColumnRecord> records;
    std::size_t columns = 0;
  };
  std::vector<Worker> state(workers);
  std::vector<TopK> local(workers, TopK(top_k, direction));
  std::vector<WorkerClock> clocks(workers);

  parallel_for(tiles.size(), workers, [&](std::size_t item, std::size_t w) {
    const auto tt = std::chrono::steady_clock::now();
    const auto [a, b] = tiles[item];
    const IndexRange rows{a * ti, std::min(n, (a + 1) * ti)};
    const IndexRange cols{b * tj, std::min(n, (b + 1) * tj)};
    Worker& ws = state[w];
    TopK& top = local[w];
    ws.di.resize(rows.size() * n);
    ws.dj.resize(cols.size() * n);
    ws.scores.resize(n);
    geometry.block(rows, {0, n}, ws.di.data(), n);
    geometry.block(cols, {0, n}, ws.dj.data(), n);

    auto flush = [&] {
      for (const auto& c : ws.batch) top.offer(c);
      ws.batch.clear();
    };
    std::size_t in_batch = 0;
    std::uint64_t evals = 0;
    for (std::size_t i = rows.begin; i < rows.end; ++i) {
      const double* dri = ws.di.data() + (i - rows.begin) * n;
      for (std::size_t j = std::max(cols.begin, i + 1); j < cols.end; ++j) {
        const double* drj = ws.dj.data() + (j - cols.begin) * n;
        double* s = ws.scores.data();
        kern.score_triple_column(dri[j], dri, drj, n, reducer, s);
        s[i] = sentinel;
        s[j] = sentinel;
        evals += n - 2;
        ++ws.columns;

        Candidate last;
        if (per_column == 1) {
          const std::size_t k = kern.arg_best(s, n, maximize);
          last = {s[k], sorted_triple(i, j, k)};
          ws.batch.push_back(last);
        } else {
          column_best(s, n, i, j, per_column, direction, ws.ks);
          for (auto k : ws.ks) ws.batch.push_back({s[k], sorted_triple(i, j, k)});
          last = ws.batch.back();
        }
        if (n - 2 > per_column && (!top.full() || order(last, top.worst()))) {
          ws.records.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), last});
        }
        if (++in_batch == tiling.columns_per_batch) {
          flush();
          in_batch = 0;
        }
      }
    }
    flush();
    clocks[w].evaluations += evals;
    clocks[w].add_tile(seconds_since(tt));
  });

  TopK global(top_k, direction);
  for (const auto& l : local) global.absorb(l);
  std::vector<Candidate> ranked = global.sorted();

  // A column whose M-th candidate still beats the K-th entry may hold more
  // qualifying triples than it emitted.
  auto saturated_columns = [&](const std::vector<Candidate>& list) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> cols;
    const bool has_threshold = list.size() == top_k;
    for (const auto& ws : state) {
      for (const auto& r : ws.records) {
        if (!has_threshold || order(r.mth, list.back())) cols.emplace_back(r.i, r.j);
      }
    }
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    return cols;
  };
  const auto saturated = saturated_columns(ranked);

  MpletReport report;
  report.m = 3;
  report.direction = direction;
  report.metric = metric;
  report.reducer = reducer;
  report.top_k = top_k;
  report.tiling = tiling;
  report.exactness = saturated.empty() ? Exactness::exact : Exactness::column_exact;
  report.stats.saturated_columns = saturated.size();

  if (options.exact_merge && !saturated.empty()) {
    std::vector<TopK> extra(workers, TopK(top_k, direction));
    struct Scratch {
      std::vector<double> rows, scores;
      std::vector<std::uint32_t> ks;
    };
    std::vector<Scratch> scratch(workers);
    parallel_for(saturated.size(), workers, [&](std::size_t item, std::size_t w) {
      const auto [i, j] = saturated[item];
      Scratch& sc = scratch[w];
      sc.rows.resize(2 * n);
      sc.scores.resize(n);
      geometry.block({i, i + 1u}, {0, n}, sc.rows.data(), n);
      geometry.block({j, j + 1u}, {0, n}, sc.rows.data() + n, n);
      kern.score_triple_column(sc.rows[j], sc.rows.data(), sc.rows.data() + n, n, reducer, sc.scores.data());
      column_best(sc.scores.data(), n, i, j, top_k, direction, sc.ks);
      for (auto k : sc.ks) extra[w].offer({sc.scores[k], sorted_triple(i, j, k)});
      clocks[w].evaluations += n - 2;
    });
    for (const auto& x : extra) global.absorb(x);
    ranked = global.sorted();
    report.exactness = Exactness::exact;
    report.stats.remined_columns = saturated.size();
  }

  report.entries = to_entries(ranked, 3);
  fill_stats(report.stats, clocks, workers, seconds_since(t0));
  for (const auto& ws : state) report.stats.columns += ws.columns;
  return report;
}

MpletReport expand_quads(const MpletReport& triples, const EmbeddingMatrix& e, DistanceMetric metric,
                         Reducer reducer, Direction direction) {
  if (triples.m != 3) {
    throw Error(ErrorCode::invalid_argument, "quad expansion needs a triple report", "m=" + std::to_string(triples.m));
  }
  const std::size_t n = e.rows();
  if (n < 4) throw Error(ErrorCode::invalid_argument, "quad expansion needs at least 4 items", "n=" + std::to_string(n));

  const auto t0 = std::chrono::steady_clock::now();
  const DistanceGeometry geometry(e, metric);
  const RanksBefore order{direction};
  std::vector<Candidate> quads(triples.entries.size());

  parallel_for(triples.entries.size(), 0, [&](std::size_t t, std::size_t) {
    const auto& idx = triples.entries[t].indices;
    if (idx.size() != 3) throw Error(ErrorCode::invalid_argument, "malformed triple entry", "entry " + std::to_string(t));
    for (auto v : idx) {
      if (v >= n) throw Error(ErrorCode::out_of_range, "triple index exceeds item count", "index " + std::to_string(v));
    }
    const std::uint32_t a = idx[0], b = idx[1], c = idx[2];
    std::array<double, 6> d{geometry.distance(a, b), geometry.distance(a, c), geometry.distance(b, c), 0, 0, 0};
    bool have = false;
    Candidate best;
    for (std::size_t l = 0; l < n; ++l) {
      if (l == a || l == b || l == c) continue;
      d[3] = geometry.distance(a, l);
      d[4] = geometry.distance(b, l);
      d[5] = geometry.distance(c, l);
      Candidate cand{reduce_scores(d, reducer), {a, b, c, static_cast<std::uint32_t>(l)}};
      std::sort(cand.idx.begin(), cand.idx.end());
      if (!have || order(cand, best)) {
        best = cand;
        have = true;
      }
    }
    quads[t] = best;
  });

  std::sort(quads.begin(), quads.end(), order);
  quads.erase(std::unique(quads.begin(), quads.end(), [](const Candidate& x, const Candidate& y) { return x.idx == y.idx; }),
              quads.end());

  MpletReport report;
  report.m = 4;
  report.direction = direction;
  report.metric = metric;
  report.reducer = reducer;
  report.top_k = triples.top_k;
  report.tiling = triples.tiling;
  report.exactness = Exactness::greedy;
  report.entries = to_entries(quads, 4);
  report.stats.isa = std::string(kernels::to_string(kernels::active().isa));
  report.stats.workers = resolve_workers(0);
  report.stats.columns = triples.entries.size();
  report.stats.evaluations = static_cast<std::uint64_t>(triples.entries.size()) * (n - 3);
  report.stats.seconds = seconds_since(t0);
  return report;
}

VerificationReport verify_stochastic(const EmbeddingMatrix& e, const MpletReport& report,
                                     std::size_t samples, std::uint64_t seed) {
  const std::size_t n = e.rows();
  const std::size_t m = report.m;
  if (m < 2 || m > 4 || n < m) {
    throw Error(ErrorCode::invalid_argument, "report m must be in {2,3,4} and not exceed n",
                "m=" + std::to_string(m) + " n=" + std::to_string(n));
  }
  if (report.entries.empty()) throw Error(ErrorCode::invalid_argument, "report has no entries");
  if (samples < 1) throw Error(ErrorCode::invalid_argument, "samples must be >= 1");

  std::unordered_set<Tuple, TupleHash> known;
  for (std::size_t r = 0; r < report.entries.size(); ++r) {
    const auto& idx = report.entries[r].indices;
    bool ok = idx.size() == m;
    for (std::size_t t = 0; ok && t < m; ++t) ok = idx[t] < n && (t == 0 || idx[t - 1] < idx[t]);
    if (!ok) throw Error(ErrorCode::invalid_argument, "malformed report entry", "rank " + std::to_string(r + 1));
    Tuple key{};
    std::copy(idx.begin(), idx.end(), key.begin());
    known.insert(key);
  }

  const DistanceGeometry geometry(e, report.metric);
  const auto& first = report.entries.front();
  const auto& kth = report.entries.back();
  Rng rng(derive_seed(seed, {0x766572696679ULL, m}));
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));

  VerificationReport out;
  out.samples = samples;
  std::array<std::uint32_t, 4> draw{};
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t t = 0; t < m; ++t) {
      std::uint32_t v;
      do {
        v = pick(rng);
      } while (std::find(draw.begin(), draw.begin() + static_cast<std::ptrdiff_t>(t), v) != draw.begin() + static_cast<std::ptrdiff_t>(t));
      draw[t] = v;
    }
    std::sort(draw.begin(), draw.begin() + static_cast<std::ptrdiff_t>(m));
    const std::span<const std::uint32_t> set(draw.data(), m);
    const double score = score_mplet(geometry, set, report.reducer);
    if (ranks_before(score, set, first.score, first.indices, report.direction)) ++out.top1_violations;
    if (ranks_before(score, set, kth.score, kth.indices, report.direction)) {
      ++out.exceedances_total;
      Tuple key{};
      std::copy(set.begin(), set.end(), key.begin());
      if (known.count(key)) {
        ++out.exceedances_known;
      } else {
        ++out.exceedances_new;
        out.worst_exceedance_margin = std::max(out.worst_exceedance_margin, std::abs(score - kth.score));
      }
    }
  }
  return out;
}

}  // namespace smx

#include <immintrin.h>

#include <cmath>

#include "kernel_math.hpp"
#include "scoremix/kernels.hpp"

// std::min(p, q) is (q < p) ? q : p and std::max(p, q) is (p < q) ? q : p.
// _mm256_min_pd(a, b) is (a < b) ? a : b, so the scalar forms map to
// _mm256_min_pd(q, p) / _mm256_max_pd(q, p). Operands below are ordered to
// match the reference kernels bit for bit, signed zeros included.

namespace smx::kernels {
namespace {

void dot_block_avx2(const double* a, std::size_t a_rows, std::size_t lda, const double* bt,
                    std::size_t ldbt, std::size_t b_cols, std::size_t depth, double* out,
                    std::size_t ldo) {
  std::size_t r = 0;
  for (; r + 4 <= a_rows; r += 4) {
    const double* a0 = a + (r + 0) * lda;
    const double* a1 = a + (r + 1) * lda;
    const double* a2 = a + (r + 2) * lda;
    const double* a3 = a + (r + 3) * lda;
    std::size_t c = 0;
    for (; c + 8 <= b_cols; c += 8) {
      __m256d s00 = _mm256_setzero_pd(), s01 = _mm256_setzero_pd();
      __m256d s10 = _mm256_setzero_pd(), s11 = _mm256_setzero_pd();
      __m256d s20 = _mm256_setzero_pd(), s21 = _mm256_setzero_pd();
      __m256d s30 = _mm256_setzero_pd(), s31 = _mm256_setzero_pd();
      for (std::size_t t = 0; t < depth; ++t) {
        const double* bp = bt + t * ldbt + c;
        const __m256d b0 = _mm256_loadu_pd(bp);
        const __m256d b1 = _mm256_loadu_pd(bp + 4);
        __m256d av = _mm256_broadcast_sd(a0 + t);
        s00 = _mm256_add_pd(s00, _mm256_mul_pd(av, b0));
        s01 = _mm256_add_pd(s01, _mm256_mul_pd(av, b1));
        av = _mm256_broadcast_sd(a1 + t);
        s10 = _mm256_add_pd(s10, _mm256_mul_pd(av, b0));
        s11 = _mm256_add_pd(s11, _mm256_mul_pd(av, b1));
        av = _mm256_broadcast_sd(a2 + t);
        s20 = _mm256_add_pd(s20, _mm256_mul_pd(av, b0));
        s21 = _mm256_add_pd(s21, _mm256_mul_pd(av, b1));
        av = _mm256_broadcast_sd(a3 + t);
        s30 = _mm256_add_pd(s30, _mm256_mul_pd(av, b0));
        s31 = _mm256_add_pd(s31, _mm256_mul_pd(av, b1));
      }
      double* o = out + r * ldo + c;
      _mm256_storeu_pd(o, s00);
      _mm256_storeu_pd(o + 4, s01);
      _mm256_storeu_pd(o + ldo, s10);
      _mm256_storeu_pd(o + ldo + 4, s11);
      _mm256_storeu_pd(o + 2 * ldo, s20);
      _mm256_storeu_pd(o + 2 * ldo + 4, s21);
      _mm256_storeu_pd(o + 3 * ldo, s30);
      _mm256_storeu_pd(o + 3 * ldo + 4, s31);
    }
    for (; c < b_cols; ++c) {
      for (std::size_t q = 0; q < 4; ++q) {
        const double* ar = a + (r + q) * lda;
        double acc = 0.0;
        for (std::size_t t = 0; t < depth; ++t) acc += ar[t] * bt[t * ldbt + c];
        out[(r + q) * ldo + c] = acc;
      }
    }
  }
  for (; r < a_rows; ++r) {
    const double* ar = a + r * lda;
    std::size_t c = 0;
    for (; c + 4 <= b_cols; c += 4) {
      __m256d s = _mm256_setzero_pd();
      for (std::size_t t = 0; t < depth; ++t) {
        s = _mm256_add_pd(s, _mm256_mul_pd(_mm256_broadcast_sd(ar + t),
                                           _mm256_loadu_pd(bt + t * ldbt + c)));
      }
      _mm256_storeu_pd(out + r * ldo + c, s);
    }
    for (; c < b_cols; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < depth; ++t) acc += ar[t] * bt[t * ldbt + c];
      out[r * ldo + c] = acc;
    }
  }
}

void dots_to_distances_avx2(double* block, std::size_t rows, std::size_t cols, std::size_t ld,
                            const double* row_sq, const double* col_sq, DistanceMetric metric) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d two = _mm256_set1_pd(2.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double* br = block + r * ld;
    const __m256d rs = _mm256_set1_pd(row_sq[r]);
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      const __m256d dot = _mm256_loadu_pd(br + c);
      __m256d v = _mm256_sub_pd(_mm256_add_pd(rs, _mm256_loadu_pd(col_sq + c)), _mm256_mul_pd(two, dot));
      v = _mm256_max_pd(zero, v);
      if (metric == DistanceMetric::cosine) {
        v = _mm256_min_pd(two, _mm256_mul_pd(half, v));
      } else if (metric == DistanceMetric::euclidean) {
        v = _mm256_sqrt_pd(v);
      }
      _mm256_storeu_pd(br + c, v);
    }
    for (; c < cols; ++c) br[c] = detail::dot_to_distance(br[c], row_sq[r], col_sq[c], metric);
  }
}

template <Reducer R>
inline __m256d reduce3_avx2(__m256d x, __m256d y, __m256d z) {
  const __m256d lo_xy = _mm256_min_pd(y, x);
  const __m256d hi_xy = _mm256_max_pd(y, x);
  const __m256d lo = _mm256_min_pd(z, lo_xy);
  const __m256d hi = _mm256_max_pd(z, hi_xy);
  if constexpr (R == Reducer::min) {
    return lo;
  } else if constexpr (R == Reducer::max) {
    return hi;
  } else {
    const __m256d mid = _mm256_max_pd(_mm256_min_pd(z, hi_xy), lo_xy);
    const __m256d sum = _mm256_add_pd(_mm256_add_pd(lo, mid), hi);
    if constexpr (R == Reducer::sum) return sum;
    const __m256d three = _mm256_set1_pd(3.0);
    const __m256d m = _mm256_div_pd(sum, three);
    if constexpr (R == Reducer::mean) return m;
    const __m256d a = _mm256_sub_pd(lo, m);
    const __m256d b = _mm256_sub_pd(mid, m);
    const __m256d c = _mm256_sub_pd(hi, m);
    const __m256d ss = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(a, a), _mm256_mul_pd(b, b)),
                                     _mm256_mul_pd(c, c));
    return _mm256_sqrt_pd(_mm256_div_pd(ss, three));
  }
}

template <Reducer R>
void score_column(double d_ij, const double* d_ik, const double* d_jk, std::size_t n, double* out) {
  const __m256d x = _mm256_set1_pd(d_ij);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    _mm256_storeu_pd(out + k, reduce3_avx2<R>(x, _mm256_loadu_pd(d_ik + k), _mm256_loadu_pd(d_jk + k)));
  }
  for (; k < n; ++k) out[k] = detail::reduce3(d_ij, d_ik[k], d_jk[k], R);
}

void score_triple_column_avx2(double d_ij, const double* d_ik, const double* d_jk, std::size_t n,
                              Reducer reducer, double* out) {
  switch (reducer) {
    case Reducer::sum: return score_column<Reducer::sum>(d_ij, d_ik, d_jk, n, out);
    case Reducer::mean: return score_column<Reducer::mean>(d_ij, d_ik, d_jk, n, out);
    case Reducer::std: return score_column<Reducer::std>(d_ij, d_ik, d_jk, n, out);
    case Reducer::min: return score_column<Reducer::min>(d_ij, d_ik, d_jk, n, out);
    case Reducer::max: return score_column<Reducer::max>(d_ij, d_ik, d_jk, n, out);
  }
}

std::size_t arg_best_avx2(const double* values, std::size_t n, bool maximize) {
  if (n < 8) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k) {
      if (maximize ? values[k] > values[best] : values[k] < values[best]) best = k;
    }
    return best;
  }
  // Per-lane running best; strict comparisons keep the earliest index per lane.
  __m256d best = _mm256_loadu_pd(values);
  __m256d best_idx = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
  __m256d idx = best_idx;
  const __m256d step = _mm256_set1_pd(4.0);
  std::size_t k = 4;
  for (; k + 4 <= n; k += 4) {
    idx = _mm256_add_pd(idx, step);
    const __m256d v = _mm256_loadu_pd(values + k);
    const __m256d better = maximize ? _mm256_cmp_pd(v, best, _CMP_GT_OQ) : _mm256_cmp_pd(v, best, _CMP_LT_OQ);
    best = _mm256_blendv_pd(best, v, better);
    best_idx = _mm256_blendv_pd(best_idx, idx, better);
  }
  alignas(32) double lane_val[4];
  alignas(32) double lane_idx[4];
  _mm256_store_pd(lane_val, best);
  _mm256_store_pd(lane_idx, best_idx);
  std::size_t result = static_cast<std::size_t>(lane_idx[0]);
  double result_val = lane_val[0];
  for (int l = 1; l < 4; ++l) {
    const auto li = static_cast<std::size_t>(lane_idx[l]);
    const bool better = maximize ? lane_val[l] > result_val : lane_val[l] < result_val;
    if (better || (lane_val[l] == result_val && li < result)) {
      result = li;
      result_val = lane_val[l];
    }
  }
  for (; k < n; ++k) {
    if (maximize ? values[k] > result_val : values[k] < result_val) {
      result = k;
      result_val = values[k];
    }
  }
  return result;
}

}  // namespace

const KernelTable* avx2_table_impl() {
  static const KernelTable table{Isa::avx2, dot_block_avx2, dots_to_distances_avx2,
                                 score_triple_column_avx2, arg_best_avx2};
  return &table;
}

}  // namespace smx::kernels

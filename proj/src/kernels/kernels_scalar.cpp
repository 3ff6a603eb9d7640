#include "scoremix/kernels.hpp"

#include "kernel_math.hpp"

namespace smx::kernels {
namespace {

void dot_block_scalar(const double* a, std::size_t a_rows, std::size_t lda, const double* bt,
                      std::size_t ldbt, std::size_t b_cols, std::size_t depth, double* out,
                      std::size_t ldo) {
  for (std::size_t r = 0; r < a_rows; ++r) {
    const double* ar = a + r * lda;
    for (std::size_t c = 0; c < b_cols; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < depth; ++t) acc += ar[t] * bt[t * ldbt + c];
      out[r * ldo + c] = acc;
    }
  }
}

void dots_to_distances_scalar(double* block, std::size_t rows, std::size_t cols, std::size_t ld,
                              const double* row_sq, const double* col_sq, DistanceMetric metric) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* br = block + r * ld;
    for (std::size_t c = 0; c < cols; ++c) {
      br[c] = detail::dot_to_distance(br[c], row_sq[r], col_sq[c], metric);
    }
  }
}

void score_triple_column_scalar(double d_ij, const double* d_ik, const double* d_jk,
                                std::size_t n, Reducer reducer, double* out) {
  for (std::size_t k = 0; k < n; ++k) out[k] = detail::reduce3(d_ij, d_ik[k], d_jk[k], reducer);
}

std::size_t arg_best_scalar(const double* values, std::size_t n, bool maximize) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < n; ++k) {
    if (maximize ? values[k] > values[best] : values[k] < values[best]) best = k;
  }
  return best;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::scalar, dot_block_scalar, dots_to_distances_scalar,
                                 score_triple_column_scalar, arg_best_scalar};
  return table;
}

}  // namespace smx::kernels

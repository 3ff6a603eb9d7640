#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference version and
// (on x86-64) an AVX2 version selected at runtime. The SIMD versions perform
// the same floating-point operations in the same order per output element,
// so both paths are bit-identical; tests/test_kernels.cpp checks this.

#include <cstddef>
#include <string_view>

#include "scoremix/types.hpp"

namespace smx::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

struct KernelTable {
  Isa isa;

  // out[r*ldo + c] = sum_t a[r*lda + t] * bt[t*ldbt + c], accumulated in t order.
  void (*dot_block)(const double* a, std::size_t a_rows, std::size_t lda, const double* bt,
                    std::size_t ldbt, std::size_t b_cols, std::size_t depth, double* out,
                    std::size_t ldo);

  // In place: dot products -> distances using the squared norms of the
  // participating rows (row_sq[r], col_sq[c]).
  void (*dots_to_distances)(double* block, std::size_t rows, std::size_t cols, std::size_t ld,
                            const double* row_sq, const double* col_sq, DistanceMetric metric);

  // out[k] = F(d_ij, d_ik[k], d_jk[k]) with the three values summed in
  // ascending order, so the result does not depend on which pair is "ij".
  void (*score_triple_column)(double d_ij, const double* d_ik, const double* d_jk, std::size_t n,
                              Reducer reducer, double* out);

  // Index of the largest (maximize) or smallest value; ties -> lowest index.
  std::size_t (*arg_best)(const double* values, std::size_t n, bool maximize);
};

const KernelTable& scalar_table();
/// nullptr when the binary or the CPU lacks AVX2.
const KernelTable* avx2_table();

/// The table used by the library. Defaults to the best supported ISA;
/// SMX_SIMD=scalar in the environment forces the reference path.
const KernelTable& active();
/// Test hook. Returns false if the ISA is unavailable.
bool set_active(Isa isa);

}  // namespace smx::kernels

#pragma once

// Scalar element formulas shared by the reference kernels and the generic
// m-plet reducer. The AVX2 kernels mirror these operation by operation.

#include <algorithm>
#include <cmath>

#include "scoremix/types.hpp"

namespace smx::kernels::detail {

inline double dot_to_distance(double dot, double row_sq, double col_sq, DistanceMetric metric) {
  switch (metric) {
    case DistanceMetric::cosine: {
      // 1 - <a,b> for unit rows, written as half the squared chord so that
      // the diagonal is exactly zero.
      const double v = (row_sq + col_sq) - 2.0 * dot;
      return std::min(0.5 * std::max(v, 0.0), 2.0);
    }
    case DistanceMetric::squared_euclidean: {
      const double v = (row_sq + col_sq) - 2.0 * dot;
      return std::max(v, 0.0);
    }
    case DistanceMetric::euclidean: {
      const double v = (row_sq + col_sq) - 2.0 * dot;
      return std::sqrt(std::max(v, 0.0));
    }
  }
  return 0.0;
}

inline double reduce3(double x, double y, double z, Reducer reducer) {
  const double lo_xy = std::min(x, y);
  const double hi_xy = std::max(x, y);
  const double lo = std::min(lo_xy, z);
  const double hi = std::max(hi_xy, z);
  const double mid = std::max(lo_xy, std::min(hi_xy, z));
  switch (reducer) {
    case Reducer::sum:
      return (lo + mid) + hi;
    case Reducer::mean:
      return ((lo + mid) + hi) / 3.0;
    case Reducer::std: {
      const double m = ((lo + mid) + hi) / 3.0;
      const double a = lo - m;
      const double b = mid - m;
      const double c = hi - m;
      return std::sqrt(((a * a + b * b) + c * c) / 3.0);
    }
    case Reducer::min:
      return lo;
    case Reducer::max:
      return hi;
  }
  return 0.0;
}

}  // namespace smx::kernels::detail

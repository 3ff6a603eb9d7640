#pragma once

#include <string_view>

namespace smx {

enum class DistanceMetric { cosine, euclidean, squared_euclidean };

/// Permutation-invariant functional over the C(m,2) distances of an m-plet.
enum class Reducer { sum, mean, std, min, max };

enum class Direction { min, max };

std::string_view to_string(DistanceMetric metric);
std::string_view to_string(Reducer reducer);
std::string_view to_string(Direction direction);

// Accepts "cosine", "euclidean"/"l2", "squared_euclidean"/"sqeuclidean".
DistanceMetric parse_metric(std::string_view text);
Reducer parse_reducer(std::string_view text);
Direction parse_direction(std::string_view text);

}  // namespace smx

#include "scoremix/error.hpp"
#include "scoremix/types.hpp"

#include <string>

namespace smx {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::degenerate_input: return "degenerate_input";
    case ErrorCode::out_of_range: return "out_of_range";
    case ErrorCode::non_finite: return "non_finite";
  }
  return "unknown";
}

std::string_view to_string(DistanceMetric metric) {
  switch (metric) {
    case DistanceMetric::cosine: return "cosine";
    case DistanceMetric::euclidean: return "euclidean";
    case DistanceMetric::squared_euclidean: return "squared_euclidean";
  }
  return "unknown";
}

std::string_view to_string(Reducer reducer) {
  switch (reducer) {
    case Reducer::sum: return "sum";
    case Reducer::mean: return "mean";
    case Reducer::std: return "std";
    case Reducer::min: return "min";
    case Reducer::max: return "max";
  }
  return "unknown";
}

std::string_view to_string(Direction direction) {
  return direction == Direction::min ? "min" : "max";
}

DistanceMetric parse_metric(std::string_view text) {
  if (text == "cosine" || text == "cos") return DistanceMetric::cosine;
  if (text == "euclidean" || text == "l2") return DistanceMetric::euclidean;
  if (text == "squared_euclidean" || text == "sqeuclidean") return DistanceMetric::squared_euclidean;
  throw Error(ErrorCode::invalid_argument, "unknown distance metric '" + std::string(text) + "'");
}

Reducer parse_reducer(std::string_view text) {
  if (text == "sum") return Reducer::sum;
  if (text == "mean") return Reducer::mean;
  if (text == "std") return Reducer::std;
  if (text == "min") return Reducer::min;
  if (text == "max") return Reducer::max;
  throw Error(ErrorCode::invalid_argument, "unknown reducer '" + std::string(text) + "'");
}

Direction parse_direction(std::string_view text) {
  if (text == "min") return Direction::min;
  if (text == "max") return Direction::max;
  throw Error(ErrorCode::invalid_argument, "unknown direction '" + std::string(text) + "'");
}

}  // namespace smx

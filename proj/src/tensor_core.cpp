#include "scoremix/tensor_core.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "kernels/kernel_math.hpp"
#include "scoremix/error.hpp"
#include "scoremix/kernels.hpp"

namespace smx {
namespace {

constexpr std::uint8_t kMagic[4] = {0x53, 0x4D, 0x58, 0x31};  // "SMX1"
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 8;

std::string position(std::size_t row, std::size_t col) {
  return "row " + std::to_string(row) + ", column " + std::to_string(col);
}

template <class T>
T read_le(const std::uint8_t* p) {
  T value = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) value |= static_cast<T>(p[b]) << (8 * b);
  return value;
}

template <class T>
void write_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<std::uint8_t>(value >> (8 * b)));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'", path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return std::move(buffer).str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                                 std::vector<std::string> labels)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows_ == 0 || cols_ == 0) {
    throw Error(ErrorCode::invalid_argument, "embedding matrix needs at least one row and one column",
                std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorCode::invalid_argument, "embedding data size does not match dimensions",
                std::to_string(data_.size()) + " values for " + std::to_string(rows_) + "x" +
                    std::to_string(cols_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw Error(ErrorCode::non_finite, "non-finite embedding value", position(i / cols_, i % cols_));
    }
  }
  if (!labels.empty()) set_labels(std::move(labels));
}

void EmbeddingMatrix::set_labels(std::vector<std::string> labels) {
  if (labels.size() != rows_) {
    throw Error(ErrorCode::invalid_argument, "label count does not match row count",
                std::to_string(labels.size()) + " labels for " + std::to_string(rows_) + " rows");
  }
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!seen.insert(labels[i]).second) {
      throw Error(ErrorCode::invalid_argument, "duplicate label '" + labels[i] + "'",
                  "row " + std::to_string(i));
    }
  }
  labels_ = std::move(labels);
}

EmbeddingFormat parse_format(std::string_view text) {
  if (text == "binary" || text == "bin" || text == "smx") return EmbeddingFormat::binary;
  if (text == "csv") return EmbeddingFormat::csv;
  throw Error(ErrorCode::invalid_argument, "unknown embedding format '" + std::string(text) + "'");
}

EmbeddingFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? EmbeddingFormat::csv : EmbeddingFormat::binary;
}

EmbeddingMatrix parse_csv_embeddings(std::string_view text) {
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;

    std::size_t count = 0;
    while (true) {
      const std::size_t comma = line.find(',');
      const std::string_view field = trim(line.substr(0, comma));
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
        throw Error(ErrorCode::parse_error, "malformed CSV value '" + std::string(field) + "'",
                    "line " + std::to_string(line_no) + ", column " + std::to_string(count + 1));
      }
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::non_finite, "non-finite CSV value",
                    "line " + std::to_string(line_no) + ", column " + std::to_string(count + 1));
      }
      values.push_back(v);
      ++count;
      if (comma == std::string_view::npos) break;
      line.remove_prefix(comma + 1);
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw Error(ErrorCode::parse_error,
                  "ragged CSV row: " + std::to_string(count) + " values, expected " + std::to_string(cols),
                  "line " + std::to_string(line_no));
    }
    ++rows;
  }
  if (rows == 0) throw Error(ErrorCode::parse_error, "CSV contains no rows");
  return EmbeddingMatrix(rows, cols, std::move(values));
}

std::string format_csv_embeddings(const EmbeddingMatrix& m) {
  std::string out;
  out.reserve(m.rows() * m.cols() * 12);
  char buf[64];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j > 0) out.push_back(',');
      const double v = m(i, j);
      const auto f = static_cast<float>(v);
      // Shortest text that parses back to the same double.
      auto res = static_cast<double>(f) == v ? std::to_chars(buf, buf + sizeof buf, f)
                                             : std::to_chars(buf, buf + sizeof buf, v);
      out.append(buf, res.ptr);
    }
    out.push_back('\n');
  }
  return out;
}

EmbeddingMatrix parse_binary_embeddings(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) {
    throw Error(ErrorCode::parse_error, "binary embedding file shorter than its header",
                std::to_string(bytes.size()) + " bytes");
  }
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw Error(ErrorCode::parse_error, "bad magic, expected SMX1", "byte 0");
  }
  const auto version = read_le<std::uint32_t>(bytes.data() + 4);
  if (version != kVersion) {
    throw Error(ErrorCode::parse_error, "unsupported format version " + std::to_string(version), "byte 4");
  }
  const auto rows = read_le<std::uint64_t>(bytes.data() + 8);
  const auto cols = read_le<std::uint64_t>(bytes.data() + 16);
  if (rows == 0 || cols == 0) {
    throw Error(ErrorCode::parse_error, "header declares an empty matrix",
                std::to_string(rows) + "x" + std::to_string(cols));
  }
  const std::uint64_t payload = bytes.size() - kHeaderBytes;
  const bool overflow = cols > (std::numeric_limits<std::uint64_t>::max() / 4) / rows;
  if (overflow || payload != rows * cols * 4) {
    const std::uint64_t have = payload / 4;
    throw Error(ErrorCode::parse_error,
                (payload < rows * cols * 4 ? "truncated payload: " : "payload size mismatch: ") +
                    std::to_string(have) + " values for " + std::to_string(rows) + "x" +
                    std::to_string(cols),
                position(have / cols, have % cols));
  }
  std::vector<double> values(rows * cols);
  const std::uint8_t* p = bytes.data() + kHeaderBytes;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float f = std::bit_cast<float>(read_le<std::uint32_t>(p + 4 * i));
    if (!std::isfinite(f)) throw Error(ErrorCode::non_finite, "non-finite value", position(i / cols, i % cols));
    values[i] = f;
  }
  return EmbeddingMatrix(rows, cols, std::move(values));
}

std::vector<std::uint8_t> encode_binary_embeddings(const EmbeddingMatrix& m) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(kHeaderBytes + m.data().size() * 4);
  write_le<std::uint32_t>(out, kVersion);
  write_le<std::uint64_t>(out, m.rows());
  write_le<std::uint64_t>(out, m.cols());
  for (double v : m.data()) write_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

std::vector<std::string> load_labels(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<std::string> labels;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view t = trim(line);
    if (!t.empty()) labels.emplace_back(t);
  }
  return labels;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, EmbeddingFormat format,
                                const std::optional<std::filesystem::path>& labels) {
  const std::string text = read_file(path);
  EmbeddingMatrix m;
  try {
    if (format == EmbeddingFormat::csv) {
      m = parse_csv_embeddings(text);
    } else {
      m = parse_binary_embeddings({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
    }
  } catch (const Error& e) {
    throw Error(e.code(), e.what(), path.string() + ": " + e.context());
  }
  if (labels) m.set_labels(load_labels(*labels));
  return m;
}

void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path, EmbeddingFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write '" + path.string() + "'", path.string());
  if (format == EmbeddingFormat::csv) {
    out << format_csv_embeddings(m);
  } else {
    const auto bytes = encode_binary_embeddings(m);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw Error(ErrorCode::io_error, "write failed for '" + path.string() + "'", path.string());
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) acc += a[t] * b[t];
  return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

EmbeddingMatrix row_normalize(const EmbeddingMatrix& e) {
  std::vector<double> out(e.data());
  const std::size_t d = e.cols();
  for (std::size_t i = 0; i < e.rows(); ++i) {
    const double nrm = norm2(e.row(i));
    if (!(nrm > 1e-12)) {
      throw Error(ErrorCode::degenerate_input, "zero-norm row cannot be normalized", "row " + std::to_string(i));
    }
    for (std::size_t t = 0; t < d; ++t) out[i * d + t] /= nrm;
  }
  return EmbeddingMatrix(e.rows(), d, std::move(out), e.labels());
}

void double_center(std::span<double> m, std::size_t n) {
  std::vector<double> row_mean(n, 0.0), col_mean(n, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      row_mean[i] += m[i * n + j];
      col_mean[j] += m[i * n + j];
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    grand += row_mean[i];
    row_mean[i] *= inv;
    col_mean[i] *= inv;
  }
  grand *= inv * inv;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m[i * n + j] += grand - (row_mean[i] + col_mean[j]);
  }
}

NormalizedGram centered_normalized_gram(const EmbeddingMatrix& e) {
  const std::size_t n = e.rows();
  const std::size_t d = e.cols();
  std::vector<double> xt(d * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < d; ++t) xt[t * n + i] = e(i, t);

  NormalizedGram g;
  g.n = n;
  g.values.assign(n * n, 0.0);
  kernels::active().dot_block(e.data().data(), n, d, xt.data(), n, n, d, g.values.data(), n);

  double raw = 0.0;
  for (double v : g.values) raw += v * v;
  double_center(g.values, n);
  // Symmetrize exactly; centering in floating point leaves ulp-level skew.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = 0.5 * (g.values[i * n + j] + g.values[j * n + i]);
      g.values[i * n + j] = s;
      g.values[j * n + i] = s;
    }
  }
  double sq = 0.0;
  for (double v : g.values) sq += v * v;
  const double frob = std::sqrt(sq);
  if (!(frob > 1e-14 * std::sqrt(raw)) || frob == 0.0) {
    throw Error(ErrorCode::degenerate_input, "centered Gram is zero (all rows identical)",
                "n=" + std::to_string(n));
  }
  for (double& v : g.values) v /= frob;
  g.frob_norm_of_source = frob;
  return g;
}

NormalizedGram cosine_gram(const EmbeddingMatrix& e) { return centered_normalized_gram(row_normalize(e)); }

DistanceGeometry::DistanceGeometry(const EmbeddingMatrix& e, DistanceMetric metric)
    : n_(e.rows()), d_(e.cols()), metric_(metric) {
  rows_ = metric == DistanceMetric::cosine ? row_normalize(e).data() : e.data();
  cols_t_.resize(n_ * d_);
  sq_norms_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    const std::span<const double> r(rows_.data() + i * d_, d_);
    sq_norms_[i] = dot(r, r);
    for (std::size_t t = 0; t < d_; ++t) cols_t_[t * n_ + i] = r[t];
  }
}

double DistanceGeometry::distance(std::size_t a, std::size_t b) const {
  const double* ra = rows_.data() + a * d_;
  const double* rb = rows_.data() + b * d_;
  double acc = 0.0;
  for (std::size_t t = 0; t < d_; ++t) acc += ra[t] * rb[t];
  return kernels::detail::dot_to_distance(acc, sq_norms_[a], sq_norms_[b], metric_);
}

void DistanceGeometry::block(IndexRange rows, IndexRange cols, double* out, std::size_t ldo) const {
  const auto& k = kernels::active();
  k.dot_block(rows_.data() + rows.begin * d_, rows.size(), d_, cols_t_.data() + cols.begin, n_, cols.size(),
              d_, out, ldo);
  k.dots_to_distances(out, rows.size(), cols.size(), ldo, sq_norms_.data() + rows.begin,
                      sq_norms_.data() + cols.begin, metric_);
}

Matrix pairwise_distance_block(const EmbeddingMatrix& e, IndexRange rows, IndexRange cols,
                               DistanceMetric metric) {
  if (rows.begin > rows.end || cols.begin > cols.end || rows.end > e.rows() || cols.end > e.rows()) {
    throw Error(ErrorCode::out_of_range, "index range outside [0, n_rows)",
                "rows [" + std::to_string(rows.begin) + "," + std::to_string(rows.end) + "), cols [" +
                    std::to_string(cols.begin) + "," + std::to_string(cols.end) + ")");
  }
  const DistanceGeometry geometry(e, metric);
  Matrix out(rows.size(), cols.size());
  if (out.rows > 0 && out.cols > 0) geometry.block(rows, cols, out.values.data(), out.cols);
  return out;
}

ClassCenters class_centers(const EmbeddingMatrix& features, const std::vector<std::string>& labels) {
  if (labels.size() != features.rows()) {
    throw Error(ErrorCode::invalid_argument, "label count does not match feature rows",
                std::to_string(labels.size()) + " labels for " + std::to_string(features.rows()) + " rows");
  }
  const EmbeddingMatrix unit = row_normalize(features);
  const std::size_t d = features.cols();
  std::unordered_map<std::string, std::size_t> slot;
  ClassCenters out;
  std::vector<double> sums;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = slot.try_emplace(labels[i], out.class_ids.size());
    if (inserted) {
      out.class_ids.push_back(labels[i]);
      out.counts.push_back(0);
      sums.resize(sums.size() + d, 0.0);
    }
    const std::size_t c = it->second;
    ++out.counts[c];
    for (std::size_t t = 0; t < d; ++t) sums[c * d + t] += unit(i, t);
  }
  for (std::size_t c = 0; c < out.class_ids.size(); ++c) {
    const std::span<double> s(sums.data() + c * d, d);
    const double nrm = norm2(s);
    if (!(nrm > 1e-12 * static_cast<double>(out.counts[c]))) {
      throw Error(ErrorCode::degenerate_input, "class features average to the zero vector",
                  "class '" + out.class_ids[c] + "'");
    }
    for (double& v : s) v /= nrm;
  }
  out.centers = EmbeddingMatrix(out.class_ids.size(), d, std::move(sums), out.class_ids);
  return out;
}

}  // namespace smx

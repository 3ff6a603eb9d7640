#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scoremix/types.hpp"

namespace smx {

/// Plain row-major dense matrix for intermediate results.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// n items, each a d-dimensional real row, with optional unique labels.
/// Invariants (checked on construction): n, d >= 1, all entries finite,
/// labels empty or exactly n unique strings.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                  std::vector<std::string> labels = {});

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  const std::vector<double>& data() const noexcept { return data_; }

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  bool has_labels() const noexcept { return !labels_.empty(); }
  void set_labels(std::vector<std::string> labels);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
  std::vector<std::string> labels_;
};

enum class EmbeddingFormat { binary, csv };

EmbeddingFormat parse_format(std::string_view text);
/// ".csv" maps to csv, everything else to binary.
EmbeddingFormat format_for_path(const std::filesystem::path& path);

/// Reads "SMX1" binary or CSV embeddings. A sidecar label file (one id per
/// line) is attached when given.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, EmbeddingFormat format,
                                const std::optional<std::filesystem::path>& labels = std::nullopt);
void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path,
                     EmbeddingFormat format);

EmbeddingMatrix parse_csv_embeddings(std::string_view text);
std::string format_csv_embeddings(const EmbeddingMatrix& matrix);
EmbeddingMatrix parse_binary_embeddings(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_binary_embeddings(const EmbeddingMatrix& matrix);

std::vector<std::string> load_labels(const std::filesystem::path& path);

/// Rows scaled to unit Euclidean norm. Throws on rows with norm <= 1e-12.
EmbeddingMatrix row_normalize(const EmbeddingMatrix& e);

/// Centered, Frobenius-normalized n x n Gram matrix.
struct NormalizedGram {
  std::size_t n = 0;
  std::vector<double> values;
  double frob_norm_of_source = 0.0;

  double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

/// K / ||K||_F with K = H X X^T H, H applied through row/column means.
NormalizedGram centered_normalized_gram(const EmbeddingMatrix& e);
/// centered_normalized_gram(row_normalize(e)).
NormalizedGram cosine_gram(const EmbeddingMatrix& e);

/// Double-centers a square matrix in place: subtracts row and column means,
/// adds back the grand mean. Equivalent to H M H.
void double_center(std::span<double> square, std::size_t n);

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
};

/// Prepared rows for one metric: normalized copies for cosine, squared norms
/// for the Gram identity, and a transposed copy feeding the block kernels.
/// distance(a, b) and block() produce bit-identical values for the same pair,
/// and distance(a, b) == distance(b, a) exactly.
class DistanceGeometry {
 public:
  DistanceGeometry(const EmbeddingMatrix& e, DistanceMetric metric);

  std::size_t size() const noexcept { return n_; }
  std::size_t dim() const noexcept { return d_; }
  DistanceMetric metric() const noexcept { return metric_; }

  double distance(std::size_t a, std::size_t b) const;
  /// out[r * ldo + c] = distance(rows.begin + r, cols.begin + c).
  void block(IndexRange rows, IndexRange cols, double* out, std::size_t ldo) const;

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  DistanceMetric metric_;
  std::vector<double> rows_;
  std::vector<double> cols_t_;
  std::vector<double> sq_norms_;
};

/// Distances between E[rows[a]] and E[cols[b]]; cosine distance is 1 - cos.
Matrix pairwise_distance_block(const EmbeddingMatrix& e, IndexRange rows, IndexRange cols,
                               DistanceMetric metric);

struct ClassCenters {
  EmbeddingMatrix centers;
  std::vector<std::string> class_ids;  // first-appearance order
  std::vector<std::size_t> counts;
};

/// Unit-norm mean of unit-normalized features per class, classes ordered by
/// first appearance in `labels`.
ClassCenters class_centers(const EmbeddingMatrix& features, const std::vector<std::string>& labels);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

}  // namespace smx

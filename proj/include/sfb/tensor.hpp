#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sfb {

using WorkerId = std::uint32_t;

/// A length-n vector stored either densely or as sorted (index, value) pairs.
///
/// The factory functions keep a vector sparse only while nnz < n/4 and
/// densify otherwise, which bounds the worst-case cost of applying a factor.
/// No factory admits NaN or infinity.
class Vec64 {
 public:
  Vec64() = default;

  static Vec64 dense(std::vector<double> values);
  static Vec64 zeros(std::size_t dim);
  /// Indices must be strictly increasing and < dim.
  static Vec64 sparse(std::size_t dim, std::vector<std::uint32_t> indices,
                      std::vector<double> values);
  /// Drops exact zeros and picks the representation by the nnz threshold.
  static Vec64 compact(std::span<const double> values);

  std::size_t dim() const { return dim_; }
  /// Stored entries: dim() for dense vectors.
  std::size_t nnz() const { return values_.size(); }
  bool is_sparse() const { return sparse_; }

  std::span<const double> values() const { return values_; }
  /// Empty for dense vectors.
  std::span<const std::uint32_t> indices() const { return indices_; }

  double at(std::size_t i) const;
  std::vector<double> to_dense() const;

  /// Calls f(index, value) over stored entries in ascending index order.
  template <class F>
  void for_each_stored(F&& f) const {
    if (sparse_) {
      for (std::size_t k = 0; k < values_.size(); ++k) f(std::size_t{indices_[k]}, values_[k]);
    } else {
      for (std::size_t k = 0; k < values_.size(); ++k) f(k, values_[k]);
    }
  }

  double dot(std::span<const double> other) const;
  double squared_norm() const;

  friend bool operator==(const Vec64&, const Vec64&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
  std::vector<std::uint32_t> indices_;
  bool sparse_ = false;
};

/// Dense row-major R x C matrix of doubles.
class ParamMatrix {
 public:
  ParamMatrix() = default;
  ParamMatrix(std::size_t rows, std::size_t cols);
  ParamMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> data() { return values_; }
  std::span<const double> data() const { return values_; }
  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  bool all_finite() const;
  double max_abs() const;
  double frobenius_norm() const;

  ParamMatrix& operator+=(const ParamMatrix& rhs);
  ParamMatrix& operator*=(double s);

  friend bool operator==(const ParamMatrix&, const ParamMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// One sufficient-factor pair; its outer product u v^T is a rank-1 update.
struct SFPair {
  Vec64 u;
  Vec64 v;
  friend bool operator==(const SFPair&, const SFPair&) = default;
};

/// The unit of communication: one committed minibatch of factor pairs.
///
/// coeff carries the sign, learning rate and minibatch scaling so receivers
/// need no model knowledge. A batch may hold zero pairs when every sample in
/// the minibatch had a zero gradient; it still advances the sender's clock.
struct SFBatch {
  std::vector<SFPair> pairs;
  double coeff = 1.0;
  WorkerId sender = 0;
  std::uint64_t clock = 1;
  friend bool operator==(const SFBatch&, const SFBatch&) = default;
};

/// Throws DimensionError unless every pair is (rows x cols).
void check_batch_dims(const SFBatch& batch, std::size_t rows, std::size_t cols);

/// W += coeff * sum_i u_i v_i^T, pair-major then row then column. Only rows and
/// columns with stored nonzero factor entries are touched. The whole batch is
/// validated before W is modified.
void apply_sf_batch(ParamMatrix& w, const SFBatch& batch);

/// coeff * sum_i u_i v_i^T as a dense matrix, accumulated in apply order.
ParamMatrix materialize_update(const SFBatch& batch);
/// Same, for batches that may be empty.
ParamMatrix materialize_update(const SFBatch& batch, std::size_t rows, std::size_t cols);

double frobenius_distance(const ParamMatrix& a, const ParamMatrix& b);

/// W a for a vector of length cols().
std::vector<double> multiply(const ParamMatrix& w, const Vec64& a);
std::vector<double> multiply(const ParamMatrix& w, std::span<const double> a);
/// W^T x for a vector of length rows().
std::vector<double> multiply_transposed(const ParamMatrix& w, std::span<const double> x);

/// Sum of nnz(u) + nnz(v) over the batch: the number of values on the wire.
std::uint64_t batch_value_count(const SFBatch& batch);

}  // namespace sfb

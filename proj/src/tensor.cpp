#include "sfb/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sfb/error.hpp"

namespace sfb {

namespace {

void require_finite(std::span<const double> values) {
  for (double x : values) {
    if (!std::isfinite(x)) throw NonFiniteError("vector entry is not finite");
  }
}

bool keep_sparse(std::size_t nnz, std::size_t dim) { return nnz * 4 < dim; }

}  // namespace

Vec64 Vec64::dense(std::vector<double> values) {
  require_finite(values);
  Vec64 v;
  v.dim_ = values.size();
  v.values_ = std::move(values);
  return v;
}

Vec64 Vec64::zeros(std::size_t dim) { return dense(std::vector<double>(dim, 0.0)); }

Vec64 Vec64::sparse(std::size_t dim, std::vector<std::uint32_t> indices,
                    std::vector<double> values) {
  if (indices.size() != values.size()) {
    throw std::invalid_argument("sparse vector: index and value counts differ");
  }
  require_finite(values);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= dim) throw DimensionError("sparse vector: index out of range");
    if (k > 0 && indices[k] <= indices[k - 1]) {
      throw std::invalid_argument("sparse vector: indices not strictly increasing");
    }
  }
  Vec64 v;
  v.dim_ = dim;
  if (keep_sparse(indices.size(), dim)) {
    v.sparse_ = true;
    v.indices_ = std::move(indices);
    v.values_ = std::move(values);
  } else {
    v.values_.assign(dim, 0.0);
    for (std::size_t k = 0; k < indices.size(); ++k) v.values_[indices[k]] = values[k];
  }
  return v;
}

Vec64 Vec64::compact(std::span<const double> values) {
  require_finite(values);
  std::size_t nnz = std::count_if(values.begin(), values.end(), [](double x) { return x != 0.0; });
  if (!keep_sparse(nnz, values.size())) return dense({values.begin(), values.end()});
  std::vector<std::uint32_t> idx;
  std::vector<double> vals;
  idx.reserve(nnz);
  vals.reserve(nnz);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] != 0.0) {
      idx.push_back(static_cast<std::uint32_t>(i));
      vals.push_back(values[i]);
    }
  }
  Vec64 v;
  v.dim_ = values.size();
  v.sparse_ = true;
  v.indices_ = std::move(idx);
  v.values_ = std::move(vals);
  return v;
}

double Vec64::at(std::size_t i) const {
  if (i >= dim_) throw DimensionError("Vec64::at out of range");
  if (!sparse_) return values_[i];
  auto it = std::lower_bound(indices_.begin(), indices_.end(), i);
  if (it == indices_.end() || *it != i) return 0.0;
  return values_[static_cast<std::size_t>(it - indices_.begin())];
}

std::vector<double> Vec64::to_dense() const {
  if (!sparse_) return values_;
  std::vector<double> out(dim_, 0.0);
  for (std::size_t k = 0; k < indices_.size(); ++k) out[indices_[k]] = values_[k];
  return out;
}

double Vec64::dot(std::span<const double> other) const {
  if (other.size() != dim_) throw DimensionError("Vec64::dot dimension mismatch");
  double s = 0.0;
  for_each_stored([&](std::size_t i, double x) { s += x * other[i]; });
  return s;
}

double Vec64::squared_norm() const {
  double s = 0.0;
  for (double x : values_) s += x * x;
  return s;
}

ParamMatrix::ParamMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

ParamMatrix::ParamMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) throw DimensionError("ParamMatrix: value count != rows*cols");
  require_finite(values_);
}

bool ParamMatrix::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

double ParamMatrix::max_abs() const {
  double m = 0.0;
  for (double x : values_) m = std::max(m, std::abs(x));
  return m;
}

double ParamMatrix::frobenius_norm() const {
  double s = 0.0;
  for (double x : values_) s += x * x;
  return std::sqrt(s);
}

ParamMatrix& ParamMatrix::operator+=(const ParamMatrix& rhs) {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_) throw DimensionError("ParamMatrix += shape mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += rhs.values_[i];
  return *this;
}

ParamMatrix& ParamMatrix::operator*=(double s) {
  for (double& x : values_) x *= s;
  return *this;
}

void check_batch_dims(const SFBatch& batch, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
    const auto& p = batch.pairs[i];
    if (p.u.dim() != rows || p.v.dim() != cols) {
      throw DimensionError("SF pair " + std::to_string(i) + " is " + std::to_string(p.u.dim()) +
                           "x" + std::to_string(p.v.dim()) + ", target matrix is " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
  }
}

void apply_sf_batch(ParamMatrix& w, const SFBatch& batch) {
  check_batch_dims(batch, w.rows(), w.cols());
  const double coeff = batch.coeff;
  for (const auto& pair : batch.pairs) {
    pair.u.for_each_stored([&](std::size_t r, double ur) {
      const double cr = coeff * ur;
      if (cr == 0.0) return;
      auto row = w.row(r);
      pair.v.for_each_stored([&](std::size_t c, double vc) {
        if (vc != 0.0) row[c] += cr * vc;
      });
    });
  }
}

ParamMatrix materialize_update(const SFBatch& batch) {
  if (batch.pairs.empty()) throw std::invalid_argument("materialize_update: empty batch has no shape");
  return materialize_update(batch, batch.pairs.front().u.dim(), batch.pairs.front().v.dim());
}

ParamMatrix materialize_update(const SFBatch& batch, std::size_t rows, std::size_t cols) {
  ParamMatrix out(rows, cols);
  apply_sf_batch(out, batch);
  return out;
}

double frobenius_distance(const ParamMatrix& a, const ParamMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("frobenius_distance: shape mismatch");
  }
  double s = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    s += d * d;
  }
  return std::sqrt(s);
}

std::vector<double> multiply(const ParamMatrix& w, const Vec64& a) {
  if (a.dim() != w.cols()) throw DimensionError("multiply: vector length != cols");
  std::vector<double> out(w.rows(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    auto row = w.row(r);
    double s = 0.0;
    a.for_each_stored([&](std::size_t c, double x) { s += row[c] * x; });
    out[r] = s;
  }
  return out;
}

std::vector<double> multiply(const ParamMatrix& w, std::span<const double> a) {
  if (a.size() != w.cols()) throw DimensionError("multiply: vector length != cols");
  std::vector<double> out(w.rows(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    auto row = w.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) s += row[c] * a[c];
    out[r] = s;
  }
  return out;
}

std::vector<double> multiply_transposed(const ParamMatrix& w, std::span<const double> x) {
  if (x.size() != w.rows()) throw DimensionError("multiply_transposed: vector length != rows");
  std::vector<double> out(w.cols(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    auto row = w.row(r);
    for (std::size_t c = 0; c < w.cols(); ++c) out[c] += row[c] * x[r];
  }
  return out;
}

std::uint64_t batch_value_count(const SFBatch& batch) {
  std::uint64_t n = 0;
  for (const auto& p : batch.pairs) n += p.u.nnz() + p.v.nnz();
  return n;
}

}  // namespace sfb

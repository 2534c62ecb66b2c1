#include "mmtlab/fusion/tensor.hpp"

#include <cmath>

#include "mmtlab/error.hpp"
#include "mmtlab/keyed_rng.hpp"

namespace mmtlab::fusion {
namespace {

void require_same(const Tensor2& a, const Tensor2& b, const char* op) {
  if (!a.same_shape(b))
    throw Error(Errc::invalid_argument, std::string(op) + ": shape mismatch " + a.shape_string() +
                                            " vs " + b.shape_string());
}

}  // namespace

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_)
    throw Error(Errc::invalid_argument, "tensor data length " + std::to_string(data_.size()) +
                                            " does not match " + shape_string());
}

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw Error(Errc::invalid_argument, "ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor2(r, c, std::move(data));
}

Tensor2 Tensor2::identity(std::size_t n) {
  Tensor2 t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor2 Tensor2::uniform(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo, double hi) {
  const KeyedRng rng(seed);
  Tensor2 t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = lo + (hi - lo) * rng.uniform({i});
  return t;
}

bool Tensor2::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor2::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows())
    throw Error(Errc::invalid_argument, "matmul: " + a.shape_string() + " * " + b.shape_string());
  Tensor2 c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols())
    throw Error(Errc::invalid_argument, "matmul_nt: " + a.shape_string() + " * (" + b.shape_string() + ")^T");
  Tensor2 c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      c(i, j) = s;
    }
  return c;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  if (a.rows() != b.rows())
    throw Error(Errc::invalid_argument, "matmul_tn: (" + a.shape_string() + ")^T * " + b.shape_string());
  Tensor2 c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k)
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
    }
  return c;
}

Tensor2 transpose(const Tensor2& a) {
  Tensor2 t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Tensor2 operator+(const Tensor2& a, const Tensor2& b) {
  Tensor2 c = a;
  c += b;
  return c;
}

Tensor2 operator-(const Tensor2& a, const Tensor2& b) {
  require_same(a, b, "subtract");
  Tensor2 c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
  return c;
}

Tensor2 operator*(double s, const Tensor2& a) {
  Tensor2 c = a;
  for (double& v : c.values()) v *= s;
  return c;
}

Tensor2& operator+=(Tensor2& a, const Tensor2& b) {
  require_same(a, b, "add");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

Tensor2 hadamard(const Tensor2& a, const Tensor2& b) {
  require_same(a, b, "hadamard");
  Tensor2 c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= b[i];
  return c;
}

double max_abs_diff(const Tensor2& a, const Tensor2& b) {
  require_same(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double frobenius_norm(const Tensor2& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

double dot(const Tensor2& a, const Tensor2& b) {
  require_same(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace mmtlab::fusion

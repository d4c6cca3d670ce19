// Dense 4-way tensor algebra: mode products, Tucker application,
// matricization and the Kronecker/bilinear identities.
//
// Layout convention (fixed for serialization and oracle tests): entries are
// stored flat with the first index varying fastest, i.e.
//   offset(i1,i2,i3,i4) = i1 + d1*(i2 + d2*(i3 + d3*i4)).
// Matricization along mode k puts that mode on the rows; the columns run
// over the remaining modes in increasing mode order, lowest mode fastest.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mltr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

class Tensor4 {
 public:
  Tensor4() : dims_{0, 0, 0, 0} {}

  Tensor4(Index d1, Index d2, Index d3, Index d4) : dims_{d1, d2, d3, d4} {
    check_dims();
    values_.assign(static_cast<std::size_t>(size()), 0.0);
  }

  Tensor4(const std::array<Index, 4>& dims, std::vector<double> values)
      : dims_(dims), values_(std::move(values)) {
    check_dims();
    if (static_cast<Index>(values_.size()) != size())
      throw std::invalid_argument("Tensor4: value count does not match dims");
    for (double v : values_)
      if (!std::isfinite(v))
        throw std::invalid_argument("Tensor4: non-finite entry");
  }

  const std::array<Index, 4>& dims() const { return dims_; }

  // 1-based mode accessor, matching the mode arguments of the operations.
  Index dim(int mode) const {
    if (mode < 1 || mode > 4) throw std::invalid_argument("Tensor4::dim: mode out of range");
    return dims_[mode - 1];
  }

  Index size() const { return dims_[0] * dims_[1] * dims_[2] * dims_[3]; }
  bool empty() const { return values_.empty(); }

  double operator()(Index i1, Index i2, Index i3, Index i4) const {
    return values_[offset(i1, i2, i3, i4)];
  }
  double& operator()(Index i1, Index i2, Index i3, Index i4) {
    return values_[offset(i1, i2, i3, i4)];
  }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool same_dims(const Tensor4& other) const { return dims_ == other.dims_; }

  std::size_t offset(Index i1, Index i2, Index i3, Index i4) const {
    return static_cast<std::size_t>(i1 + dims_[0] * (i2 + dims_[1] * (i3 + dims_[2] * i4)));
  }

 private:
  void check_dims() const {
    for (Index d : dims_)
      if (d < 0) throw std::invalid_argument("Tensor4: negative dimension");
  }

  std::array<Index, 4> dims_;
  std::vector<double> values_;
};

namespace detail {

inline std::string dims_str(const std::array<Index, 4>& d) {
  return std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" +
         std::to_string(d[2]) + "x" + std::to_string(d[3]);
}

inline void require_finite(const Matrix& m, const char* op) {
  if (!m.allFinite())
    throw std::invalid_argument(std::string(op) + ": non-finite matrix entry");
}

// Contiguous d1 x d2 slab X[:,:,k,l] as a column-major map.
inline Eigen::Map<const Matrix> slab(const Tensor4& x, Index k, Index l) {
  const auto& d = x.dims();
  return Eigen::Map<const Matrix>(x.data() + static_cast<std::ptrdiff_t>(d[0] * d[1] * (k + d[2] * l)),
                                  d[0], d[1]);
}
inline Eigen::Map<Matrix> slab(Tensor4& x, Index k, Index l) {
  const auto& d = x.dims();
  return Eigen::Map<Matrix>(x.data() + static_cast<std::ptrdiff_t>(d[0] * d[1] * (k + d[2] * l)),
                            d[0], d[1]);
}

// Contiguous (d1*d2) x d3 view of the time-l block X[:,:,:,l].
inline Eigen::Map<const Matrix> time_block(const Tensor4& x, Index l) {
  const auto& d = x.dims();
  return Eigen::Map<const Matrix>(x.data() + static_cast<std::ptrdiff_t>(d[0] * d[1] * d[2] * l),
                                  d[0] * d[1], d[2]);
}
inline Eigen::Map<Matrix> time_block(Tensor4& x, Index l) {
  const auto& d = x.dims();
  return Eigen::Map<Matrix>(x.data() + static_cast<std::ptrdiff_t>(d[0] * d[1] * d[2] * l),
                            d[0] * d[1], d[2]);
}

// Unvalidated mode products writing into a preallocated destination.
// Used directly by the estimation sweeps where inputs are already vetted.
inline void mode1_product_into(Tensor4& dst, const Tensor4& x, const Matrix& m) {
  const auto& d = x.dims();
  Eigen::Map<const Matrix> x1(x.data(), d[0], d[1] * d[2] * d[3]);
  Eigen::Map<Matrix> z1(dst.data(), m.rows(), d[1] * d[2] * d[3]);
  z1.noalias() = m * x1;
}

inline void mode2_product_into(Tensor4& dst, const Tensor4& x, const Matrix& m) {
  const auto& d = x.dims();
  for (Index l = 0; l < d[3]; ++l)
    for (Index k = 0; k < d[2]; ++k)
      slab(dst, k, l).noalias() = slab(x, k, l) * m.transpose();
}

inline void mode3_product_into(Tensor4& dst, const Tensor4& x, const Matrix& m) {
  const auto& d = x.dims();
  for (Index l = 0; l < d[3]; ++l)
    time_block(dst, l).noalias() = time_block(x, l) * m.transpose();
}

inline void mode_product_into(Tensor4& dst, const Tensor4& x, const Matrix& m, int mode) {
  switch (mode) {
    case 1: mode1_product_into(dst, x, m); break;
    case 2: mode2_product_into(dst, x, m); break;
    case 3: mode3_product_into(dst, x, m); break;
    default: throw std::invalid_argument("mode_product: mode must be 1, 2 or 3");
  }
}

inline std::array<Index, 4> mode_product_dims(const Tensor4& x, const Matrix& m, int mode) {
  if (mode < 1 || mode > 3)
    throw std::invalid_argument("mode_product: mode must be 1, 2 or 3");
  if (m.cols() != x.dim(mode))
    throw std::invalid_argument("mode_product: matrix has " + std::to_string(m.cols()) +
                                " columns but tensor mode " + std::to_string(mode) +
                                " has extent " + std::to_string(x.dim(mode)));
  auto dims = x.dims();
  dims[mode - 1] = m.rows();
  return dims;
}

}  // namespace detail

// Z = X x_mode M, i.e. Z[..., r, ...] = sum_s M[r,s] X[..., s, ...].
inline Tensor4 mode_product(const Tensor4& x, const Matrix& m, int mode) {
  detail::require_finite(m, "mode_product");
  const auto dims = detail::mode_product_dims(x, m, mode);
  Tensor4 z(dims[0], dims[1], dims[2], dims[3]);
  detail::mode_product_into(z, x, m, mode);
  return z;
}

// Y = X x {B1, B2, B3}: sequential mode products over modes 1..3 (time is
// untouched). Entrywise Z[i,j,u,t] = sum B1[i,i'] B2[j,j'] B3[u,w] X[i',j',w,t].
inline Tensor4 tucker_apply(const Tensor4& x, const Matrix& b1, const Matrix& b2,
                            const Matrix& b3) {
  detail::require_finite(b1, "tucker_apply");
  detail::require_finite(b2, "tucker_apply");
  detail::require_finite(b3, "tucker_apply");
  if (b1.cols() != x.dim(1) || b2.cols() != x.dim(2) || b3.cols() != x.dim(3))
    throw std::invalid_argument("tucker_apply: coefficient columns do not match tensor dims " +
                                detail::dims_str(x.dims()));
  Tensor4 z1(b1.rows(), x.dim(2), x.dim(3), x.dim(4));
  detail::mode1_product_into(z1, x, b1);
  Tensor4 z2(b1.rows(), b2.rows(), x.dim(3), x.dim(4));
  detail::mode2_product_into(z2, z1, b2);
  Tensor4 z3(b1.rows(), b2.rows(), b3.rows(), x.dim(4));
  detail::mode3_product_into(z3, z2, b3);
  return z3;
}

// Mode-k matricization: rows index mode k, columns run over the remaining
// modes in increasing order with the lowest mode varying fastest.
inline Matrix matricize(const Tensor4& x, int mode) {
  if (mode < 1 || mode > 4) throw std::invalid_argument("matricize: mode must be in 1..4");
  const auto& d = x.dims();
  const Index rows = d[mode - 1];
  const Index cols = x.size() == 0 ? 0 : x.size() / rows;
  Matrix out(rows, cols);
  std::array<Index, 3> rest{};
  int r = 0;
  for (int k = 0; k < 4; ++k)
    if (k != mode - 1) rest[r++] = d[k];
  std::array<Index, 4> idx{};
  for (Index c2 = 0; c2 < rest[2]; ++c2)
    for (Index c1 = 0; c1 < rest[1]; ++c1)
      for (Index c0 = 0; c0 < rest[0]; ++c0) {
        const Index col = c0 + rest[0] * (c1 + rest[1] * c2);
        int p = 0;
        const std::array<Index, 3> cs{c0, c1, c2};
        for (int k = 0; k < 4; ++k)
          if (k != mode - 1) idx[k] = cs[p++];
        for (Index row = 0; row < rows; ++row) {
          idx[mode - 1] = row;
          out(row, col) = x(idx[0], idx[1], idx[2], idx[3]);
        }
      }
  return out;
}

// Exact inverse of matricize for the documented column ordering.
inline Tensor4 dematricize(const Matrix& m, const std::array<Index, 4>& dims, int mode) {
  if (mode < 1 || mode > 4) throw std::invalid_argument("dematricize: mode must be in 1..4");
  Tensor4 out(dims[0], dims[1], dims[2], dims[3]);
  const Index rows = dims[mode - 1];
  const Index cols = out.size() == 0 ? 0 : out.size() / rows;
  if (m.rows() != rows || m.cols() != cols)
    throw std::invalid_argument("dematricize: matrix shape inconsistent with dims " +
                                detail::dims_str(dims));
  std::array<Index, 3> rest{};
  int r = 0;
  for (int k = 0; k < 4; ++k)
    if (k != mode - 1) rest[r++] = dims[k];
  std::array<Index, 4> idx{};
  for (Index c2 = 0; c2 < rest[2]; ++c2)
    for (Index c1 = 0; c1 < rest[1]; ++c1)
      for (Index c0 = 0; c0 < rest[0]; ++c0) {
        const Index col = c0 + rest[0] * (c1 + rest[1] * c2);
        int p = 0;
        const std::array<Index, 3> cs{c0, c1, c2};
        for (int k = 0; k < 4; ++k)
          if (k != mode - 1) idx[k] = cs[p++];
        for (Index row = 0; row < rows; ++row) {
          idx[mode - 1] = row;
          out(idx[0], idx[1], idx[2], idx[3]) = m(row, col);
        }
      }
  return out;
}

// Kronecker product B (x) A with the standard block structure.
inline Matrix kronecker(const Matrix& b, const Matrix& a) {
  Matrix out(b.rows() * a.rows(), b.cols() * a.cols());
  for (Index i = 0; i < b.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j)
      out.block(i * a.rows(), j * a.cols(), a.rows(), a.cols()) = b(i, j) * a;
  return out;
}

// A * Y * B^T, the matrix form of one bilinear autoregression step;
// vec(A Y B^T) = (B (x) A) vec(Y) with column-major vec.
inline Matrix bilinear_step(const Matrix& a, const Matrix& y, const Matrix& b) {
  if (a.cols() != y.rows() || b.cols() != y.cols())
    throw std::invalid_argument("bilinear_step: dimension mismatch: A is " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                ", Y is " + std::to_string(y.rows()) + "x" +
                                std::to_string(y.cols()) + ", B is " +
                                std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  return a * y * b.transpose();
}

}  // namespace mltr

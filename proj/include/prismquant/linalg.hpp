#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace prismquant {

using Vec = std::vector<double>;

/// Dense row-major matrix. Only what the toolkit needs: storage, element
/// access and a couple of products.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  /// y = A x
  Vec multiply(std::span<const double> x) const;
  /// y = A^T x
  Vec multiply_transposed(std::span<const double> x) const;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

/// Symmetric real matrix, full dense storage; set() mirrors so the symmetry
/// invariant can never be violated.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

  static SymMatrix identity(std::size_t n);
  /// Builds U diag(eigenvalues) U^T. U's columns must be orthonormal.
  static SymMatrix from_eigensystem(const Matrix& basis, std::span<const double> eigenvalues);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    data_[i * n_ + j] = v;
    data_[j * n_ + i] = v;
  }
  void add(std::size_t i, std::size_t j, double v) { set(i, j, (*this)(i, j) + v); }

  double trace() const;
  double frobenius_norm() const;
  bool all_finite() const;
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Result of sym_eig: eigenvalues sorted descending, basis columns are the
/// matching orthonormal eigenvectors with the sign convention that the
/// largest-magnitude entry of each column is positive.
struct EigenDecomposition {
  Vec eigenvalues;
  Matrix basis;
};

/// Lower-triangular Cholesky factor L with A = L L^T.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;
  CholeskyFactor(std::size_t n, std::vector<double> lower) : n_(n), lower_(std::move(lower)) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return lower_[i * n_ + j]; }

  /// Solves L y = b by forward substitution.
  Vec forward_solve(std::span<const double> b) const;
  /// ln det A = 2 * sum ln L_ii
  double log_det() const;
  /// y = L x (used for sampling).
  Vec multiply(std::span<const double> x) const;

 private:
  std::size_t n_ = 0;
  std::vector<double> lower_;  // row-major, upper part zero
};

/// Cyclic Jacobi eigendecomposition for symmetric matrices. Deterministic:
/// fixed sweep order, stable descending sort, fixed sign convention.
/// Throws RejectedInputError on non-finite entries and ConvergenceError if
/// the off-diagonal residual does not fall below 1e-12 * ||A||_F within
/// 100 sweeps.
EigenDecomposition sym_eig(const SymMatrix& a);

/// Cholesky factorization; throws DefinitenessError naming the failing pivot.
CholeskyFactor cholesky(const SymMatrix& a);

/// ln det of a symmetric positive definite matrix via Cholesky.
double log_det_psd(const SymMatrix& a);

/// (x - mean)^T cov^{-1} (x - mean) via Cholesky solve.
double mahalanobis_sq(std::span<const double> x, std::span<const double> mean,
                      const SymMatrix& cov);
double mahalanobis_sq(std::span<const double> x, std::span<const double> mean,
                      const CholeskyFactor& chol);

double dot(std::span<const double> a, std::span<const double> b);

/// Orthonormal Q factor of a square matrix via Householder QR, with the sign
/// convention diag(R) >= 0 so the factor is unique for a given input.
Matrix qr_orthonormal(const Matrix& a);

}  // namespace prismquant

#include "prismquant/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "prismquant/errors.hpp"

namespace prismquant {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vec Matrix::multiply(std::span<const double> x) const {
  Vec y(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    double acc = 0.0;
    const double* row = &data_[i * cols_];
    for (std::size_t j = 0; j < cols_; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
  return y;
}

Vec Matrix::multiply_transposed(std::span<const double> x) const {
  Vec y(cols_, 0.0);
  for (std::size_t j = 0; j < cols_; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) acc += data_[i * cols_ + j] * x[i];
    y[j] = acc;
  }
  return y;
}

SymMatrix SymMatrix::identity(std::size_t n) {
  SymMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m.set(i, i, 1.0);
  return m;
}

SymMatrix SymMatrix::from_eigensystem(const Matrix& basis, std::span<const double> eigenvalues) {
  const std::size_t n = basis.rows();
  SymMatrix out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (std::size_t m = 0; m < n; ++m) acc += basis(i, m) * eigenvalues[m] * basis(j, m);
      out.set(i, j, acc);
    }
  }
  return out;
}

double SymMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < n_; ++i) t += (*this)(i, i);
  return t;
}

double SymMatrix::frobenius_norm() const {
  double acc = 0.0;
  for (double v : data_) acc += v * v;
  return std::sqrt(acc);
}

bool SymMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Vec CholeskyFactor::forward_solve(std::span<const double> b) const {
  Vec y(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    double acc = b[i];
    for (std::size_t j = 0; j < i; ++j) acc -= lower_[i * n_ + j] * y[j];
    y[i] = acc / lower_[i * n_ + i];
  }
  return y;
}

double CholeskyFactor::log_det() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < n_; ++i) acc += 2.0 * std::log(lower_[i * n_ + i]);
  return acc;
}

Vec CholeskyFactor::multiply(std::span<const double> x) const {
  Vec y(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j <= i; ++j) acc += lower_[i * n_ + j] * x[j];
    y[i] = acc;
  }
  return y;
}

namespace {

// One cyclic Jacobi pass over all (p, q) pairs; returns rotations applied.
std::size_t jacobi_sweep(Matrix& a, Matrix& v, std::size_t n) {
  std::size_t rotations = 0;
  for (std::size_t p = 0; p + 1 < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      const double apq = a(p, q);
      if (apq == 0.0) continue;
      const double app = a(p, p);
      const double aqq = a(q, q);
      // Skip rotations that cannot change anything at double precision.
      if (std::abs(apq) <= 1e-300 ||
          std::abs(apq) < 1e-18 * (std::abs(app) + std::abs(aqq))) {
        continue;
      }
      const double theta = (aqq - app) / (2.0 * apq);
      const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                       (std::abs(theta) + std::sqrt(theta * theta + 1.0));
      const double c = 1.0 / std::sqrt(t * t + 1.0);
      const double s = t * c;
      const double tau = s / (1.0 + c);

      a(p, p) = app - t * apq;
      a(q, q) = aqq + t * apq;
      a(p, q) = 0.0;
      a(q, p) = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        if (r != p && r != q) {
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = a(p, r) = arp - s * (arq + tau * arp);
          a(r, q) = a(q, r) = arq + s * (arp - tau * arq);
        }
        const double vrp = v(r, p);
        const double vrq = v(r, q);
        v(r, p) = vrp - s * (vrq + tau * vrp);
        v(r, q) = vrq + s * (vrp - tau * vrq);
      }
      ++rotations;
    }
  }
  return rotations;
}

double off_diagonal_norm(const Matrix& a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) acc += 2.0 * a(i, j) * a(i, j);
  return std::sqrt(acc);
}

}  // namespace

EigenDecomposition sym_eig(const SymMatrix& input) {
  if (!input.all_finite()) throw RejectedInputError("sym_eig: non-finite entry in input");
  const std::size_t n = input.size();

  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = input(i, j);
  Matrix v = Matrix::identity(n);

  constexpr std::size_t kMaxSweeps = 100;
  const double tol = 1e-12 * input.frobenius_norm();
  double off = off_diagonal_norm(a, n);
  std::size_t sweep = 0;
  while (off > tol && sweep < kMaxSweeps) {
    if (jacobi_sweep(a, v, n) == 0) break;  // every pairwise rotation rounded away
    off = off_diagonal_norm(a, n);
    ++sweep;
  }
  if (off > tol && sweep >= kMaxSweeps) {
    throw ConvergenceError(
        "sym_eig: Jacobi did not converge in " + std::to_string(kMaxSweeps) +
            " sweeps, off-diagonal residual " + std::to_string(off),
        off);
  }

  // Stable descending sort; ties keep original pivot order so the output is
  // deterministic for repeated eigenvalues.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.basis = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.eigenvalues[k] = a(src, src);
    // Sign convention: largest-magnitude entry positive (first on ties).
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double mag = std::abs(v(r, src));
      if (mag > best) {
        best = mag;
        arg = r;
      }
    }
    const double sign = v(arg, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < n; ++r) out.basis(r, k) = sign * v(r, src);
  }
  return out;
}

CholeskyFactor cholesky(const SymMatrix& a) {
  const std::size_t n = a.size();
  std::vector<double> l(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = a(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= l[i * n + k] * l[j * n + k];
      if (i == j) {
        if (acc <= 0.0 || !std::isfinite(acc)) {
          throw DefinitenessError(
              "cholesky: matrix not positive definite, pivot " + std::to_string(i) +
                  " = " + std::to_string(acc),
              i);
        }
        l[i * n + j] = std::sqrt(acc);
      } else {
        l[i * n + j] = acc / l[j * n + j];
      }
    }
  }
  return CholeskyFactor(n, std::move(l));
}

double log_det_psd(const SymMatrix& a) { return cholesky(a).log_det(); }

double mahalanobis_sq(std::span<const double> x, std::span<const double> mean,
                      const CholeskyFactor& chol) {
  const std::size_t n = chol.size();
  Vec diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = x[i] - mean[i];
  const Vec y = chol.forward_solve(diff);
  return dot(y, y);
}

double mahalanobis_sq(std::span<const double> x, std::span<const double> mean,
                      const SymMatrix& cov) {
  return mahalanobis_sq(x, mean, cholesky(cov));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

Matrix qr_orthonormal(const Matrix& input) {
  const std::size_t n = input.rows();
  Matrix r = input;
  Matrix q = Matrix::identity(n);

  // Householder reflections accumulated into q.
  std::vector<double> w(n);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < n; ++i) norm += r(i, k) * r(i, k);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    const double alpha = r(k, k) > 0.0 ? -norm : norm;
    double wnorm = 0.0;
    for (std::size_t i = k; i < n; ++i) {
      w[i] = r(i, k) - (i == k ? alpha : 0.0);
      wnorm += w[i] * w[i];
    }
    if (wnorm == 0.0) continue;
    const double beta = 2.0 / wnorm;
    for (std::size_t j = k; j < n; ++j) {
      double proj = 0.0;
      for (std::size_t i = k; i < n; ++i) proj += w[i] * r(i, j);
      proj *= beta;
      for (std::size_t i = k; i < n; ++i) r(i, j) -= proj * w[i];
    }
    for (std::size_t j = 0; j < n; ++j) {
      double proj = 0.0;
      for (std::size_t i = k; i < n; ++i) proj += w[i] * q(j, i);
      proj *= beta;
      for (std::size_t i = k; i < n; ++i) q(j, i) -= proj * w[i];
    }
  }
  // Make diag(R) >= 0 so the factor is unique.
  for (std::size_t k = 0; k < n; ++k) {
    if (r(k, k) < 0.0) {
      for (std::size_t i = 0; i < n; ++i) q(i, k) = -q(i, k);
    }
  }
  return q;
}

}  // namespace prismquant

#include "omegaflow/util.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>

namespace omegaflow {

Eigen::MatrixXcd hermitize(const Eigen::MatrixXcd& m) {
  return 0.5 * (m + m.adjoint().eval());
}

namespace {

template <typename Fn>
Eigen::MatrixXcd hermitian_function(const Eigen::MatrixXcd& a, Fn&& fn, const char* name) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
  if (es.info() != Eigen::Success) {
    throw NumericError(std::string(name) + ": eigendecomposition failed");
  }
  Eigen::VectorXd lam = es.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) lam[i] = fn(lam[i]);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

Eigen::MatrixXcd matrix_exp_hermitian(const Eigen::MatrixXcd& a) {
  return hermitian_function(a, [](double x) { return std::exp(x); }, "matrix_exp_hermitian");
}

Eigen::MatrixXcd matrix_log_spd(const Eigen::MatrixXcd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
  if (es.info() != Eigen::Success) throw NumericError("matrix_log_spd: eigendecomposition failed");
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig <= 0.0) {
    throw NotPositiveDefiniteError("matrix_log_spd: argument not positive definite", min_eig);
  }
  Eigen::VectorXd lam = es.eigenvalues().array().log().matrix();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

Eigen::MatrixXcd matrix_inv_sqrt_spd(const Eigen::MatrixXcd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
  if (es.info() != Eigen::Success) throw NumericError("matrix_inv_sqrt_spd: eigendecomposition failed");
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig <= 0.0) {
    throw NotPositiveDefiniteError("matrix_inv_sqrt_spd: argument not positive definite", min_eig);
  }
  Eigen::VectorXd lam = es.eigenvalues().array().rsqrt().matrix();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

double operator_norm_hermitian(const Eigen::MatrixXcd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXcd random_hermitian(std::mt19937_64& rng, int n, double scale) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXcd a(n, n);
  for (int i = 0; i < n; ++i) {
    a(i, i) = Complex(gauss(rng), 0.0);
    for (int j = i + 1; j < n; ++j) {
      const Complex z(gauss(rng) / std::sqrt(2.0), gauss(rng) / std::sqrt(2.0));
      a(i, j) = z;
      a(j, i) = std::conj(z);
    }
  }
  return scale * a;
}

double fit_loglog_slope(const std::vector<double>& k, const std::vector<double>& err) {
  if (k.size() != err.size() || k.size() < 2) {
    throw std::invalid_argument("fit_loglog_slope: need two or more samples");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(k.size());
  for (size_t i = 0; i < k.size(); ++i) {
    const double x = std::log(k[i]);
    const double y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double fit_exp_rate(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size() || t.size() < 2) {
    throw std::invalid_argument("fit_exp_rate: need two or more samples");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(t.size());
  for (size_t i = 0; i < t.size(); ++i) {
    const double x = t[i];
    const double v = std::log(y[i]);
    sx += x;
    sy += v;
    sxx += x * x;
    sxy += x * v;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace omegaflow

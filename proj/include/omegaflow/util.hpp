#pragma once

#include <random>
#include <string>
#include <vector>

#include "omegaflow/types.hpp"

namespace omegaflow {

// Exact symmetrization; Gram integrals accumulate O(eps) asymmetry.
Eigen::MatrixXcd hermitize(const Eigen::MatrixXcd& m);

// exp/log/inverse-sqrt of Hermitian (positive definite where required)
// matrices via a self-adjoint eigendecomposition.
Eigen::MatrixXcd matrix_exp_hermitian(const Eigen::MatrixXcd& a);
Eigen::MatrixXcd matrix_log_spd(const Eigen::MatrixXcd& a);
Eigen::MatrixXcd matrix_inv_sqrt_spd(const Eigen::MatrixXcd& a);

double operator_norm_hermitian(const Eigen::MatrixXcd& a);

// Gaussian Hermitian matrix with independent N(0,1)-scaled entries.
Eigen::MatrixXcd random_hermitian(std::mt19937_64& rng, int n, double scale);

// Least-squares slope of log(err) against log(k).  Used for rate fits;
// callers assert on the fitted slope, not on individual errors.
double fit_loglog_slope(const std::vector<double>& k, const std::vector<double>& err);

// Least-squares slope of log(y) against t (exponential-decay rate fit).
double fit_exp_rate(const std::vector<double>& t, const std::vector<double>& y);

// Shortest-round-trip-ish formatting used by every CSV and canonical config:
// %.17g reproduces the double exactly and is byte-stable across runs.
std::string fmt_g17(double x);

uint64_t fnv1a64(const std::string& s);

}  // namespace omegaflow

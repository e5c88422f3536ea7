#include "omegaflow/quantization.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "omegaflow/moment.hpp"
#include "omegaflow/util.hpp"

namespace omegaflow {

namespace {

void check_basis_field(const SectionBasis& basis, const Eigen::ArrayXd& f, const char* what) {
  if (f.size() != basis.geom->num_nodes()) {
    throw std::invalid_argument(std::string(what) + ": field size does not match the grid");
  }
}

void check_degree(const SectionBasis& basis, int k, const char* what) {
  if (k != basis.k) {
    throw std::invalid_argument(std::string(what) + ": tensor power mismatch with the basis");
  }
}

}  // namespace

void validate_inner_product(const HermitianInnerProduct& h) {
  if (h.gram.rows() != h.gram.cols() || h.gram.rows() != h.k + 1) {
    throw NumericError("inner product: Gram matrix must be (k+1) x (k+1)");
  }
  const double scale = std::max(1.0, h.gram.cwiseAbs().maxCoeff());
  const double asym = (h.gram - h.gram.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-14 * scale) {
    throw NumericError("inner product: Gram matrix is not Hermitian (asymmetry " +
                       std::to_string(asym) + ")");
  }
  cholesky_factor(h, "validate_inner_product");
}

Eigen::MatrixXcd cholesky_factor(const HermitianInnerProduct& h, const char* what) {
  Eigen::LLT<Eigen::MatrixXcd> llt(h.gram);
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXcd l = llt.matrixL();
    const Eigen::ArrayXd d = l.diagonal().real().array();
    const double cond_est = (d.maxCoeff() / d.minCoeff());
    // Diagonal ratio squared tracks the condition number; ~1e12 is the
    // supported range, a little headroom on top of it before giving up.
    if (cond_est * cond_est > 1e13) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.gram, Eigen::EigenvaluesOnly);
      throw NotPositiveDefiniteError(
          std::string(what) + ": Gram matrix condition " + std::to_string(cond_est * cond_est) +
              " exceeds the supported range (smallest eigenvalue " +
              std::to_string(es.eigenvalues().minCoeff()) + ")",
          es.eigenvalues().minCoeff());
    }
    return l;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.gram, Eigen::EigenvaluesOnly);
  throw NotPositiveDefiniteError(
      std::string(what) + ": Gram matrix is not positive definite (smallest eigenvalue " +
          std::to_string(es.eigenvalues().minCoeff()) + ")",
      es.eigenvalues().minCoeff());
}

Eigen::MatrixXcd weighted_gram(const SectionBasis& basis, const Eigen::ArrayXd& pointwise) {
  check_basis_field(basis, pointwise, "weighted_gram");
  const Eigen::ArrayXd w = basis.geom->weights * pointwise;
  Eigen::MatrixXcd scaled = basis.values_ref * w.matrix().asDiagonal();
  return hermitize(scaled * basis.values_ref.adjoint());
}

HermitianInnerProduct hilb_omega(const SectionBasis& basis, const FibrewiseMetric& h,
                                 const DensityField& omega) {
  check_degree(basis, h.k, "hilb_omega");
  check_basis_field(basis, h.potential, "hilb_omega");
  validate_volume_density(*basis.geom, omega, "hilb_omega");
  const Eigen::ArrayXd weight = (-double(basis.k) * h.potential).exp() * omega.values;
  HermitianInnerProduct out{basis.k, weighted_gram(basis, weight)};
  cholesky_factor(out, "hilb_omega");  // positivity is part of the contract
  return out;
}

FibrewiseMetric fs(const SectionBasis& basis, const HermitianInnerProduct& h) {
  check_degree(basis, h.k, "fs");
  const Eigen::MatrixXcd l = cholesky_factor(h, "fs");
  const Eigen::MatrixXcd u = l.triangularView<Eigen::Lower>().solve(basis.values_ref);
  const Eigen::ArrayXd b = u.colwise().squaredNorm().array().transpose();
  // b > 0: at every node some weighted monomial has magnitude >= 2^{-k/2}
  // and L^{-1} is invertible.
  FibrewiseMetric out;
  out.k = basis.k;
  out.potential = (b.log() - std::log(double(basis.dim))) / double(basis.k);
  return out;
}

HermitianInnerProduct tk_step(const SectionBasis& basis, const HermitianInnerProduct& h,
                              const DensityField& omega) {
  return hilb_omega(basis, fs(basis, h), omega);
}

TkRunResult run_tk(const SectionBasis& basis, const HermitianInnerProduct& h0,
                   const DensityField& omega, const TkRunOptions& opts) {
  TkRunResult res;
  res.h = h0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    res.h = tk_step(basis, res.h, omega);
    res.iterations = it + 1;
    const MomentMapValue mu = moment_map(basis, res.h, omega);
    res.mu0_history.push_back(mu.mu0_hs);
    if (opts.trace_sink) opts.trace_sink({double(res.iterations), mu.mu0_hs});
    if (mu.mu0_hs < opts.mu0_tol) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

HermitianInnerProduct normalize_det(const HermitianInnerProduct& h) {
  const Eigen::MatrixXcd l = cholesky_factor(h, "normalize_det");
  const double log_det = 2.0 * l.diagonal().real().array().log().sum();
  const double scale = std::exp(log_det / double(h.gram.rows()));
  return HermitianInnerProduct{h.k, h.gram / scale};
}

Eigen::ArrayXd bergman_density(const SectionBasis& basis, const FibrewiseMetric& h,
                               BergmanWeighting weighting,
                               const std::optional<DensityField>& omega) {
  check_degree(basis, h.k, "bergman_density");
  check_basis_field(basis, h.potential, "bergman_density");
  DensityField volume;
  if (weighting == BergmanWeighting::SmoothVolume) {
    volume = ma_density(*basis.geom, h.potential);
  } else {
    if (!omega) {
      throw std::invalid_argument("bergman_density: GivenVolume weighting requires omega");
    }
    validate_volume_density(*basis.geom, *omega, "bergman_density");
    volume = *omega;
  }
  const Eigen::ArrayXd fib = (-double(basis.k) * h.potential).exp();
  HermitianInnerProduct hw{basis.k, weighted_gram(basis, fib * volume.values)};
  const Eigen::MatrixXcd l = cholesky_factor(hw, "bergman_density");
  const Eigen::MatrixXcd u = l.triangularView<Eigen::Lower>().solve(basis.values_ref);
  const Eigen::ArrayXd b = u.colwise().squaredNorm().array().transpose();
  return b * fib;
}

Eigen::ArrayXd berezin_qk(const SectionBasis& basis, const FibrewiseMetric& h,
                          const DensityField& omega, const Eigen::ArrayXd& f) {
  check_degree(basis, h.k, "berezin_qk");
  check_basis_field(basis, f, "berezin_qk");
  const HermitianInnerProduct hw = hilb_omega(basis, h, omega);
  const Eigen::MatrixXcd l = cholesky_factor(hw, "berezin_qk");
  const Eigen::ArrayXd fib = (-double(basis.k) * h.potential).exp();
  const Eigen::MatrixXcd sf = weighted_gram(basis, fib * omega.values * f);
  // m = L^{-1} S_f L^{-*}, the kernel in the orthonormal frame.
  const Eigen::MatrixXcd y = l.triangularView<Eigen::Lower>().solve(sf);
  const Eigen::MatrixXcd m =
      l.triangularView<Eigen::Lower>().solve(y.adjoint()).adjoint();
  Eigen::MatrixXcd u = l.triangularView<Eigen::Lower>().solve(basis.values_ref);
  u = u * fib.sqrt().matrix().asDiagonal();
  const Eigen::ArrayXd q =
      (u.conjugate().array() * (m * u).array()).colwise().sum().real().transpose();
  return q / double(basis.k);
}

Eigen::ArrayXd balancing_potential(const SectionBasis& basis, const HermitianInnerProduct& h,
                                   const DensityField& omega) {
  check_degree(basis, h.k, "balancing_potential");
  const MomentMapValue mu = moment_map(basis, h, omega);
  // -k tr(mu0 mu(p)) pointwise; the fibrewise weight cancels in mu(p).
  const Eigen::MatrixXcd l = cholesky_factor(h, "balancing_potential");
  const Eigen::MatrixXcd u = l.triangularView<Eigen::Lower>().solve(basis.values_ref);
  const Eigen::ArrayXd nrm = u.colwise().squaredNorm().array().transpose();
  const Eigen::ArrayXd num =
      (u.conjugate().array() * (mu.mu0 * u).array()).colwise().sum().real().transpose();
  return -double(basis.k) * num / nrm;
}

}  // namespace omegaflow

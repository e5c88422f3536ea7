#include "omegaflow/moment.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "omegaflow/util.hpp"

namespace omegaflow {

namespace {

// mu = sum_p a_p u_p u_p^* with a_p = w_p Omega_p / |u_p|^2; shared by every
// entry point once the frame evaluations u are known.
MomentMapValue moment_from_frame_values(const Eigen::MatrixXcd& u,
                                        const Eigen::ArrayXd& w_omega) {
  const Eigen::ArrayXd nrm = u.colwise().squaredNorm().array().transpose();
  const Eigen::ArrayXd a = w_omega / nrm;
  MomentMapValue out;
  out.mu = hermitize(u * a.matrix().asDiagonal() * u.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(out.mu, Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < -1e-12) {
    throw NumericError("moment_map: value lost positive semidefiniteness (eigenvalue " +
                       std::to_string(min_eig) + ")");
  }
  out.mu_op = es.eigenvalues().cwiseAbs().maxCoeff();
  const double tr = out.mu.trace().real();
  if (std::abs(tr - 1.0) > 1e-12) {
    throw NumericError("moment_map: trace " + std::to_string(tr) + " drifted from volume 1");
  }
  const Eigen::Index n = out.mu.rows();
  out.mu0 = out.mu - (tr / double(n)) * Eigen::MatrixXcd::Identity(n, n);
  out.mu0_hs = out.mu0.norm();
  return out;
}

Eigen::MatrixXcd frame_values(const SectionBasis& basis, const HermitianInnerProduct& h,
                              const char* what) {
  const Eigen::MatrixXcd l = cholesky_factor(h, what);
  return l.triangularView<Eigen::Lower>().solve(basis.values_ref);
}

}  // namespace

MomentMapValue moment_map(const SectionBasis& basis, const HermitianInnerProduct& h,
                          const DensityField& omega) {
  if (h.k != basis.k) throw std::invalid_argument("moment_map: tensor power mismatch");
  validate_volume_density(*basis.geom, omega, "moment_map");
  const Eigen::MatrixXcd u = frame_values(basis, h, "moment_map");
  return moment_from_frame_values(u, basis.geom->weights * omega.values);
}

MomentMapValue moment_map_in_frame(const SectionBasis& basis, const Eigen::MatrixXcd& frame,
                                   const DensityField& omega) {
  validate_volume_density(*basis.geom, omega, "moment_map_in_frame");
  if (frame.rows() != basis.dim || frame.cols() != basis.dim) {
    throw std::invalid_argument("moment_map_in_frame: frame must be dim x dim");
  }
  const Eigen::MatrixXcd u = frame * basis.values_ref;
  return moment_from_frame_values(u, basis.geom->weights * omega.values);
}

Eigen::ArrayXd matrix_potential(const SectionBasis& basis, const HermitianInnerProduct& h,
                                const Eigen::MatrixXcd& a) {
  if (a.rows() != basis.dim || a.cols() != basis.dim) {
    throw std::invalid_argument("matrix_potential: matrix must be dim x dim");
  }
  const Eigen::MatrixXcd u = frame_values(basis, h, "matrix_potential");
  const Eigen::ArrayXd nrm = u.colwise().squaredNorm().array().transpose();
  const Eigen::ArrayXd num =
      (u.conjugate().array() * (a * u).array()).colwise().sum().real().transpose();
  return num / nrm;
}

Eigen::MatrixXcd moment_map_derivative(const SectionBasis& basis,
                                       const HermitianInnerProduct& h,
                                       const DensityField& omega, const Eigen::MatrixXcd& a,
                                       double eps) {
  if (eps < 1e-6 || eps > 1e-2) {
    throw std::invalid_argument("moment_map_derivative: eps outside [1e-6, 1e-2]");
  }
  validate_volume_density(*basis.geom, omega, "moment_map_derivative");
  const Eigen::MatrixXcd u0 = frame_values(basis, h, "moment_map_derivative");
  const Eigen::ArrayXd w_omega = basis.geom->weights * omega.values;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
  if (es.info() != Eigen::Success) {
    throw NumericError("moment_map_derivative: eigendecomposition of the direction failed");
  }
  const auto mu_at = [&](double t) {
    // Sections transported by e^{t A / 2}: Gram along the geodesic is e^{t A}.
    const Eigen::VectorXd g = (0.5 * t * es.eigenvalues().array()).exp().matrix();
    const Eigen::MatrixXcd w =
        es.eigenvectors() * g.asDiagonal() * es.eigenvectors().adjoint();
    return moment_from_frame_values(w * u0, w_omega).mu;
  };
  const auto central = [&](double e) {
    return ((mu_at(e) - mu_at(-e)) / (2.0 * e)).eval();
  };
  const Eigen::MatrixXcd coarse = central(eps);
  const Eigen::MatrixXcd fine = central(0.5 * eps);
  return hermitize((4.0 * fine - coarse) / 3.0);
}

Eigen::MatrixXcd moment_map_derivative_exact(const SectionBasis& basis,
                                             const HermitianInnerProduct& h,
                                             const DensityField& omega,
                                             const Eigen::MatrixXcd& a) {
  validate_volume_density(*basis.geom, omega, "moment_map_derivative_exact");
  const Eigen::MatrixXcd u = frame_values(basis, h, "moment_map_derivative_exact");
  const Eigen::ArrayXd w_omega = basis.geom->weights * omega.values;
  const Eigen::ArrayXd nrm = u.colwise().squaredNorm().array().transpose();
  const Eigen::ArrayXd ha =
      (u.conjugate().array() * (a * u).array()).colwise().sum().real().transpose() / nrm;
  const Eigen::ArrayXd wts = w_omega / nrm;
  const Eigen::MatrixXcd mu = hermitize(u * wts.matrix().asDiagonal() * u.adjoint());
  const Eigen::MatrixXcd mu_ha =
      hermitize(u * (wts * ha).matrix().asDiagonal() * u.adjoint());
  return hermitize(0.5 * (a * mu + mu * a) - mu_ha);
}

double dist_flat(const HermitianInnerProduct& h0, const HermitianInnerProduct& h1) {
  if (h0.k != h1.k) throw std::invalid_argument("dist_flat: tensor power mismatch");
  return (h0.gram - h1.gram).norm() / double(h0.k);
}

double dist_geodesic(const HermitianInnerProduct& h0, const HermitianInnerProduct& h1) {
  if (h0.k != h1.k) throw std::invalid_argument("dist_geodesic: tensor power mismatch");
  const Eigen::MatrixXcd s = matrix_inv_sqrt_spd(h0.gram);
  const Eigen::MatrixXcd m = hermitize(s * h1.gram * s);
  return matrix_log_spd(m).norm() / double(h0.k);
}

OpnormGrowthReport opnorm_growth_check(const SectionBasis& basis,
                                       const HermitianInnerProduct& h0,
                                       const HermitianInnerProduct& h1,
                                       const DensityField& omega) {
  const Eigen::MatrixXcd l0 = cholesky_factor(h0, "opnorm_growth_check");
  const Eigen::MatrixXcd x = l0.triangularView<Eigen::Lower>().solve(h1.gram);
  const Eigen::MatrixXcd gram1 = hermitize(
      l0.triangularView<Eigen::Lower>().solve(x.adjoint()).adjoint());
  const Eigen::MatrixXcd log_gram = matrix_log_spd(gram1);
  OpnormGrowthReport rep;
  rep.dist = log_gram.norm();
  rep.lhs = moment_map(basis, h1, omega).mu_op;
  rep.rhs = std::exp(2.0 * rep.dist) * moment_map(basis, h0, omega).mu_op;
  rep.slack = rep.rhs - rep.lhs;
  return rep;
}

}  // namespace omegaflow

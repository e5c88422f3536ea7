#pragma once

#include "omegaflow/quantization.hpp"

namespace omegaflow {

// Integrated moment map of an inner product against Omega, expressed in the
// canonical orthonormal frame s = L^{-1} e (L the Cholesky factor of the
// Gram matrix):
//   mu = integral over M of  u(p) u(p)^* / |u(p)|^2  dOmega,
// with u(p) the frame evaluations.  tr(mu) = 1 (unit volume), mu is PSD, and
// mu0 is the trace-free part.
struct MomentMapValue {
  Eigen::MatrixXcd mu;
  Eigen::MatrixXcd mu0;
  double mu0_hs = 0.0;  // Hilbert-Schmidt norm of mu0
  double mu_op = 0.0;   // operator norm of mu
};

MomentMapValue moment_map(const SectionBasis& basis, const HermitianInnerProduct& h,
                          const DensityField& omega);

// Same integral evaluated in a caller-supplied frame: frame rows give the
// sections as combinations of the monomial basis (frame * gram * frame^* = Id
// up to scale is the caller's business).  Used by the flow, whose frame is
// transported rather than re-factored, and by equivariance tests.
MomentMapValue moment_map_in_frame(const SectionBasis& basis, const Eigen::MatrixXcd& frame,
                                   const DensityField& omega);

// Matrix potential H_A(p) = tr(A mu(p)) = <u(p), A u(p)> / |u(p)|^2 for a
// Hermitian A given in the canonical orthonormal frame of h.
Eigen::ArrayXd matrix_potential(const SectionBasis& basis, const HermitianInnerProduct& h,
                                const Eigen::MatrixXcd& a);

// Derivative of the moment map along the geodesic whose orthonormal-frame
// Gram matrix is e^{t A} (sections move by e^{t A / 2}).  Central finite
// difference at +-eps combined with +-eps/2 by Richardson extrapolation.
// With this parametrization the integrated pairing identity
//   tr(B dmu(A)) + <H_A, H_B>_{L^2(Omega)} = Re tr(A B mu)
// holds exactly before discretization of the derivative.
Eigen::MatrixXcd moment_map_derivative(const SectionBasis& basis,
                                       const HermitianInnerProduct& h,
                                       const DensityField& omega, const Eigen::MatrixXcd& a,
                                       double eps = 1e-4);

// Closed-form counterpart (the t-derivative taken under the integral sign):
//   dmu(A) = (A mu + mu A) / 2 - integral of mu(p) H_A(p) dOmega.
// Kept as an independent route for cross-checks of the finite difference.
Eigen::MatrixXcd moment_map_derivative_exact(const SectionBasis& basis,
                                             const HermitianInnerProduct& h,
                                             const DensityField& omega,
                                             const Eigen::MatrixXcd& a);

// Flat distance tr((H0 - H1)^2)^{1/2} / k on Gram matrices in the fixed
// monomial basis.
double dist_flat(const HermitianInnerProduct& h0, const HermitianInnerProduct& h1);

// Geodesic distance ||log(H0^{-1/2} H1 H0^{-1/2})||_HS / k; frame-invariant.
double dist_geodesic(const HermitianInnerProduct& h0, const HermitianInnerProduct& h1);

struct OpnormGrowthReport {
  double lhs = 0.0;    // ||mu(H1)||_op
  double rhs = 0.0;    // e^{2 d} ||mu(H0)||_op
  double slack = 0.0;  // rhs - lhs, nonnegative when the growth bound holds
  double dist = 0.0;   // d = ||log Gram||_HS in the H0-frame (k * dist_geodesic)
};

// Growth bound for the moment-map operator norm along the geodesic from H0 to
// H1.  The exponent uses the un-normalized geodesic length (k * dist_geodesic);
// with the 1/k-normalized distance the stated bound would be false.
OpnormGrowthReport opnorm_growth_check(const SectionBasis& basis,
                                       const HermitianInnerProduct& h0,
                                       const HermitianInnerProduct& h1,
                                       const DensityField& omega);

}  // namespace omegaflow

#pragma once

#include <Eigen/Dense>

#include "omegaflow/geometry.hpp"
#include "omegaflow/types.hpp"

namespace omegaflow {

// Energy functionals on fibrewise potentials, complex dimension one, total
// volume one.  All integrals are against the reference form.

// I(phi) = integral of phi * (1 - u(phi)) where u = 1 + Lap(phi)/2.
// Equals the Dirichlet energy integral of phi * (-Lap(phi)/2), so it is
// nonnegative.
double aubin_i(const GeometryBackend& geom, const Eigen::ArrayXd& phi);

// J(phi) = integral over s in [0,1] of I(s * phi) / s, evaluated by a
// Gauss-Legendre rule that is exact for the quadratic integrand.  Identically
// I(phi) / 2 here; computed by the independent route on purpose.
double aubin_j(const GeometryBackend& geom, const Eigen::ArrayXd& phi);

// Line integral of the variation v -> integral of v * (f - u(phi)) along the
// straight segment from phi_a to phi_b.  The variation is exact, so the value
// only depends on the endpoints and the relative energies compose exactly.
double f0_relative(const GeometryBackend& geom, const Eigen::ArrayXd& phi_a,
                   const Eigen::ArrayXd& phi_b, const DensityField& f);

// F0(phi) = f0_relative(0, phi) = J(phi) + integral of phi * (f - 1).
// Strictly decreasing along the volume-normalizing flow away from its
// stationary points.
double f0_omega(const GeometryBackend& geom, const Eigen::ArrayXd& phi,
                const DensityField& f);

// |F(a->b) + F(b->c) + F(c->a)|; zero up to roundoff.
double cocycle_defect(const GeometryBackend& geom, const Eigen::ArrayXd& phi_a,
                      const Eigen::ArrayXd& phi_b, const Eigen::ArrayXd& phi_c,
                      const DensityField& f);

}  // namespace omegaflow

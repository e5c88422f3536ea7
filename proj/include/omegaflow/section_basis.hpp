#pragma once

#include <memory>

#include "omegaflow/geometry.hpp"
#include "omegaflow/types.hpp"

namespace omegaflow {

// Monomial basis e_j = z^j, j = 0..k, of the degree-k sections over the
// sphere backend, evaluated at every quadrature node together with the
// reference fibrewise weight.
//
// values_ref(j, p) is the weighted evaluation whose squared modulus is the
// pointwise reference fibrewise norm:
//   |e_j(p)|^2_ref = |z|^{2j} / (1 + |z|^2)^k = sigma^j (1 - sigma)^{k-j},
// with sigma = (1 - cos theta) / 2.  Evaluations are assembled in log space
// (log_mag_ref) so high powers never overflow; the sigma form is symmetric
// under j <-> k-j, which is the two-chart pole handling.
struct SectionBasis {
  std::shared_ptr<const GeometryBackend> geom;
  int k = 0;
  int dim = 0;  // k + 1
  Eigen::MatrixXcd values_ref;  // dim x nodes
  Eigen::ArrayXXd log_mag_ref;  // dim x nodes, log |e_j(p)|_ref  (always <= 0)
};

// Requires a sphere backend and 2 <= k <= 64; the torus carries no ample line
// bundle, so asking for its sections is an UnsupportedError.
SectionBasis make_section_basis(std::shared_ptr<const GeometryBackend> geom, int k);

}  // namespace omegaflow

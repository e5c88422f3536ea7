#include "omegaflow/geometry.hpp"

#include <cmath>
#include <vector>

namespace omegaflow {

namespace detail {

class SpectralOps {
 public:
  virtual ~SpectralOps() = default;
  virtual Eigen::ArrayXd laplacian(const Eigen::ArrayXd& f) const = 0;
  virtual double spectral_radius() const = 0;
};

// Gauss-Legendre nodes (ascending) and weights on [-1, 1] by Newton iteration
// on the degree-n Legendre polynomial.
void gauss_legendre(int n, Eigen::ArrayXd& x, Eigen::ArrayXd& w) {
  x.resize(n);
  w.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Tricomi-type initial guess, then Newton.
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = t;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * t * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) {
        // One clean-up step keeps the node at full double accuracy.
        p0 = 1.0;
        p1 = t;
        for (int j = 2; j <= n; ++j) {
          const double p2 = ((2.0 * j - 1.0) * t * p1 - (j - 1.0) * p0) / j;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (t * p1 - p0) / (t * t - 1.0);
        t -= p1 / dp;
        break;
      }
    }
    const double weight = 2.0 / ((1.0 - t * t) * dp * dp);
    // Guesses come out descending in t; store ascending.
    x[n - 1 - i] = t;
    w[n - 1 - i] = weight;
    x[i] = -t;
    w[i] = weight;
  }
}

// Spherical-harmonic Laplacian on the Gauss-Legendre x trapezoid grid with
// triangular truncation L = min(n_theta - 1, (n_phi - 1) / 2).  Eigenvalues
// lambda_l = 2 l (l + 1) (see the normalization note in geometry.hpp).
class SphereOps : public SpectralOps {
 public:
  SphereOps(int n_theta, int n_phi, const Eigen::ArrayXd& gl_nodes,
            const Eigen::ArrayXd& gl_weights)
      : n_theta_(n_theta), n_phi_(n_phi), lmax_(std::min(n_theta - 1, (n_phi - 1) / 2)) {
    build_legendre_tables(gl_nodes, gl_weights);
    build_azimuth_matrix();
    build_composite_operators(gl_weights);
  }

  Eigen::ArrayXd laplacian(const Eigen::ArrayXd& f) const override {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        fm(f.data(), n_theta_, n_phi_);
    Eigen::MatrixXd g = (fm * azim_) / static_cast<double>(n_phi_);
    Eigen::MatrixXd out(n_theta_, 2 * lmax_ + 1);
    out.col(0) = composite_[0] * g.col(0);
    for (int m = 1; m <= lmax_; ++m) {
      out.middleCols(2 * m - 1, 2) = composite_[m] * g.middleCols(2 * m - 1, 2);
    }
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> res =
        out * azim_.transpose();
    return Eigen::Map<const Eigen::ArrayXd>(res.data(), f.size());
  }

  double spectral_radius() const override { return 2.0 * lmax_ * (lmax_ + 1.0); }

  int lmax() const { return lmax_; }

  // Normalized associated Legendre value table for one order m:
  // rows l = m..L, columns are the Gauss-Legendre nodes.
  const Eigen::MatrixXd& legendre(int m) const { return legendre_[m]; }

 private:
  void build_legendre_tables(const Eigen::ArrayXd& t, const Eigen::ArrayXd& w) {
    const int n = n_theta_;
    const Eigen::ArrayXd sin_theta = (1.0 - t * t).sqrt();
    const Eigen::ArrayXd half_w = 0.5 * w;
    legendre_.resize(lmax_ + 1);
    Eigen::ArrayXd sectoral = Eigen::ArrayXd::Ones(n);
    for (int m = 0; m <= lmax_; ++m) {
      if (m > 0) {
        sectoral *= sin_theta * std::sqrt((2.0 * m + 1.0) / (2.0 * m));
      }
      Eigen::MatrixXd table(lmax_ - m + 1, n);
      table.row(0) = sectoral.matrix().transpose();
      if (m < lmax_) {
        table.row(1) = (std::sqrt(2.0 * m + 3.0) * t * sectoral).matrix().transpose();
      }
      for (int l = m + 2; l <= lmax_; ++l) {
        const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - m * m));
        const double b =
            std::sqrt((static_cast<double>(l - 1) * (l - 1) - m * m) /
                      (4.0 * static_cast<double>(l - 1) * (l - 1) - 1.0));
        table.row(l - m) = a * (t.matrix().transpose().cwiseProduct(table.row(l - m - 1)) -
                                b * table.row(l - m - 2));
      }
      // Rows are renormalized against the actual quadrature so the transform
      // is orthonormal to machine precision regardless of the convention the
      // recurrence seeds carry.
      for (int r = 0; r < table.rows(); ++r) {
        const double q = (table.row(r).array().square() * half_w.transpose()).sum();
        table.row(r) /= std::sqrt(q);
      }
      legendre_[m] = std::move(table);
    }
  }

  void build_azimuth_matrix() {
    azim_.resize(n_phi_, 2 * lmax_ + 1);
    const double sqrt2 = std::sqrt(2.0);
    for (int j = 0; j < n_phi_; ++j) {
      const double phi = 2.0 * M_PI * j / n_phi_;
      azim_(j, 0) = 1.0;
      for (int m = 1; m <= lmax_; ++m) {
        azim_(j, 2 * m - 1) = sqrt2 * std::cos(m * phi);
        azim_(j, 2 * m) = sqrt2 * std::sin(m * phi);
      }
    }
  }

  void build_composite_operators(const Eigen::ArrayXd& w) {
    const Eigen::VectorXd half_w = 0.5 * w.matrix();
    composite_.resize(lmax_ + 1);
    for (int m = 0; m <= lmax_; ++m) {
      Eigen::VectorXd lam(lmax_ - m + 1);
      for (int l = m; l <= lmax_; ++l) lam[l - m] = -2.0 * l * (l + 1.0);
      composite_[m] = legendre_[m].transpose() * lam.asDiagonal() * legendre_[m] *
                      half_w.asDiagonal();
    }
  }

  int n_theta_;
  int n_phi_;
  int lmax_;
  Eigen::MatrixXd azim_;                    // n_phi x (2L+1): 1, sqrt2 cos, sqrt2 sin
  std::vector<Eigen::MatrixXd> legendre_;   // per m
  std::vector<Eigen::MatrixXd> composite_;  // per m: synth * (-lambda) * analysis
};

// Fourier Laplacian on the uniform periodic grid, applied as dense symmetric
// differentiation matrices (one per axis) built from the orthonormal real DFT
// basis.  Grids are small enough (<= 128 per axis) that a gemm beats per-call
// FFTs and keeps summation order fixed.
class TorusOps : public SpectralOps {
 public:
  TorusOps(int n_x, int n_y)
      : n_x_(n_x), n_y_(n_y), cx_(axis_operator(n_x)), cy_(axis_operator(n_y)) {}

  Eigen::ArrayXd laplacian(const Eigen::ArrayXd& f) const override {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        fm(f.data(), n_x_, n_y_);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> res =
        cx_ * fm + fm * cy_;
    return Eigen::Map<const Eigen::ArrayXd>(res.data(), f.size());
  }

  double spectral_radius() const override {
    const double hx = n_x_ / 2.0, hy = n_y_ / 2.0;
    return hx * hx + hy * hy;
  }

 private:
  static Eigen::MatrixXd axis_operator(int n) {
    Eigen::MatrixXd u(n, n);
    Eigen::VectorXd lam(n);
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
    const double amp = std::sqrt(2.0 / n);
    for (int j = 0; j < n; ++j) u(j, 0) = inv_sqrt_n;
    lam[0] = 0.0;
    int col = 1;
    for (int m = 1; m < n / 2; ++m) {
      for (int j = 0; j < n; ++j) {
        const double x = 2.0 * M_PI * j / n;
        u(j, col) = amp * std::cos(m * x);
        u(j, col + 1) = amp * std::sin(m * x);
      }
      lam[col] = lam[col + 1] = -static_cast<double>(m) * m;
      col += 2;
    }
    // Nyquist column (n is a power of two, hence even).
    for (int j = 0; j < n; ++j) u(j, col) = inv_sqrt_n * (j % 2 == 0 ? 1.0 : -1.0);
    lam[col] = -(n / 2.0) * (n / 2.0);
    Eigen::MatrixXd c = u * lam.asDiagonal() * u.transpose();
    return 0.5 * (c + c.transpose());
  }

  int n_x_;
  int n_y_;
  Eigen::MatrixXd cx_;
  Eigen::MatrixXd cy_;
};

}  // namespace detail

Eigen::ArrayXd GeometryBackend::laplacian(const Eigen::ArrayXd& f) const {
  if (f.size() != num_nodes()) throw std::invalid_argument("laplacian: field size mismatch");
  return ops->laplacian(f);
}

double GeometryBackend::laplacian_spectral_radius() const { return ops->spectral_radius(); }

std::shared_ptr<const GeometryBackend> make_sphere_backend(int n_theta, int n_phi) {
  if (n_theta < 8) throw ConfigError("make_sphere_backend: n_theta must be >= 8");
  if (n_phi < 16) throw ConfigError("make_sphere_backend: n_phi must be >= 16");
  Eigen::ArrayXd t, w;
  detail::gauss_legendre(n_theta, t, w);

  auto geom = std::make_shared<GeometryBackend>();
  geom->kind = GeometryKind::Sphere;
  geom->n1 = n_theta;
  geom->n2 = n_phi;
  const Eigen::Index nodes = static_cast<Eigen::Index>(n_theta) * n_phi;
  geom->weights.resize(nodes);
  geom->coord1.resize(nodes);
  geom->coord2.resize(nodes);
  geom->cos_theta.resize(nodes);
  for (int i = 0; i < n_theta; ++i) {
    const double theta = std::acos(t[i]);
    const double node_weight = w[i] / (2.0 * n_phi);
    for (int j = 0; j < n_phi; ++j) {
      const Eigen::Index p = static_cast<Eigen::Index>(i) * n_phi + j;
      geom->weights[p] = node_weight;
      geom->coord1[p] = theta;
      geom->coord2[p] = 2.0 * M_PI * j / n_phi;
      geom->cos_theta[p] = t[i];
    }
  }
  geom->ops = std::make_shared<detail::SphereOps>(n_theta, n_phi, t, w);
  return geom;
}

std::shared_ptr<const GeometryBackend> make_torus_backend(int n_x, int n_y) {
  auto power_of_two = [](int n) { return n >= 16 && (n & (n - 1)) == 0; };
  if (!power_of_two(n_x) || !power_of_two(n_y)) {
    throw ConfigError("make_torus_backend: grid sides must be powers of two >= 16");
  }
  auto geom = std::make_shared<GeometryBackend>();
  geom->kind = GeometryKind::Torus;
  geom->n1 = n_x;
  geom->n2 = n_y;
  const Eigen::Index nodes = static_cast<Eigen::Index>(n_x) * n_y;
  geom->weights = Eigen::ArrayXd::Constant(nodes, 1.0 / nodes);
  geom->coord1.resize(nodes);
  geom->coord2.resize(nodes);
  for (int i = 0; i < n_x; ++i) {
    for (int j = 0; j < n_y; ++j) {
      const Eigen::Index p = static_cast<Eigen::Index>(i) * n_y + j;
      geom->coord1[p] = 2.0 * M_PI * i / n_x;
      geom->coord2[p] = 2.0 * M_PI * j / n_y;
    }
  }
  geom->ops = std::make_shared<detail::TorusOps>(n_x, n_y);
  return geom;
}

Eigen::ArrayXd spherical_harmonic(const GeometryBackend& geom, int ell, int m) {
  if (geom.kind != GeometryKind::Sphere) {
    throw UnsupportedError("spherical_harmonic: sphere backend required");
  }
  const auto* ops = dynamic_cast<const detail::SphereOps*>(geom.ops.get());
  const int am = std::abs(m);
  if (ell < 0 || ell > ops->lmax() || am > ell) {
    throw std::invalid_argument("spherical_harmonic: (ell, m) outside the truncation");
  }
  const Eigen::MatrixXd& table = ops->legendre(am);
  Eigen::ArrayXd out(geom.num_nodes());
  const double sqrt2 = std::sqrt(2.0);
  for (int i = 0; i < geom.n1; ++i) {
    const double leg = table(ell - am, i);
    for (int j = 0; j < geom.n2; ++j) {
      const Eigen::Index p = static_cast<Eigen::Index>(i) * geom.n2 + j;
      double az = 1.0;
      if (m > 0) az = sqrt2 * std::cos(m * geom.coord2[p]);
      if (m < 0) az = sqrt2 * std::sin(am * geom.coord2[p]);
      out[p] = leg * az;
    }
  }
  return out;
}

DensityField ma_density(const GeometryBackend& geom, const Eigen::ArrayXd& potential) {
  Eigen::ArrayXd u = 1.0 + 0.5 * geom.laplacian(potential);
  Eigen::Index worst = 0;
  const double umin = u.minCoeff(&worst);
  if (!(umin > 0.0)) {
    throw PositivityError("ma_density: induced Kahler form degenerates (node " +
                              std::to_string(worst) + ", u = " + std::to_string(umin) + ")",
                          worst, umin);
  }
  const double mass = geom.integrate(u);
  if (std::abs(mass - 1.0) > 1e-10) {
    throw NumericError("ma_density: density mass drifted from 1 by " +
                       std::to_string(mass - 1.0));
  }
  return DensityField{FieldRole::VolumeDensity, std::move(u)};
}

void validate_volume_density(const GeometryBackend& geom, const DensityField& f,
                             const char* what) {
  if (f.role != FieldRole::VolumeDensity) {
    throw NumericError(std::string(what) + ": field is not tagged as a volume density");
  }
  if (f.values.size() != geom.num_nodes()) {
    throw NumericError(std::string(what) + ": density size does not match the grid");
  }
  if (!f.values.allFinite()) {
    throw NumericError(std::string(what) + ": density has non-finite values");
  }
  Eigen::Index worst = 0;
  const double vmin = f.values.minCoeff(&worst);
  if (!(vmin > 0.0)) {
    throw PositivityError(std::string(what) + ": density must be positive", worst, vmin);
  }
  const double mass = geom.integrate(f.values);
  if (std::abs(mass - 1.0) > 1e-10) {
    throw NumericError(std::string(what) + ": density mass is " + std::to_string(mass) +
                       ", expected 1");
  }
}

}  // namespace omegaflow

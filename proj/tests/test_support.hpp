// Shared helpers for the unit tests: scalar constructors and Monte Carlo
// estimates used as independent oracles.
#ifndef VSE_TEST_SUPPORT_HPP
#define VSE_TEST_SUPPORT_HPP

#include "gaussian.hpp"
#include "random_systems.hpp"

#include <cmath>
#include <numbers>

namespace vse::test {

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

inline Vector scalar(double x) { return Vector::Constant(1, x); }
inline Matrix mat1(double x) { return Matrix::Constant(1, 1, x); }

inline GaussianDensity normal1(double mean, double var) { return GaussianDensity(scalar(mean), mat1(var)); }

inline AffineGaussianKernel kernel1(double a, double b, double q) {
  return AffineGaussianKernel(mat1(a), scalar(b), mat1(q));
}

// Direct density formula with an explicit inverse; independent of the library
// Cholesky path.
inline double direct_log_pdf(const Vector& mean, const Matrix& cov, const Vector& x) {
  const Vector r = x - mean;
  const double d = static_cast<double>(x.size());
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + std::log(cov.determinant()) + r.dot(cov.inverse() * r));
}

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

template <class Draw>
McEstimate monte_carlo(std::size_t n, Draw&& draw) {
  double s = 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = draw();
    s += v;
    ss += v * v;
  }
  const double dn = static_cast<double>(n);
  McEstimate e;
  e.mean = s / dn;
  e.std_error = std::sqrt(std::max(ss / dn - e.mean * e.mean, 0.0) / dn);
  return e;
}

inline GaussianDensity random_gaussian(Rng& rng, Index d) {
  return GaussianDensity(rng.normal(d), random_spd(rng, d, 0.3, 2.0));
}

inline AffineGaussianKernel random_kernel(Rng& rng, Index d_out, Index d_in) {
  Matrix a(d_out, d_in);
  for (Index i = 0; i < d_out; ++i)
    for (Index j = 0; j < d_in; ++j) a(i, j) = 0.7 * rng.normal();
  return AffineGaussianKernel(a, rng.normal(d_out), random_spd(rng, d_out, 0.3, 1.5));
}

}  // namespace vse::test

#endif  // VSE_TEST_SUPPORT_HPP

#ifndef VSE_TEST_SUPPORT_JOINT
#define VSE_TEST_SUPPORT_JOINT
#include "exact_inference.hpp"

namespace vse::test {

// The joint Gaussian of (x_{0:T}, y_{0:T}) built directly from the model
// equations, conditioned with explicit inverses.
struct JointOracle {
  Vector mean_x, mean_y;
  Matrix cov_x, cov_y, cov_xy;
  Index d = 0;

  explicit JointOracle(const LinearGaussianSystem& sys) {
    d = sys.state_dim();
    const Index T = sys.horizon();
    const Index p = sys.observations.front().out_dim();
    const Index n = (T + 1) * d;
    mean_x = Vector::Zero(n);
    cov_x = Matrix::Zero(n, n);
    mean_x.head(d) = sys.init.mean;
    cov_x.topLeftCorner(d, d) = sys.init.cov;
    for (Index t = 1; t <= T; ++t) {
      const auto& k = sys.transitions[static_cast<std::size_t>(t - 1)];
      mean_x.segment(t * d, d) = k.slope * mean_x.segment((t - 1) * d, d) + k.offset;
      // Cov(x_t, x_s) = A Cov(x_{t-1}, x_s) for s < t.
      for (Index s = 0; s < t; ++s) {
        const Matrix c = k.slope * cov_x.block((t - 1) * d, s * d, d, d);
        cov_x.block(t * d, s * d, d, d) = c;
        cov_x.block(s * d, t * d, d, d) = c.transpose();
      }
      cov_x.block(t * d, t * d, d, d) =
          k.slope * cov_x.block((t - 1) * d, (t - 1) * d, d, d) * k.slope.transpose() + k.cov;
    }
    Matrix C = Matrix::Zero((T + 1) * p, n);
    Matrix R = Matrix::Zero((T + 1) * p, (T + 1) * p);
    mean_y = Vector::Zero((T + 1) * p);
    for (Index t = 0; t <= T; ++t) {
      const auto& o = sys.observations[static_cast<std::size_t>(t)];
      C.block(t * p, t * d, p, d) = o.slope;
      R.block(t * p, t * p, p, p) = o.cov;
      mean_y.segment(t * p, p) = o.slope * mean_x.segment(t * d, d) + o.offset;
    }
    cov_y = C * cov_x * C.transpose() + R;
    cov_xy = cov_x * C.transpose();
  }

  static Vector stack(const Observations& y) {
    Index n = 0;
    for (const auto& v : y) n += v.size();
    Vector out(n);
    Index i = 0;
    for (const auto& v : y) {
      out.segment(i, v.size()) = v;
      i += v.size();
    }
    return out;
  }

  double log_evidence(const Observations& y) const { return direct_log_pdf(mean_y, cov_y, stack(y)); }

  // Posterior of x_t given all of y.
  GaussianDensity smoothing(const Observations& y, Index t) const {
    const Matrix gain = cov_xy * cov_y.inverse();
    const Vector m = mean_x + gain * (stack(y) - mean_y);
    const Matrix P = cov_x - gain * cov_xy.transpose();
    return GaussianDensity(m.segment(t * d, d), symmetrized(P.block(t * d, t * d, d, d)));
  }

  // Posterior of x_t given y_{0:t}: restrict the model to 0..t.
  static LinearGaussianSystem prefix(const LinearGaussianSystem& sys, Index t) {
    LinearGaussianSystem out{sys.init, {}, {}};
    for (Index s = 0; s <= t; ++s) {
      if (s > 0) out.transitions.push_back(sys.transitions[static_cast<std::size_t>(s - 1)]);
      out.observations.push_back(sys.observations[static_cast<std::size_t>(s)]);
    }
    return out;
  }
};

inline double max_abs_diff(const GaussianDensity& a, const GaussianDensity& b) {
  return std::max((a.mean - b.mean).cwiseAbs().maxCoeff(), (a.cov - b.cov).cwiseAbs().maxCoeff());
}

}  // namespace vse::test
#endif

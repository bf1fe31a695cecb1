// Gaussian and categorical algebra shared by every estimator in the library.
//
// Covariances are stored in moment form. Information form only appears
// transiently inside operations and in LogQuadraticForm, which is allowed to be
// improper (its precision need not be positive definite).
#ifndef VSE_GAUSSIAN_HPP
#define VSE_GAUSSIAN_HPP

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vse {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Bad arguments: dimension mismatches, invalid probabilities, malformed input.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Failures of the arithmetic itself: a matrix that must be positive definite
// is not, a product of densities is improper, all weights vanish.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Optional diagonal loading applied before every Cholesky factorization.
// Zero by default; only the experiment harness is expected to touch it.
void set_global_jitter(double jitter);
double global_jitter();

// Cholesky factor of `a`; throws NumericError naming `what` on failure.
Eigen::LLT<Matrix> cholesky(const Matrix& a, std::string_view what);
double log_det(const Eigen::LLT<Matrix>& llt);
Matrix symmetrized(const Matrix& a);

// log(sum(exp(v))) with -inf entries ignored; returns -inf when all are -inf.
double log_sum_exp(std::span<const double> values);

struct GaussianDensity {
  Vector mean;
  Matrix cov;

  GaussianDensity() = default;
  // Validates dimensions, symmetry (1e-12 relative) and positive definiteness;
  // the stored covariance is exactly symmetric.
  GaussianDensity(Vector mean, Matrix cov);

  Index dim() const { return mean.size(); }
};

// N(x_out; slope * x_in + offset, cov)
struct AffineGaussianKernel {
  Matrix slope;
  Vector offset;
  Matrix cov;

  AffineGaussianKernel() = default;
  AffineGaussianKernel(Matrix slope, Vector offset, Matrix cov);

  Index out_dim() const { return offset.size(); }
  Index in_dim() const { return slope.cols(); }

  Vector mean_at(const Vector& x_in) const { return slope * x_in + offset; }
  double log_density(const Vector& x_out, const Vector& x_in) const;
  // Marginal of the output when the input is distributed as `input`.
  GaussianDensity push(const GaussianDensity& input) const;
};

struct Categorical {
  Vector probs;

  Categorical() = default;
  explicit Categorical(Vector probs);

  static Categorical uniform(Index size);
  // Normalizes exp(log_weights) with log-sum-exp. Throws NumericError if every
  // weight is -inf.
  static Categorical from_log_weights(const Vector& log_weights);

  Index size() const { return probs.size(); }
  double log_prob(Index i) const;
  Index argmax() const;
};

// Column-stochastic: entry (i, j) is the probability of destination i given
// source j.
struct CategoricalKernel {
  Matrix matrix;

  CategoricalKernel() = default;
  explicit CategoricalKernel(Matrix matrix);

  Index size() const { return matrix.rows(); }
  Categorical column(Index j) const { return Categorical(matrix.col(j)); }
  // Destination marginal when the source is distributed as `source`.
  Categorical apply(const Categorical& source) const;
};

// x -> constant + linear' x - 0.5 x' precision x
struct LogQuadraticForm {
  Matrix precision;
  Vector linear;
  double constant = 0.0;

  LogQuadraticForm() = default;
  LogQuadraticForm(Matrix precision, Vector linear, double constant);

  static LogQuadraticForm zero(Index dim);
  // log N(x; g.mean, g.cov) as a function of x.
  static LogQuadraticForm from_log_pdf(const GaussianDensity& g);
  // log N(y; C x + d, R) as a function of x.
  static LogQuadraticForm likelihood(const AffineGaussianKernel& obs, const Vector& y);

  Index dim() const { return linear.size(); }
  double operator()(const Vector& x) const;
  LogQuadraticForm operator+(const LogQuadraticForm& other) const;
  LogQuadraticForm shifted(double delta) const;
};

double log_pdf(const GaussianDensity& g, const Vector& x);

// E_{under}[log g(x)] in closed form.
double expected_log_pdf(const GaussianDensity& g, const GaussianDensity& under);

// E_{under}[lq(x)] in closed form.
double expectation(const LogQuadraticForm& lq, const GaussianDensity& under);

// -E_g[log g(x)]
double entropy(const GaussianDensity& g);

struct PredictReverse {
  GaussianDensity predictive;
  AffineGaussianKernel reverse;
};

// Factorizes kernel(x'|x) prior(x) = predictive(x') reverse(x|x').
// Throws NumericError when the kernel covariance is so small relative to the
// prior that the reverse covariance is numerically singular.
PredictReverse predict_and_reverse(const GaussianDensity& prior,
                                   const AffineGaussianKernel& kernel);

// Same factorization without the conditioning guard. Used by smoothers that
// must accept nearly deterministic dynamics.
PredictReverse predict_and_reverse_unguarded(const GaussianDensity& prior,
                                             const AffineGaussianKernel& kernel);

// int log(g_star / g) g dx. Always <= 0.
double neg_relative_entropy(const GaussianDensity& g_star, const GaussianDensity& g);

struct AveragedGaussian {
  double log_zeta = 0.0;
  GaussianDensity density;
};

// log_zeta + log density(x) == sum_z weights(z) log components[z](x) for all x.
// The returned normalizer is on the log scale.
AveragedGaussian average_log_gaussians(std::span<const GaussianDensity> components,
                                       const Categorical& weights);

// int log(k2(x'|x) / k1(x'|x)) k1(x'|x) dx' == log_c + log N(y; H x, S)
//
//   log_c = -0.5 [tr(Q2^-1 Q1) - d (1 + log 2 pi) - log|Q1|]
//   y = b2 - b1,  H = A1 - A2,  S = Q2
//
// The constant was checked against a Monte Carlo estimate of the integral.
struct ConditionalLikelihood {
  double log_c = 0.0;
  Vector y;
  Matrix H;
  Matrix S;

  double operator()(const Vector& x) const;
};

ConditionalLikelihood conditional_relative_entropy_likelihood(const AffineGaussianKernel& k1,
                                                              const AffineGaussianKernel& k2);

struct ConjugateProduct {
  double log_norm = 0.0;
  GaussianDensity posterior;
};

// exp(lq(x)) N(x; g) == exp(log_norm) N(x; posterior). Throws NumericError
// ("improper product") when the combined precision is not positive definite.
ConjugateProduct quadratic_times_gaussian(const LogQuadraticForm& lq, const GaussianDensity& g);

// exp(lq(x)) == exp(log_norm) N(x; posterior); needs a positive definite
// precision.
ConjugateProduct normalize(const LogQuadraticForm& lq);

// Expectation of lq(z) when z = B x + o + e, e ~ N(0, noise_cov), as a form in x.
LogQuadraticForm expect_affine(const LogQuadraticForm& lq, const Matrix& B, const Vector& o,
                               const Matrix& noise_cov);

// Joint density of (x_out, x_in), stacked as [x_out; x_in].
GaussianDensity compose_joint(const GaussianDensity& marginal,
                              const AffineGaussianKernel& conditional);

struct JointFactorization {
  GaussianDensity marginal;          // of the trailing block
  AffineGaussianKernel conditional;  // of the leading block given the trailing one
};

// Inverse of compose_joint: splits a joint over [lead; trail] with
// lead_dim leading coordinates.
JointFactorization factor_joint(const GaussianDensity& joint, Index lead_dim);

}  // namespace vse

#endif  // VSE_GAUSSIAN_HPP

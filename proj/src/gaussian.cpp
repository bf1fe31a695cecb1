#include "gaussian.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>

namespace vse {
namespace {

std::atomic<double> g_jitter{0.0};

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kSymmetryTol = 1e-12;
constexpr double kProbabilityTol = 1e-12;
// Smallest admissible ratio between the reverse-kernel covariance and the prior
// covariance in predict_and_reverse.
constexpr double kReverseConditioning = 1e-10;

std::string dims(Index a, Index b) {
  return std::to_string(a) + " vs " + std::to_string(b);
}

void check_symmetric(const Matrix& a, std::string_view what) {
  if (a.rows() != a.cols()) {
    throw InputError(std::string(what) + " is not square");
  }
  if (!a.allFinite()) {
    throw InputError(std::string(what) + " has non-finite entries");
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) {
    throw InputError(std::string(what) + " is not symmetric");
  }
}

double min_eigenvalue(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

double max_eigenvalue(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().maxCoeff();
}

}  // namespace

void set_global_jitter(double jitter) {
  if (!(jitter >= 0.0)) throw InputError("jitter must be non-negative");
  g_jitter.store(jitter);
}

double global_jitter() { return g_jitter.load(); }

Eigen::LLT<Matrix> cholesky(const Matrix& a, std::string_view what) {
  Eigen::LLT<Matrix> llt;
  const double jitter = global_jitter();
  if (jitter > 0.0) {
    llt.compute(a + jitter * Matrix::Identity(a.rows(), a.cols()));
  } else {
    llt.compute(a);
  }
  if (llt.info() != Eigen::Success || !a.allFinite()) {
    throw NumericError(std::string(what) + " is not positive definite");
  }
  const auto diag = llt.matrixLLT().diagonal();
  if ((diag.array() <= 0.0).any() || !diag.allFinite()) {
    throw NumericError(std::string(what) + " is not positive definite");
  }
  return llt;
}

double log_det(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

double log_sum_exp(std::span<const double> values) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : values) top = std::max(top, v);
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

GaussianDensity::GaussianDensity(Vector m, Matrix c) : mean(std::move(m)), cov(std::move(c)) {
  if (cov.rows() != mean.size()) {
    throw InputError("gaussian: mean/cov dimension mismatch " + dims(mean.size(), cov.rows()));
  }
  if (!mean.allFinite()) throw InputError("gaussian: mean has non-finite entries");
  check_symmetric(cov, "gaussian covariance");
  cov = symmetrized(cov);
  cholesky(cov, "gaussian covariance");
}

AffineGaussianKernel::AffineGaussianKernel(Matrix s, Vector o, Matrix c)
    : slope(std::move(s)), offset(std::move(o)), cov(std::move(c)) {
  if (slope.rows() != offset.size() || cov.rows() != offset.size()) {
    throw InputError("kernel: slope/offset/cov dimension mismatch");
  }
  if (!slope.allFinite() || !offset.allFinite()) {
    throw InputError("kernel: non-finite slope or offset");
  }
  check_symmetric(cov, "kernel covariance");
  cov = symmetrized(cov);
  cholesky(cov, "kernel covariance");
}

double AffineGaussianKernel::log_density(const Vector& x_out, const Vector& x_in) const {
  return log_pdf(GaussianDensity{mean_at(x_in), cov}, x_out);
}

GaussianDensity AffineGaussianKernel::push(const GaussianDensity& input) const {
  if (input.dim() != in_dim()) {
    throw InputError("kernel push: dimension mismatch " + dims(input.dim(), in_dim()));
  }
  return GaussianDensity(slope * input.mean + offset,
                         symmetrized(slope * input.cov * slope.transpose() + cov));
}

Categorical::Categorical(Vector p) : probs(std::move(p)) {
  if (probs.size() == 0) throw InputError("categorical: empty support");
  if (!probs.allFinite() || (probs.array() < 0.0).any()) {
    throw InputError("categorical: probabilities must be finite and non-negative");
  }
  if (std::abs(probs.sum() - 1.0) > kProbabilityTol * static_cast<double>(probs.size())) {
    throw InputError("categorical: probabilities do not sum to one");
  }
  probs /= probs.sum();
}

Categorical Categorical::uniform(Index size) {
  return Categorical(Vector::Constant(size, 1.0 / static_cast<double>(size)));
}

Categorical Categorical::from_log_weights(const Vector& log_weights) {
  const std::span<const double> view(log_weights.data(), static_cast<std::size_t>(log_weights.size()));
  const double total = log_sum_exp(view);
  if (!std::isfinite(total)) {
    throw NumericError("categorical: all weights vanish");
  }
  // Scalar exp so that -inf maps to an exact zero.
  Vector p(log_weights.size());
  for (Index i = 0; i < p.size(); ++i) p(i) = std::exp(log_weights(i) - total);
  p /= p.sum();
  return Categorical(std::move(p));
}

double Categorical::log_prob(Index i) const {
  const double p = probs(i);
  return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

Index Categorical::argmax() const {
  Index best = 0;
  probs.maxCoeff(&best);
  return best;
}

CategoricalKernel::CategoricalKernel(Matrix m) : matrix(std::move(m)) {
  if (matrix.rows() != matrix.cols() || matrix.rows() == 0) {
    throw InputError("categorical kernel must be square and non-empty");
  }
  for (Index j = 0; j < matrix.cols(); ++j) {
    Categorical col(matrix.col(j));
    matrix.col(j) = col.probs;
  }
}

Categorical CategoricalKernel::apply(const Categorical& source) const {
  if (source.size() != size()) throw InputError("categorical kernel: size mismatch");
  Vector p = matrix * source.probs;
  p = p.cwiseMax(0.0);
  p /= p.sum();
  return Categorical(std::move(p));
}

LogQuadraticForm::LogQuadraticForm(Matrix p, Vector l, double c)
    : precision(std::move(p)), linear(std::move(l)), constant(c) {
  if (precision.rows() != linear.size()) {
    throw InputError("log-quadratic form: dimension mismatch");
  }
  check_symmetric(precision, "log-quadratic precision");
  precision = symmetrized(precision);
}

LogQuadraticForm LogQuadraticForm::zero(Index dim) {
  return LogQuadraticForm(Matrix::Zero(dim, dim), Vector::Zero(dim), 0.0);
}

LogQuadraticForm LogQuadraticForm::from_log_pdf(const GaussianDensity& g) {
  const auto llt = cholesky(g.cov, "gaussian covariance");
  const Matrix prec = llt.solve(Matrix::Identity(g.dim(), g.dim()));
  const Vector lin = llt.solve(g.mean);
  const double c = -0.5 * (static_cast<double>(g.dim()) * kLog2Pi + log_det(llt) + g.mean.dot(lin));
  return LogQuadraticForm(symmetrized(prec), lin, c);
}

LogQuadraticForm LogQuadraticForm::likelihood(const AffineGaussianKernel& obs, const Vector& y) {
  if (y.size() != obs.out_dim()) {
    throw InputError("likelihood: observation dimension mismatch " + dims(y.size(), obs.out_dim()));
  }
  const auto llt = cholesky(obs.cov, "observation covariance");
  const Vector r = y - obs.offset;
  const Matrix RinvC = llt.solve(obs.slope);
  const Vector Rinvr = llt.solve(r);
  const double c = -0.5 * (static_cast<double>(y.size()) * kLog2Pi + log_det(llt) + r.dot(Rinvr));
  return LogQuadraticForm(symmetrized(obs.slope.transpose() * RinvC),
                          obs.slope.transpose() * Rinvr, c);
}

double LogQuadraticForm::operator()(const Vector& x) const {
  if (x.size() != dim()) throw InputError("log-quadratic form: dimension mismatch");
  return constant + linear.dot(x) - 0.5 * x.dot(precision * x);
}

LogQuadraticForm LogQuadraticForm::operator+(const LogQuadraticForm& other) const {
  if (other.dim() != dim()) throw InputError("log-quadratic form: dimension mismatch in sum");
  return LogQuadraticForm(precision + other.precision, linear + other.linear,
                          constant + other.constant);
}

LogQuadraticForm LogQuadraticForm::shifted(double delta) const {
  LogQuadraticForm out = *this;
  out.constant += delta;
  return out;
}

double log_pdf(const GaussianDensity& g, const Vector& x) {
  if (x.size() != g.dim()) {
    throw InputError("log_pdf: dimension mismatch " + dims(x.size(), g.dim()));
  }
  const auto llt = cholesky(g.cov, "gaussian covariance");
  const Vector r = x - g.mean;
  const Vector w = llt.matrixL().solve(r);
  return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + log_det(llt) + w.squaredNorm());
}

double expected_log_pdf(const GaussianDensity& g, const GaussianDensity& under) {
  if (g.dim() != under.dim()) throw InputError("expected_log_pdf: dimension mismatch");
  const auto llt = cholesky(g.cov, "gaussian covariance");
  const Vector r = under.mean - g.mean;
  const double trace = llt.solve(under.cov).trace();
  return -0.5 * (static_cast<double>(g.dim()) * kLog2Pi + log_det(llt) +
                 r.dot(llt.solve(r)) + trace);
}

double expectation(const LogQuadraticForm& lq, const GaussianDensity& under) {
  if (lq.dim() != under.dim()) throw InputError("expectation: dimension mismatch");
  return lq(under.mean) - 0.5 * (lq.precision * under.cov).trace();
}

double entropy(const GaussianDensity& g) {
  const auto llt = cholesky(g.cov, "gaussian covariance");
  return 0.5 * (static_cast<double>(g.dim()) * (1.0 + kLog2Pi) + log_det(llt));
}

PredictReverse predict_and_reverse_unguarded(const GaussianDensity& prior,
                                             const AffineGaussianKernel& kernel) {
  if (kernel.in_dim() != prior.dim()) {
    throw InputError("predict: kernel input dimension mismatch " + dims(kernel.in_dim(), prior.dim()));
  }
  const Matrix& A = kernel.slope;
  const Matrix S = symmetrized(A * prior.cov * A.transpose() + kernel.cov);
  const auto llt = cholesky(S, "predictive covariance");
  const Vector pred_mean = A * prior.mean + kernel.offset;
  // gain = P A' S^-1
  const Matrix gain = llt.solve(A * prior.cov).transpose();
  const Matrix rev_cov = symmetrized(prior.cov - gain * S * gain.transpose());
  return PredictReverse{GaussianDensity(pred_mean, S),
                        AffineGaussianKernel(gain, prior.mean - gain * pred_mean, rev_cov)};
}

PredictReverse predict_and_reverse(const GaussianDensity& prior, const AffineGaussianKernel& kernel) {
  if (kernel.in_dim() != prior.dim()) {
    throw InputError("predict: kernel input dimension mismatch " + dims(kernel.in_dim(), prior.dim()));
  }
  // The reverse covariance is P - P A' S^-1 A P. When the kernel noise is tiny
  // relative to the prior this difference cancels catastrophically.
  const Matrix A = kernel.slope;
  const Matrix S = symmetrized(A * prior.cov * A.transpose() + kernel.cov);
  const auto llt = cholesky(S, "predictive covariance");
  const Matrix gain = llt.solve(A * prior.cov).transpose();
  const Matrix rev_cov = symmetrized(prior.cov - gain * S * gain.transpose());
  if (min_eigenvalue(rev_cov) <= kReverseConditioning * max_eigenvalue(prior.cov)) {
    throw NumericError("reverse kernel covariance is numerically singular (kernel covariance too small)");
  }
  return predict_and_reverse_unguarded(prior, kernel);
}

double neg_relative_entropy(const GaussianDensity& g_star, const GaussianDensity& g) {
  if (g_star.dim() != g.dim()) throw InputError("relative entropy: dimension mismatch");
  const auto llt_star = cholesky(g_star.cov, "relative entropy: first covariance");
  const auto llt = cholesky(g.cov, "relative entropy: second covariance");
  const Vector diff = g_star.mean - g.mean;
  const double value = -0.5 * (llt_star.solve(g.cov).trace() - static_cast<double>(g.dim()) +
                               diff.dot(llt_star.solve(diff)) + log_det(llt_star) - log_det(llt));
  // Exact zero for identical arguments; otherwise never positive.
  if (g_star.mean == g.mean && g_star.cov == g.cov) return 0.0;
  return std::min(value, 0.0);
}

AveragedGaussian average_log_gaussians(std::span<const GaussianDensity> components,
                                       const Categorical& weights) {
  if (components.empty()) throw InputError("average_log_gaussians: no components");
  if (static_cast<Index>(components.size()) != weights.size()) {
    throw InputError("average_log_gaussians: weight/component count mismatch");
  }
  const Index d = components.front().dim();
  Matrix prec = Matrix::Zero(d, d);
  Vector info = Vector::Zero(d);
  for (std::size_t z = 0; z < components.size(); ++z) {
    const double w = weights.probs(static_cast<Index>(z));
    if (components[z].dim() != d) throw InputError("average_log_gaussians: component dimension mismatch");
    if (w == 0.0) continue;
    const auto llt = cholesky(components[z].cov, "component covariance");
    prec += w * llt.solve(Matrix::Identity(d, d));
    info += w * llt.solve(components[z].mean);
  }
  prec = symmetrized(prec);
  const auto llt_bar = cholesky(prec, "averaged precision");
  const Vector mean = llt_bar.solve(info);
  const Matrix cov = symmetrized(llt_bar.solve(Matrix::Identity(d, d)));
  GaussianDensity bar(mean, cov);

  double acc = 0.0;
  for (std::size_t z = 0; z < components.size(); ++z) {
    const double w = weights.probs(static_cast<Index>(z));
    if (w == 0.0) continue;
    acc += w * log_pdf(components[z], mean);
  }
  // log|2 pi cov_bar| = d log 2 pi - log|prec_bar|
  const double log_zeta = acc + 0.5 * (static_cast<double>(d) * kLog2Pi - log_det(llt_bar));
  return AveragedGaussian{log_zeta, std::move(bar)};
}

double ConditionalLikelihood::operator()(const Vector& x) const {
  return log_c + log_pdf(GaussianDensity{H * x, S}, y);
}

ConditionalLikelihood conditional_relative_entropy_likelihood(const AffineGaussianKernel& k1,
                                                              const AffineGaussianKernel& k2) {
  if (k1.out_dim() != k2.out_dim() || k1.in_dim() != k2.in_dim()) {
    throw InputError("conditional relative entropy: kernel dimension mismatch");
  }
  const auto llt2 = cholesky(k2.cov, "second kernel covariance");
  const auto llt1 = cholesky(k1.cov, "first kernel covariance");
  const double d = static_cast<double>(k1.out_dim());
  ConditionalLikelihood out;
  out.log_c = -0.5 * (llt2.solve(k1.cov).trace() - d * (1.0 + kLog2Pi) - log_det(llt1));
  out.y = k2.offset - k1.offset;
  out.H = k1.slope - k2.slope;
  out.S = k2.cov;
  return out;
}

ConjugateProduct quadratic_times_gaussian(const LogQuadraticForm& lq, const GaussianDensity& g) {
  if (lq.dim() != g.dim()) throw InputError("quadratic_times_gaussian: dimension mismatch");
  const Index d = g.dim();
  const auto llt = cholesky(g.cov, "gaussian covariance");
  const Matrix prior_prec = llt.solve(Matrix::Identity(d, d));
  const Vector prior_info = llt.solve(g.mean);
  const Matrix post_prec = symmetrized(prior_prec + lq.precision);
  Eigen::LLT<Matrix> llt_post(post_prec);
  if (llt_post.info() != Eigen::Success || (llt_post.matrixLLT().diagonal().array() <= 0.0).any()) {
    throw NumericError("improper product: combined precision is not positive definite");
  }
  const Vector post_info = prior_info + lq.linear;
  const Vector post_mean = llt_post.solve(post_info);
  const Matrix post_cov = symmetrized(llt_post.solve(Matrix::Identity(d, d)));
  // Complete the square on both sides; the 2 pi factors cancel.
  const double log_norm = lq.constant - 0.5 * g.mean.dot(prior_info) - 0.5 * log_det(llt) +
                          0.5 * post_info.dot(post_mean) - 0.5 * log_det(llt_post);
  return ConjugateProduct{log_norm, GaussianDensity(post_mean, post_cov)};
}

ConjugateProduct normalize(const LogQuadraticForm& lq) {
  const Index d = lq.dim();
  Eigen::LLT<Matrix> llt(lq.precision);
  if (llt.info() != Eigen::Success || (llt.matrixLLT().diagonal().array() <= 0.0).any()) {
    throw NumericError("improper form: precision is not positive definite");
  }
  const Vector mean = llt.solve(lq.linear);
  const Matrix cov = symmetrized(llt.solve(Matrix::Identity(d, d)));
  const double log_norm = lq.constant + 0.5 * lq.linear.dot(mean) +
                          0.5 * (static_cast<double>(d) * kLog2Pi - log_det(llt));
  return ConjugateProduct{log_norm, GaussianDensity(mean, cov)};
}

LogQuadraticForm expect_affine(const LogQuadraticForm& lq, const Matrix& B, const Vector& o,
                               const Matrix& noise_cov) {
  if (B.rows() != lq.dim() || o.size() != lq.dim() || noise_cov.rows() != lq.dim()) {
    throw InputError("expect_affine: dimension mismatch");
  }
  const Vector Jo = lq.precision * o;
  const double c = lq.constant + lq.linear.dot(o) - 0.5 * o.dot(Jo) -
                   0.5 * (lq.precision * noise_cov).trace();
  return LogQuadraticForm(symmetrized(B.transpose() * lq.precision * B),
                          B.transpose() * (lq.linear - Jo), c);
}

GaussianDensity compose_joint(const GaussianDensity& marginal, const AffineGaussianKernel& conditional) {
  if (conditional.in_dim() != marginal.dim()) throw InputError("compose_joint: dimension mismatch");
  const Index n_out = conditional.out_dim();
  const Index n_in = marginal.dim();
  Vector mean(n_out + n_in);
  mean << conditional.mean_at(marginal.mean), marginal.mean;
  Matrix cov(n_out + n_in, n_out + n_in);
  const Matrix cross = conditional.slope * marginal.cov;
  cov.topLeftCorner(n_out, n_out) = cross * conditional.slope.transpose() + conditional.cov;
  cov.topRightCorner(n_out, n_in) = cross;
  cov.bottomLeftCorner(n_in, n_out) = cross.transpose();
  cov.bottomRightCorner(n_in, n_in) = marginal.cov;
  return GaussianDensity(mean, symmetrized(cov));
}

JointFactorization factor_joint(const GaussianDensity& joint, Index lead_dim) {
  const Index n = joint.dim();
  if (lead_dim <= 0 || lead_dim >= n) throw InputError("factor_joint: bad split");
  const Index trail = n - lead_dim;
  const Matrix s11 = joint.cov.topLeftCorner(lead_dim, lead_dim);
  const Matrix s12 = joint.cov.topRightCorner(lead_dim, trail);
  const Matrix s22 = joint.cov.bottomRightCorner(trail, trail);
  const auto llt = cholesky(s22, "joint trailing covariance");
  const Matrix slope = llt.solve(s12.transpose()).transpose();
  const Vector m1 = joint.mean.head(lead_dim);
  const Vector m2 = joint.mean.tail(trail);
  return JointFactorization{GaussianDensity(m2, s22),
                            AffineGaussianKernel(slope, m1 - slope * m2,
                                                 symmetrized(s11 - slope * s12.transpose()))};
}

}  // namespace vse

#include "dlm/types.hpp"

#include <cmath>

namespace dlm {

bool all_finite(const Mat& m) { return m.allFinite(); }

void require_finite(const Mat& m, const std::string& what) {
  if (!m.allFinite()) throw invalid_input(what + ": entries must be finite");
}

DenseMatrix::DenseMatrix(Mat values) : m(std::move(values)) {
  if (m.rows() <= 0 || m.cols() <= 0) throw invalid_input("DenseMatrix: dimensions must be positive");
  require_finite(m, "DenseMatrix");
}

DenseMatrix::DenseMatrix(Index rows, Index cols) {
  if (rows <= 0 || cols <= 0) throw invalid_input("DenseMatrix: dimensions must be positive");
  m = Mat::Zero(rows, cols);
}

DenseMatrix DenseMatrix::from_data(Index rows, Index cols, const std::vector<double>& row_major) {
  if (rows <= 0 || cols <= 0) throw invalid_input("DenseMatrix: dimensions must be positive");
  if (static_cast<Index>(row_major.size()) != rows * cols)
    throw invalid_input("DenseMatrix: data size does not match dimensions");
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = row_major[static_cast<size_t>(i * cols + j)];
  return DenseMatrix(std::move(m));
}

ObservedMatrix::ObservedMatrix(Mat values_, Mask mask_)
    : values(std::move(values_)), mask(std::move(mask_)) {
  if (values.rows() != mask.rows() || values.cols() != mask.cols())
    throw invalid_input("ObservedMatrix: mask shape must match values");
  if (values.rows() <= 0 || values.cols() <= 0)
    throw invalid_input("ObservedMatrix: dimensions must be positive");
  if (mask.count() == 0) throw invalid_input("ObservedMatrix: need at least one observed entry");
  // Zero out unobserved cells so residual algebra can ignore the mask until scoring.
  for (Index i = 0; i < values.rows(); ++i)
    for (Index j = 0; j < values.cols(); ++j)
      if (!mask(i, j)) values(i, j) = 0.0;
  require_finite(values, "ObservedMatrix");
}

Factorization::Factorization(Mat D_, Mat H_) : D(std::move(D_)), H(std::move(H_)) {
  if (D.cols() != H.rows()) throw invalid_input("Factorization: inner dimensions must agree");
  if (D.rows() <= 0 || D.cols() <= 0 || H.cols() <= 0)
    throw invalid_input("Factorization: dimensions must be positive");
  require_finite(D, "Factorization D");
  require_finite(H, "Factorization H");
}

RegularizerSpec RegularizerSpec::squared_l2() { return {}; }

RegularizerSpec RegularizerSpec::squared_l1(bool unsquared) {
  RegularizerSpec r;
  r.kind = RegKind::SquaredL1;
  r.unsquared_l1 = unsquared;
  return r;
}

RegularizerSpec RegularizerSpec::elastic_net_sq(double nu) {
  RegularizerSpec r;
  r.kind = RegKind::ElasticNetSq;
  r.nu = nu;
  r.validate();
  return r;
}

RegularizerSpec RegularizerSpec::pseudo_huber_sq(double mu) {
  RegularizerSpec r;
  r.kind = RegKind::PseudoHuberSq;
  r.mu = mu;
  r.validate();
  return r;
}

RegularizerSpec RegularizerSpec::weighted_squared_l2(Mat lambda) {
  RegularizerSpec r;
  r.kind = RegKind::WeightedSquaredL2;
  r.lambda = std::move(lambda);
  r.validate();
  return r;
}

RegularizerSpec RegularizerSpec::non_norm_elastic_net(double nu, Mat lambda_diag) {
  RegularizerSpec r;
  r.kind = RegKind::NonNormElasticNet;
  r.nu = nu;
  r.lambda = std::move(lambda_diag);
  r.validate();
  return r;
}

RegularizerSpec RegularizerSpec::coupled_rows_l1sq() {
  RegularizerSpec r;
  r.kind = RegKind::CoupledRowsL1Sq;
  return r;
}

RegularizerSpec RegularizerSpec::coupled_rows_l2() {
  RegularizerSpec r;
  r.kind = RegKind::CoupledRowsL2;
  return r;
}

RegularizerSpec RegularizerSpec::partitioned_max(int split, RegKind inner) {
  RegularizerSpec r;
  r.kind = RegKind::PartitionedMax;
  r.split = split;
  r.inner = inner;
  r.validate();
  return r;
}

void RegularizerSpec::validate() const {
  switch (kind) {
    case RegKind::ElasticNetSq:
    case RegKind::NonNormElasticNet:
      if (!(nu >= 0.0 && nu <= 1.0)) throw invalid_input("regularizer: nu must lie in [0,1]");
      break;
    case RegKind::PseudoHuberSq:
      if (!(mu > 0.0)) throw invalid_input("regularizer: pseudo-Huber mu must be positive");
      break;
    case RegKind::PartitionedMax:
      if (split <= 0) throw invalid_input("regularizer: partition split must be positive");
      if (inner != RegKind::SquaredL2 && inner != RegKind::SquaredL1)
        throw unsupported_kind("regularizer: partitioned max supports l2/l1 inner norms only");
      break;
    default:
      break;
  }
  if (kind == RegKind::WeightedSquaredL2) {
    if (lambda.rows() == 0 || lambda.rows() != lambda.cols())
      throw invalid_input("regularizer: weight matrix must be square");
    require_finite(lambda, "regularizer weight");
    Eigen::FullPivLU<Eigen::MatrixXd> lu{Eigen::MatrixXd(lambda)};
    if (!lu.isInvertible()) throw invalid_input("regularizer: weight matrix must be invertible");
  }
  if (kind == RegKind::NonNormElasticNet) {
    if (lambda.rows() == 0 || lambda.cols() != 1)
      throw invalid_input("regularizer: non-norm elastic net needs a positive diagonal vector");
    require_finite(lambda, "regularizer weight");
    if ((lambda.array() <= 0.0).any())
      throw invalid_input("regularizer: non-norm elastic net diagonal must be positive");
  }
}

bool RegularizerSpec::induced() const {
  switch (kind) {
    case RegKind::SquaredL2:
    case RegKind::SquaredL1:
    case RegKind::ElasticNetSq:
    case RegKind::PseudoHuberSq:
    case RegKind::WeightedSquaredL2:
    case RegKind::PartitionedMax:
      return true;
    default:
      return false;
  }
}

bool RegularizerSpec::smooth() const {
  switch (kind) {
    case RegKind::SquaredL2:
    case RegKind::WeightedSquaredL2:
    case RegKind::PseudoHuberSq:
      return true;
    default:
      return false;
  }
}

LossSpec LossSpec::half_squared() { return {}; }

LossSpec LossSpec::cross_entropy_sigmoid() {
  LossSpec l;
  l.kind = LossKind::CrossEntropySigmoid;
  return l;
}

LossSpec LossSpec::masked_half_squared() {
  LossSpec l;
  l.kind = LossKind::MaskedHalfSquaredError;
  return l;
}

LossSpec LossSpec::robust_half_squared(double alpha_s) {
  LossSpec l;
  l.kind = LossKind::RobustHalfSquaredError;
  l.alpha_s = alpha_s;
  l.validate();
  return l;
}

void LossSpec::validate() const {
  if (kind == LossKind::RobustHalfSquaredError && !(alpha_s > 0.0))
    throw invalid_input("loss: robust noise weight must be positive");
}

void ProblemSpec::validate() const {
  loss.validate();
  regD.validate();
  regH.validate();
  if (!(alpha >= 0.0)) throw invalid_input("problem: alpha must be nonnegative");
  if (!(s > 0.0)) throw invalid_input("problem: s must be positive");
  if (k <= 0) throw invalid_input("problem: k must be positive");
}

ProblemSpec subspace_spec(double alpha, int k, bool averaged) {
  ProblemSpec p;
  p.loss = LossSpec::half_squared();
  p.regD = RegularizerSpec::squared_l2();
  p.regH = RegularizerSpec::squared_l2();
  p.alpha = alpha;
  p.k = k;
  p.averaged = averaged;
  p.validate();
  return p;
}

ProblemSpec sparse_coding_spec(double alpha, int k, bool averaged) {
  ProblemSpec p;
  p.loss = LossSpec::half_squared();
  p.regD = RegularizerSpec::squared_l2();
  p.regH = RegularizerSpec::squared_l1(/*unsquared=*/true);
  p.alpha = alpha;
  p.k = k;
  p.averaged = averaged;
  p.validate();
  return p;
}

ProblemSpec elastic_net_spec(double alpha, double nu_D, double nu_H, int k, bool unsquared_h) {
  ProblemSpec p;
  p.loss = LossSpec::half_squared();
  p.regD = RegularizerSpec::elastic_net_sq(nu_D);
  if (unsquared_h)
    p.regH = RegularizerSpec::squared_l1(/*unsquared=*/true);
  else
    p.regH = RegularizerSpec::elastic_net_sq(nu_H);
  // Published weights are (alpha, alpha/T); this codebase uses (alpha/2, alpha/(2T)).
  p.alpha = 2.0 * alpha;
  p.k = k;
  p.averaged = true;
  p.validate();
  return p;
}

ProblemSpec matrix_completion_spec(double alpha, int k, int d) {
  if (d <= 0) throw invalid_input("matrix_completion_spec: d must be positive");
  ProblemSpec p;
  p.loss = LossSpec::masked_half_squared();
  p.regD = RegularizerSpec::squared_l2();
  p.regH = RegularizerSpec::squared_l2();
  // Dictionary weight alpha/(2d) realized as alpha' = alpha/d; the coefficient
  // weight alpha/(2T) is restored through s = 1/sqrt(d).
  p.alpha = alpha / d;
  p.s = 1.0 / std::sqrt(static_cast<double>(d));
  p.k = k;
  p.averaged = true;
  p.validate();
  return p;
}

double relative_objective_difference(const std::vector<double>& objs) {
  if (objs.empty()) throw invalid_input("relative_objective_difference: empty list");
  double mean = 0.0;
  double lo = objs[0], hi = objs[0];
  for (double v : objs) {
    if (!std::isfinite(v)) throw invalid_input("relative_objective_difference: non-finite value");
    mean += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  mean /= static_cast<double>(objs.size());
  if (mean == 0.0) throw invalid_input("relative_objective_difference: zero mean");
  return (hi - lo) / std::abs(mean);
}

double thresholded_solution_difference(const Mat& Z1, const Mat& Z2, double tau) {
  if (Z1.rows() != Z2.rows() || Z1.cols() != Z2.cols())
    throw invalid_input("thresholded_solution_difference: shape mismatch");
  if (tau < 0.0) throw invalid_input("thresholded_solution_difference: tau must be nonnegative");
  Index over = ((Z1 - Z2).array().abs() > tau).count();
  return static_cast<double>(over) / static_cast<double>(Z1.size());
}

}  // namespace dlm

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dlm {

// Row-major throughout: matrices are also exchanged with CSV files and numpy.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

struct invalid_input : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct unsupported_kind : std::logic_error {
  using std::logic_error::logic_error;
};

// Thrown when a solver produces NaN/Inf or an estimator cannot reach its
// feasibility tolerance; the CLI maps it to exit code 2.
struct numerical_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool all_finite(const Mat& m);
void require_finite(const Mat& m, const std::string& what);

// Dense real matrix with entries validated finite on construction.
struct DenseMatrix {
  Mat m;

  DenseMatrix() = default;
  explicit DenseMatrix(Mat values);
  DenseMatrix(Index rows, Index cols);  // zeros
  static DenseMatrix from_data(Index rows, Index cols, const std::vector<double>& row_major);

  Index rows() const { return m.rows(); }
  Index cols() const { return m.cols(); }
  operator const Mat&() const { return m; }
};

// Values plus an observation mask (true = observed). Unobserved cells hold 0.
struct ObservedMatrix {
  Mat values;
  Mask mask;

  ObservedMatrix() = default;
  ObservedMatrix(Mat values_, Mask mask_);

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
  Index observed_count() const { return mask.count(); }
};

// (D, H) pair with conforming inner dimension.
struct Factorization {
  Mat D;  // d x k
  Mat H;  // k x T

  Factorization() = default;
  Factorization(Mat D_, Mat H_);

  Index d() const { return D.rows(); }
  Index k() const { return D.cols(); }
  Index T() const { return H.cols(); }
  Mat product() const { return D * H; }
};

enum class RegKind {
  SquaredL2,          // f^2 = ||v||_2^2
  SquaredL1,          // f^2 = ||v||_1^2 (or plain ||v||_1 with unsquared_l1)
  ElasticNetSq,       // f^2 = nu ||v||_2^2 + (1-nu) ||v||_1^2
  PseudoHuberSq,      // f^2 = (sum_i sqrt(mu^2 + v_i^2) - mu)^2
  WeightedSquaredL2,  // f^2 = ||Lambda v||_2^2
  NonNormElasticNet,  // f^2 = nu ||v||_2^2 + (1-nu) ||Lambda v||_1, sqrt not convex
  CoupledRowsL1Sq,    // sum over rows of ||row||_1^2, ties columns together
  CoupledRowsL2,      // sum over rows of ||row||_2
  PartitionedMax,     // sum_i max(||top block of col i||^2, ||bottom block||^2)
};

struct RegularizerSpec {
  RegKind kind = RegKind::SquaredL2;
  double nu = 1.0;     // ElasticNetSq / NonNormElasticNet mixing weight
  double mu = 1e-2;    // PseudoHuberSq smoothing
  Mat lambda;          // WeightedSquaredL2: invertible; NonNormElasticNet: positive diagonal
  int split = 0;       // PartitionedMax: rows [0, split) form the first block
  RegKind inner = RegKind::SquaredL2;  // PartitionedMax inner column norm
  bool unsquared_l1 = false;           // SquaredL1 only: use sum ||row||_1 instead

  static RegularizerSpec squared_l2();
  static RegularizerSpec squared_l1(bool unsquared = false);
  static RegularizerSpec elastic_net_sq(double nu);
  static RegularizerSpec pseudo_huber_sq(double mu);
  static RegularizerSpec weighted_squared_l2(Mat lambda);
  static RegularizerSpec non_norm_elastic_net(double nu, Mat lambda_diag);
  static RegularizerSpec coupled_rows_l1sq();
  static RegularizerSpec coupled_rows_l2();
  static RegularizerSpec partitioned_max(int split, RegKind inner = RegKind::SquaredL2);

  void validate() const;
  // Column/row-separable f^2 of a centered convex f; these admit the induced
  // convex regularizer on Z = DH. Coupled kinds and the non-norm elastic net
  // are the deliberately-broken baselines.
  bool induced() const;
  bool smooth() const;  // differentiable everywhere
};

enum class LossKind {
  HalfSquaredError,
  CrossEntropySigmoid,
  MaskedHalfSquaredError,
  RobustHalfSquaredError,
};

struct LossSpec {
  LossKind kind = LossKind::HalfSquaredError;
  double alpha_s = 1.0;  // RobustHalfSquaredError: weight on the l1 noise term

  static LossSpec half_squared();
  static LossSpec cross_entropy_sigmoid();
  static LossSpec masked_half_squared();
  static LossSpec robust_half_squared(double alpha_s);

  void validate() const;
  bool least_squares_family() const {
    return kind != LossKind::CrossEntropySigmoid;
  }
};

// A complete objective:
//   F(D,H) = loss(DH, X) + (alpha/2) R_D(D) + alpha/(2 s^2 [T]) R_H(H)
// where loss carries a 1/T (or 1/#observed) factor when averaged, and the [T]
// divisor on R_H applies only in the averaged case. The 1/2 loss convention is
// global so the trace-norm shrinkage oracle is exact.
struct ProblemSpec {
  LossSpec loss;
  RegularizerSpec regD;
  RegularizerSpec regH;
  double alpha = 0.1;
  double s = 1.0;
  int k = 1;
  bool averaged = true;

  void validate() const;
};

// Preferred batch objectives. The elastic-net preset doubles alpha internally:
// its published form carries weights (alpha, alpha/T) rather than this
// codebase's uniform (alpha/2, alpha/(2T)). The completion preset reaches its
// alpha/(2d) dictionary weight through the sample-scale field (alpha' = alpha/d,
// s = 1/sqrt(d)).
ProblemSpec subspace_spec(double alpha, int k, bool averaged = true);
ProblemSpec sparse_coding_spec(double alpha, int k, bool averaged = true);
ProblemSpec elastic_net_spec(double alpha, double nu_D, double nu_H, int k,
                             bool unsquared_h = false);
ProblemSpec matrix_completion_spec(double alpha, int k, int d);

struct Certificate {
  double grad_D_norm = 0.0;
  double grad_H_norm = 0.0;
  double dual_sigma_max = 0.0;
  double alpha = 0.0;  // effective dual threshold sqrt(a*b); equals alpha for the plain case
  bool globally_optimal = false;
  std::optional<double> hessian_min_eig;
};

struct TrialReport {
  double final_objective = 0.0;
  std::vector<std::pair<int, double>> objective_trace;
  int iterations = 0;
  bool converged = false;
  std::optional<Certificate> certificate;
  std::uint64_t seed = 0;
  std::vector<int> inner_iters;  // incremental solvers: per-step inner sweep counts
};

// Max over pairs of |obj_a - obj_b| / mean(objs). The mean denominator matches
// the optimality tables' "expected value of the objective across the solutions".
double relative_objective_difference(const std::vector<double>& objs);

// Fraction of entries where |Z1 - Z2| exceeds tau (default threshold 0.05).
double thresholded_solution_difference(const Mat& Z1, const Mat& Z2, double tau = 0.05);

}  // namespace dlm

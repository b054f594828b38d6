#pragma once

#include "dlm/types.hpp"

namespace dlm {

enum class Orientation { Columns, Rows };

struct ProxResult {
  Vec z;
  double threshold_used = 0.0;
  int support_size = 0;
};

struct HSolveConfig {
  double tol = 1e-8;
  int max_iters = 10000;
  bool subgradient = false;  // use plain subgradient steps instead of prox (for SGD mode A/B)
};

// loss(Z; X), averaged divides by T (or by #observed for the masked loss).
double loss_value(const LossSpec& spec, const Mat& Z, const Mat& X, bool averaged);
double loss_value(const LossSpec& spec, const Mat& Z, const ObservedMatrix& X, bool averaged);
Mat loss_gradient(const LossSpec& spec, const Mat& Z, const Mat& X, bool averaged);
Mat loss_gradient(const LossSpec& spec, const Mat& Z, const ObservedMatrix& X, bool averaged);

// f^2(v) for the column/row-separable kinds.
double reg_vector_value(const RegularizerSpec& spec, const Vec& v);

// weight * sum of f^2 over columns or rows of M; also handles the coupled and
// partitioned kinds that only make sense on whole matrices.
double reg_matrix_value(const RegularizerSpec& spec, const Mat& M, Orientation orient,
                        double weight);

// An element of the subdifferential of weight * R(M). Deterministic selections:
// 0 at l1 kinks, first block at partition ties.
Mat reg_subgradient(const RegularizerSpec& spec, const Mat& M, Orientation orient, double weight);

Vec soft_threshold(const Vec& u, double tau);

// argmin_z 1/2 ||u - z||^2 + lambda ||z||_1^2, computed by the sorted
// cumulative-sum rule. Exact, O(n log n).
ProxResult prox_sql1(const Vec& u, double lambda);

// Optimal sparse noise column for the robust loss: soft threshold of the residual.
Vec robust_inner_solve(const Vec& residual_target, double alpha_s);

// argmin_h loss(D h, x) + per-sample H regularization from spec. Closed-form
// ridge for pure l2, proximal gradient otherwise.
Vec solve_h_given_d(const Mat& D, const Vec& x, const ProblemSpec& spec,
                    const HSolveConfig& config = {});

}  // namespace dlm

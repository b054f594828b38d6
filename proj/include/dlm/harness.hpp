#pragma once

#include "dlm/batch.hpp"
#include "dlm/incremental.hpp"
#include "dlm/types.hpp"

#include <string>
#include <variant>
#include <vector>

namespace dlm {

// Deterministic i.i.d. Normal(mean, sd^2) draw; mt19937_64 + Box-Muller as
// documented in rng.hpp.
DenseMatrix gen_gaussian(Index d, Index T, double mean, double sd, std::uint64_t seed);

// Comma-separated decimal matrix, UTF-8, LF endings, floats at 17 significant
// digits so write/read round-trips exactly. Empty cells mean unobserved and
// switch the reader to ObservedMatrix; the writers mirror that.
std::variant<DenseMatrix, ObservedMatrix> read_matrix_csv(const std::string& path);
void write_matrix_csv(const Mat& m, const std::string& path);
void write_matrix_csv(const ObservedMatrix& m, const std::string& path);

enum class ExperimentKind { Solve, MultiInit, KSweep, IncrementalCompare, Certify };

// One table row: a regularizer family instantiated per grid cell.
// Names: subspace, sparse, sparse_coding, elastic, completion, non_norm,
// coupled_l1sq, coupled_l2.
struct SpecRow {
  std::string name = "subspace";
  double nu_D = 0.5;
  double nu_H = 0.5;
};

ProblemSpec spec_for_row(const SpecRow& row, double alpha, int d, int k);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::MultiInit;
  std::vector<SpecRow> specs = {SpecRow{}};
  std::vector<double> alphas = {0.005, 0.05, 0.5};
  std::vector<int> ds = {5, 10};
  std::vector<int> ks = {3, 5};
  std::vector<double> nus = {0.0, 0.5, 1.0};  // k-sweep: nu_H per sweep
  int T = 100;
  int n_inits = 10;
  std::vector<double> init_means = {0, 5, 10, 15, 20, 25, 30, 35, 40, 45};
  double alpha = 0.05;  // single-alpha protocols (k-sweep, incremental)
  int k = 10;           // incremental compare
  std::uint64_t seed = 0;
  std::string out_dir;
  bool include_large = false;  // run d >= 50 grid cells
  int threads = 0;             // 0 = hardware; DLM_THREADS always caps
  SolverConfig solver;
  IncrementalConfig incremental;

  void validate() const;
};

struct TrialSummary {
  int trial = 0;
  double init_mean = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct CellRecord {
  std::string family;
  double alpha = 0.0;
  int d = 0;
  int k = 0;
  int T = 0;
  std::vector<TrialSummary> trials;
  double rel_diff_min = 0.0;  // pairwise |obj_i - obj_j| / mean, extremes
  double rel_diff_max = 0.0;
  double sol_diff_min = 0.0;  // pairwise thresholded product difference
  double sol_diff_max = 0.0;
  double wall_seconds = 0.0;
  bool failed = false;
  std::string failure;
};

struct KSweepRecord {
  double nu = 0.0;  // nu_H of the elastic pair
  int k = 0;
  std::vector<TrialSummary> trials;
  double obj_mean = 0.0;
  double obj_std = 0.0;
  double gap = 0.0;  // (mean_k - mean_T) / mean_T
  double wall_seconds = 0.0;
  bool failed = false;
  std::string failure;
};

struct MethodRecord {
  std::string name;
  ScheduleKind schedule = ScheduleKind::Type2;
  double eta0 = 0.0;
  bool accelerated = false;
  double momentum = 0.0;
  std::vector<std::pair<int, double>> trace;  // (samples seen, exact objective)
  double final_objective = 0.0;
  long hit_step = -1;  // first traced step within 5% of batch; -1 = never
  int hit_epoch = -1;
  double wall_seconds = 0.0;
  bool failed = false;
  std::string failure;
};

struct ExperimentReport {
  ExperimentKind kind = ExperimentKind::MultiInit;
  std::vector<CellRecord> cells;
  std::vector<KSweepRecord> sweep;
  std::vector<MethodRecord> methods;
  double batch_objective = 0.0;  // incremental compare reference
  double wall_seconds = 0.0;
};

// Grid runs from the prescribed increasing-mean inits; a non-finite solve
// marks its cell failed and the remaining cells still run. Cells and trials
// execute on the worker pool; records keep (cell, trial) order regardless of
// scheduling, and per-cell seeds depend only on the cell parameters so a
// one-cell config reproduces the full-grid row exactly.
ExperimentReport multi_init_experiment(const ExperimentConfig& cfg);

// Per k: the spread of final objectives over the prescribed inits, plus the
// mean-objective gap against the k = T reference (appended to the grid when
// missing).
ExperimentReport k_sweep_experiment(const ExperimentConfig& cfg);

// Batch reference plus online and SGD arms (plain schedules, accelerated,
// momentum) on one synthetic task; records exact-objective traces and the
// first step within 5% of the batch optimum.
ExperimentReport incremental_compare(const ExperimentConfig& cfg);

// CSV emitters used by the CLI; deterministic content (no wall-clock fields,
// those live in the run manifest).
void write_multi_init_csv(const ExperimentReport& report, const std::string& dir);
void write_k_sweep_csv(const ExperimentReport& report, const std::string& dir);
void write_incremental_csv(const ExperimentReport& report, const std::string& dir);

// Worker count resolution: explicit request, else hardware; DLM_THREADS caps.
int resolve_threads(int requested, std::size_t n_tasks);

// argv without the program name; exit code 0 = success, 1 = config error,
// 2 = numerical failure.
int cli_main(const std::vector<std::string>& args);

}  // namespace dlm

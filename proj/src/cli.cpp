#include "dlm/certify.hpp"
#include "dlm/harness.hpp"
#include "dlm/rng.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <variant>
#include <vector>

namespace dlm {

namespace {

using njson = nlohmann::ordered_json;

const char* kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Solve: return "solve";
    case ExperimentKind::MultiInit: return "multi_init";
    case ExperimentKind::KSweep: return "k_sweep";
    case ExperimentKind::IncrementalCompare: return "incremental_compare";
    case ExperimentKind::Certify: return "certify";
  }
  return "unknown";
}

const char* reg_kind_name(RegKind k) {
  switch (k) {
    case RegKind::SquaredL2: return "squared_l2";
    case RegKind::SquaredL1: return "squared_l1";
    case RegKind::ElasticNetSq: return "elastic_net_sq";
    case RegKind::PseudoHuberSq: return "pseudo_huber_sq";
    case RegKind::WeightedSquaredL2: return "weighted_squared_l2";
    case RegKind::NonNormElasticNet: return "non_norm_elastic_net";
    case RegKind::CoupledRowsL1Sq: return "coupled_rows_l1sq";
    case RegKind::CoupledRowsL2: return "coupled_rows_l2";
    case RegKind::PartitionedMax: return "partitioned_max";
  }
  return "unknown";
}

const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::HalfSquaredError: return "half_squared_error";
    case LossKind::CrossEntropySigmoid: return "cross_entropy_sigmoid";
    case LossKind::MaskedHalfSquaredError: return "masked_half_squared_error";
    case LossKind::RobustHalfSquaredError: return "robust_half_squared_error";
  }
  return "unknown";
}

int schedule_number(ScheduleKind k) {
  return k == ScheduleKind::Type1 ? 1 : k == ScheduleKind::Type2 ? 2 : 3;
}

ScheduleKind schedule_from(int n) {
  switch (n) {
    case 1: return ScheduleKind::Type1;
    case 2: return ScheduleKind::Type2;
    case 3: return ScheduleKind::Type3;
  }
  throw invalid_input("config: schedule must be 1, 2, or 3");
}

njson reg_json(const RegularizerSpec& r) {
  njson j;
  j["kind"] = reg_kind_name(r.kind);
  j["nu"] = r.nu;
  j["mu"] = r.mu;
  j["split"] = r.split;
  j["inner"] = reg_kind_name(r.inner);
  j["unsquared_l1"] = r.unsquared_l1;
  if (r.lambda.size() > 0) {
    njson rows = njson::array();
    for (Index i = 0; i < r.lambda.rows(); ++i) {
      njson row = njson::array();
      for (Index c = 0; c < r.lambda.cols(); ++c) row.push_back(r.lambda(i, c));
      rows.push_back(std::move(row));
    }
    j["lambda"] = std::move(rows);
  }
  return j;
}

njson spec_json(const ProblemSpec& spec) {
  njson j;
  j["loss"] = loss_kind_name(spec.loss.kind);
  j["loss_alpha_s"] = spec.loss.alpha_s;
  j["reg_d"] = reg_json(spec.regD);
  j["reg_h"] = reg_json(spec.regH);
  j["alpha"] = spec.alpha;
  j["s"] = spec.s;
  j["k"] = spec.k;
  j["averaged"] = spec.averaged;
  return j;
}

njson solver_json(const SolverConfig& c) {
  njson j;
  j["max_iters"] = c.max_iters;
  j["tol"] = c.tol;
  j["step_d"] = c.step_D;
  j["step_h"] = c.step_H;
  j["lipschitz"] = c.lipschitz_mode == LipschitzMode::Analytic ? "analytic" : "power";
  j["inner_prox_iters"] = c.inner_prox_iters;
  j["seed"] = c.seed;
  j["exact_alternation"] = c.exact_alternation;
  j["allow_subgradient"] = c.allow_subgradient;
  j["full_refresh"] = c.full_refresh;
  return j;
}

njson incremental_json(const IncrementalConfig& c) {
  njson j;
  j["schedule"] = schedule_number(c.schedule);
  j["eta0"] = c.eta0;
  j["momentum_beta"] = c.momentum_beta;
  j["accelerate"] = c.accelerate;
  j["epochs"] = c.epochs;
  j["eval_every"] = c.eval_every;
  j["inner_tol"] = c.inner_tol;
  j["max_inner"] = c.max_inner;
  j["h_tol"] = c.h_solve.tol;
  j["h_max_iters"] = c.h_solve.max_iters;
  return j;
}

njson config_json(const ExperimentConfig& cfg) {
  njson j;
  j["experiment"] = kind_name(cfg.kind);
  njson fams = njson::array();
  for (const SpecRow& row : cfg.specs)
    fams.push_back(njson{{"name", row.name}, {"nu_d", row.nu_D}, {"nu_h", row.nu_H}});
  j["families"] = std::move(fams);
  j["alphas"] = cfg.alphas;
  j["ds"] = cfg.ds;
  j["ks"] = cfg.ks;
  j["nus"] = cfg.nus;
  j["T"] = cfg.T;
  j["n_inits"] = cfg.n_inits;
  j["init_means"] = cfg.init_means;
  j["alpha"] = cfg.alpha;
  j["k"] = cfg.k;
  j["seed"] = cfg.seed;
  j["out"] = cfg.out_dir;
  j["include_large"] = cfg.include_large;
  j["threads"] = cfg.threads;
  j["solver"] = solver_json(cfg.solver);
  j["incremental"] = incremental_json(cfg.incremental);
  return j;
}

njson certificate_json(const Certificate& c) {
  njson j;
  j["grad_d_norm"] = c.grad_D_norm;
  j["grad_h_norm"] = c.grad_H_norm;
  j["dual_sigma_max"] = c.dual_sigma_max;
  j["threshold"] = c.alpha;
  j["globally_optimal"] = c.globally_optimal;
  if (c.hessian_min_eig) j["hessian_min_eig"] = *c.hessian_min_eig;
  else j["hessian_min_eig"] = nullptr;
  return j;
}

njson trial_report_json(const TrialReport& r) {
  njson j;
  j["final_objective"] = r.final_objective;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["seed"] = r.seed;
  njson trace = njson::array();
  for (const auto& [it, obj] : r.objective_trace) trace.push_back(njson::array({it, obj}));
  j["objective_trace"] = std::move(trace);
  if (!r.inner_iters.empty()) j["inner_iters"] = r.inner_iters;
  if (r.certificate) j["certificate"] = certificate_json(*r.certificate);
  return j;
}

void check_keys(const njson& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object())
    throw invalid_input(std::string("config: ") + where + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok |= item.key() == a;
    if (!ok)
      throw invalid_input(std::string("config: unknown key '") + item.key() + "' in " + where);
  }
}

struct LoadedConfig {
  ExperimentConfig cfg;
  bool has_seed = false;
  bool has_out = false;
};

SpecRow spec_row_from(const njson& j) {
  if (j.is_string()) return SpecRow{j.get<std::string>(), 0.5, 0.5};
  check_keys(j, {"name", "nu_d", "nu_h"}, "families[]");
  SpecRow row;
  row.name = j.at("name").get<std::string>();
  if (j.contains("nu_d")) row.nu_D = j.at("nu_d").get<double>();
  if (j.contains("nu_h")) row.nu_H = j.at("nu_h").get<double>();
  return row;
}

void solver_from(const njson& j, SolverConfig& c) {
  check_keys(j,
             {"max_iters", "tol", "step_d", "step_h", "lipschitz", "inner_prox_iters", "seed",
              "exact_alternation", "allow_subgradient", "full_refresh"},
             "solver");
  if (j.contains("max_iters")) c.max_iters = j.at("max_iters").get<int>();
  if (j.contains("tol")) c.tol = j.at("tol").get<double>();
  if (j.contains("step_d")) c.step_D = j.at("step_d").get<double>();
  if (j.contains("step_h")) c.step_H = j.at("step_h").get<double>();
  if (j.contains("lipschitz")) {
    std::string mode = j.at("lipschitz").get<std::string>();
    if (mode == "analytic") c.lipschitz_mode = LipschitzMode::Analytic;
    else if (mode == "power") c.lipschitz_mode = LipschitzMode::PowerIteration;
    else throw invalid_input("config: lipschitz must be 'analytic' or 'power'");
  }
  if (j.contains("inner_prox_iters")) c.inner_prox_iters = j.at("inner_prox_iters").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("exact_alternation")) c.exact_alternation = j.at("exact_alternation").get<bool>();
  if (j.contains("allow_subgradient")) c.allow_subgradient = j.at("allow_subgradient").get<bool>();
  if (j.contains("full_refresh")) c.full_refresh = j.at("full_refresh").get<bool>();
}

void incremental_from(const njson& j, IncrementalConfig& c) {
  check_keys(j,
             {"schedule", "eta0", "momentum_beta", "accelerate", "epochs", "eval_every",
              "inner_tol", "max_inner", "h_tol", "h_max_iters"},
             "incremental");
  if (j.contains("schedule")) c.schedule = schedule_from(j.at("schedule").get<int>());
  if (j.contains("eta0")) c.eta0 = j.at("eta0").get<double>();
  if (j.contains("momentum_beta")) c.momentum_beta = j.at("momentum_beta").get<double>();
  if (j.contains("accelerate")) c.accelerate = j.at("accelerate").get<bool>();
  if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
  if (j.contains("eval_every")) c.eval_every = j.at("eval_every").get<int>();
  if (j.contains("inner_tol")) c.inner_tol = j.at("inner_tol").get<double>();
  if (j.contains("max_inner")) c.max_inner = j.at("max_inner").get<int>();
  if (j.contains("h_tol")) c.h_solve.tol = j.at("h_tol").get<double>();
  if (j.contains("h_max_iters")) c.h_solve.max_iters = j.at("h_max_iters").get<int>();
}

LoadedConfig config_from_json(const njson& j, ExperimentConfig base) {
  check_keys(j,
             {"experiment", "families", "alphas", "ds", "ks", "nus", "T", "n_inits", "init_means",
              "alpha", "k", "seed", "out", "include_large", "threads", "solver", "incremental"},
             "top level");
  LoadedConfig loaded;
  ExperimentConfig& cfg = loaded.cfg;
  cfg = std::move(base);
  if (j.contains("experiment")) {
    std::string name = j.at("experiment").get<std::string>();
    if (name == "solve") cfg.kind = ExperimentKind::Solve;
    else if (name == "multi_init") cfg.kind = ExperimentKind::MultiInit;
    else if (name == "k_sweep") cfg.kind = ExperimentKind::KSweep;
    else if (name == "incremental_compare") cfg.kind = ExperimentKind::IncrementalCompare;
    else if (name == "certify") cfg.kind = ExperimentKind::Certify;
    else throw invalid_input("config: unknown experiment '" + name + "'");
  }
  if (j.contains("families")) {
    cfg.specs.clear();
    for (const njson& f : j.at("families")) cfg.specs.push_back(spec_row_from(f));
  }
  if (j.contains("alphas")) cfg.alphas = j.at("alphas").get<std::vector<double>>();
  if (j.contains("ds")) cfg.ds = j.at("ds").get<std::vector<int>>();
  if (j.contains("ks")) cfg.ks = j.at("ks").get<std::vector<int>>();
  if (j.contains("nus")) cfg.nus = j.at("nus").get<std::vector<double>>();
  if (j.contains("T")) cfg.T = j.at("T").get<int>();
  if (j.contains("n_inits")) cfg.n_inits = j.at("n_inits").get<int>();
  if (j.contains("init_means")) cfg.init_means = j.at("init_means").get<std::vector<double>>();
  if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
  if (j.contains("k")) cfg.k = j.at("k").get<int>();
  if (j.contains("seed")) {
    cfg.seed = j.at("seed").get<std::uint64_t>();
    loaded.has_seed = true;
  }
  if (j.contains("out")) {
    cfg.out_dir = j.at("out").get<std::string>();
    loaded.has_out = !cfg.out_dir.empty();
  }
  if (j.contains("include_large")) cfg.include_large = j.at("include_large").get<bool>();
  if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
  if (j.contains("solver")) solver_from(j.at("solver"), cfg.solver);
  if (j.contains("incremental")) incremental_from(j.at("incremental"), cfg.incremental);
  return loaded;
}

LoadedConfig load_config_file(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw invalid_input("config: cannot open " + path);
  njson j;
  try {
    j = njson::parse(in);
  } catch (const std::exception& e) {
    throw invalid_input(std::string("config: ") + path + ": " + e.what());
  }
  try {
    return config_from_json(j, std::move(base));
  } catch (const njson::exception& e) {
    throw invalid_input(std::string("config: ") + path + ": " + e.what());
  }
}

njson version_json() {
  njson v;
  v["dlm-opt"] = "0.1.0";
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
               "." + std::to_string(EIGEN_MINOR_VERSION);
  v["cli11"] = CLI11_VERSION;
  v["json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
              std::to_string(NLOHMANN_JSON_VERSION_PATCH);
  return v;
}

void write_json_file(const njson& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw invalid_input("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

void write_manifest(const std::string& dir, const std::string& command, njson config,
                    njson timings) {
  njson m;
  m["tool"] = "dlm-opt";
  m["versions"] = version_json();
  m["command"] = command;
  m["config"] = std::move(config);
  m["timings"] = std::move(timings);
  write_json_file(m, (std::filesystem::path(dir) / "manifest.json").string());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- solve ----------------------------------------------------------------

struct SolveArgs {
  std::string data, family = "subspace", out;
  double alpha = 0.1, nu_d = 0.5, nu_h = 0.5, tol = 1e-8, cert_tol = 1e-6;
  int k = 1, max_iters = 50000, threads = 0;
  std::uint64_t seed = 0;
  bool unaveraged = false, certify = false;
};

int run_solve(const SolveArgs& a, const std::string& command) {
  auto t0 = std::chrono::steady_clock::now();
  auto loaded = read_matrix_csv(a.data);
  const bool dense = std::holds_alternative<DenseMatrix>(loaded);
  const Index d = dense ? std::get<DenseMatrix>(loaded).rows() : std::get<ObservedMatrix>(loaded).rows();

  ProblemSpec spec = spec_for_row({a.family, a.nu_d, a.nu_h}, a.alpha, static_cast<int>(d), a.k);
  if (a.unaveraged) spec.averaged = false;
  SolverConfig cfg;
  cfg.tol = a.tol;
  cfg.max_iters = a.max_iters;
  cfg.seed = a.seed;

  SolveResult res = std::visit([&](const auto& X) { return am_dlm_solve(X, spec, cfg); }, loaded);
  if (a.certify) {
    if (!dense) throw invalid_input("solve: --certify needs a fully observed matrix");
    res.report.certificate =
        global_certificate(res.fact, std::get<DenseMatrix>(loaded), spec, a.cert_tol);
  }

  std::filesystem::create_directories(a.out);
  auto path = [&](const char* n) { return (std::filesystem::path(a.out) / n).string(); };
  write_matrix_csv(res.fact.D, path("D.csv"));
  write_matrix_csv(res.fact.H, path("H.csv"));
  write_json_file(trial_report_json(res.report), path("report.json"));

  njson config;
  config["subcommand"] = "solve";
  config["data"] = a.data;
  config["family"] = njson{{"name", a.family}, {"nu_d", a.nu_d}, {"nu_h", a.nu_h}};
  config["spec"] = spec_json(spec);
  config["solver"] = solver_json(cfg);
  config["seed"] = a.seed;
  config["out"] = a.out;
  config["certify"] = a.certify;
  config["certify_tol"] = a.cert_tol;
  write_manifest(a.out, command, std::move(config),
                 njson{{"total_seconds", seconds_since(t0)}});
  return 0;
}

// ---- certify ---------------------------------------------------------------

struct CertifyArgs {
  std::string data, dictionary, coefficients, family = "subspace", out;
  double alpha = 0.1, nu_d = 0.5, nu_h = 0.5, tol = 1e-6, fd_step = 0.0;
  std::uint64_t seed = 0;
  bool unaveraged = false, hessian = false;
};

Mat dense_csv(const std::string& path, const char* what) {
  auto loaded = read_matrix_csv(path);
  if (!std::holds_alternative<DenseMatrix>(loaded))
    throw invalid_input(std::string("certify: ") + what + " must be fully observed: " + path);
  return std::get<DenseMatrix>(loaded).m;
}

int run_certify(const CertifyArgs& a, const std::string& command) {
  auto t0 = std::chrono::steady_clock::now();
  Mat X = dense_csv(a.data, "data");
  Mat D = dense_csv(a.dictionary, "dictionary");
  Mat H = dense_csv(a.coefficients, "coefficients");
  Factorization fact(std::move(D), std::move(H));

  ProblemSpec spec = spec_for_row({a.family, a.nu_d, a.nu_h}, a.alpha,
                                  static_cast<int>(fact.d()), static_cast<int>(fact.k()));
  if (a.unaveraged) spec.averaged = false;

  Certificate cert = global_certificate(fact, X, spec, a.tol);
  if (a.hessian) cert.hessian_min_eig = hessian_min_eigenvalue(fact, X, spec, a.fd_step);

  std::filesystem::create_directories(a.out);
  write_json_file(certificate_json(cert),
                  (std::filesystem::path(a.out) / "certificate.json").string());
  njson config;
  config["subcommand"] = "certify";
  config["data"] = a.data;
  config["dictionary"] = a.dictionary;
  config["coefficients"] = a.coefficients;
  config["family"] = njson{{"name", a.family}, {"nu_d", a.nu_d}, {"nu_h", a.nu_h}};
  config["spec"] = spec_json(spec);
  config["tol"] = a.tol;
  config["hessian"] = a.hessian;
  config["fd_step"] = a.fd_step;
  config["out"] = a.out;
  write_manifest(a.out, command, std::move(config),
                 njson{{"total_seconds", seconds_since(t0)}});

  std::cout << (cert.globally_optimal ? "certified" : "not certified")
            << ": sigma_max=" << cert.dual_sigma_max << " threshold=" << cert.alpha
            << " grad_d=" << cert.grad_D_norm << " grad_h=" << cert.grad_H_norm << "\n";
  return 0;
}

// ---- prox-check ------------------------------------------------------------

Vec prox_sql1_bisect(const Vec& u, double lambda) {
  double umax = u.size() ? u.cwiseAbs().maxCoeff() : 0.0;
  if (umax == 0.0) return Vec::Zero(u.size());
  // theta = 2 lambda sum_i max(|u_i| - theta, 0) has a unique root in [0, umax]
  double lo = 0.0, hi = umax;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double s = 0.0;
    for (Index i = 0; i < u.size(); ++i) s += std::max(std::abs(u[i]) - mid, 0.0);
    if (2.0 * lambda * s - mid > 0.0) lo = mid;
    else hi = mid;
  }
  return soft_threshold(u, 0.5 * (lo + hi));
}

double sql1_subgradient_residual(const Vec& u, double lambda, const Vec& z) {
  double l1 = z.lpNorm<1>(), worst = 0.0;
  for (Index i = 0; i < u.size(); ++i) {
    if (z[i] != 0.0)
      worst = std::max(worst,
                       std::abs(z[i] - u[i] + 2.0 * lambda * l1 * (z[i] > 0.0 ? 1.0 : -1.0)));
    else
      worst = std::max(worst, std::abs(u[i]) - 2.0 * lambda * l1);
  }
  return std::max(worst, 0.0);
}

int run_prox_check(std::uint64_t seed, int trials, int dim_max) {
  if (trials < 1) throw invalid_input("prox-check: trials must be positive");
  if (dim_max < 1 || dim_max > 64) throw invalid_input("prox-check: dim-max must be in [1, 64]");
  Rng rng(seed);
  double worst_gap = 0.0, worst_sub = 0.0;
  for (int t = 0; t < trials; ++t) {
    int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(dim_max)));
    Vec u(n);
    double scale = std::pow(10.0, 2.0 * rng.uniform() - 1.0);
    for (int i = 0; i < n; ++i) u[i] = scale * rng.normal();
    double lambda = std::pow(10.0, 4.0 * rng.uniform() - 3.0);
    ProxResult p = prox_sql1(u, lambda);
    worst_gap = std::max(worst_gap,
                         (p.z - prox_sql1_bisect(u, lambda)).lpNorm<Eigen::Infinity>());
    worst_sub = std::max(worst_sub, sql1_subgradient_residual(u, lambda, p.z));
  }
  bool pass = worst_gap < 1e-6 && worst_sub < 1e-10;
  std::cout << "prox-check: trials=" << trials << " max_oracle_gap=" << worst_gap
            << " max_subgradient_residual=" << worst_sub << " -> " << (pass ? "PASS" : "FAIL")
            << "\n";
  return pass ? 0 : 2;
}

// ---- experiments -----------------------------------------------------------

ExperimentConfig base_config(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  if (kind == ExperimentKind::MultiInit) {
    cfg.specs = {SpecRow{"subspace", 0.5, 0.5},    SpecRow{"sparse", 0.5, 0.5},
                 SpecRow{"elastic", 0.5, 0.5},     SpecRow{"non_norm", 0.5, 0.5},
                 SpecRow{"coupled_l1sq", 0.5, 0.5}, SpecRow{"coupled_l2", 0.5, 0.5}};
  }
  if (kind == ExperimentKind::KSweep || kind == ExperimentKind::IncrementalCompare) {
    cfg.ds = {50};
    cfg.ks = {3, 5, 10, 25, 50, 100};
    cfg.incremental.epochs = 50;
  }
  return cfg;
}

njson cell_timings(const ExperimentReport& rep) {
  njson cells = njson::array();
  for (const CellRecord& c : rep.cells)
    cells.push_back(njson{{"family", c.family},
                          {"alpha", c.alpha},
                          {"d", c.d},
                          {"k", c.k},
                          {"seconds", c.wall_seconds}});
  for (const KSweepRecord& r : rep.sweep)
    cells.push_back(njson{{"nu", r.nu}, {"k", r.k}, {"seconds", r.wall_seconds}});
  for (const MethodRecord& m : rep.methods)
    cells.push_back(njson{{"method", m.name}, {"seconds", m.wall_seconds}});
  return cells;
}

int run_experiment(const ExperimentConfig& cfg, const std::string& command) {
  auto t0 = std::chrono::steady_clock::now();
  ExperimentReport rep;
  switch (cfg.kind) {
    case ExperimentKind::MultiInit:
      rep = multi_init_experiment(cfg);
      write_multi_init_csv(rep, cfg.out_dir);
      break;
    case ExperimentKind::KSweep:
      rep = k_sweep_experiment(cfg);
      write_k_sweep_csv(rep, cfg.out_dir);
      break;
    case ExperimentKind::IncrementalCompare:
      rep = incremental_compare(cfg);
      write_incremental_csv(rep, cfg.out_dir);
      break;
    default:
      throw invalid_input("config: experiment kind does not match the subcommand");
  }
  njson timings;
  timings["total_seconds"] = seconds_since(t0);
  timings["experiment_seconds"] = rep.wall_seconds;
  timings["workers"] = cell_timings(rep);
  write_manifest(cfg.out_dir, command, config_json(cfg), std::move(timings));
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"dictionary learning model optimization toolkit", "dlm-opt"};
  app.require_subcommand(1);

  SolveArgs solve_args;
  CLI::App* solve = app.add_subcommand("solve", "factor one CSV matrix");
  solve->add_option("--data", solve_args.data, "input matrix CSV")->required();
  solve->add_option("--spec", solve_args.family,
                    "family: subspace|sparse|sparse_coding|elastic|completion|non_norm|"
                    "coupled_l1sq|coupled_l2");
  solve->add_option("--alpha", solve_args.alpha, "regularization weight");
  solve->add_option("--k", solve_args.k, "inner dimension")->required();
  solve->add_option("--nu-d", solve_args.nu_d, "dictionary elastic mix");
  solve->add_option("--nu-h", solve_args.nu_h, "coefficient elastic mix");
  solve->add_option("--tol", solve_args.tol, "objective-change stopping threshold");
  solve->add_option("--max-iters", solve_args.max_iters, "outer iteration cap");
  solve->add_flag("--unaveraged", solve_args.unaveraged, "drop the 1/T loss averaging");
  solve->add_flag("--certify", solve_args.certify, "attach the global-optimality certificate");
  solve->add_option("--certify-tol", solve_args.cert_tol, "certificate tolerance");
  solve->add_option("--seed", solve_args.seed, "init seed")->required();
  solve->add_option("--out", solve_args.out, "output directory")->required();

  CertifyArgs cert_args;
  CLI::App* certify = app.add_subcommand("certify", "check a factorization for global optimality");
  certify->add_option("--data", cert_args.data, "data matrix CSV")->required();
  certify->add_option("--dictionary", cert_args.dictionary, "D factor CSV")->required();
  certify->add_option("--coefficients", cert_args.coefficients, "H factor CSV")->required();
  certify->add_option("--spec", cert_args.family, "family name");
  certify->add_option("--alpha", cert_args.alpha, "regularization weight");
  certify->add_option("--nu-d", cert_args.nu_d, "dictionary elastic mix");
  certify->add_option("--nu-h", cert_args.nu_h, "coefficient elastic mix");
  certify->add_option("--tol", cert_args.tol, "certificate tolerance");
  certify->add_flag("--unaveraged", cert_args.unaveraged, "drop the 1/T loss averaging");
  certify->add_flag("--hessian", cert_args.hessian, "also compute the min Hessian eigenvalue");
  certify->add_option("--fd-step", cert_args.fd_step, "finite-difference step (0 = default)");
  certify->add_option("--out", cert_args.out, "output directory")->required();

  int prox_trials = 1000, prox_dim_max = 5;
  std::uint64_t prox_seed = 0;
  CLI::App* prox = app.add_subcommand("prox-check", "self-test the squared-l1 proximal operator");
  prox->add_option("--trials", prox_trials, "number of random instances");
  prox->add_option("--dim-max", prox_dim_max, "max vector length");
  prox->add_option("--seed", prox_seed, "rng seed")->required();

  struct ExpFlags {
    std::string config, out;
    std::uint64_t seed = 0;
    int threads = -1, T = -1, n_inits = -1, d = -1, k = -1, epochs = -1;
    double alpha = -1.0, eta0 = -1.0;
    std::vector<int> ks;
    std::vector<double> nus, alphas;
    bool include_large = false;
    CLI::Option *seed_opt = nullptr, *out_opt = nullptr;
  };

  auto add_common = [](CLI::App* sub, ExpFlags& f) {
    sub->add_option("--config", f.config, "JSON config file");
    f.out_opt = sub->add_option("--out", f.out, "output directory");
    f.seed_opt = sub->add_option("--seed", f.seed, "experiment seed");
    sub->add_option("--threads", f.threads, "worker pool size (DLM_THREADS caps)");
  };

  ExpFlags mi;
  CLI::App* multi = app.add_subcommand("multi-init", "objective spread over prescribed inits");
  add_common(multi, mi);
  multi->add_flag("--include-large", mi.include_large, "run d >= 50 grid cells");
  multi->add_option("--n-inits", mi.n_inits, "inits per cell");
  multi->add_option("--T", mi.T, "sample count");
  multi->add_option("--alphas", mi.alphas, "alpha grid")->delimiter(',');

  ExpFlags ks;
  CLI::App* sweep = app.add_subcommand("k-sweep", "objective spread and gap across k");
  add_common(sweep, ks);
  sweep->add_option("--alpha", ks.alpha, "regularization weight");
  sweep->add_option("--d", ks.d, "data dimension");
  sweep->add_option("--T", ks.T, "sample count");
  sweep->add_option("--ks", ks.ks, "k grid")->delimiter(',');
  sweep->add_option("--nus", ks.nus, "coefficient elastic mixes")->delimiter(',');
  sweep->add_option("--n-inits", ks.n_inits, "inits per k");

  ExpFlags inc;
  CLI::App* incremental = app.add_subcommand("incremental", "batch vs online vs SGD comparison");
  add_common(incremental, inc);
  incremental->add_option("--alpha", inc.alpha, "regularization weight");
  incremental->add_option("--d", inc.d, "data dimension");
  incremental->add_option("--T", inc.T, "sample count");
  incremental->add_option("--k", inc.k, "inner dimension");
  incremental->add_option("--epochs", inc.epochs, "passes over the data");
  incremental->add_option("--eta0", inc.eta0, "initial step size");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::string command = "dlm-opt";
  for (const std::string& a : args) command += " " + a;

  auto resolve_experiment = [&](const ExpFlags& f, ExperimentKind kind) {
    LoadedConfig loaded;
    loaded.cfg = base_config(kind);
    if (!f.config.empty()) loaded = load_config_file(f.config, std::move(loaded.cfg));
    ExperimentConfig& cfg = loaded.cfg;
    cfg.kind = kind;
    if (f.seed_opt->count()) {
      cfg.seed = f.seed;
      loaded.has_seed = true;
    }
    if (f.out_opt->count()) {
      cfg.out_dir = f.out;
      loaded.has_out = true;
    }
    if (f.threads >= 0) cfg.threads = f.threads;
    if (f.include_large) cfg.include_large = true;
    if (f.T > 0) cfg.T = f.T;
    if (f.n_inits > 0) cfg.n_inits = f.n_inits;
    if (f.d > 0) cfg.ds = {f.d};
    if (f.k > 0) cfg.k = f.k;
    if (f.epochs > 0) cfg.incremental.epochs = f.epochs;
    if (f.alpha >= 0.0) cfg.alpha = f.alpha;
    if (f.eta0 > 0.0) cfg.incremental.eta0 = f.eta0;
    if (!f.ks.empty()) cfg.ks = f.ks;
    if (!f.nus.empty()) cfg.nus = f.nus;
    if (!f.alphas.empty()) cfg.alphas = f.alphas;
    if (!loaded.has_seed)
      throw invalid_input("missing --seed (flag or config key required for experiments)");
    if (!loaded.has_out)
      throw invalid_input("missing --out (flag or config key required for experiments)");
    cfg.validate();
    return cfg;
  };

  try {
    if (*solve) return run_solve(solve_args, command);
    if (*certify) return run_certify(cert_args, command);
    if (*prox) return run_prox_check(prox_seed, prox_trials, prox_dim_max);
    if (*multi) return run_experiment(resolve_experiment(mi, ExperimentKind::MultiInit), command);
    if (*sweep) return run_experiment(resolve_experiment(ks, ExperimentKind::KSweep), command);
    if (*incremental)
      return run_experiment(resolve_experiment(inc, ExperimentKind::IncrementalCompare), command);
    std::cerr << "error: no subcommand given\n";
    return 1;
  } catch (const numerical_failure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const invalid_input& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const unsupported_kind& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace dlm

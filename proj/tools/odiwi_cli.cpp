// odiwi command-line front end. Everything goes through the C library.
#include "odiwi/odiwi.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

struct Failure {
  int exit_code;
  std::string message;
};

[[noreturn]] void usage_error(const std::string& message) { throw Failure{kExitUsage, message}; }

void check(odiwi_status status) {
  if (status == ODIWI_OK) return;
  std::string message = std::string(odiwi_status_name(status)) + ": " + odiwi_last_error_message();
  throw Failure{static_cast<int>(odiwi_status_category(status)), message};
}

// Owns a string handed out by the library.
std::string take(char* s) {
  std::string out = s ? s : "";
  odiwi_string_free(s);
  return out;
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(ptr); }
  T** out() { return &ptr; }
  T* get() const { return ptr; }
};

using FirstStage = Handle<odiwi_first_stage, odiwi_first_stage_free>;
using SecondStage = Handle<odiwi_second_stage, odiwi_second_stage_free>;
using Result = Handle<odiwi_result, odiwi_result_free>;
using Bootstrap = Handle<odiwi_bootstrap, odiwi_bootstrap_free>;
using DesignH = Handle<odiwi_design, odiwi_design_free>;
using Experiment = Handle<odiwi_experiment, odiwi_experiment_free>;

// Writes to a sibling temp file and renames it over the target.
void write_atomic(const std::string& path, const std::string& text) {
  const fs::path target(path);
  if (target.has_parent_path() && !fs::exists(target.parent_path()))
    throw Failure{kExitData, "output directory does not exist: " + target.parent_path().string()};
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Failure{kExitData, "cannot write " + tmp.string()};
    out << text;
    out.close();
    if (!out) {
      fs::remove(tmp);
      throw Failure{kExitData, "write failed for " + tmp.string()};
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw Failure{kExitData, "cannot rename onto " + path + ": " + ec.message()};
  }
}

// "metrics.csv" + ".summary.csv" -> "metrics.summary.csv"
std::string sibling(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  const std::string ext = p.extension().string();
  if (ext == ".csv" || ext == ".json") p.replace_extension();
  return p.string() + suffix;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kExitData, "cannot open " + path};
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size() && item.find_first_not_of(" \t", used) != std::string::npos)
        throw std::invalid_argument(item);
    } catch (const std::exception&) {
      usage_error(flag + ": not a number list: '" + text + "'");
    }
  }
  if (out.empty()) usage_error(flag + ": empty list");
  return out;
}

// Collects flag values that override keys of the flat JSON config.
class Overrides {
public:
  explicit Overrides(CLI::App* app) : app_(app) {}

  template <class T>
  void add(const std::string& flag, const std::string& key, const std::string& help) {
    auto& slot = store<T>();
    slot.emplace_back();
    std::optional<T>* target = &slot.back();
    app_->add_option(flag, *target, help);
    setters_.push_back([target, key](json& j) {
      if (*target) j[key] = **target;
    });
  }

  void add_list(const std::string& flag, const std::string& key, const std::string& help) {
    lists_.emplace_back();
    std::optional<std::string>* target = &lists_.back();
    app_->add_option(flag, *target, help)->allow_extra_args(false);
    setters_.push_back([target, key, flag](json& j) {
      if (*target) j[key] = parse_list(**target, flag);
    });
  }

  void add_flag(const std::string& flag, const std::string& key, const std::string& help) {
    flags_.emplace_back(false);
    bool* target = &flags_.back();
    app_->add_flag(flag, *target, help);
    setters_.push_back([target, key](json& j) {
      if (*target) j[key] = true;
    });
  }

  void add_config() { app_->add_option("--config", config_path_, "flat JSON config file")->check(CLI::ExistingFile); }

  json resolve() const {
    json j = json::object();
    if (!config_path_.empty()) {
      try {
        j = json::parse(read_file(config_path_));
      } catch (const json::exception& e) {
        usage_error("config " + config_path_ + ": " + e.what());
      }
      if (!j.is_object()) usage_error("config " + config_path_ + " must hold a JSON object");
    }
    for (const auto& set : setters_) set(j);
    return j;
  }

private:
  template <class T>
  std::deque<std::optional<T>>& store() {
    if constexpr (std::is_same_v<T, int>) return ints_;
    else if constexpr (std::is_same_v<T, double>) return doubles_;
    else if constexpr (std::is_same_v<T, std::uint64_t>) return u64_;
    else return strings_;
  }

  CLI::App* app_;
  std::string config_path_;
  std::deque<std::optional<int>> ints_;
  std::deque<std::optional<double>> doubles_;
  std::deque<std::optional<std::uint64_t>> u64_;
  std::deque<std::optional<std::string>> strings_;
  std::deque<std::optional<std::string>> lists_;
  std::deque<bool> flags_;
  std::vector<std::function<void(json&)>> setters_;
};

void add_estimator_flags(Overrides& o) {
  o.add<int>("--iters", "iterations", "number of design/reweight/refit cycles L");
  o.add<double>("--momentum", "momentum", "momentum alpha in [0, 1)");
  o.add<int>("--inits", "num_inits", "number of first-stage initializations M");
  o.add<std::string>("--init", "init", "uniform | dirichlet_random");
  o.add<std::string>("--aggregation", "aggregation", "after_last_iteration | after_first_iteration");
  o.add<std::string>("--criterion", "criterion", "D | A | E");
  o.add<std::string>("--kernel", "kernel", "gaussian | uniform | triangle");
  o.add<double>("--bandwidth", "bandwidth", "absolute design-density bandwidth");
  o.add<double>("--bandwidth-fraction", "bandwidth_fraction", "bandwidth as a fraction of the exposure range");
  o.add<double>("--clip-quantile", "clip_quantile", "importance-weight clipping quantile");
  o.add<double>("--ridge", "ridge", "first-stage ridge penalty");
  o.add<int>("--grid-resolution", "grid_resolution", "candidate grid points per axis");
  o.add<std::string>("--design-covariates", "design_covariates", "ignore | median");
  o.add<int>("--exposure-degree", "exposure_degree", "polynomial degree of the exposure terms");
}

void add_sim_flags(Overrides& o) {
  o.add<int>("--n-star", "n_star", "first-stage sample size");
  o.add<int>("--n", "n", "second-stage sample size");
  o.add<int>("--d", "d", "number of geographic covariates");
  o.add<double>("--snr", "snr", "first-stage signal-to-noise ratio");
  o.add<double>("--sigma-eps", "sigma_eps", "first-stage noise sd (overrides --snr)");
  o.add<double>("--beta0", "beta0", "true intercept");
  o.add<double>("--beta-x", "beta_x", "true exposure effect");
  o.add<int>("--reps", "reps", "replications per cell");
  o.add<double>("--shift", "shift", "second-stage covariate mean shift in sd units");
}

int env_threads() {
  const char* v = std::getenv("ODIWI_THREADS");
  if (!v || !*v) return 1;
  try {
    const int t = std::stoi(v);
    if (t >= 1) return t;
  } catch (const std::exception&) {
  }
  usage_error(std::string("ODIWI_THREADS must be a positive integer, got '") + v + "'");
}

void write_meta(const std::string& path, const std::string& meta) { write_atomic(path + ".meta.json", meta); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---- subcommands -------------------------------------------------------------

struct SimulateArgs {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;
  std::string summary;
  std::string trace;
};

int run_simulate(const Overrides& o, const SimulateArgs& a, bool sweep) {
  if (!a.seed) usage_error("--seed is required");
  json cfg = o.resolve();
  cfg["seed"] = *a.seed;
  cfg["threads"] = a.threads ? *a.threads : (cfg.contains("threads") ? cfg["threads"].get<int>() : env_threads());
  if (sweep && !cfg.contains("beta_x_grid")) cfg["beta_x_grid"] = {0.0, 0.5, 1.0, 1.5, 2.0};

  Experiment exp;
  check(odiwi_simulate(cfg.dump().c_str(), exp.out()));
  char* s = nullptr;
  check(odiwi_experiment_metrics_csv(exp.get(), &s));
  const std::string metrics = take(s);
  check(odiwi_experiment_summary_csv(exp.get(), &s));
  const std::string summary = take(s);
  check(odiwi_experiment_trace_csv(exp.get(), &s));
  const std::string trace = take(s);
  check(odiwi_experiment_metadata_json(exp.get(), &s));
  const std::string meta = take(s);

  const std::string summary_path = a.summary.empty() ? sibling(a.out, ".summary.csv") : a.summary;
  const std::string trace_path = a.trace.empty() ? sibling(a.out, ".trace.csv") : a.trace;
  write_atomic(a.out, metrics);
  write_atomic(summary_path, summary);
  write_atomic(trace_path, trace);
  write_meta(a.out, meta);

  // One line: per-estimator mean error of the last grid cell.
  std::istringstream lines(summary);
  std::string line, last_naive, last_odiwi;
  std::getline(lines, line);
  while (std::getline(lines, line)) (line.rfind("naive", 0) == 0 ? last_naive : last_odiwi) = line;
  auto field = [](const std::string& row, int idx) {
    std::stringstream ss(row);
    std::string cell;
    for (int i = 0; i <= idx && std::getline(ss, cell, ','); ++i) {
    }
    return cell;
  };
  std::cout << (sweep ? "sweep" : "simulate") << ": wrote " << a.out << ", " << summary_path << ", "
            << trace_path << "; beta_x=" << field(last_odiwi, 1) << " mean error naive "
            << fmt(std::stod(field(last_naive, 4))) << " odiwi " << fmt(std::stod(field(last_odiwi, 4)))
            << '\n';
  return 0;
}

struct EstimateArgs {
  std::string first_stage;
  std::string second_stage;
  std::string family = "logit";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  int bootstrap = 0;
  std::optional<double> level;
  std::optional<std::uint64_t> bootstrap_seed;
  std::string out;
  std::string trajectory;
};

void load_data(const std::string& first, const std::string& second, const std::string& family,
               FirstStage& fs, SecondStage& ss) {
  char* report = nullptr;
  check(odiwi_first_stage_load(first.c_str(), fs.out(), &report));
  std::cerr << "loaded first stage: " << take(report) << '\n';
  check(odiwi_second_stage_load(second.c_str(), family.c_str(), ss.out(), &report));
  std::cerr << "loaded second stage: " << take(report) << '\n';
}

int run_estimate(const Overrides& o, const EstimateArgs& a) {
  json cfg = o.resolve();
  if (a.seed) cfg["seed"] = *a.seed;
  cfg["threads"] = a.threads ? *a.threads : (cfg.contains("threads") ? cfg["threads"].get<int>() : env_threads());
  FirstStage fs;
  SecondStage ss;
  load_data(a.first_stage, a.second_stage, a.family, fs, ss);
  const std::string traj_path = a.trajectory.empty() ? sibling(a.out, ".trajectory.csv") : a.trajectory;
  char* s = nullptr;

  if (a.bootstrap > 0 || cfg.contains("bootstrap")) {
    if (a.bootstrap > 0) cfg["bootstrap"] = a.bootstrap;
    if (a.level) cfg["level"] = *a.level;
    if (a.bootstrap_seed) cfg["bootstrap_seed"] = *a.bootstrap_seed;
    else if (!cfg.contains("bootstrap_seed") && cfg.contains("seed")) cfg["bootstrap_seed"] = cfg["seed"];
    Bootstrap boot;
    check(odiwi_bootstrap_run(fs.get(), ss.get(), a.family.c_str(), cfg.dump().c_str(), boot.out()));
    check(odiwi_bootstrap_json(boot.get(), &s));
    const std::string body = take(s);
    check(odiwi_bootstrap_trajectory_csv(boot.get(), &s));
    const std::string traj = take(s);
    check(odiwi_bootstrap_replicates_csv(boot.get(), &s));
    const std::string reps = take(s);
    const std::string reps_path = sibling(a.out, ".bootstrap.csv");
    const json meta = json::parse(body)["metadata"];
    write_atomic(a.out, body);
    write_atomic(traj_path, traj);
    write_meta(traj_path, meta.dump(2));
    write_atomic(reps_path, reps);
    write_meta(reps_path, meta.dump(2));
    double point = 0, lo = 0, hi = 0, se = 0;
    check(odiwi_bootstrap_interval(boot.get(), &point, &lo, &hi, &se));
    std::cout << "estimate: beta_x=" << fmt(point) << " CI [" << fmt(lo) << ", " << fmt(hi)
              << "] se=" << fmt(se) << "; wrote " << a.out << ", " << traj_path << ", " << reps_path
              << '\n';
    return 0;
  }

  Result res;
  check(odiwi_estimate(fs.get(), ss.get(), a.family.c_str(), cfg.dump().c_str(), res.out()));
  check(odiwi_result_json(res.get(), &s));
  const std::string body = take(s);
  check(odiwi_result_trajectory_csv(res.get(), &s));
  const std::string traj = take(s);
  write_atomic(a.out, body);
  write_atomic(traj_path, traj);
  write_meta(traj_path, json::parse(body)["metadata"].dump(2));
  const std::size_t k = odiwi_result_num_coefficients(res.get());
  std::vector<double> beta(k), naive(k);
  check(odiwi_result_coefficients(res.get(), beta.data(), k));
  check(odiwi_result_naive_coefficients(res.get(), naive.data(), k));
  std::cout << "estimate: beta_x=" << fmt(beta[1]) << " (naive " << fmt(naive[1]) << ")"
            << (odiwi_result_all_certified(res.get()) ? "" : " [uncertified designs]") << "; wrote "
            << a.out << ", " << traj_path << '\n';
  return 0;
}

struct DesignArgs {
  std::string beta;
  std::string family = "logit";
  std::string range;
  std::string exposures;
  std::optional<int> resolution;
  std::optional<std::string> criterion;
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::optional<double> merge_radius;
  std::optional<double> min_weight;
  std::optional<int> degree;
  std::string out;
};

int run_design(const DesignArgs& a) {
  json req{{"beta", parse_list(a.beta, "--beta")}, {"family", a.family}};
  if (!a.range.empty() == !a.exposures.empty()) usage_error("give exactly one of --range or --exposures");
  if (!a.range.empty()) {
    req["range"] = parse_list(a.range, "--range");
    req["resolution"] = a.resolution.value_or(2001);
  } else {
    FirstStage fs;
    check(odiwi_first_stage_load(a.exposures.c_str(), fs.out(), nullptr));
    const std::size_t n = odiwi_first_stage_rows(fs.get());
    const std::size_t p = odiwi_first_stage_exposure_dim(fs.get());
    std::vector<double> x(n * p);
    check(odiwi_first_stage_exposures(fs.get(), x.data(), x.size()));
    json pts = json::array();
    for (std::size_t i = 0; i < n; ++i)
      pts.push_back(std::vector<double>(x.begin() + static_cast<long>(i * p), x.begin() + static_cast<long>((i + 1) * p)));
    req["exposures"] = pts;
    req["resolution"] = a.resolution.value_or(p == 1 ? 201 : 41);
  }
  if (a.criterion) req["criterion"] = *a.criterion;
  if (a.tol) req["tol"] = *a.tol;
  if (a.max_iter) req["max_iter"] = *a.max_iter;
  if (a.merge_radius) req["merge_radius"] = *a.merge_radius;
  if (a.min_weight) req["min_weight"] = *a.min_weight;
  if (a.degree) req["exposure_degree"] = *a.degree;

  DesignH d;
  check(odiwi_design_solve(req.dump().c_str(), d.out()));
  char* s = nullptr;
  check(odiwi_design_json(d.get(), &s));
  write_atomic(a.out, take(s));
  std::cout << "design: " << odiwi_design_size(d.get()) << " support points, certificate "
            << fmt(odiwi_design_certificate(d.get())) << "; wrote " << a.out << '\n';
  return 0;
}

struct WeightsArgs {
  std::string first_stage;
  std::string design;
  std::string out;
};

int run_weights(const Overrides& o, const WeightsArgs& a) {
  const json cfg = o.resolve();
  FirstStage fs;
  check(odiwi_first_stage_load(a.first_stage.c_str(), fs.out(), nullptr));
  DesignH d;
  check(odiwi_design_from_json(read_file(a.design).c_str(), d.out()));
  char* csv = nullptr;
  char* meta = nullptr;
  check(odiwi_importance_weights_csv(fs.get(), d.get(), cfg.dump().c_str(), &csv, &meta));
  const std::string body = take(csv);
  write_atomic(a.out, body);
  write_meta(a.out, take(meta));
  std::cout << "weights: " << odiwi_first_stage_rows(fs.get()) << " rows; wrote " << a.out << '\n';
  return 0;
}

struct GenerateArgs {
  std::optional<std::uint64_t> seed;
  std::uint64_t rep = 0;
  std::string first_out;
  std::string second_out;
};

int run_generate(const Overrides& o, const GenerateArgs& a) {
  if (!a.seed) usage_error("--seed is required");
  json cfg = o.resolve();
  cfg["seed"] = *a.seed;
  FirstStage fs;
  SecondStage ss;
  check(odiwi_generate(cfg.dump().c_str(), 0, a.rep, fs.out(), ss.out()));
  // The library writes directly; go through temp names for atomicity.
  const std::string tmp1 = a.first_out + ".tmp." + std::to_string(::getpid());
  const std::string tmp2 = a.second_out + ".tmp." + std::to_string(::getpid());
  check(odiwi_first_stage_write(fs.get(), tmp1.c_str()));
  check(odiwi_second_stage_write(ss.get(), tmp2.c_str()));
  fs::rename(tmp1, a.first_out);
  fs::rename(tmp2, a.second_out);
  cfg["rep"] = a.rep;
  write_meta(a.first_out, cfg.dump(2));
  write_meta(a.second_out, cfg.dump(2));
  std::cout << "generate: " << odiwi_first_stage_rows(fs.get()) << " first-stage rows, "
            << odiwi_second_stage_rows(ss.get()) << " second-stage rows; wrote " << a.first_out << ", "
            << a.second_out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal-design importance-weighted two-stage exposure effect estimation"};
  app.set_version_flag("--version", std::string(odiwi_version()));
  app.require_subcommand(1);

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo comparison of the naive and iterative estimators");
  Overrides sim_o(sim);
  sim_o.add_config();
  add_sim_flags(sim_o);
  add_estimator_flags(sim_o);
  sim_o.add_list("--beta-x-grid", "beta_x_grid", "comma-separated true effects (default: --beta-x)");
  sim->add_option("--seed", sim_args.seed, "master seed (required)");
  sim->add_option("--threads", sim_args.threads, "worker threads (default $ODIWI_THREADS or 1)");
  sim->add_option("--out", sim_args.out, "per-replication metrics CSV")->required();
  sim->add_option("--summary", sim_args.summary, "summary CSV (default <out>.summary.csv)");
  sim->add_option("--trace", sim_args.trace, "per-iteration error CSV (default <out>.trace.csv)");

  SimulateArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "simulate over beta_x in {0, 0.5, 1, 1.5, 2}");
  Overrides sweep_o(sweep);
  sweep_o.add_config();
  add_sim_flags(sweep_o);
  add_estimator_flags(sweep_o);
  sweep_o.add_list("--beta-x-grid", "beta_x_grid", "comma-separated true effects");
  sweep->add_option("--seed", sweep_args.seed, "master seed (required)");
  sweep->add_option("--threads", sweep_args.threads, "worker threads (default $ODIWI_THREADS or 1)");
  sweep->add_option("--out", sweep_args.out, "per-replication metrics CSV")->required();
  sweep->add_option("--summary", sweep_args.summary, "summary CSV (default <out>.summary.csv)");
  sweep->add_option("--trace", sweep_args.trace, "per-iteration error CSV (default <out>.trace.csv)");

  EstimateArgs est_args;
  auto* est = app.add_subcommand("estimate", "estimate the exposure effect from two CSV datasets");
  Overrides est_o(est);
  est_o.add_config();
  add_estimator_flags(est_o);
  est->add_option("--first-stage", est_args.first_stage, "CSV with id, x, r1..rd")->required()->check(CLI::ExistingFile);
  est->add_option("--second-stage", est_args.second_stage, "CSV with id, y, z1..zq, r1..rd")->required()->check(CLI::ExistingFile);
  est->add_option("--family", est_args.family, "logit | gaussian")->capture_default_str();
  est->add_option("--seed", est_args.seed, "seed for random initializations");
  est->add_option("--threads", est_args.threads, "worker threads (default $ODIWI_THREADS or 1)");
  est->add_option("--bootstrap", est_args.bootstrap, "bootstrap replicates (0 disables)");
  est->add_option("--level", est_args.level, "confidence level");
  est->add_option("--bootstrap-seed", est_args.bootstrap_seed, "bootstrap seed (default --seed)");
  est->add_option("--out", est_args.out, "result JSON")->required();
  est->add_option("--trajectory", est_args.trajectory, "trajectory CSV (default <out>.trajectory.csv)");

  DesignArgs des_args;
  auto* des = app.add_subcommand("design", "locally optimal approximate design for a GLM");
  des->add_option("--beta", des_args.beta, "comma-separated coefficients, intercept first")->required();
  des->add_option("--family", des_args.family, "logit | gaussian")->capture_default_str();
  des->add_option("--range", des_args.range, "lo,hi of a one-dimensional candidate interval");
  des->add_option("--exposures", des_args.exposures, "first-stage CSV whose exposure hull defines the grid");
  des->add_option("--resolution", des_args.resolution, "grid points per axis");
  des->add_option("--criterion", des_args.criterion, "D | A | E");
  des->add_option("--tol", des_args.tol, "equivalence tolerance");
  des->add_option("--max-iter", des_args.max_iter, "solver iteration cap");
  des->add_option("--merge-radius", des_args.merge_radius, "support merge radius");
  des->add_option("--min-weight", des_args.min_weight, "drop support weights below this");
  des->add_option("--exposure-degree", des_args.degree, "polynomial degree of the exposure terms");
  des->add_option("--out", des_args.out, "design JSON")->required();

  WeightsArgs w_args;
  auto* wts = app.add_subcommand("weights", "importance weights of first-stage rows for a design");
  Overrides w_o(wts);
  w_o.add_config();
  w_o.add<std::string>("--kernel", "kernel", "gaussian | uniform | triangle");
  w_o.add<double>("--bandwidth", "bandwidth", "absolute bandwidth");
  w_o.add<double>("--bandwidth-fraction", "bandwidth_fraction", "bandwidth as a fraction of the exposure range");
  w_o.add<double>("--clip-quantile", "clip_quantile", "clipping quantile of the raw ratios");
  w_o.add<double>("--floor-fraction", "floor_fraction", "source-density floor relative to its peak");
  wts->add_option("--first-stage", w_args.first_stage, "CSV with id, x, r1..rd")->required()->check(CLI::ExistingFile);
  wts->add_option("--design", w_args.design, "design JSON")->required()->check(CLI::ExistingFile);
  wts->add_option("--out", w_args.out, "weights CSV")->required();

  GenerateArgs gen_args;
  auto* gen = app.add_subcommand("generate", "write one simulated first/second-stage dataset pair");
  Overrides gen_o(gen);
  gen_o.add_config();
  add_sim_flags(gen_o);
  gen->add_option("--seed", gen_args.seed, "master seed (required)");
  gen->add_option("--rep", gen_args.rep, "replication index");
  gen->add_option("--first-stage-out", gen_args.first_out, "first-stage CSV")->required();
  gen->add_option("--second-stage-out", gen_args.second_out, "second-stage CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*sim) return run_simulate(sim_o, sim_args, false);
    if (*sweep) return run_simulate(sweep_o, sweep_args, true);
    if (*est) return run_estimate(est_o, est_args);
    if (*des) return run_design(des_args);
    if (*wts) return run_weights(w_o, w_args);
    if (*gen) return run_generate(gen_o, gen_args);
  } catch (const Failure& f) {
    std::cerr << "odiwi: error: " << f.message << '\n';
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "odiwi: error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}

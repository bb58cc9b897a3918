#pragma once

#include "odiwi/estimator.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace odiwi {

// Gaussian-covariate data-generating process with a logistic second stage.
struct SimConfig {
  int n_star = 500;
  int n = 2000;
  int d = 3;
  std::optional<VectorXd> gamma;      // default (1, ..., 1) / sqrt(d)
  std::optional<double> sigma_eps;    // default: Var(gamma' r) / sigma^2 = snr
  double snr = 4.0;
  double beta0 = 0.0;
  double beta_x = 1.5;
  int reps = 100;
  std::uint64_t seed = 0;
  // Second-stage covariate mean shift in units of each covariate's sd.
  double shift = 0.0;

  void validate() const;
  VectorXd resolved_gamma() const;
};

// Truth shared by both stages of one replication.
struct Population {
  MatrixXd sigma;
  MatrixXd sigma_chol;  // lower factor of sigma
  VectorXd gamma;
  double sigma_eps = 1.0;
  VectorXd second_stage_mean;
};

// Independent stream for (seed, a, b).
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

Population draw_population(const SimConfig& config, std::mt19937_64& rng);
FirstStageData gen_first_stage(const SimConfig& config, const Population& pop, std::mt19937_64& rng);

// The true exposures are kept beside the data handed to estimators.
struct SimulatedSecondStage {
  SecondStageData data;
  MatrixXd true_exposure;
};

SimulatedSecondStage gen_second_stage(const SimConfig& config, const Population& pop,
                                      std::mt19937_64& rng);

struct Replicate {
  Population population;
  FirstStageData first;
  SimulatedSecondStage second;
};

Replicate simulate_replicate(const SimConfig& config, std::uint64_t cell, std::uint64_t rep);

struct MetricsRow {
  std::string estimator;
  double beta_x_true = 0.0;
  int rep = 0;
  double beta_hat = 0.0;
  double error = 0.0;
  double stage1_rmse = 0.0;
  std::string flags;
};

struct SummaryRow {
  std::string estimator;
  double beta_x_true = 0.0;
  int count = 0;
  int failures = 0;
  double mean = 0.0;  // of the error
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double mean_abs_error = 0.0;
  double mean_stage1_rmse = 0.0;
};

// Mean ODIWI error at each iteration, per grid cell.
struct TraceRow {
  double beta_x_true = 0.0;
  int iteration = 0;
  double mean_error = 0.0;
  double sd_error = 0.0;
  int count = 0;
};

struct ExperimentOptions {
  std::vector<double> beta_x_grid{1.5};
  SimConfig sim;
  OdiwiConfig odiwi;
  int threads = 1;
};

struct ExperimentResult {
  std::vector<MetricsRow> rows;
  std::vector<TraceRow> trace;
};

// Rows ordered by (cell, rep, estimator) with "naive" before "odiwi".
ExperimentResult run_experiment(const ExperimentOptions& options);
std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows);

// Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value.
double ks_statistic(VectorXd a, VectorXd b);
double ks_pvalue(double statistic, Eigen::Index n, Eigen::Index m);

}  // namespace odiwi

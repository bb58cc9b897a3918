#pragma once

#include "odiwi/adapt.hpp"
#include "odiwi/design.hpp"
#include "odiwi/glm.hpp"
#include "odiwi/stage1.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace odiwi {

// Epidemiological data: outcomes, personal covariates z and the geographic
// covariates r used to impute exposures at subject locations.
struct SecondStageData {
  std::vector<std::string> ids;
  VectorXd outcomes;    // n
  MatrixXd covariates;  // n x q, may have zero columns
  MatrixXd geo;         // n x d

  Eigen::Index rows() const { return outcomes.size(); }
  void validate(const Family& family) const;
};

enum class InitMode { uniform, dirichlet_random };
enum class Aggregation { after_first_iteration, after_last_iteration };
// How second-stage covariates enter the design problem.
enum class DesignCovariates { ignore, median };

std::string to_string(InitMode mode);
std::string to_string(Aggregation mode);
std::string to_string(DesignCovariates mode);
InitMode parse_init_mode(const std::string& name);
Aggregation parse_aggregation(const std::string& name);
DesignCovariates parse_design_covariates(const std::string& name);

struct OdiwiConfig {
  int iterations = 10;
  double momentum = 0.5;
  int num_inits = 5;
  InitMode init = InitMode::dirichlet_random;
  Aggregation aggregation = Aggregation::after_last_iteration;
  Criterion criterion = Criterion::D;
  KernelShape kernel = KernelShape::gaussian;
  std::optional<double> bandwidth;  // absolute; overrides bandwidth_fraction
  double bandwidth_fraction = 0.1;  // of the imputed-exposure range
  std::optional<double> clip_quantile = 0.99;
  double floor_fraction = 1e-8;  // source density floor relative to its peak
  double ridge = 1e-8;
  int grid_resolution = 201;
  double merge_fraction = 0.01;
  double min_weight = 1e-4;
  double design_tol = 1e-5;
  int design_max_iter = 5000;
  DesignCovariates design_covariates = DesignCovariates::ignore;
  int exposure_degree = 1;
  // Diagnostic mode: target density replaced by the source density.
  bool identity_adaptation = false;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct WeightSummary {
  double min = 0.0;
  double max = 0.0;
  double effective_sample_size = 0.0;
  std::optional<double> clip_bound;
  std::string checksum;
};

struct IterationRecord {
  int iteration = 0;
  VectorXd beta_hat;       // fit on the current imputations
  VectorXd beta_smoothed;  // momentum-smoothed coefficients fed to the design
  // Design and weights that produce the next imputations; absent on the last entry.
  std::optional<DesignSolution> design;
  std::optional<WeightSummary> weights;
  double bandwidth = 0.0;
  bool certified = true;
};

struct Chain {
  int init_id = 0;
  std::vector<IterationRecord> trajectory;
  MatrixXd final_imputed;
};

struct OdiwiResult {
  std::vector<Chain> chains;
  // after_first_iteration: the serial chain seeded with the averaged estimate,
  // holding iterations 1..L.
  std::optional<Chain> serial;
  VectorXd final_beta;
  MatrixXd final_imputed;
  std::vector<std::string> coefficient_names;
  int iterations = 0;
  bool all_certified = true;
  std::vector<std::string> warnings;

  // Per-iteration beta_hat averaged over initializations (length L + 1).
  std::vector<VectorXd> mean_trajectory() const;
};

struct NaiveResult {
  LinearPredictor predictor;
  MatrixXd imputed;
  GlmFit fit;
};

// Second-stage features (1, x, z) for the given data shapes.
FeatureMap second_stage_features(int exposure_dim, int covariate_dim, int exposure_degree = 1);

// Uniform-weight first stage, imputation, and second-stage GLM on (1, x_hat, z).
NaiveResult naive_estimate(const FirstStageData& dstar, const SecondStageData& d,
                           const Family& family, double ridge = 1e-8, int exposure_degree = 1);

OdiwiResult odiwi_estimate(const FirstStageData& dstar, const SecondStageData& d,
                           const Family& family, const OdiwiConfig& config);

// alpha * prev + (1 - alpha) * next.
VectorXd momentum_update(const VectorXd& prev, const VectorXd& next, double alpha);

// Componentwise mean in the given order.
VectorXd aggregate_inits(const std::vector<VectorXd>& per_init_betas);

// Coefficients of the exposure-only design model. Covariate terms are dropped
// or, with DesignCovariates::median, folded into the intercept at z_median.
VectorXd design_coefficients(const VectorXd& beta, const FeatureMap& features,
                             DesignCovariates mode, const VectorXd& z_median = VectorXd());

// Initial first-stage weights of one initialization, normalized to mean 1.
VectorXd initial_weights(Eigen::Index n, InitMode mode, std::uint64_t seed, int init_id);

}  // namespace odiwi

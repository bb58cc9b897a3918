#include "odiwi/estimator.hpp"

#include "odiwi/error.hpp"
#include "odiwi/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace odiwi {

void SecondStageData::validate(const Family& family) const {
  const Eigen::Index n = rows();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "second stage is empty");
  if (covariates.rows() != n && !(covariates.cols() == 0 && covariates.rows() == 0))
    throw Error(ErrorCode::DimensionMismatch, "covariate rows differ from outcome count");
  if (geo.rows() != n) throw Error(ErrorCode::DimensionMismatch, "geographic rows differ from outcome count");
  if (!ids.empty() && static_cast<Eigen::Index>(ids.size()) != n)
    throw Error(ErrorCode::DimensionMismatch, "id count differs from row count");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!family.in_support(outcomes(i)))
      throw Error(ErrorCode::InvalidArgument,
                  "outcome outside family support at row " + std::to_string(i + 1));
  if (!covariates.allFinite() || !geo.allFinite())
    throw Error(ErrorCode::InvalidArgument, "second stage contains non-finite values");
}

std::string to_string(InitMode mode) {
  return mode == InitMode::uniform ? "uniform" : "dirichlet_random";
}
std::string to_string(Aggregation mode) {
  return mode == Aggregation::after_first_iteration ? "after_first_iteration"
                                                    : "after_last_iteration";
}
std::string to_string(DesignCovariates mode) {
  return mode == DesignCovariates::ignore ? "ignore" : "median";
}

InitMode parse_init_mode(const std::string& name) {
  if (name == "uniform") return InitMode::uniform;
  if (name == "dirichlet_random" || name == "dirichlet") return InitMode::dirichlet_random;
  throw Error(ErrorCode::InvalidArgument, "unknown init mode '" + name + "'");
}
Aggregation parse_aggregation(const std::string& name) {
  if (name == "after_first_iteration" || name == "first") return Aggregation::after_first_iteration;
  if (name == "after_last_iteration" || name == "last") return Aggregation::after_last_iteration;
  throw Error(ErrorCode::InvalidArgument, "unknown aggregation mode '" + name + "'");
}
DesignCovariates parse_design_covariates(const std::string& name) {
  if (name == "ignore") return DesignCovariates::ignore;
  if (name == "median") return DesignCovariates::median;
  throw Error(ErrorCode::InvalidArgument, "unknown design covariate mode '" + name + "'");
}

void OdiwiConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (iterations < 1) fail("iterations must be >= 1");
  if (!(momentum >= 0.0 && momentum <= 1.0)) fail("momentum must lie in [0, 1]");
  if (num_inits < 1) fail("num_inits must be >= 1");
  if (bandwidth && !(*bandwidth > 0.0)) fail("bandwidth must be positive");
  if (!(bandwidth_fraction > 0.0)) fail("bandwidth_fraction must be positive");
  if (clip_quantile && !(*clip_quantile > 0.0 && *clip_quantile <= 1.0))
    fail("clip_quantile must lie in (0, 1]");
  if (!(floor_fraction > 0.0)) fail("floor_fraction must be positive");
  if (!(ridge >= 0.0)) fail("ridge must be non-negative");
  if (grid_resolution < 2) fail("grid_resolution must be >= 2");
  if (!(merge_fraction >= 0.0)) fail("merge_fraction must be non-negative");
  if (!(min_weight >= 0.0 && min_weight < 1.0)) fail("min_weight must lie in [0, 1)");
  if (!(design_tol > 0.0)) fail("design_tol must be positive");
  if (design_max_iter < 1) fail("design_max_iter must be >= 1");
  if (exposure_degree < 1 || exposure_degree > 3) fail("exposure_degree must be 1, 2 or 3");
  if (threads < 1) fail("threads must be >= 1");
}

std::vector<VectorXd> OdiwiResult::mean_trajectory() const {
  std::vector<VectorXd> out;
  if (chains.empty()) return out;
  if (serial) {
    std::vector<VectorXd> first;
    for (const auto& c : chains) first.push_back(c.trajectory.front().beta_hat);
    out.push_back(aggregate_inits(first));
    for (const auto& rec : serial->trajectory) out.push_back(rec.beta_hat);
    return out;
  }
  for (std::size_t l = 0; l < chains.front().trajectory.size(); ++l) {
    std::vector<VectorXd> at;
    for (const auto& c : chains) at.push_back(c.trajectory[l].beta_hat);
    out.push_back(aggregate_inits(at));
  }
  return out;
}

FeatureMap second_stage_features(int exposure_dim, int covariate_dim, int exposure_degree) {
  return FeatureMap::standard(exposure_dim, covariate_dim, exposure_degree);
}

VectorXd momentum_update(const VectorXd& prev, const VectorXd& next, double alpha) {
  if (prev.size() != next.size())
    throw Error(ErrorCode::DimensionMismatch, "momentum vectors differ in length");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "momentum must lie in [0, 1]");
  if (alpha == 0.0) return next;
  if (alpha == 1.0) return prev;
  return alpha * prev + (1.0 - alpha) * next;
}

VectorXd aggregate_inits(const std::vector<VectorXd>& per_init_betas) {
  if (per_init_betas.empty())
    throw Error(ErrorCode::InvalidArgument, "nothing to aggregate");
  if (per_init_betas.size() == 1) return per_init_betas.front();
  VectorXd sum = VectorXd::Zero(per_init_betas.front().size());
  for (const auto& b : per_init_betas) {
    if (b.size() != sum.size())
      throw Error(ErrorCode::DimensionMismatch, "initializations differ in coefficient count");
    sum += b;
  }
  return sum / static_cast<double>(per_init_betas.size());
}

VectorXd design_coefficients(const VectorXd& beta, const FeatureMap& features,
                             DesignCovariates mode, const VectorXd& z_median) {
  if (beta.size() != features.dim())
    throw Error(ErrorCode::DimensionMismatch, "coefficient length does not match feature map");
  const auto keep = features.exposure_term_indices();
  VectorXd out(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) out(i) = beta(keep[i]);
  if (mode == DesignCovariates::median) {
    for (int i = 0; i < features.dim(); ++i) {
      const Term& t = features.terms()[i];
      if (t.kind != TermKind::covariate) continue;
      if (t.index >= z_median.size())
        throw Error(ErrorCode::DimensionMismatch, "median covariate vector too short");
      out(0) += beta(i) * z_median(t.index);
    }
  }
  return out;
}

VectorXd initial_weights(Eigen::Index n, InitMode mode, std::uint64_t seed, int init_id) {
  if (mode == InitMode::uniform) return VectorXd::Ones(n);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x1d17u, static_cast<std::uint32_t>(init_id)};
  std::mt19937_64 rng(seq);
  // Dirichlet(1, ..., 1) through normalized unit exponentials.
  std::exponential_distribution<double> expo(1.0);
  VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = expo(rng);
  return w / w.mean();
}

// ---------------------------------------------------------------------------

namespace {

VectorXd column_medians(const MatrixXd& z) {
  VectorXd med(z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) med(c) = empirical_quantile(z.col(c), 0.5);
  return med;
}

WeightSummary summarize_weights(const ImportanceWeights& w) {
  WeightSummary s;
  s.min = w.values.minCoeff();
  s.max = w.values.maxCoeff();
  const double sum = w.values.sum();
  s.effective_sample_size = sum * sum / w.values.squaredNorm();
  s.clip_bound = w.clip_bound;
  s.checksum = weight_checksum(w.values);
  return s;
}

// State shared by every chain of one estimation call.
class Pipeline {
public:
  Pipeline(const FirstStageData& dstar, const SecondStageData& d, const Family& family,
           const OdiwiConfig& config)
      : dstar_(dstar),
        d_(d),
        family_(family),
        config_(config),
        features_(second_stage_features(dstar.exposure_dim(), static_cast<int>(d.covariates.cols()),
                                        config.exposure_degree)),
        design_features_(features_.exposure_only()),
        p_source_(kde_fit(dstar.exposures)) {
    floor_ = config.floor_fraction * p_source_.evaluate(dstar.exposures).maxCoeff();
    if (config.design_covariates == DesignCovariates::median && d.covariates.cols() > 0)
      z_median_ = column_medians(d.covariates);
  }

  const FeatureMap& features() const { return features_; }

  MatrixXd impute(const VectorXd& weights) const {
    return predict_exposure(fit_weighted_linear(dstar_, weights, config_.ridge), d_.geo);
  }

  GlmFit fit_second(const MatrixXd& imputed) const {
    return fit_glm(features_.design_matrix(imputed, d_.covariates), d_.outcomes, family_);
  }

  struct Adaptation {
    std::optional<DesignSolution> design;
    ImportanceWeights weights;
    double bandwidth = 0.0;
    bool certified = true;
  };

  Adaptation adapt(const VectorXd& beta_smoothed, const GlmFit& fit, const MatrixXd& imputed) const {
    Adaptation out;
    if (config_.identity_adaptation) {
      out.weights = importance_weights(dstar_.exposures, p_source_, p_source_,
                                       config_.clip_quantile, floor_);
      return out;
    }
    const CandidateGrid grid = build_candidate_grid(imputed, config_.grid_resolution);
    DesignOptions options;
    options.criterion = config_.criterion;
    options.tol = config_.design_tol;
    options.max_iter = config_.design_max_iter;
    options.merge_radius = config_.merge_fraction * grid.max_range();
    options.min_weight = config_.min_weight;
    const VectorXd dbeta =
        design_coefficients(beta_smoothed, features_, config_.design_covariates, z_median_);
    DesignSolution sol = solve_optimal_design(grid, dbeta, fit.family, design_features_, options);
    out.bandwidth = config_.bandwidth ? *config_.bandwidth
                                      : config_.bandwidth_fraction * grid.max_range();
    const DensityEstimate target = design_density(sol.design, {config_.kernel, out.bandwidth});
    out.weights =
        importance_weights(dstar_.exposures, target, p_source_, config_.clip_quantile, floor_);
    out.certified = sol.near_flat || config_.criterion != Criterion::D ||
                    sol.certificate <= design_features_.dim() + 1e-4;
    out.design = std::move(sol);
    return out;
  }

  // Runs cycles first..last starting from the given imputations and fit.
  void advance(Chain& chain, MatrixXd imputed, GlmFit fit, VectorXd smoothed, int first,
               int last) const {
    for (int l = first; l <= last; ++l) {
      IterationRecord& prev = chain.trajectory.back();
      Adaptation a = adapt(smoothed, fit, imputed);
      prev.weights = summarize_weights(a.weights);
      prev.bandwidth = a.bandwidth;
      prev.certified = a.certified;
      prev.design = std::move(a.design);

      imputed = impute(a.weights.values);
      fit = fit_second(imputed);
      smoothed = momentum_update(smoothed, fit.beta, config_.momentum);
      chain.trajectory.push_back({l, fit.beta, smoothed, std::nullopt, std::nullopt, 0.0, true});
    }
    chain.final_imputed = std::move(imputed);
  }

  Chain start_chain(int init_id, int cycles) const {
    Chain chain;
    chain.init_id = init_id;
    const VectorXd w0 = initial_weights(dstar_.rows(), config_.init, config_.seed, init_id);
    MatrixXd imputed = impute(w0);
    GlmFit fit = fit_second(imputed);
    chain.trajectory.push_back({0, fit.beta, fit.beta, std::nullopt, std::nullopt, 0.0, true});
    advance(chain, std::move(imputed), std::move(fit), chain.trajectory.back().beta_smoothed, 1,
            cycles);
    return chain;
  }

  Chain continue_serial(const std::vector<Chain>& chains) const {
    std::vector<VectorXd> hats, smooth;
    MatrixXd imputed = MatrixXd::Zero(chains.front().final_imputed.rows(),
                                      chains.front().final_imputed.cols());
    for (const auto& c : chains) {
      hats.push_back(c.trajectory.back().beta_hat);
      smooth.push_back(c.trajectory.back().beta_smoothed);
      imputed += c.final_imputed;
    }
    imputed /= static_cast<double>(chains.size());
    Chain serial;
    serial.init_id = -1;
    GlmFit fit;
    fit.beta = aggregate_inits(hats);
    fit.family = family_;
    if (family_.kind == FamilyKind::gaussian_identity) fit.family = fit_second(imputed).family;
    serial.trajectory.push_back({1, fit.beta, aggregate_inits(smooth), std::nullopt, std::nullopt,
                                 0.0, true});
    advance(serial, std::move(imputed), std::move(fit), serial.trajectory.back().beta_smoothed, 2,
            config_.iterations);
    return serial;
  }

private:
  const FirstStageData& dstar_;
  const SecondStageData& d_;
  Family family_;
  const OdiwiConfig& config_;
  FeatureMap features_;
  FeatureMap design_features_;
  DensityEstimate p_source_;
  double floor_ = 0.0;
  VectorXd z_median_;
};

void collect_diagnostics(const Chain& chain, OdiwiResult& result) {
  for (const auto& rec : chain.trajectory) {
    if (!rec.design) continue;
    if (!rec.certified) {
      result.all_certified = false;
      result.warnings.push_back("UncertifiedDesign: chain " + std::to_string(chain.init_id) +
                                ", iteration " + std::to_string(rec.iteration));
    }
    if (rec.design->near_flat)
      result.warnings.push_back("NearFlatDesign: chain " + std::to_string(chain.init_id) +
                                ", iteration " + std::to_string(rec.iteration));
  }
}

}  // namespace

NaiveResult naive_estimate(const FirstStageData& dstar, const SecondStageData& d,
                           const Family& family, double ridge, int exposure_degree) {
  dstar.validate();
  d.validate(family);
  if (d.geo.cols() != dstar.covariates.cols())
    throw Error(ErrorCode::DimensionMismatch, "stages have different geographic covariates");
  NaiveResult out;
  out.predictor = fit_weighted_linear(dstar, VectorXd::Ones(dstar.rows()), ridge);
  out.imputed = predict_exposure(out.predictor, d.geo);
  const FeatureMap features = second_stage_features(
      dstar.exposure_dim(), static_cast<int>(d.covariates.cols()), exposure_degree);
  out.fit = fit_glm(features.design_matrix(out.imputed, d.covariates), d.outcomes, family);
  return out;
}

OdiwiResult odiwi_estimate(const FirstStageData& dstar, const SecondStageData& d,
                           const Family& family, const OdiwiConfig& config) {
  config.validate();
  dstar.validate();
  d.validate(family);
  if (d.geo.cols() != dstar.covariates.cols())
    throw Error(ErrorCode::DimensionMismatch, "stages have different geographic covariates");

  const Pipeline pipeline(dstar, d, family, config);
  OdiwiResult result;
  result.coefficient_names = pipeline.features().names();
  result.iterations = config.iterations;

  const bool serial_after_first =
      config.aggregation == Aggregation::after_first_iteration && config.num_inits > 1;
  const int cycles = serial_after_first ? 1 : config.iterations;
  result.chains.resize(static_cast<std::size_t>(config.num_inits));
  parallel_for(result.chains.size(), config.threads, [&](std::size_t m) {
    result.chains[m] = pipeline.start_chain(static_cast<int>(m), cycles);
  });

  if (serial_after_first) {
    result.serial = pipeline.continue_serial(result.chains);
    result.final_beta = result.serial->trajectory.back().beta_hat;
    result.final_imputed = result.serial->final_imputed;
  } else {
    std::vector<VectorXd> finals;
    result.final_imputed = MatrixXd::Zero(result.chains.front().final_imputed.rows(),
                                          result.chains.front().final_imputed.cols());
    for (const auto& c : result.chains) {
      finals.push_back(c.trajectory.back().beta_hat);
      result.final_imputed += c.final_imputed;
    }
    result.final_imputed /= static_cast<double>(result.chains.size());
    result.final_beta = aggregate_inits(finals);
  }
  for (const auto& c : result.chains) collect_diagnostics(c, result);
  if (result.serial) collect_diagnostics(*result.serial, result);
  return result;
}

}  // namespace odiwi

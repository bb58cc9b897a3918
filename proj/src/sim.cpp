#include "odiwi/sim.hpp"

#include "odiwi/error.hpp"
#include "odiwi/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace odiwi {

void SimConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (n_star < 2 || n < 2 || d < 1 || reps < 1) fail("simulation sizes must be positive");
  if (n_star <= d + 1) fail("n_star must exceed d + 1");
  if (gamma && gamma->size() != d) fail("gamma must have d components");
  if (sigma_eps && !(*sigma_eps > 0.0)) fail("sigma_eps must be positive");
  if (!sigma_eps && !(snr > 0.0)) fail("snr must be positive");
  if (!std::isfinite(beta0) || !std::isfinite(beta_x) || !std::isfinite(shift))
    fail("simulation coefficients must be finite");
}

VectorXd SimConfig::resolved_gamma() const {
  return gamma ? *gamma : VectorXd::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

Population draw_population(const SimConfig& config, std::mt19937_64& rng) {
  config.validate();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  MatrixXd u(config.d, config.d);
  for (int i = 0; i < config.d; ++i)
    for (int j = 0; j < config.d; ++j) u(i, j) = unif(rng);
  Population pop;
  pop.sigma = u.transpose() * u;
  // U'U can be near-singular; a tiny ridge keeps the factorization defined.
  Eigen::LLT<MatrixXd> llt(pop.sigma);
  if (llt.info() != Eigen::Success) {
    pop.sigma += 1e-10 * MatrixXd::Identity(config.d, config.d);
    llt.compute(pop.sigma);
  }
  pop.sigma_chol = llt.matrixL();
  pop.gamma = config.resolved_gamma();
  const double signal = pop.gamma.dot(pop.sigma * pop.gamma);
  pop.sigma_eps = config.sigma_eps ? *config.sigma_eps : std::sqrt(signal / config.snr);
  if (!(pop.sigma_eps > 0.0))
    throw Error(ErrorCode::InvalidArgument, "exposure noise sd is zero; set sigma_eps explicitly");
  pop.second_stage_mean = config.shift * pop.sigma.diagonal().cwiseSqrt();
  return pop;
}

namespace {

MatrixXd draw_covariates(Eigen::Index rows, const Population& pop, const VectorXd& mean,
                         std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index d = pop.sigma.rows();
  MatrixXd e(rows, d);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < d; ++j) e(i, j) = normal(rng);
  MatrixXd r = e * pop.sigma_chol.transpose();
  if (mean.size() == d) r.rowwise() += mean.transpose();
  return r;
}

MatrixXd draw_exposures(const MatrixXd& r, const Population& pop, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, pop.sigma_eps);
  MatrixXd x = r * pop.gamma;
  for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) += normal(rng);
  return x;
}

std::vector<std::string> sequential_ids(Eigen::Index n) {
  std::vector<std::string> ids(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) ids[i] = std::to_string(i + 1);
  return ids;
}

}  // namespace

FirstStageData gen_first_stage(const SimConfig& config, const Population& pop,
                               std::mt19937_64& rng) {
  FirstStageData data;
  data.covariates = draw_covariates(config.n_star, pop, VectorXd(), rng);
  data.exposures = draw_exposures(data.covariates, pop, rng);
  data.ids = sequential_ids(config.n_star);
  return data;
}

SimulatedSecondStage gen_second_stage(const SimConfig& config, const Population& pop,
                                      std::mt19937_64& rng) {
  SimulatedSecondStage out;
  out.data.geo = draw_covariates(config.n, pop, pop.second_stage_mean, rng);
  out.true_exposure = draw_exposures(out.data.geo, pop, rng);
  out.data.covariates = MatrixXd(config.n, 0);
  out.data.outcomes.resize(config.n);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Family logit = Family::bernoulli_logit();
  for (int i = 0; i < config.n; ++i) {
    const double p = logit.mean(config.beta0 + config.beta_x * out.true_exposure(i, 0));
    out.data.outcomes(i) = unif(rng) < p ? 1.0 : 0.0;
  }
  out.data.ids = sequential_ids(config.n);
  return out;
}

Replicate simulate_replicate(const SimConfig& config, std::uint64_t cell, std::uint64_t rep) {
  std::mt19937_64 rng = stream_rng(config.seed, cell, rep);
  Replicate out;
  out.population = draw_population(config, rng);
  out.first = gen_first_stage(config, out.population, rng);
  out.second = gen_second_stage(config, out.population, rng);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double rmse(const MatrixXd& imputed, const MatrixXd& truth) {
  return std::sqrt((imputed.col(0) - truth.col(0)).squaredNorm() /
                   static_cast<double>(truth.rows()));
}

MetricsRow failed_row(const std::string& estimator, double beta_x, int rep, const std::string& why) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {estimator, beta_x, rep, nan, nan, nan, why};
}

std::string flag_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return to_string(err->code());
  return "Exception";
}

struct RepOutcome {
  MetricsRow naive;
  MetricsRow odiwi;
  std::vector<double> trace_errors;  // per iteration, empty on failure
};

}  // namespace

ExperimentResult run_experiment(const ExperimentOptions& options) {
  options.sim.validate();
  options.odiwi.validate();
  if (options.beta_x_grid.empty())
    throw Error(ErrorCode::InvalidArgument, "experiment grid is empty");
  const Family family = Family::bernoulli_logit();
  const std::size_t cells = options.beta_x_grid.size();
  const std::size_t reps = static_cast<std::size_t>(options.sim.reps);
  std::vector<RepOutcome> outcomes(cells * reps);

  parallel_for(outcomes.size(), options.threads, [&](std::size_t unit) {
    const std::size_t cell = unit / reps;
    const int rep = static_cast<int>(unit % reps);
    SimConfig sim = options.sim;
    sim.beta_x = options.beta_x_grid[cell];
    const Replicate data = simulate_replicate(sim, cell, static_cast<std::uint64_t>(rep));
    const MatrixXd& truth = data.second.true_exposure;
    RepOutcome& out = outcomes[unit];

    try {
      const NaiveResult naive = naive_estimate(data.first, data.second.data, family,
                                               options.odiwi.ridge, options.odiwi.exposure_degree);
      const double b = naive.fit.beta(1);
      out.naive = {"naive", sim.beta_x, rep, b, b - sim.beta_x, rmse(naive.imputed, truth), ""};
    } catch (const std::exception& e) {
      out.naive = failed_row("naive", sim.beta_x, rep, flag_for(e));
    }

    try {
      OdiwiConfig cfg = options.odiwi;
      cfg.threads = 1;
      cfg.seed = stream_rng(sim.seed, 0x0d1u + cell, static_cast<std::uint64_t>(rep))();
      const OdiwiResult res = odiwi_estimate(data.first, data.second.data, family, cfg);
      const double b = res.final_beta(1);
      std::string flags;
      if (!res.all_certified) flags = "UncertifiedDesign";
      for (const auto& w : res.warnings)
        if (w.rfind("NearFlatDesign", 0) == 0) {
          flags += flags.empty() ? "NearFlatDesign" : ";NearFlatDesign";
          break;
        }
      out.odiwi = {"odiwi", sim.beta_x, rep, b, b - sim.beta_x, rmse(res.final_imputed, truth), flags};
      for (const auto& beta : res.mean_trajectory()) out.trace_errors.push_back(beta(1) - sim.beta_x);
    } catch (const std::exception& e) {
      out.odiwi = failed_row("odiwi", sim.beta_x, rep, flag_for(e));
    }
  });

  ExperimentResult result;
  result.rows.reserve(2 * outcomes.size());
  for (const auto& o : outcomes) {
    result.rows.push_back(o.naive);
    result.rows.push_back(o.odiwi);
  }
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::vector<std::vector<double>> per_iter;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& errs = outcomes[cell * reps + r].trace_errors;
      if (per_iter.size() < errs.size()) per_iter.resize(errs.size());
      for (std::size_t l = 0; l < errs.size(); ++l) per_iter[l].push_back(errs[l]);
    }
    for (std::size_t l = 0; l < per_iter.size(); ++l) {
      const auto& v = per_iter[l];
      double mean = 0.0;
      for (double e : v) mean += e;
      mean /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double e : v) ss += (e - mean) * (e - mean);
      const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
      result.trace.push_back({options.beta_x_grid[cell], static_cast<int>(l), mean, sd,
                              static_cast<int>(v.size())});
    }
  }
  return result;
}

std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows) {
  // Keyed by (beta_x, estimator) in first-appearance order.
  std::vector<std::pair<double, std::string>> keys;
  std::map<std::pair<double, std::string>, std::vector<const MetricsRow*>> groups;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.beta_x_true, r.estimator);
    if (!groups.count(key)) keys.push_back(key);
    groups[key].push_back(&r);
  }
  std::vector<SummaryRow> out;
  for (const auto& key : keys) {
    SummaryRow s;
    s.beta_x_true = key.first;
    s.estimator = key.second;
    std::vector<double> errs, abs_errs, rmses;
    for (const MetricsRow* r : groups[key]) {
      if (!std::isfinite(r->error)) {
        ++s.failures;
        continue;
      }
      errs.push_back(r->error);
      abs_errs.push_back(std::abs(r->error));
      rmses.push_back(r->stage1_rmse);
    }
    s.count = static_cast<int>(errs.size());
    if (!errs.empty()) {
      const VectorXd e = Eigen::Map<const VectorXd>(errs.data(), static_cast<Eigen::Index>(errs.size()));
      s.mean = e.mean();
      s.sd = e.size() > 1 ? std::sqrt((e.array() - s.mean).square().sum() / static_cast<double>(e.size() - 1)) : 0.0;
      s.q025 = empirical_quantile(e, 0.025);
      s.q975 = empirical_quantile(e, 0.975);
      double a = 0.0, rm = 0.0;
      for (std::size_t i = 0; i < abs_errs.size(); ++i) {
        a += abs_errs[i];
        rm += rmses[i];
      }
      s.mean_abs_error = a / static_cast<double>(abs_errs.size());
      s.mean_stage1_rmse = rm / static_cast<double>(rmses.size());
    }
    out.push_back(s);
  }
  return out;
}

double ks_statistic(VectorXd a, VectorXd b) {
  if (a.size() == 0 || b.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty KS sample");
  std::sort(a.data(), a.data() + a.size());
  std::sort(b.data(), b.data() + b.size());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  Eigen::Index i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a(i), b(j));
    while (i < a.size() && a(i) <= v) ++i;
    while (j < b.size() && b(j) <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_pvalue(double statistic, Eigen::Index n, Eigen::Index m) {
  const double ne = static_cast<double>(n) * static_cast<double>(m) / static_cast<double>(n + m);
  const double sq = std::sqrt(ne);
  const double lambda = (sq + 0.12 + 0.11 / sq) * statistic;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

}  // namespace odiwi

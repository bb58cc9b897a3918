#include "odiwi/inference.hpp"

#include "odiwi/error.hpp"
#include "odiwi/parallel.hpp"
#include "odiwi/sim.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace odiwi {

std::pair<double, double> percentile_interval(const std::vector<double>& replicates, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw Error(ErrorCode::InvalidArgument, "confidence level must lie in (0, 1)");
  const VectorXd v = Eigen::Map<const VectorXd>(replicates.data(),
                                                static_cast<Eigen::Index>(replicates.size()));
  const double a = 1.0 - level;
  return {empirical_quantile(v, a / 2.0), empirical_quantile(v, 1.0 - a / 2.0)};
}

namespace {

std::vector<Eigen::Index> resample_rows(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (auto& i : idx) i = pick(rng);
  return idx;
}

template <class Rows>
MatrixXd take_rows(const MatrixXd& m, const Rows& idx) {
  MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

FirstStageData resample(const FirstStageData& data, const std::vector<Eigen::Index>& idx) {
  FirstStageData out;
  out.exposures = take_rows(data.exposures, idx);
  out.covariates = take_rows(data.covariates, idx);
  if (!data.ids.empty())
    for (auto i : idx) out.ids.push_back(data.ids[static_cast<std::size_t>(i)]);
  return out;
}

SecondStageData resample(const SecondStageData& data, const std::vector<Eigen::Index>& idx) {
  SecondStageData out;
  out.outcomes.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.outcomes(static_cast<Eigen::Index>(i)) = data.outcomes(idx[i]);
  out.covariates = data.covariates.cols() > 0 ? take_rows(data.covariates, idx)
                                              : MatrixXd(static_cast<Eigen::Index>(idx.size()), 0);
  out.geo = take_rows(data.geo, idx);
  if (!data.ids.empty())
    for (auto i : idx) out.ids.push_back(data.ids[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

BootstrapResult bootstrap_ci(const FirstStageData& dstar, const SecondStageData& d,
                             const Family& family, const OdiwiConfig& config,
                             const BootstrapOptions& options) {
  if (options.replicates < 50)
    throw Error(ErrorCode::InvalidArgument, "bootstrap needs at least 50 replicates");
  if (!(options.level > 0.0 && options.level < 1.0))
    throw Error(ErrorCode::InvalidArgument, "confidence level must lie in (0, 1)");

  BootstrapResult out;
  out.B = options.replicates;
  out.level = options.level;
  OdiwiConfig point_cfg = config;
  point_cfg.threads = options.threads;
  out.point = odiwi_estimate(dstar, d, family, point_cfg);
  if (options.coefficient < 0 || options.coefficient >= out.point.final_beta.size())
    throw Error(ErrorCode::InvalidArgument, "bootstrap coefficient index out of range");
  out.point_estimate = out.point.final_beta(options.coefficient);

  std::vector<std::optional<double>> estimates(static_cast<std::size_t>(options.replicates));
  parallel_for(estimates.size(), options.threads, [&](std::size_t b) {
    std::mt19937_64 rng = stream_rng(options.seed, 0xb007u, b);
    const FirstStageData star =
        options.resample_first_stage ? resample(dstar, resample_rows(dstar.rows(), rng)) : dstar;
    const SecondStageData second = resample(d, resample_rows(d.rows(), rng));
    OdiwiConfig cfg = config;
    cfg.threads = 1;
    cfg.seed = rng();
    try {
      estimates[b] = odiwi_estimate(star, second, family, cfg).final_beta(options.coefficient);
    } catch (const Error&) {
      estimates[b] = std::nullopt;
    }
  });

  for (const auto& e : estimates) {
    if (e && std::isfinite(*e))
      out.replicate_estimates.push_back(*e);
    else
      ++out.failures;
  }
  if (out.failures > options.max_failure_fraction * options.replicates)
    throw Error(ErrorCode::TooManyFailures,
                std::to_string(out.failures) + " of " + std::to_string(options.replicates) +
                    " bootstrap replicates failed");

  const auto [lo, hi] = percentile_interval(out.replicate_estimates, options.level);
  out.lower = lo;
  out.upper = hi;
  const VectorXd v = Eigen::Map<const VectorXd>(out.replicate_estimates.data(),
                                                static_cast<Eigen::Index>(out.replicate_estimates.size()));
  out.median = empirical_quantile(v, 0.5);
  const double mean = v.mean();
  out.standard_error =
      v.size() > 1 ? std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1)) : 0.0;
  return out;
}

}  // namespace odiwi

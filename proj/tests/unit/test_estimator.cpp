#include "odiwi/error.hpp"
#include "odiwi/estimator.hpp"
#include "odiwi/sim.hpp"

#include <doctest.h>

#include <cmath>

using namespace odiwi;

namespace {

const Family kLogit = Family::bernoulli_logit();

Replicate small_replicate(std::uint64_t rep = 0, double beta_x = 1.5) {
  SimConfig c;
  c.n_star = 200;
  c.n = 600;
  c.beta_x = beta_x;
  c.seed = 21;
  return simulate_replicate(c, 0, rep);
}

OdiwiConfig quick_config() {
  OdiwiConfig c;
  c.iterations = 4;
  c.num_inits = 2;
  c.seed = 5;
  return c;
}

void expect_code(ErrorCode code, const std::function<void()>& f) {
  try {
    f();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == code);
  }
}

}  // namespace

TEST_CASE("momentum update endpoints and midpoint") {
  VectorXd a(2), b(2);
  a << 1.0, -2.0;
  b << 0.3, 5.0;
  CHECK(momentum_update(a, b, 0.0) == b);
  CHECK(momentum_update(a, b, 1.0) == a);
  CHECK((momentum_update(a, b, 0.5) - 0.5 * (a + b)).norm() < 1e-15);
}

TEST_CASE("momentum contracts toward the previous value as alpha grows") {
  VectorXd prev(2), next(2);
  prev << 0.0, 2.0;
  next << 2.0, 0.0;
  CHECK(momentum_update(prev, next, 0.5) == VectorXd::Ones(2));
  double last = INFINITY;
  for (double alpha = 0.0; alpha <= 1.0; alpha += 0.125) {
    const double dist = (momentum_update(prev, next, alpha) - prev).norm();
    CHECK(dist <= last);
    last = dist;
  }
}

TEST_CASE("aggregation is a componentwise mean") {
  VectorXd a(2), b(2), c(2);
  a << 1, 2;
  b << 3, 4;
  c << 5, 9;
  const VectorXd m = aggregate_inits({a, b, c});
  CHECK(m(0) == doctest::Approx(3.0));
  CHECK(m(1) == doctest::Approx(5.0));
  CHECK(aggregate_inits({a}) == a);
}

TEST_CASE("initial weights") {
  const VectorXd u = initial_weights(10, InitMode::uniform, 1, 0);
  CHECK(u == VectorXd::Ones(10));
  const VectorXd d0 = initial_weights(500, InitMode::dirichlet_random, 1, 0);
  const VectorXd d1 = initial_weights(500, InitMode::dirichlet_random, 1, 1);
  CHECK(d0.mean() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d0.minCoeff() > 0.0);
  CHECK(d0 == initial_weights(500, InitMode::dirichlet_random, 1, 0));
  CHECK((d0 - d1).norm() > 0.0);
  CHECK((d0 - initial_weights(500, InitMode::dirichlet_random, 2, 0)).norm() > 0.0);
  // Dirichlet(1) components scaled by n have unit variance.
  CHECK(std::sqrt((d0.array() - 1.0).square().mean()) == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("design coefficients drop or fold covariates") {
  const FeatureMap fm = second_stage_features(1, 2, 1);
  const auto names = fm.names();
  VectorXd beta(fm.dim());
  VectorXd z(2);
  z << 2.0, -1.0;
  double expected_intercept = 0.0;
  for (int i = 0; i < fm.dim(); ++i) {
    beta(i) = 0.5 + i;
    if (names[i] == "intercept") expected_intercept += beta(i);
    if (names[i] == "z1") expected_intercept += beta(i) * 2.0;
    if (names[i] == "z2") expected_intercept += beta(i) * -1.0;
  }
  const VectorXd ign = design_coefficients(beta, fm, DesignCovariates::ignore);
  const VectorXd med = design_coefficients(beta, fm, DesignCovariates::median, z);
  REQUIRE(ign.size() == 2);
  CHECK(ign(0) == beta(0));
  CHECK(ign(1) == beta(1));
  CHECK(med(0) == doctest::Approx(expected_intercept));
  CHECK(med(1) == beta(1));
}

TEST_CASE("config validation") {
  const Replicate r = small_replicate();
  auto run = [&](auto mutate) {
    OdiwiConfig c = quick_config();
    mutate(c);
    odiwi_estimate(r.first, r.second.data, kLogit, c);
  };
  expect_code(ErrorCode::InvalidArgument, [&] { run([](OdiwiConfig& c) { c.iterations = 0; }); });
  expect_code(ErrorCode::InvalidArgument, [&] { run([](OdiwiConfig& c) { c.momentum = 1.5; }); });
  expect_code(ErrorCode::InvalidArgument, [&] { run([](OdiwiConfig& c) { c.num_inits = 0; }); });
  expect_code(ErrorCode::InvalidArgument, [&] { run([](OdiwiConfig& c) { c.bandwidth = -1.0; }); });
  expect_code(ErrorCode::InvalidArgument, [&] { run([](OdiwiConfig& c) { c.threads = 0; }); });
  CHECK(parse_init_mode(to_string(InitMode::uniform)) == InitMode::uniform);
  CHECK(parse_aggregation(to_string(Aggregation::after_first_iteration)) == Aggregation::after_first_iteration);
  CHECK_THROWS_AS(parse_design_covariates("mean"), Error);
}

TEST_CASE("trajectory layout with uniform initialization") {
  const Replicate r = small_replicate();
  OdiwiConfig c = quick_config();
  c.init = InitMode::uniform;
  c.num_inits = 1;
  const OdiwiResult res = odiwi_estimate(r.first, r.second.data, kLogit, c);
  const NaiveResult naive = naive_estimate(r.first, r.second.data, kLogit, c.ridge);
  REQUIRE(res.chains.size() == 1);
  const auto& traj = res.chains[0].trajectory;
  REQUIRE(traj.size() == static_cast<std::size_t>(c.iterations + 1));
  CHECK(traj[0].beta_hat == naive.fit.beta);
  for (std::size_t l = 0; l < traj.size(); ++l) CHECK(traj[l].iteration == static_cast<int>(l));
  // Records up to L-1 carry the design that produced the next fit.
  for (std::size_t l = 0; l + 1 < traj.size(); ++l) {
    REQUIRE(traj[l].design.has_value());
    CHECK(traj[l].design->certificate <= 2.0 + 1e-4);
    REQUIRE(traj[l].weights.has_value());
    CHECK(traj[l].weights->effective_sample_size <= r.first.rows() + 1e-9);
  }
  // Smoothed coefficients follow the momentum recursion.
  for (std::size_t l = 1; l < traj.size(); ++l)
    CHECK((traj[l].beta_smoothed - momentum_update(traj[l - 1].beta_smoothed, traj[l].beta_hat, c.momentum)).norm() == 0.0);
  CHECK(res.final_beta == traj.back().beta_hat);
  CHECK(res.coefficient_names == std::vector<std::string>{"intercept", "x"});
  CHECK(res.all_certified);
}

TEST_CASE("single cycle from a single uniform start") {
  const Replicate r = small_replicate(7);
  OdiwiConfig c;
  c.iterations = 1;
  c.num_inits = 1;
  c.init = InitMode::uniform;
  c.momentum = 0.0;
  const OdiwiResult res = odiwi_estimate(r.first, r.second.data, kLogit, c);
  REQUIRE(res.chains[0].trajectory.size() == 2);
  CHECK(res.chains[0].trajectory[0].design.has_value());
  CHECK_FALSE(res.chains[0].trajectory[1].design.has_value());
  CHECK(res.chains[0].trajectory[1].beta_smoothed == res.chains[0].trajectory[1].beta_hat);
}

TEST_CASE("full momentum freezes the design") {
  const Replicate r = small_replicate(8);
  OdiwiConfig c = quick_config();
  c.num_inits = 1;
  c.init = InitMode::uniform;
  c.momentum = 1.0;
  const OdiwiResult res = odiwi_estimate(r.first, r.second.data, kLogit, c);
  const auto& traj = res.chains[0].trajectory;
  // The design input is frozen; the candidate grid still follows the range of
  // the current imputations, so designs agree up to that small movement.
  for (std::size_t l = 1; l + 1 < traj.size(); ++l) {
    CHECK(traj[l].beta_smoothed == traj[0].beta_hat);
    CHECK((traj[l].design->design.support - traj[0].design->design.support).cwiseAbs().maxCoeff() < 1e-3);
  }
  for (std::size_t l = 2; l < traj.size(); ++l)
    CHECK((traj[l].beta_hat - traj[1].beta_hat).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("the two aggregation modes are statistically indistinguishable") {
  SimConfig sc;
  sc.n_star = 200;
  sc.n = 800;
  sc.seed = 77;
  std::vector<double> diff;
  for (int rep = 0; rep < 30; ++rep) {
    const Replicate r = simulate_replicate(sc, 0, rep);
    OdiwiConfig c;
    c.iterations = 3;
    c.num_inits = 3;
    c.seed = 100 + rep;
    const double last = std::abs(odiwi_estimate(r.first, r.second.data, kLogit, c).final_beta(1) - sc.beta_x);
    c.aggregation = Aggregation::after_first_iteration;
    const double first = std::abs(odiwi_estimate(r.first, r.second.data, kLogit, c).final_beta(1) - sc.beta_x);
    diff.push_back(first - last);
  }
  const VectorXd dv = Eigen::Map<VectorXd>(diff.data(), static_cast<Eigen::Index>(diff.size()));
  const double sd = std::sqrt((dv.array() - dv.mean()).square().sum() / (dv.size() - 1.0));
  const double se = sd / std::sqrt(static_cast<double>(dv.size()));
  CHECK(std::abs(dv.mean()) <= 3.0 * se + 1e-12);
}

TEST_CASE("identity adaptation reproduces the naive estimate") {
  const Replicate r = small_replicate(3);
  const NaiveResult naive = naive_estimate(r.first, r.second.data, kLogit, 1e-8);
  for (InitMode mode : {InitMode::uniform, InitMode::dirichlet_random}) {
    OdiwiConfig c = quick_config();
    c.identity_adaptation = true;
    c.init = mode;
    const OdiwiResult res = odiwi_estimate(r.first, r.second.data, kLogit, c);
    CHECK((res.final_beta - naive.fit.beta).cwiseAbs().maxCoeff() <= 1e-12);
    for (const auto& chain : res.chains)
      for (std::size_t l = 0; l + 1 < chain.trajectory.size(); ++l) {
        CHECK(chain.trajectory[l].weights->min == 1.0);
        CHECK(chain.trajectory[l].weights->max == 1.0);
      }
  }
}

TEST_CASE("random initializations are aggregated after the last iteration") {
  const Replicate r = small_replicate(1);
  const OdiwiConfig c = quick_config();
  const OdiwiResult res = odiwi_estimate(r.first, r.second.data, kLogit, c);
  REQUIRE(res.chains.size() == 2);
  CHECK_FALSE(res.serial.has_value());
  const VectorXd mean = 0.5 * (res.chains[0].trajectory.back().beta_hat + res.chains[1].trajectory.back().beta_hat);
  CHECK((res.final_beta - mean).norm() < 1e-15);
  CHECK((res.chains[0].trajectory[0].beta_hat - res.chains[1].trajectory[0].beta_hat).norm() > 0.0);
  CHECK(res.mean_trajectory().size() == static_cast<std::size_t>(c.iterations + 1));
}

TEST_CASE("aggregation after the first iteration continues one serial chain") {
  const Replicate r = small_replicate(2);
  OdiwiConfig c = quick_config();
  c.aggregation = Aggregation::after_first_iteration;
  c.num_inits = 3;
  const OdiwiResult res = odiwi_estimate(r.first, r.second.data, kLogit, c);
  REQUIRE(res.serial.has_value());
  for (const auto& chain : res.chains) CHECK(chain.trajectory.size() == 2);
  const auto& s = res.serial->trajectory;
  REQUIRE(s.size() == static_cast<std::size_t>(c.iterations));
  CHECK(s.front().iteration == 1);
  CHECK(s.back().iteration == c.iterations);
  VectorXd avg = VectorXd::Zero(2);
  for (const auto& chain : res.chains) avg += chain.trajectory.back().beta_hat / 3.0;
  CHECK((s.front().beta_hat - avg).norm() < 1e-14);
  CHECK(res.final_beta == s.back().beta_hat);
}

TEST_CASE("estimates do not depend on the thread count") {
  const Replicate r = small_replicate(4);
  OdiwiConfig c = quick_config();
  c.num_inits = 3;
  const OdiwiResult serial = odiwi_estimate(r.first, r.second.data, kLogit, c);
  c.threads = 3;
  const OdiwiResult parallel = odiwi_estimate(r.first, r.second.data, kLogit, c);
  CHECK(serial.final_beta == parallel.final_beta);
  CHECK(serial.final_imputed == parallel.final_imputed);
}

TEST_CASE("other criteria, kernels and second-stage covariates run") {
  Replicate r = small_replicate(5);
  SecondStageData d = r.second.data;
  d.covariates = d.geo.leftCols(1) * 0.5;
  for (Criterion crit : {Criterion::A, Criterion::E}) {
    OdiwiConfig c = quick_config();
    c.criterion = crit;
    c.kernel = KernelShape::triangle;
    c.design_covariates = DesignCovariates::median;
    const OdiwiResult res = odiwi_estimate(r.first, d, kLogit, c);
    CHECK(res.final_beta.size() == 3);
    CHECK(res.final_beta.allFinite());
  }
  OdiwiConfig c = quick_config();
  c.exposure_degree = 2;
  c.bandwidth = 0.5;
  const OdiwiResult quad = odiwi_estimate(r.first, r.second.data, kLogit, c);
  CHECK(quad.coefficient_names.size() == 3);
}

TEST_CASE("gaussian outcomes") {
  Replicate r = small_replicate(6);
  SecondStageData d = r.second.data;
  for (Eigen::Index i = 0; i < d.rows(); ++i) d.outcomes(i) = 0.3 + 1.2 * r.second.true_exposure(i, 0) + std::sin(7.0 * i);
  const OdiwiResult res = odiwi_estimate(r.first, d, Family{FamilyKind::gaussian_identity, 1.0}, quick_config());
  CHECK(res.final_beta.allFinite());
  CHECK(res.all_certified);
}

TEST_CASE("mismatched stages are rejected") {
  Replicate r = small_replicate();
  SecondStageData d = r.second.data;
  d.geo = d.geo.leftCols(2).eval();
  expect_code(ErrorCode::DimensionMismatch, [&] { odiwi_estimate(r.first, d, kLogit, quick_config()); });
  expect_code(ErrorCode::DimensionMismatch, [&] { naive_estimate(r.first, d, kLogit); });
}

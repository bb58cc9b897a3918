#pragma once

#include "odiwi/estimator.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace odiwi {

struct BootstrapOptions {
  int replicates = 200;
  double level = 0.95;
  bool resample_first_stage = true;
  std::uint64_t seed = 0;
  int threads = 1;
  int coefficient = 1;  // index into beta; 1 is the first exposure
  double max_failure_fraction = 0.1;
};

struct BootstrapResult {
  double point_estimate = 0.0;
  OdiwiResult point;
  std::vector<double> replicate_estimates;  // successful replicates, in replicate order
  double lower = 0.0;
  double upper = 0.0;
  double median = 0.0;
  double standard_error = 0.0;
  int B = 0;
  int failures = 0;
  double level = 0.95;
};

// Percentile interval: the (1-level)/2 and (1+level)/2 type-7 quantiles.
std::pair<double, double> percentile_interval(const std::vector<double>& replicates, double level);

// Nonparametric bootstrap of the full ODIWI pipeline. Rows of D* (optionally)
// and D are resampled independently; failed replicates are dropped and
// counted, and more than max_failure_fraction failures raise TooManyFailures.
BootstrapResult bootstrap_ci(const FirstStageData& dstar, const SecondStageData& d,
                             const Family& family, const OdiwiConfig& config,
                             const BootstrapOptions& options);

}  // namespace odiwi

#pragma once

#include "odiwi/estimator.hpp"
#include "odiwi/inference.hpp"
#include "odiwi/sim.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace odiwi {

using json = nlohmann::json;

struct LoadReport {
  std::string source;
  long rows = 0;
  std::vector<std::string> columns;

  json to_json() const;
};

// First stage: `id, x, r1..rd` (or x1..xp for multivariate exposures).
FirstStageData read_first_stage(std::istream& in, LoadReport* report = nullptr,
                                const std::string& source = "<stream>");
FirstStageData load_first_stage(const std::string& path, LoadReport* report = nullptr);

// Second stage: `id, y, z1..zq, r1..rd`; y is checked against the family.
SecondStageData read_second_stage(std::istream& in, const Family& family,
                                  LoadReport* report = nullptr,
                                  const std::string& source = "<stream>");
SecondStageData load_second_stage(const std::string& path, const Family& family,
                                  LoadReport* report = nullptr);

// 17 significant digits so values survive a text round trip.
std::string format_double(double value);

void write_first_stage(std::ostream& out, const FirstStageData& data);
void write_second_stage(std::ostream& out, const SecondStageData& data);

// --- JSON / CSV artifacts -------------------------------------------------

json design_to_json(const DesignSolution& solution);
json design_to_json(const Design& design, Criterion criterion, double certificate);
Design design_from_json(const json& j);

json predictor_to_json(const LinearPredictor& predictor);
json odiwi_config_to_json(const OdiwiConfig& config);
json sim_config_to_json(const SimConfig& config);
json result_to_json(const OdiwiResult& result);
json bootstrap_to_json(const BootstrapResult& result);

// Long format: init_id, iteration, coefficient, value, smoothed.
std::string trajectory_csv(const OdiwiResult& result);
std::string weights_csv(const std::vector<std::string>& ids, const ImportanceWeights& weights);
std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::string trace_csv(const std::vector<TraceRow>& rows);
std::string replicates_csv(const BootstrapResult& result);

// --- Flat JSON configuration -----------------------------------------------
// Each reader removes the keys it understands from `config`; callers reject
// whatever is left with reject_unknown_keys.

OdiwiConfig take_odiwi_config(json& config);
SimConfig take_sim_config(json& config);
BootstrapOptions take_bootstrap_options(json& config);
void reject_unknown_keys(const json& config);

}  // namespace odiwi

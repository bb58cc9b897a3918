#include "odiwi/odiwi.h"

#include "odiwi/error.hpp"
#include "odiwi/io.hpp"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>

using odiwi::json;

struct odiwi_first_stage {
  odiwi::FirstStageData data;
};

struct odiwi_second_stage {
  odiwi::SecondStageData data;
};

struct odiwi_result {
  odiwi::OdiwiResult result;
  Eigen::VectorXd naive;
  json metadata;
};

struct odiwi_bootstrap {
  odiwi::BootstrapResult result;
  json metadata;
};

struct odiwi_design {
  odiwi::Design design;
  odiwi::Criterion criterion = odiwi::Criterion::D;
  double certificate = 0.0;
  json body;  // full serialized form, including solver diagnostics when solved here
};

struct odiwi_experiment {
  odiwi::ExperimentResult result;
  json metadata;
};

namespace {

thread_local std::string g_message;
thread_local std::string g_column;
thread_local long g_row = -1;

odiwi_status status_of(odiwi::ErrorCode code) {
  return static_cast<odiwi_status>(static_cast<int>(code) + 1);
}

odiwi_status record(odiwi_status status, std::string message, long row = -1,
                    std::string column = {}) {
  g_message = std::move(message);
  g_row = row;
  g_column = std::move(column);
  return status;
}

template <class F>
odiwi_status guarded(F&& body) {
  try {
    body();
    return ODIWI_OK;
  } catch (const odiwi::DataError& e) {
    return record(status_of(e.code()), e.what(), e.row().value_or(-1), e.column());
  } catch (const odiwi::Error& e) {
    return record(status_of(e.code()), e.what());
  } catch (const json::exception& e) {
    return record(ODIWI_INVALID_ARGUMENT, std::string("invalid JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return record(ODIWI_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return record(ODIWI_INTERNAL_ERROR, e.what());
  } catch (...) {
    return record(ODIWI_INTERNAL_ERROR, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw odiwi::Error(odiwi::ErrorCode::InvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const std::string& s) {
  require(out != nullptr, "output pointer is null");
  *out = dup_string(s);
}

json parse_config(const char* text) {
  if (text == nullptr || *text == '\0') return json::object();
  json j = json::parse(text);
  if (!j.is_object()) throw odiwi::Error(odiwi::ErrorCode::InvalidArgument, "config must be a JSON object");
  return j;
}

odiwi::Family make_family(const char* name) {
  require(name != nullptr, "family is null");
  return odiwi::Family{odiwi::parse_family(name), 1.0};
}

void write_text(const char* path, const std::string& text) {
  require(path != nullptr, "path is null");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw odiwi::Error(odiwi::ErrorCode::IoError, std::string("cannot write '") + path + "'");
  out << text;
  out.close();
  if (!out) throw odiwi::Error(odiwi::ErrorCode::IoError, std::string("write failed for '") + path + "'");
}

odiwi::MatrixXd row_major(const double* data, size_t rows, size_t cols) {
  odiwi::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  if (rows * cols == 0) return m;
  require(data != nullptr, "matrix pointer is null");
  for (size_t i = 0; i < rows; ++i)
    for (size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i * cols + j];
  return m;
}

void copy_out(const odiwi::VectorXd& v, double* out, size_t len) {
  require(out != nullptr, "output buffer is null");
  require(len >= static_cast<size_t>(v.size()), "output buffer too small");
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v(i);
}

// Estimator config plus whatever else the caller is allowed to pass; the
// leftover object must be empty afterwards.
json metadata_block(const odiwi::OdiwiConfig& config, const std::string& family) {
  return json{{"version", odiwi_version()},
              {"family", family},
              {"seed", config.seed},
              {"config", odiwi::odiwi_config_to_json(config)}};
}

}  // namespace

extern "C" {

const char* odiwi_version(void) { return "0.1.0"; }

const char* odiwi_status_name(odiwi_status status) {
  if (status == ODIWI_OK) return "Ok";
  if (status == ODIWI_INTERNAL_ERROR) return "InternalError";
  if (status > ODIWI_OK && status < ODIWI_INTERNAL_ERROR)
    return odiwi::to_string(static_cast<odiwi::ErrorCode>(static_cast<int>(status) - 1));
  return "Unknown";
}

odiwi_category odiwi_status_category(odiwi_status status) {
  if (status == ODIWI_OK) return ODIWI_CATEGORY_NONE;
  if (status <= ODIWI_OK || status >= ODIWI_INTERNAL_ERROR) return ODIWI_CATEGORY_INTERNAL;
  switch (odiwi::category_of(static_cast<odiwi::ErrorCode>(static_cast<int>(status) - 1))) {
    case odiwi::ErrorCategory::Usage: return ODIWI_CATEGORY_USAGE;
    case odiwi::ErrorCategory::Data: return ODIWI_CATEGORY_DATA;
    case odiwi::ErrorCategory::Numerical: return ODIWI_CATEGORY_NUMERICAL;
  }
  return ODIWI_CATEGORY_INTERNAL;
}

const char* odiwi_last_error_message(void) { return g_message.c_str(); }
long odiwi_last_error_row(void) { return g_row; }
const char* odiwi_last_error_column(void) { return g_column.c_str(); }
void odiwi_string_free(char* s) { std::free(s); }

// ---- datasets ---------------------------------------------------------------

odiwi_status odiwi_first_stage_load(const char* path, odiwi_first_stage** out, char** report_json) {
  return guarded([&] {
    require(path && out, "null argument");
    odiwi::LoadReport report;
    auto h = std::make_unique<odiwi_first_stage>();
    h->data = odiwi::load_first_stage(path, &report);
    h->data.validate();
    if (report_json) *report_json = dup_string(report.to_json().dump());
    *out = h.release();
  });
}

odiwi_status odiwi_first_stage_create(const double* exposures, const double* covariates, size_t n,
                                      size_t p, size_t d, odiwi_first_stage** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    require(n > 0 && p > 0, "need at least one row and one exposure column");
    auto h = std::make_unique<odiwi_first_stage>();
    h->data.exposures = row_major(exposures, n, p);
    h->data.covariates = row_major(covariates, n, d);
    for (size_t i = 0; i < n; ++i) h->data.ids.push_back(std::to_string(i + 1));
    h->data.validate();
    *out = h.release();
  });
}

odiwi_status odiwi_first_stage_write(const odiwi_first_stage* data, const char* path) {
  return guarded([&] {
    require(data != nullptr, "null handle");
    std::ostringstream s;
    odiwi::write_first_stage(s, data->data);
    write_text(path, s.str());
  });
}

size_t odiwi_first_stage_rows(const odiwi_first_stage* data) {
  return data ? static_cast<size_t>(data->data.rows()) : 0;
}

size_t odiwi_first_stage_exposure_dim(const odiwi_first_stage* data) {
  return data ? static_cast<size_t>(data->data.exposure_dim()) : 0;
}

odiwi_status odiwi_first_stage_exposures(const odiwi_first_stage* data, double* out, size_t len) {
  return guarded([&] {
    require(data != nullptr, "null handle");
    const odiwi::MatrixXd& x = data->data.exposures;
    require(out != nullptr && len >= static_cast<size_t>(x.size()), "output buffer too small");
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index k = 0; k < x.cols(); ++k) out[i * x.cols() + k] = x(i, k);
  });
}

void odiwi_first_stage_free(odiwi_first_stage* data) { delete data; }

odiwi_status odiwi_second_stage_load(const char* path, const char* family, odiwi_second_stage** out,
                                     char** report_json) {
  return guarded([&] {
    require(path && out, "null argument");
    const odiwi::Family fam = make_family(family);
    odiwi::LoadReport report;
    auto h = std::make_unique<odiwi_second_stage>();
    h->data = odiwi::load_second_stage(path, fam, &report);
    h->data.validate(fam);
    if (report_json) *report_json = dup_string(report.to_json().dump());
    *out = h.release();
  });
}

odiwi_status odiwi_second_stage_create(const double* outcomes, const double* covariates,
                                       const double* geo, size_t n, size_t q, size_t d,
                                       odiwi_second_stage** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    require(n > 0 && d > 0, "need at least one row and one geographic covariate");
    auto h = std::make_unique<odiwi_second_stage>();
    h->data.outcomes = row_major(outcomes, n, 1).col(0);
    h->data.covariates = row_major(covariates, n, q);
    h->data.geo = row_major(geo, n, d);
    for (size_t i = 0; i < n; ++i) h->data.ids.push_back(std::to_string(i + 1));
    *out = h.release();
  });
}

odiwi_status odiwi_second_stage_write(const odiwi_second_stage* data, const char* path) {
  return guarded([&] {
    require(data != nullptr, "null handle");
    std::ostringstream s;
    odiwi::write_second_stage(s, data->data);
    write_text(path, s.str());
  });
}

size_t odiwi_second_stage_rows(const odiwi_second_stage* data) {
  return data ? static_cast<size_t>(data->data.rows()) : 0;
}

void odiwi_second_stage_free(odiwi_second_stage* data) { delete data; }

odiwi_status odiwi_generate(const char* config_json, uint64_t cell, uint64_t rep,
                            odiwi_first_stage** first, odiwi_second_stage** second) {
  return guarded([&] {
    require(first && second, "null argument");
    json cfg = parse_config(config_json);
    const odiwi::SimConfig sim = odiwi::take_sim_config(cfg);
    odiwi::reject_unknown_keys(cfg);
    odiwi::Replicate r = odiwi::simulate_replicate(sim, cell, rep);
    auto f = std::make_unique<odiwi_first_stage>();
    auto s = std::make_unique<odiwi_second_stage>();
    f->data = std::move(r.first);
    s->data = std::move(r.second.data);
    *first = f.release();
    *second = s.release();
  });
}

// ---- estimation ---------------------------------------------------------------

odiwi_status odiwi_estimate(const odiwi_first_stage* first, const odiwi_second_stage* second,
                            const char* family, const char* config_json, odiwi_result** out) {
  return guarded([&] {
    require(first && second && out, "null argument");
    const odiwi::Family fam = make_family(family);
    json cfg = parse_config(config_json);
    const odiwi::OdiwiConfig config = odiwi::take_odiwi_config(cfg);
    odiwi::reject_unknown_keys(cfg);
    auto h = std::make_unique<odiwi_result>();
    h->naive = odiwi::naive_estimate(first->data, second->data, fam, config.ridge,
                                     config.exposure_degree)
                   .fit.beta;
    h->result = odiwi::odiwi_estimate(first->data, second->data, fam, config);
    h->metadata = metadata_block(config, odiwi::to_string(fam.kind));
    *out = h.release();
  });
}

size_t odiwi_result_num_coefficients(const odiwi_result* result) {
  return result ? static_cast<size_t>(result->result.final_beta.size()) : 0;
}

odiwi_status odiwi_result_coefficients(const odiwi_result* result, double* out, size_t len) {
  return guarded([&] {
    require(result != nullptr, "null handle");
    copy_out(result->result.final_beta, out, len);
  });
}

odiwi_status odiwi_result_naive_coefficients(const odiwi_result* result, double* out, size_t len) {
  return guarded([&] {
    require(result != nullptr, "null handle");
    copy_out(result->naive, out, len);
  });
}

int odiwi_result_all_certified(const odiwi_result* result) {
  return result && result->result.all_certified ? 1 : 0;
}

odiwi_status odiwi_result_json(const odiwi_result* result, char** out) {
  return guarded([&] {
    require(result != nullptr, "null handle");
    json j = odiwi::result_to_json(result->result);
    j["naive_beta"] = std::vector<double>(result->naive.data(), result->naive.data() + result->naive.size());
    j["metadata"] = result->metadata;
    emit(out, j.dump(2));
  });
}

odiwi_status odiwi_result_trajectory_csv(const odiwi_result* result, char** out) {
  return guarded([&] {
    require(result != nullptr, "null handle");
    emit(out, odiwi::trajectory_csv(result->result));
  });
}

void odiwi_result_free(odiwi_result* result) { delete result; }

odiwi_status odiwi_bootstrap_run(const odiwi_first_stage* first, const odiwi_second_stage* second,
                                 const char* family, const char* config_json, odiwi_bootstrap** out) {
  return guarded([&] {
    require(first && second && out, "null argument");
    const odiwi::Family fam = make_family(family);
    json cfg = parse_config(config_json);
    odiwi::BootstrapOptions options = odiwi::take_bootstrap_options(cfg);
    const odiwi::OdiwiConfig config = odiwi::take_odiwi_config(cfg);
    odiwi::reject_unknown_keys(cfg);
    options.threads = config.threads;
    auto h = std::make_unique<odiwi_bootstrap>();
    h->result = odiwi::bootstrap_ci(first->data, second->data, fam, config, options);
    h->metadata = metadata_block(config, odiwi::to_string(fam.kind));
    h->metadata["bootstrap"] = json{{"replicates", options.replicates},
                                    {"level", options.level},
                                    {"resample_first_stage", options.resample_first_stage},
                                    {"seed", options.seed},
                                    {"coefficient", options.coefficient}};
    *out = h.release();
  });
}

odiwi_status odiwi_bootstrap_interval(const odiwi_bootstrap* boot, double* point, double* lower,
                                      double* upper, double* standard_error) {
  return guarded([&] {
    require(boot != nullptr, "null handle");
    if (point) *point = boot->result.point_estimate;
    if (lower) *lower = boot->result.lower;
    if (upper) *upper = boot->result.upper;
    if (standard_error) *standard_error = boot->result.standard_error;
  });
}

odiwi_status odiwi_bootstrap_json(const odiwi_bootstrap* boot, char** out) {
  return guarded([&] {
    require(boot != nullptr, "null handle");
    json j = odiwi::result_to_json(boot->result.point);
    j["bootstrap"] = odiwi::bootstrap_to_json(boot->result);
    j["metadata"] = boot->metadata;
    emit(out, j.dump(2));
  });
}

odiwi_status odiwi_bootstrap_replicates_csv(const odiwi_bootstrap* boot, char** out) {
  return guarded([&] {
    require(boot != nullptr, "null handle");
    emit(out, odiwi::replicates_csv(boot->result));
  });
}

odiwi_status odiwi_bootstrap_trajectory_csv(const odiwi_bootstrap* boot, char** out) {
  return guarded([&] {
    require(boot != nullptr, "null handle");
    emit(out, odiwi::trajectory_csv(boot->result.point));
  });
}

void odiwi_bootstrap_free(odiwi_bootstrap* boot) { delete boot; }

// ---- designs ------------------------------------------------------------------

odiwi_status odiwi_design_solve(const char* request_json, odiwi_design** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    json req = parse_config(request_json);
    auto take = [&](const char* key) {
      auto it = req.find(key);
      json v = it == req.end() ? json() : *it;
      if (it != req.end()) req.erase(it);
      return v;
    };
    const json beta_j = take("beta");
    require(beta_j.is_array() && !beta_j.empty(), "design request needs a 'beta' array");
    const std::vector<double> beta_v = beta_j.get<std::vector<double>>();
    const json family_j = take("family");
    const odiwi::Family fam =
        make_family(family_j.is_null() ? "logit" : family_j.get<std::string>().c_str());
    const json range_j = take("range");
    const json exposures_j = take("exposures");
    const json resolution_j = take("resolution");
    const int resolution = resolution_j.is_null() ? 201 : resolution_j.get<int>();
    odiwi::DesignOptions options;
    if (json v = take("criterion"); !v.is_null()) options.criterion = odiwi::parse_criterion(v.get<std::string>());
    if (json v = take("tol"); !v.is_null()) options.tol = v.get<double>();
    if (json v = take("max_iter"); !v.is_null()) options.max_iter = v.get<int>();
    if (json v = take("merge_radius"); !v.is_null()) options.merge_radius = v.get<double>();
    if (json v = take("min_weight"); !v.is_null()) options.min_weight = v.get<double>();
    const json degree_j = take("exposure_degree");
    const int degree = degree_j.is_null() ? 1 : degree_j.get<int>();
    odiwi::reject_unknown_keys(req);

    odiwi::CandidateGrid grid;
    if (!range_j.is_null()) {
      require(exposures_j.is_null(), "give either 'range' or 'exposures', not both");
      const auto r = range_j.get<std::vector<double>>();
      require(r.size() == 2, "'range' must be [lo, hi]");
      grid = odiwi::grid_on_interval(r[0], r[1], resolution);
    } else {
      require(exposures_j.is_array() && !exposures_j.empty(), "design request needs 'range' or 'exposures'");
      const size_t p = exposures_j.front().is_array() ? exposures_j.front().size() : 1;
      odiwi::MatrixXd x(static_cast<Eigen::Index>(exposures_j.size()), static_cast<Eigen::Index>(p));
      for (size_t i = 0; i < exposures_j.size(); ++i) {
        const json& row = exposures_j[i];
        if (row.is_array()) {
          require(row.size() == p, "ragged 'exposures'");
          for (size_t k = 0; k < p; ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k].get<double>();
        } else {
          x(static_cast<Eigen::Index>(i), 0) = row.get<double>();
        }
      }
      grid = odiwi::build_candidate_grid(x, resolution);
    }
    const odiwi::FeatureMap features = odiwi::FeatureMap::standard(grid.dim(), 0, degree);
    if (static_cast<int>(beta_v.size()) != features.dim())
      throw odiwi::Error(odiwi::ErrorCode::DimensionMismatch,
                         "'beta' needs " + std::to_string(features.dim()) + " entries");
    const odiwi::VectorXd beta =
        Eigen::Map<const odiwi::VectorXd>(beta_v.data(), static_cast<Eigen::Index>(beta_v.size()));
    if (options.merge_radius < 0.0) options.merge_radius = 0.01 * grid.max_range();
    const odiwi::DesignSolution sol = odiwi::solve_optimal_design(grid, beta, fam, features, options);

    auto h = std::make_unique<odiwi_design>();
    h->design = sol.design;
    h->criterion = sol.criterion;
    h->certificate = sol.certificate;
    h->body = odiwi::design_to_json(sol);
    h->body["metadata"] = json{{"version", odiwi_version()},
                               {"beta", beta_v},
                               {"family", odiwi::to_string(fam.kind)},
                               {"bounds", std::vector<double>(grid.bounds.data(), grid.bounds.data() + grid.bounds.size())},
                               {"resolution", resolution},
                               {"grid_points", grid.size()},
                               {"exposure_degree", degree},
                               {"tol", options.tol},
                               {"max_iter", options.max_iter},
                               {"merge_radius", options.merge_radius},
                               {"min_weight", options.min_weight}};
    *out = h.release();
  });
}

odiwi_status odiwi_design_from_json(const char* design_json, odiwi_design** out) {
  return guarded([&] {
    require(design_json && out, "null argument");
    json j;
    try {
      j = json::parse(design_json);
    } catch (const json::exception& e) {
      throw odiwi::Error(odiwi::ErrorCode::SchemaError, std::string("design is not valid JSON: ") + e.what());
    }
    auto h = std::make_unique<odiwi_design>();
    h->design = odiwi::design_from_json(j);
    if (j.contains("criterion")) h->criterion = odiwi::parse_criterion(j["criterion"].get<std::string>());
    if (j.contains("certificate") && j["certificate"].is_number()) h->certificate = j["certificate"].get<double>();
    h->body = j;
    *out = h.release();
  });
}

size_t odiwi_design_size(const odiwi_design* design) {
  return design ? static_cast<size_t>(design->design.size()) : 0;
}

size_t odiwi_design_dim(const odiwi_design* design) {
  return design ? static_cast<size_t>(design->design.dim()) : 0;
}

odiwi_status odiwi_design_support(const odiwi_design* design, double* out, size_t len) {
  return guarded([&] {
    require(design != nullptr, "null handle");
    const odiwi::MatrixXd& s = design->design.support;
    require(out != nullptr && len >= static_cast<size_t>(s.size()), "output buffer too small");
    for (Eigen::Index i = 0; i < s.rows(); ++i)
      for (Eigen::Index k = 0; k < s.cols(); ++k) out[i * s.cols() + k] = s(i, k);
  });
}

odiwi_status odiwi_design_weights(const odiwi_design* design, double* out, size_t len) {
  return guarded([&] {
    require(design != nullptr, "null handle");
    copy_out(design->design.weights, out, len);
  });
}

double odiwi_design_certificate(const odiwi_design* design) {
  return design ? design->certificate : 0.0;
}

odiwi_status odiwi_design_json(const odiwi_design* design, char** out) {
  return guarded([&] {
    require(design != nullptr, "null handle");
    emit(out, design->body.dump(2));
  });
}

void odiwi_design_free(odiwi_design* design) { delete design; }

odiwi_status odiwi_importance_weights_csv(const odiwi_first_stage* first, const odiwi_design* design,
                                          const char* config_json, char** out, char** metadata_json) {
  return guarded([&] {
    require(first && design && out, "null argument");
    json cfg = parse_config(config_json);
    // Reuse the estimator's parsing and validation for the shared keys.
    json est = json::object();
    for (const char* key : {"kernel", "bandwidth", "bandwidth_fraction", "clip_quantile", "floor_fraction"}) {
      auto it = cfg.find(key);
      if (it != cfg.end()) {
        est[key] = *it;
        cfg.erase(it);
      }
    }
    odiwi::reject_unknown_keys(cfg);
    const odiwi::OdiwiConfig config = odiwi::take_odiwi_config(est);
    const odiwi::MatrixXd& x = first->data.exposures;
    if (x.cols() != design->design.dim())
      throw odiwi::Error(odiwi::ErrorCode::DimensionMismatch,
                         "design dimension does not match the first-stage exposures");

    const odiwi::DensityEstimate source = odiwi::kde_fit(x);
    const double floor = config.floor_fraction * source.evaluate(x).maxCoeff();
    const double range = (x.colwise().maxCoeff() - x.colwise().minCoeff()).maxCoeff();
    const double bandwidth = config.bandwidth ? *config.bandwidth : config.bandwidth_fraction * range;
    if (!(bandwidth > 0.0))
      throw odiwi::Error(odiwi::ErrorCode::DegenerateRange, "first-stage exposures have zero range");
    const odiwi::DensityEstimate target = odiwi::design_density(design->design, {config.kernel, bandwidth});
    const odiwi::ImportanceWeights w =
        odiwi::importance_weights(x, target, source, config.clip_quantile, floor);

    emit(out, odiwi::weights_csv(first->data.ids, w));
    if (metadata_json) {
      json meta{{"version", odiwi_version()},
                {"kernel", odiwi::to_string(config.kernel)},
                {"bandwidth", bandwidth},
                {"clip_quantile", config.clip_quantile ? json(*config.clip_quantile) : json(nullptr)},
                {"clip_bound", w.clip_bound ? json(*w.clip_bound) : json(nullptr)},
                {"floor", floor},
                {"rows", x.rows()},
                {"design", odiwi::design_to_json(design->design, design->criterion, design->certificate)}};
      *metadata_json = dup_string(meta.dump(2));
    }
  });
}

// ---- simulation -----------------------------------------------------------------

odiwi_status odiwi_simulate(const char* config_json, odiwi_experiment** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    json cfg = parse_config(config_json);
    odiwi::ExperimentOptions options;
    if (auto it = cfg.find("threads"); it != cfg.end()) {
      options.threads = it->get<int>();
      cfg.erase(it);
    }
    std::optional<std::vector<double>> grid;
    if (auto it = cfg.find("beta_x_grid"); it != cfg.end()) {
      grid = it->get<std::vector<double>>();
      cfg.erase(it);
    }
    options.sim = odiwi::take_sim_config(cfg);
    options.odiwi = odiwi::take_odiwi_config(cfg);
    odiwi::reject_unknown_keys(cfg);
    options.beta_x_grid = grid ? *grid : std::vector<double>{options.sim.beta_x};
    require(!options.beta_x_grid.empty(), "'beta_x_grid' is empty");
    require(options.threads >= 1, "'threads' must be at least 1");

    auto h = std::make_unique<odiwi_experiment>();
    h->result = odiwi::run_experiment(options);
    json est = odiwi::odiwi_config_to_json(options.odiwi);
    est.erase("seed");  // derived per replication from the simulation seed
    h->metadata = json{{"version", odiwi_version()},
                       {"seed", options.sim.seed},
                       {"beta_x_grid", options.beta_x_grid},
                       {"simulation", odiwi::sim_config_to_json(options.sim)},
                       {"estimator", est}};
    *out = h.release();
  });
}

odiwi_status odiwi_experiment_metrics_csv(const odiwi_experiment* exp, char** out) {
  return guarded([&] {
    require(exp != nullptr, "null handle");
    emit(out, odiwi::metrics_csv(exp->result.rows));
  });
}

odiwi_status odiwi_experiment_summary_csv(const odiwi_experiment* exp, char** out) {
  return guarded([&] {
    require(exp != nullptr, "null handle");
    emit(out, odiwi::summary_csv(odiwi::summarize(exp->result.rows)));
  });
}

odiwi_status odiwi_experiment_trace_csv(const odiwi_experiment* exp, char** out) {
  return guarded([&] {
    require(exp != nullptr, "null handle");
    emit(out, odiwi::trace_csv(exp->result.trace));
  });
}

odiwi_status odiwi_experiment_metadata_json(const odiwi_experiment* exp, char** out) {
  return guarded([&] {
    require(exp != nullptr, "null handle");
    emit(out, exp->metadata.dump(2));
  });
}

void odiwi_experiment_free(odiwi_experiment* exp) { delete exp; }

}  // extern "C"

#include "odiwi/io.hpp"

#include "odiwi/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

namespace odiwi {

json LoadReport::to_json() const {
  return json{{"source", source}, {"rows", rows}, {"columns", columns}};
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

// Columns named prefix1..prefixK in order, or the bare prefix alone.
std::vector<int> numbered_columns(const std::vector<std::string>& header, const std::string& prefix,
                                  bool allow_bare, const std::string& source) {
  std::vector<std::pair<int, int>> found;  // (number, column)
  int bare = -1;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    const std::string& h = header[c];
    if (allow_bare && h == prefix) {
      bare = c;
      continue;
    }
    if (h.size() <= prefix.size() || h.compare(0, prefix.size(), prefix) != 0) continue;
    int num = 0;
    const char* first = h.data() + prefix.size();
    const char* last = h.data() + h.size();
    auto [ptr, ec] = std::from_chars(first, last, num);
    if (ec == std::errc() && ptr == last && num >= 1) found.emplace_back(num, c);
  }
  if (bare >= 0) {
    if (!found.empty())
      throw DataError(ErrorCode::SchemaError, std::nullopt, prefix,
                      source + ": both '" + prefix + "' and numbered '" + prefix + "k' columns");
    return {bare};
  }
  std::sort(found.begin(), found.end());
  std::vector<int> cols;
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (found[i].first != static_cast<int>(i) + 1)
      throw DataError(ErrorCode::SchemaError, std::nullopt, prefix + std::to_string(i + 1),
                      source + ": numbered columns must run " + prefix + "1.." + prefix + "k");
    cols.push_back(found[i].second);
  }
  return cols;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_table(std::istream& in, const std::string& source) {
  Table t;
  std::string line;
  bool have_header = false;
  long row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
      if (trim(line).empty()) continue;
      t.header = split_csv_line(line);
      have_header = true;
      continue;
    }
    if (trim(line).empty()) continue;
    ++row;
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      throw DataError(ErrorCode::SchemaError, row, "",
                      source + ": expected " + std::to_string(t.header.size()) + " fields, found " +
                          std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  if (!have_header) throw DataError(ErrorCode::SchemaError, std::nullopt, "", source + ": empty file");
  return t;
}

double parse_number(const std::string& cell, long row, const std::string& column,
                    const std::string& source) {
  if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null")
    throw DataError(ErrorCode::MissingValue, row, column, source + ": missing value");
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    throw DataError(ErrorCode::SchemaError, row, column, source + ": not a finite number: '" + cell + "'");
  return v;
}

int require_column(const std::vector<std::string>& header, const std::string& name,
                   const std::string& source) {
  for (int c = 0; c < static_cast<int>(header.size()); ++c)
    if (header[c] == name) return c;
  throw DataError(ErrorCode::SchemaError, std::nullopt, name, source + ": missing column");
}

void check_known_columns(const std::vector<std::string>& header, std::size_t used,
                         const std::string& source) {
  if (used != header.size()) {
    throw DataError(ErrorCode::SchemaError, std::nullopt, "",
                    source + ": unexpected extra columns in header");
  }
}

MatrixXd numeric_block(const Table& t, const std::vector<int>& cols, const std::string& source) {
  MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_number(t.rows[r][cols[c]], static_cast<long>(r) + 1, t.header[cols[c]], source);
  return m;
}

std::vector<std::string> id_column(const Table& t, int col, const std::string& source) {
  std::vector<std::string> ids;
  ids.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r][col].empty())
      throw DataError(ErrorCode::MissingValue, static_cast<long>(r) + 1, "id", source + ": missing id");
    ids.push_back(t.rows[r][col]);
  }
  return ids;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return in;
}

}  // namespace

FirstStageData read_first_stage(std::istream& in, LoadReport* report, const std::string& source) {
  const Table t = read_table(in, source);
  const int id = require_column(t.header, "id", source);
  const auto xcols = numbered_columns(t.header, "x", true, source);
  const auto rcols = numbered_columns(t.header, "r", false, source);
  if (xcols.empty()) throw DataError(ErrorCode::SchemaError, std::nullopt, "x", source + ": missing column");
  if (rcols.empty()) throw DataError(ErrorCode::SchemaError, std::nullopt, "r1", source + ": missing column");
  check_known_columns(t.header, 1 + xcols.size() + rcols.size(), source);

  FirstStageData data;
  data.ids = id_column(t, id, source);
  // Row-major scan so the first offending cell is reported.
  std::vector<int> all = xcols;
  all.insert(all.end(), rcols.begin(), rcols.end());
  const MatrixXd block = numeric_block(t, all, source);
  data.exposures = block.leftCols(static_cast<Eigen::Index>(xcols.size()));
  data.covariates = block.rightCols(static_cast<Eigen::Index>(rcols.size()));
  if (data.rows() <= data.covariate_dim())
    throw DataError(ErrorCode::SchemaError, std::nullopt, "",
                    source + ": need more rows than covariates");
  if (report) *report = {source, static_cast<long>(data.rows()), t.header};
  return data;
}

FirstStageData load_first_stage(const std::string& path, LoadReport* report) {
  auto in = open_input(path);
  return read_first_stage(in, report, path);
}

SecondStageData read_second_stage(std::istream& in, const Family& family, LoadReport* report,
                                  const std::string& source) {
  const Table t = read_table(in, source);
  const int id = require_column(t.header, "id", source);
  const int y = require_column(t.header, "y", source);
  const auto zcols = numbered_columns(t.header, "z", false, source);
  const auto rcols = numbered_columns(t.header, "r", false, source);
  if (rcols.empty()) throw DataError(ErrorCode::SchemaError, std::nullopt, "r1", source + ": missing column");
  check_known_columns(t.header, 2 + zcols.size() + rcols.size(), source);

  SecondStageData data;
  data.ids = id_column(t, id, source);
  std::vector<int> all{y};
  all.insert(all.end(), zcols.begin(), zcols.end());
  all.insert(all.end(), rcols.begin(), rcols.end());
  const MatrixXd block = numeric_block(t, all, source);
  data.outcomes = block.col(0);
  for (Eigen::Index i = 0; i < data.outcomes.size(); ++i)
    if (!family.in_support(data.outcomes(i)))
      throw DataError(ErrorCode::SchemaError, static_cast<long>(i) + 1, "y",
                      source + ": outcome outside the " + to_string(family.kind) + " family support");
  data.covariates = block.middleCols(1, static_cast<Eigen::Index>(zcols.size()));
  data.geo = block.rightCols(static_cast<Eigen::Index>(rcols.size()));
  if (report) *report = {source, static_cast<long>(data.rows()), t.header};
  return data;
}

SecondStageData load_second_stage(const std::string& path, const Family& family, LoadReport* report) {
  auto in = open_input(path);
  return read_second_stage(in, family, report, path);
}

std::string format_double(double value) {
  if (std::isnan(value)) return "NaN";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

namespace {

std::string row_id(const std::vector<std::string>& ids, Eigen::Index i) {
  return ids.empty() ? std::to_string(i + 1) : ids[static_cast<std::size_t>(i)];
}

std::string exposure_name(int p, int k) { return p == 1 ? "x" : "x" + std::to_string(k + 1); }

}  // namespace

void write_first_stage(std::ostream& out, const FirstStageData& data) {
  out << "id";
  for (int k = 0; k < data.exposure_dim(); ++k) out << ',' << exposure_name(data.exposure_dim(), k);
  for (int k = 0; k < data.covariate_dim(); ++k) out << ",r" << k + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    out << row_id(data.ids, i);
    for (Eigen::Index k = 0; k < data.exposures.cols(); ++k) out << ',' << format_double(data.exposures(i, k));
    for (Eigen::Index k = 0; k < data.covariates.cols(); ++k) out << ',' << format_double(data.covariates(i, k));
    out << '\n';
  }
}

void write_second_stage(std::ostream& out, const SecondStageData& data) {
  out << "id,y";
  for (Eigen::Index k = 0; k < data.covariates.cols(); ++k) out << ",z" << k + 1;
  for (Eigen::Index k = 0; k < data.geo.cols(); ++k) out << ",r" << k + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    out << row_id(data.ids, i) << ',' << format_double(data.outcomes(i));
    for (Eigen::Index k = 0; k < data.covariates.cols(); ++k) out << ',' << format_double(data.covariates(i, k));
    for (Eigen::Index k = 0; k < data.geo.cols(); ++k) out << ',' << format_double(data.geo(i, k));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

namespace {

json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json rows_json(const MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json design_to_json(const Design& design, Criterion criterion, double certificate) {
  return json{{"support", rows_json(design.support)},
              {"weights", vec_json(design.weights)},
              {"criterion", to_string(criterion)},
              {"certificate", certificate}};
}

json design_to_json(const DesignSolution& s) {
  json j = design_to_json(s.design, s.criterion, s.certificate);
  j["objective"] = s.objective;
  j["min_support_sensitivity"] = s.min_support_sensitivity;
  j["iterations"] = s.iterations;
  j["converged"] = s.converged;
  j["near_flat"] = s.near_flat;
  return j;
}

Design design_from_json(const json& j) {
  try {
    Design d;
    const auto& support = j.at("support");
    const auto& weights = j.at("weights");
    if (!support.is_array() || support.empty() || support.size() != weights.size())
      throw Error(ErrorCode::SchemaError, "design JSON needs matching non-empty support and weights");
    const std::size_t p = support.front().is_array() ? support.front().size() : 1;
    d.support.resize(static_cast<Eigen::Index>(support.size()), static_cast<Eigen::Index>(p));
    d.weights.resize(static_cast<Eigen::Index>(weights.size()));
    for (std::size_t i = 0; i < support.size(); ++i) {
      const auto& row = support[i];
      if (row.is_array()) {
        if (row.size() != p) throw Error(ErrorCode::SchemaError, "ragged design support");
        for (std::size_t k = 0; k < p; ++k) d.support(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k].get<double>();
      } else {
        d.support(static_cast<Eigen::Index>(i), 0) = row.get<double>();
      }
      d.weights(static_cast<Eigen::Index>(i)) = weights[i].get<double>();
    }
    validate_weights(d);
    return d;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("malformed design JSON: ") + e.what());
  }
}

json predictor_to_json(const LinearPredictor& p) {
  return json{{"coefficients", rows_json(p.coefficients)},
              {"ridge", p.ridge},
              {"weight_checksum", p.weight_checksum}};
}

json odiwi_config_to_json(const OdiwiConfig& c) {
  return json{{"iterations", c.iterations},
              {"momentum", c.momentum},
              {"num_inits", c.num_inits},
              {"init", to_string(c.init)},
              {"aggregation", to_string(c.aggregation)},
              {"criterion", to_string(c.criterion)},
              {"kernel", to_string(c.kernel)},
              {"bandwidth", nullable(c.bandwidth)},
              {"bandwidth_fraction", c.bandwidth_fraction},
              {"clip_quantile", nullable(c.clip_quantile)},
              {"floor_fraction", c.floor_fraction},
              {"ridge", c.ridge},
              {"grid_resolution", c.grid_resolution},
              {"merge_fraction", c.merge_fraction},
              {"min_weight", c.min_weight},
              {"design_tol", c.design_tol},
              {"design_max_iter", c.design_max_iter},
              {"design_covariates", to_string(c.design_covariates)},
              {"exposure_degree", c.exposure_degree},
              {"identity_adaptation", c.identity_adaptation},
              {"seed", c.seed}};
}

json sim_config_to_json(const SimConfig& c) {
  return json{{"n_star", c.n_star},
              {"n", c.n},
              {"d", c.d},
              {"gamma", vec_json(c.resolved_gamma())},
              {"sigma_eps", nullable(c.sigma_eps)},
              {"snr", c.snr},
              {"beta0", c.beta0},
              {"beta_x", c.beta_x},
              {"reps", c.reps},
              {"seed", c.seed},
              {"shift", c.shift}};
}

namespace {

json chain_json(const Chain& chain, const std::vector<std::string>& names) {
  json traj = json::array();
  for (const auto& rec : chain.trajectory) {
    json e{{"iteration", rec.iteration},
           {"beta_hat", vec_json(rec.beta_hat)},
           {"beta_smoothed", vec_json(rec.beta_smoothed)}};
    if (rec.design) {
      e["design"] = design_to_json(*rec.design);
      e["certified"] = rec.certified;
      e["bandwidth"] = rec.bandwidth;
    }
    if (rec.weights) {
      e["weights"] = json{{"min", rec.weights->min},
                          {"max", rec.weights->max},
                          {"effective_sample_size", rec.weights->effective_sample_size},
                          {"clip_bound", nullable(rec.weights->clip_bound)},
                          {"checksum", rec.weights->checksum}};
    }
    traj.push_back(e);
  }
  (void)names;
  return json{{"init_id", chain.init_id}, {"trajectory", traj}};
}

}  // namespace

json result_to_json(const OdiwiResult& r) {
  json chains = json::array();
  for (const auto& c : r.chains) chains.push_back(chain_json(c, r.coefficient_names));
  json mean = json::array();
  for (const auto& b : r.mean_trajectory()) mean.push_back(vec_json(b));
  json j{{"coefficient_names", r.coefficient_names},
         {"final_beta", vec_json(r.final_beta)},
         {"iterations", r.iterations},
         {"mean_trajectory", mean},
         {"chains", chains},
         {"diagnostics", json{{"all_certified", r.all_certified}, {"warnings", r.warnings}}}};
  if (r.serial) j["serial_chain"] = chain_json(*r.serial, r.coefficient_names);
  return j;
}

json bootstrap_to_json(const BootstrapResult& b) {
  return json{{"point_estimate", b.point_estimate},
              {"lower", b.lower},
              {"upper", b.upper},
              {"level", b.level},
              {"median", b.median},
              {"standard_error", b.standard_error},
              {"B", b.B},
              {"failures", b.failures}};
}

std::string trajectory_csv(const OdiwiResult& r) {
  std::ostringstream out;
  out << "init_id,iteration,coefficient,value,smoothed\n";
  auto emit = [&](const Chain& c) {
    for (const auto& rec : c.trajectory)
      for (Eigen::Index k = 0; k < rec.beta_hat.size(); ++k)
        out << c.init_id << ',' << rec.iteration << ',' << r.coefficient_names[static_cast<std::size_t>(k)]
            << ',' << format_double(rec.beta_hat(k)) << ',' << format_double(rec.beta_smoothed(k))
            << '\n';
  };
  for (const auto& c : r.chains) emit(c);
  if (r.serial) emit(*r.serial);
  return out.str();
}

std::string weights_csv(const std::vector<std::string>& ids, const ImportanceWeights& w) {
  std::ostringstream out;
  out << "id,weight,raw_ratio\n";
  for (Eigen::Index i = 0; i < w.values.size(); ++i)
    out << row_id(ids, i) << ',' << format_double(w.values(i)) << ',' << format_double(w.raw(i)) << '\n';
  return out.str();
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "estimator,beta_x_true,rep,beta_hat,error,stage1_rmse,flags\n";
  for (const auto& r : rows)
    out << r.estimator << ',' << format_double(r.beta_x_true) << ',' << r.rep << ','
        << format_double(r.beta_hat) << ',' << format_double(r.error) << ','
        << format_double(r.stage1_rmse) << ',' << r.flags << '\n';
  return out.str();
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "estimator,beta_x_true,count,failures,mean,sd,q025,q975,mean_abs_error,mean_stage1_rmse\n";
  for (const auto& s : rows)
    out << s.estimator << ',' << format_double(s.beta_x_true) << ',' << s.count << ',' << s.failures
        << ',' << format_double(s.mean) << ',' << format_double(s.sd) << ',' << format_double(s.q025)
        << ',' << format_double(s.q975) << ',' << format_double(s.mean_abs_error) << ','
        << format_double(s.mean_stage1_rmse) << '\n';
  return out.str();
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream out;
  out << "beta_x_true,iteration,mean_error,sd_error,count\n";
  for (const auto& t : rows)
    out << format_double(t.beta_x_true) << ',' << t.iteration << ',' << format_double(t.mean_error)
        << ',' << format_double(t.sd_error) << ',' << t.count << '\n';
  return out.str();
}

std::string replicates_csv(const BootstrapResult& b) {
  std::ostringstream out;
  out << "replicate,estimate\n";
  for (std::size_t i = 0; i < b.replicate_estimates.size(); ++i)
    out << i + 1 << ',' << format_double(b.replicate_estimates[i]) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------

namespace {

template <class T>
bool take(json& config, const char* key, T& target) {
  auto it = config.find(key);
  if (it == config.end()) return false;
  try {
    if (!it->is_null()) target = it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::InvalidArgument, std::string("config key '") + key + "' has the wrong type");
  }
  config.erase(it);
  return true;
}

void take_optional(json& config, const char* key, std::optional<double>& target) {
  auto it = config.find(key);
  if (it == config.end()) return;
  if (it->is_null()) {
    target.reset();
  } else if (it->is_number()) {
    target = it->get<double>();
  } else {
    throw Error(ErrorCode::InvalidArgument, std::string("config key '") + key + "' must be a number or null");
  }
  config.erase(it);
}

}  // namespace

OdiwiConfig take_odiwi_config(json& config) {
  if (!config.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  OdiwiConfig c;
  std::string s;
  take(config, "iterations", c.iterations);
  take(config, "momentum", c.momentum);
  take(config, "num_inits", c.num_inits);
  if (take(config, "init", s)) c.init = parse_init_mode(s);
  if (take(config, "aggregation", s)) c.aggregation = parse_aggregation(s);
  if (take(config, "criterion", s)) c.criterion = parse_criterion(s);
  if (take(config, "kernel", s)) c.kernel = parse_kernel(s);
  take_optional(config, "bandwidth", c.bandwidth);
  take(config, "bandwidth_fraction", c.bandwidth_fraction);
  take_optional(config, "clip_quantile", c.clip_quantile);
  take(config, "floor_fraction", c.floor_fraction);
  take(config, "ridge", c.ridge);
  take(config, "grid_resolution", c.grid_resolution);
  take(config, "merge_fraction", c.merge_fraction);
  take(config, "min_weight", c.min_weight);
  take(config, "design_tol", c.design_tol);
  take(config, "design_max_iter", c.design_max_iter);
  if (take(config, "design_covariates", s)) c.design_covariates = parse_design_covariates(s);
  take(config, "exposure_degree", c.exposure_degree);
  take(config, "identity_adaptation", c.identity_adaptation);
  take(config, "seed", c.seed);
  take(config, "threads", c.threads);
  c.validate();
  return c;
}

SimConfig take_sim_config(json& config) {
  if (!config.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  SimConfig c;
  take(config, "n_star", c.n_star);
  take(config, "n", c.n);
  take(config, "d", c.d);
  std::vector<double> gamma;
  if (take(config, "gamma", gamma) && !gamma.empty())
    c.gamma = Eigen::Map<const VectorXd>(gamma.data(), static_cast<Eigen::Index>(gamma.size()));
  take_optional(config, "sigma_eps", c.sigma_eps);
  take(config, "snr", c.snr);
  take(config, "beta0", c.beta0);
  take(config, "beta_x", c.beta_x);
  take(config, "reps", c.reps);
  take(config, "seed", c.seed);
  take(config, "shift", c.shift);
  c.validate();
  return c;
}

BootstrapOptions take_bootstrap_options(json& config) {
  BootstrapOptions o;
  take(config, "bootstrap", o.replicates);
  take(config, "level", o.level);
  take(config, "resample_first_stage", o.resample_first_stage);
  take(config, "bootstrap_seed", o.seed);
  take(config, "coefficient", o.coefficient);
  return o;
}

void reject_unknown_keys(const json& config) {
  if (config.empty()) return;
  std::string keys;
  for (auto it = config.begin(); it != config.end(); ++it) keys += (keys.empty() ? "" : ", ") + it.key();
  throw Error(ErrorCode::InvalidArgument, "unknown config keys: " + keys);
}

}  // namespace odiwi

#include "odiwi/odiwi.h"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace {

std::string take_string(char* s) {
  std::string out = s ? s : "";
  odiwi_string_free(s);
  return out;
}

std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
  const auto path = std::filesystem::temp_directory_path() / ("odiwi_capi_" + name);
  std::ofstream(path) << contents;
  return path;
}

const char* kSmallSim = R"({"n_star": 150, "n": 400, "seed": 3})";

}  // namespace

TEST_CASE("status metadata") {
  CHECK(std::strlen(odiwi_version()) > 0);
  CHECK(std::string(odiwi_status_name(ODIWI_OK)) == "Ok");
  CHECK(std::string(odiwi_status_name(ODIWI_MISSING_VALUE)) == "MissingValue");
  CHECK(odiwi_status_category(ODIWI_OK) == ODIWI_CATEGORY_NONE);
  CHECK(odiwi_status_category(ODIWI_INVALID_ARGUMENT) == ODIWI_CATEGORY_USAGE);
  CHECK(odiwi_status_category(ODIWI_SCHEMA_ERROR) == ODIWI_CATEGORY_DATA);
  CHECK(odiwi_status_category(ODIWI_SEPARATION) == ODIWI_CATEGORY_NUMERICAL);
  CHECK(odiwi_status_category(ODIWI_INTERNAL_ERROR) == ODIWI_CATEGORY_INTERNAL);
}

TEST_CASE("null handles are rejected") {
  odiwi_result* res = nullptr;
  CHECK(odiwi_estimate(nullptr, nullptr, "logit", "{}", &res) == ODIWI_INVALID_ARGUMENT);
  CHECK(res == nullptr);
  CHECK(std::strlen(odiwi_last_error_message()) > 0);
  CHECK(odiwi_first_stage_rows(nullptr) == 0);
  odiwi_result_free(nullptr);
  odiwi_string_free(nullptr);
}

TEST_CASE("in-memory datasets estimate") {
  odiwi_first_stage* fs = nullptr;
  odiwi_second_stage* ss = nullptr;
  REQUIRE(odiwi_generate(kSmallSim, 0, 0, &fs, &ss) == ODIWI_OK);
  CHECK(odiwi_first_stage_rows(fs) == 150);
  CHECK(odiwi_second_stage_rows(ss) == 400);
  CHECK(odiwi_first_stage_exposure_dim(fs) == 1);

  odiwi_result* res = nullptr;
  REQUIRE(odiwi_estimate(fs, ss, "logit", R"({"iterations": 2, "num_inits": 1})", &res) == ODIWI_OK);
  REQUIRE(odiwi_result_num_coefficients(res) == 2);
  double beta[2], naive[2];
  CHECK(odiwi_result_coefficients(res, beta, 2) == ODIWI_OK);
  CHECK(odiwi_result_naive_coefficients(res, naive, 2) == ODIWI_OK);
  CHECK(std::isfinite(beta[1]));
  CHECK(beta[1] != naive[1]);
  CHECK(odiwi_result_coefficients(res, beta, 1) == ODIWI_INVALID_ARGUMENT);
  char* js = nullptr;
  REQUIRE(odiwi_result_json(res, &js) == ODIWI_OK);
  const std::string j = take_string(js);
  CHECK(j.find("\"final_beta\"") != std::string::npos);
  CHECK(j.find("\"metadata\"") != std::string::npos);
  char* csv = nullptr;
  REQUIRE(odiwi_result_trajectory_csv(res, &csv) == ODIWI_OK);
  CHECK(take_string(csv).rfind("init_id,iteration", 0) == 0);
  odiwi_result_free(res);

  odiwi_result* bad = nullptr;
  CHECK(odiwi_estimate(fs, ss, "poisson", "{}", &bad) == ODIWI_INVALID_ARGUMENT);
  CHECK(odiwi_estimate(fs, ss, "logit", "{not json", &bad) == ODIWI_INVALID_ARGUMENT);
  CHECK(odiwi_estimate(fs, ss, "logit", R"({"iteratoins": 2})", &bad) == ODIWI_INVALID_ARGUMENT);
  CHECK(std::string(odiwi_last_error_message()).find("iteratoins") != std::string::npos);
  CHECK(bad == nullptr);

  odiwi_first_stage_free(fs);
  odiwi_second_stage_free(ss);
}

TEST_CASE("create validates shapes and values") {
  const std::vector<double> x = {1, 2, 3, 4};
  const std::vector<double> r = {0, 1, 0, 1};
  odiwi_first_stage* fs = nullptr;
  CHECK(odiwi_first_stage_create(x.data(), r.data(), 4, 1, 1, &fs) == ODIWI_OK);
  std::vector<double> back(4);
  CHECK(odiwi_first_stage_exposures(fs, back.data(), back.size()) == ODIWI_OK);
  CHECK(back == x);
  odiwi_first_stage_free(fs);

  const std::vector<double> y = {0, 1, 2, 0};
  odiwi_second_stage* ss = nullptr;
  CHECK(odiwi_second_stage_create(y.data(), nullptr, r.data(), 4, 0, 1, &ss) == ODIWI_OK);
  odiwi_second_stage_free(ss);
  const std::vector<double> xnan = {1, NAN, 3, 4};
  CHECK(odiwi_first_stage_create(xnan.data(), r.data(), 4, 1, 1, &fs) != ODIWI_OK);
}

TEST_CASE("file errors carry row and column") {
  const auto path = temp_file("missing.csv", "id,x,r1,r2\na,1,0,0\nb,2,1,1\nc,3,2,\n");
  odiwi_first_stage* fs = nullptr;
  CHECK(odiwi_first_stage_load(path.string().c_str(), &fs, nullptr) == ODIWI_MISSING_VALUE);
  CHECK(odiwi_last_error_row() == 3);
  CHECK(std::string(odiwi_last_error_column()) == "r2");
  CHECK(odiwi_status_category(ODIWI_MISSING_VALUE) == ODIWI_CATEGORY_DATA);

  const auto ypath = temp_file("bady.csv", "id,y,r1\na,0,1\nb,3,2\n");
  odiwi_second_stage* ss = nullptr;
  CHECK(odiwi_second_stage_load(ypath.string().c_str(), "logit", &ss, nullptr) == ODIWI_SCHEMA_ERROR);
  CHECK(odiwi_last_error_row() == 2);
  CHECK(std::string(odiwi_last_error_column()) == "y");

  CHECK(odiwi_first_stage_load("/nonexistent/x.csv", &fs, nullptr) == ODIWI_IO_ERROR);
  CHECK(odiwi_last_error_row() == -1);
  std::filesystem::remove(path);
  std::filesystem::remove(ypath);
}

TEST_CASE("file round trip") {
  odiwi_first_stage* fs = nullptr;
  odiwi_second_stage* ss = nullptr;
  REQUIRE(odiwi_generate(kSmallSim, 0, 1, &fs, &ss) == ODIWI_OK);
  const auto dir = std::filesystem::temp_directory_path();
  const auto fpath = (dir / "odiwi_capi_fs.csv").string();
  const auto spath = (dir / "odiwi_capi_ss.csv").string();
  REQUIRE(odiwi_first_stage_write(fs, fpath.c_str()) == ODIWI_OK);
  REQUIRE(odiwi_second_stage_write(ss, spath.c_str()) == ODIWI_OK);
  odiwi_first_stage* fs2 = nullptr;
  odiwi_second_stage* ss2 = nullptr;
  char* report = nullptr;
  REQUIRE(odiwi_first_stage_load(fpath.c_str(), &fs2, &report) == ODIWI_OK);
  CHECK(take_string(report).find("\"rows\":150") != std::string::npos);
  REQUIRE(odiwi_second_stage_load(spath.c_str(), "logit", &ss2, nullptr) == ODIWI_OK);

  const char* cfg = R"({"iterations": 2, "num_inits": 1})";
  odiwi_result *a = nullptr, *b = nullptr;
  REQUIRE(odiwi_estimate(fs, ss, "logit", cfg, &a) == ODIWI_OK);
  REQUIRE(odiwi_estimate(fs2, ss2, "logit", cfg, &b) == ODIWI_OK);
  double ba[2], bb[2];
  odiwi_result_coefficients(a, ba, 2);
  odiwi_result_coefficients(b, bb, 2);
  CHECK(std::abs(ba[1] - bb[1]) <= 1e-12);
  odiwi_result_free(a);
  odiwi_result_free(b);
  odiwi_first_stage_free(fs);
  odiwi_first_stage_free(fs2);
  odiwi_second_stage_free(ss);
  odiwi_second_stage_free(ss2);
  std::filesystem::remove(fpath);
  std::filesystem::remove(spath);
}

TEST_CASE("design solve and weights") {
  odiwi_design* des = nullptr;
  REQUIRE(odiwi_design_solve(R"({"beta": [0, 1], "range": [-3, 3], "resolution": 2001})", &des) ==
          ODIWI_OK);
  REQUIRE(odiwi_design_size(des) == 2);
  CHECK(odiwi_design_dim(des) == 1);
  double s[2], w[2];
  CHECK(odiwi_design_support(des, s, 2) == ODIWI_OK);
  CHECK(odiwi_design_weights(des, w, 2) == ODIWI_OK);
  CHECK(std::abs(std::abs(s[0]) - 1.5434) < 0.02);
  CHECK(w[0] == doctest::Approx(0.5).epsilon(0.02));
  CHECK(odiwi_design_certificate(des) <= 2.0 + 1e-4);

  char* js = nullptr;
  REQUIRE(odiwi_design_json(des, &js) == ODIWI_OK);
  odiwi_design* back = nullptr;
  const std::string text = take_string(js);
  REQUIRE(odiwi_design_from_json(text.c_str(), &back) == ODIWI_OK);
  CHECK(odiwi_design_size(back) == 2);

  odiwi_first_stage* fs = nullptr;
  odiwi_second_stage* ss = nullptr;
  REQUIRE(odiwi_generate(kSmallSim, 0, 2, &fs, &ss) == ODIWI_OK);
  char *csv = nullptr, *meta = nullptr;
  REQUIRE(odiwi_importance_weights_csv(fs, back, "{}", &csv, &meta) == ODIWI_OK);
  const std::string wcsv = take_string(csv);
  CHECK(wcsv.rfind("id,weight,raw_ratio\n", 0) == 0);
  CHECK(std::count(wcsv.begin(), wcsv.end(), '\n') == 151);
  CHECK(take_string(meta).find("bandwidth") != std::string::npos);

  odiwi_design* bad = nullptr;
  CHECK(odiwi_design_solve(R"({"beta": [0, 1], "range": [1, 1]})", &bad) == ODIWI_DEGENERATE_RANGE);
  CHECK(odiwi_status_category(ODIWI_DEGENERATE_RANGE) == ODIWI_CATEGORY_NUMERICAL);
  CHECK(odiwi_design_from_json("{\"weights\": 1}", &bad) == ODIWI_SCHEMA_ERROR);
  odiwi_design_free(des);
  odiwi_design_free(back);
  odiwi_first_stage_free(fs);
  odiwi_second_stage_free(ss);
}

TEST_CASE("simulate and bootstrap") {
  odiwi_experiment* exp = nullptr;
  REQUIRE(odiwi_simulate(R"({"n_star": 120, "n": 300, "reps": 2, "seed": 4, "iterations": 1,
                             "num_inits": 1, "beta_x_grid": [0, 1]})",
                         &exp) == ODIWI_OK);
  char* m = nullptr;
  REQUIRE(odiwi_experiment_metrics_csv(exp, &m) == ODIWI_OK);
  const std::string metrics = take_string(m);
  CHECK(metrics.rfind("estimator,beta_x_true,rep,beta_hat,error,stage1_rmse,flags\n", 0) == 0);
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 1 + 8);
  char* meta = nullptr;
  REQUIRE(odiwi_experiment_metadata_json(exp, &meta) == ODIWI_OK);
  CHECK(take_string(meta).find("\"seed\"") != std::string::npos);
  odiwi_experiment_free(exp);
  CHECK(odiwi_simulate(R"({"n": 100, "repz": 2})", &exp) == ODIWI_INVALID_ARGUMENT);

  odiwi_first_stage* fs = nullptr;
  odiwi_second_stage* ss = nullptr;
  REQUIRE(odiwi_generate(kSmallSim, 0, 3, &fs, &ss) == ODIWI_OK);
  odiwi_bootstrap* boot = nullptr;
  REQUIRE(odiwi_bootstrap_run(fs, ss, "logit",
                              R"({"iterations": 1, "num_inits": 1, "bootstrap": 50, "bootstrap_seed": 2})",
                              &boot) == ODIWI_OK);
  double point, lo, hi, se;
  REQUIRE(odiwi_bootstrap_interval(boot, &point, &lo, &hi, &se) == ODIWI_OK);
  CHECK(lo <= hi);
  CHECK(se > 0.0);
  odiwi_bootstrap_free(boot);
  CHECK(odiwi_bootstrap_run(fs, ss, "logit", R"({"bootstrap": 10})", &boot) == ODIWI_INVALID_ARGUMENT);
  odiwi_first_stage_free(fs);
  odiwi_second_stage_free(ss);
}

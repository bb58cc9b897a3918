#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace odiwi {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Training set of the exposure model: true exposures at monitoring sites and
// the geographic covariates observed there.
struct FirstStageData {
  std::vector<std::string> ids;
  MatrixXd exposures;   // n* x p
  MatrixXd covariates;  // n* x d

  Eigen::Index rows() const { return exposures.rows(); }
  int exposure_dim() const { return static_cast<int>(exposures.cols()); }
  int covariate_dim() const { return static_cast<int>(covariates.cols()); }
  void validate() const;
};

// Affine predictor of every exposure component from the covariates.
struct LinearPredictor {
  MatrixXd coefficients;  // (d + 1) x p, intercept in row 0
  double ridge = 0.0;
  std::string weight_checksum;

  int covariate_dim() const { return static_cast<int>(coefficients.rows()) - 1; }
};

// Minimizes (1/n*) sum_i w_i |h(r_i) - x_i|^2 + ridge * |slopes|^2 with the
// weights rescaled to mean one; the intercept is not penalized.
LinearPredictor fit_weighted_linear(const FirstStageData& data, const VectorXd& weights,
                                    double ridge);

// x_hat = intercept + r * slopes, one row per input row.
MatrixXd predict_exposure(const LinearPredictor& predictor, const MatrixXd& covariates);

// FNV-1a over the bit patterns of the weights.
std::string weight_checksum(const VectorXd& weights);

}  // namespace odiwi

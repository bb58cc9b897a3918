#include "odiwi/stage1.hpp"

#include "odiwi/error.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <cstdio>

namespace odiwi {

void FirstStageData::validate() const {
  if (exposures.rows() != covariates.rows())
    throw Error(ErrorCode::DimensionMismatch, "exposure and covariate row counts differ");
  if (!ids.empty() && static_cast<Eigen::Index>(ids.size()) != exposures.rows())
    throw Error(ErrorCode::DimensionMismatch, "id count differs from row count");
  if (exposures.cols() < 1) throw Error(ErrorCode::InvalidArgument, "first stage has no exposure");
  if (rows() <= covariates.cols())
    throw Error(ErrorCode::InvalidArgument, "first stage needs more rows than covariates");
  if (!exposures.allFinite() || !covariates.allFinite())
    throw Error(ErrorCode::InvalidArgument, "first stage contains non-finite values");
}

std::string weight_checksum(const VectorXd& weights) {
  std::uint64_t h = 1469598103934665603ULL;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    std::uint64_t bits;
    const double v = weights(i);
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

LinearPredictor fit_weighted_linear(const FirstStageData& data, const VectorXd& weights,
                                    double ridge) {
  data.validate();
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.covariate_dim();
  if (weights.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "one weight per first-stage row is required");
  if (!(ridge >= 0.0) || !std::isfinite(ridge))
    throw Error(ErrorCode::InvalidArgument, "ridge penalty must be non-negative");
  if ((weights.array() < 0.0).any() || !weights.allFinite())
    throw Error(ErrorCode::InvalidArgument, "importance weights must be finite and non-negative");
  const double mean = weights.mean();
  if (!(mean > 0.0)) throw Error(ErrorCode::AllZeroWeights, "all first-stage weights are zero");

  // Weighted ridge as an augmented least-squares problem:
  // [sqrt(w/n) A; sqrt(ridge) P] b ~ [sqrt(w/n) x; 0].
  const Eigen::Index penalty_rows = ridge > 0.0 ? d : 0;
  MatrixXd a = MatrixXd::Zero(n + penalty_rows, d + 1);
  MatrixXd b = MatrixXd::Zero(n + penalty_rows, data.exposure_dim());
  const double nn = static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = std::sqrt(weights(i) / mean / nn);
    a(i, 0) = s;
    a.row(i).tail(d) = s * data.covariates.row(i);
    b.row(i) = s * data.exposures.row(i);
  }
  for (Eigen::Index k = 0; k < penalty_rows; ++k) a(n + k, k + 1) = std::sqrt(ridge);

  Eigen::ColPivHouseholderQR<MatrixXd> qr(a);
  qr.setThreshold(1e-12);
  if (qr.rank() < a.cols())
    throw Error(ErrorCode::RankDeficient, "weighted first-stage covariates are collinear");

  LinearPredictor out;
  out.coefficients = qr.solve(b);
  out.ridge = ridge;
  out.weight_checksum = weight_checksum(weights);
  if (!out.coefficients.allFinite())
    throw Error(ErrorCode::RankDeficient, "first-stage solution is not finite");
  return out;
}

MatrixXd predict_exposure(const LinearPredictor& predictor, const MatrixXd& covariates) {
  if (covariates.cols() != predictor.covariate_dim())
    throw Error(ErrorCode::DimensionMismatch,
                "predictor expects " + std::to_string(predictor.covariate_dim()) +
                    " covariates, got " + std::to_string(covariates.cols()));
  const Eigen::Index d = predictor.covariate_dim();
  MatrixXd out = covariates * predictor.coefficients.bottomRows(d);
  out.rowwise() += predictor.coefficients.row(0);
  return out;
}

}  // namespace odiwi

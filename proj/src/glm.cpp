#include "odiwi/glm.hpp"

#include "odiwi/design.hpp"
#include "odiwi/error.hpp"

#include <algorithm>
#include <cmath>

namespace odiwi {

namespace {

double expit(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// log(1 + exp(eta)) without overflow.
double log1pexp(double eta) {
  if (eta > 35) return eta;
  if (eta < -35) return std::exp(eta);
  return std::log1p(std::exp(eta));
}

VectorXd linear_predictor(const MatrixXd& x, const VectorXd& beta, const VectorXd& offset) {
  VectorXd eta = x * beta;
  if (offset.size() > 0) eta += offset;
  return eta;
}

void check_inputs(const MatrixXd& x, const VectorXd& y, const Family& family,
                  const VectorXd& offset) {
  if (x.rows() != y.size())
    throw Error(ErrorCode::DimensionMismatch, "design matrix and outcome lengths differ");
  if (offset.size() != 0 && offset.size() != y.size())
    throw Error(ErrorCode::DimensionMismatch, "offset length differs from outcome length");
  if (x.rows() <= x.cols())
    throw Error(ErrorCode::InvalidArgument, "need more rows than coefficients");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!family.in_support(y(i)))
      throw Error(ErrorCode::InvalidArgument,
                  "outcome " + std::to_string(y(i)) + " outside family support at row " +
                      std::to_string(i + 1));
  }
}

}  // namespace

double Family::mean(double eta) const {
  return kind == FamilyKind::bernoulli_logit ? expit(eta) : eta;
}

double Family::variance(double mu) const {
  return kind == FamilyKind::bernoulli_logit ? mu * (1.0 - mu) : 1.0;
}

double Family::dmu_deta(double eta) const {
  if (kind == FamilyKind::gaussian_identity) return 1.0;
  const double mu = expit(eta);
  return mu * (1.0 - mu);
}

bool Family::in_support(double y) const {
  if (kind == FamilyKind::bernoulli_logit) return y == 0.0 || y == 1.0;
  return std::isfinite(y);
}

std::string to_string(FamilyKind kind) {
  return kind == FamilyKind::bernoulli_logit ? "logit" : "gaussian";
}

FamilyKind parse_family(const std::string& name) {
  if (name == "logit" || name == "bernoulli" || name == "bernoulli_logit" || name == "binomial")
    return FamilyKind::bernoulli_logit;
  if (name == "gaussian" || name == "gaussian_identity" || name == "identity" || name == "normal")
    return FamilyKind::gaussian_identity;
  throw Error(ErrorCode::InvalidArgument, "unknown family '" + name + "'");
}

// ---------------------------------------------------------------------------
// FeatureMap

FeatureMap::FeatureMap(std::vector<Term> terms) : terms_(std::move(terms)) {
  if (terms_.empty() || terms_.front().kind != TermKind::intercept)
    throw Error(ErrorCode::InvalidArgument, "feature map must start with the intercept");
  for (std::size_t i = 1; i < terms_.size(); ++i) {
    if (terms_[i].kind == TermKind::intercept)
      throw Error(ErrorCode::InvalidArgument, "feature map has a second intercept");
    if (terms_[i].index < 0)
      throw Error(ErrorCode::InvalidArgument, "negative feature index");
  }
}

FeatureMap FeatureMap::standard(int exposure_dim, int covariate_dim, int exposure_degree) {
  if (exposure_dim < 1 || covariate_dim < 0 || exposure_degree < 1)
    throw Error(ErrorCode::InvalidArgument, "invalid feature map dimensions");
  std::vector<Term> terms{{TermKind::intercept, 0, 1}};
  for (int k = 0; k < exposure_dim; ++k) terms.push_back({TermKind::exposure, k, 1});
  for (int k = 0; k < covariate_dim; ++k) terms.push_back({TermKind::covariate, k, 1});
  for (int deg = 2; deg <= exposure_degree; ++deg)
    for (int k = 0; k < exposure_dim; ++k) terms.push_back({TermKind::exposure_power, k, deg});
  return FeatureMap(std::move(terms));
}

int FeatureMap::exposure_dim() const {
  int dim = 0;
  for (const auto& t : terms_)
    if (t.kind == TermKind::exposure || t.kind == TermKind::exposure_power)
      dim = std::max(dim, t.index + 1);
  return dim;
}

int FeatureMap::covariate_dim() const {
  int dim = 0;
  for (const auto& t : terms_)
    if (t.kind == TermKind::covariate) dim = std::max(dim, t.index + 1);
  return dim;
}

FeatureMap FeatureMap::exposure_only() const {
  std::vector<Term> kept;
  for (const auto& t : terms_)
    if (t.kind != TermKind::covariate) kept.push_back(t);
  return FeatureMap(std::move(kept));
}

std::vector<int> FeatureMap::exposure_term_indices() const {
  std::vector<int> idx;
  for (int i = 0; i < dim(); ++i)
    if (terms_[i].kind != TermKind::covariate) idx.push_back(i);
  return idx;
}

VectorXd FeatureMap::evaluate(const VectorXd& x, const VectorXd& z) const {
  if (x.size() < exposure_dim() || z.size() < covariate_dim())
    throw Error(ErrorCode::DimensionMismatch, "point has fewer components than the feature map");
  VectorXd phi(dim());
  for (int i = 0; i < dim(); ++i) {
    const Term& t = terms_[i];
    switch (t.kind) {
      case TermKind::intercept: phi(i) = 1.0; break;
      case TermKind::exposure: phi(i) = x(t.index); break;
      case TermKind::covariate: phi(i) = z(t.index); break;
      case TermKind::exposure_power: phi(i) = std::pow(x(t.index), t.power); break;
    }
  }
  return phi;
}

MatrixXd FeatureMap::design_matrix(const MatrixXd& x, const MatrixXd& z) const {
  if (x.cols() < exposure_dim() || (covariate_dim() > 0 && z.cols() < covariate_dim()))
    throw Error(ErrorCode::DimensionMismatch, "data has fewer columns than the feature map");
  if (covariate_dim() > 0 && z.rows() != x.rows())
    throw Error(ErrorCode::DimensionMismatch, "exposure and covariate row counts differ");
  MatrixXd out(x.rows(), dim());
  for (int i = 0; i < dim(); ++i) {
    const Term& t = terms_[i];
    switch (t.kind) {
      case TermKind::intercept: out.col(i).setOnes(); break;
      case TermKind::exposure: out.col(i) = x.col(t.index); break;
      case TermKind::covariate: out.col(i) = z.col(t.index); break;
      case TermKind::exposure_power:
        out.col(i) = x.col(t.index).array().pow(t.power).matrix();
        break;
    }
  }
  return out;
}

std::vector<std::string> FeatureMap::names() const {
  const int p = exposure_dim();
  auto xname = [p](int k) { return p == 1 ? std::string("x") : "x" + std::to_string(k + 1); };
  std::vector<std::string> out;
  for (const auto& t : terms_) {
    switch (t.kind) {
      case TermKind::intercept: out.emplace_back("intercept"); break;
      case TermKind::exposure: out.push_back(xname(t.index)); break;
      case TermKind::covariate: out.push_back("z" + std::to_string(t.index + 1)); break;
      case TermKind::exposure_power:
        out.push_back(xname(t.index) + "^" + std::to_string(t.power));
        break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Likelihood

double glm_loglik(const MatrixXd& x, const VectorXd& y, const Family& family,
                  const VectorXd& beta, const VectorXd& offset) {
  const VectorXd eta = linear_predictor(x, beta, offset);
  double ll = 0.0;
  if (family.kind == FamilyKind::bernoulli_logit) {
    for (Eigen::Index i = 0; i < y.size(); ++i) ll += y(i) * eta(i) - log1pexp(eta(i));
  } else {
    const double phi = family.dispersion;
    const double rss = (y - eta).squaredNorm();
    ll = -0.5 * static_cast<double>(y.size()) * std::log(2.0 * M_PI * phi) - 0.5 * rss / phi;
  }
  return ll;
}

VectorXd glm_score(const MatrixXd& x, const VectorXd& y, const Family& family,
                   const VectorXd& beta, const VectorXd& offset) {
  const VectorXd eta = linear_predictor(x, beta, offset);
  VectorXd resid(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) resid(i) = y(i) - family.mean(eta(i));
  VectorXd score = x.transpose() * resid;
  if (family.kind == FamilyKind::gaussian_identity) score /= family.dispersion;
  return score;
}

namespace {

void check_rank(const MatrixXd& x) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols())
    throw Error(ErrorCode::RankDeficient, "design matrix is not of full column rank");
}

GlmFit fit_gaussian(const MatrixXd& x, const VectorXd& y, const VectorXd& offset) {
  VectorXd target = y;
  if (offset.size() > 0) target -= offset;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols())
    throw Error(ErrorCode::RankDeficient, "design matrix is not of full column rank");
  GlmFit fit;
  fit.beta = qr.solve(target);
  const double rss = (target - x * fit.beta).squaredNorm();
  const double dof = static_cast<double>(x.rows() - x.cols());
  // A perfect fit leaves no residual variance; keep phi positive.
  const double sigma2 = std::max(rss / dof, 1e-300);
  fit.family = Family::gaussian_identity(sigma2);
  const MatrixXd xtx = x.transpose() * x;
  fit.cov = sigma2 * xtx.ldlt().solve(MatrixXd::Identity(x.cols(), x.cols()));
  fit.loglik = glm_loglik(x, y, fit.family, fit.beta, offset);
  fit.score_norm = glm_score(x, y, fit.family, fit.beta, offset).norm();
  fit.iterations = 1;
  fit.converged = true;
  return fit;
}

}  // namespace

GlmFit fit_glm(const MatrixXd& x, const VectorXd& y, const Family& family,
               const VectorXd& offset, const GlmOptions& options) {
  check_inputs(x, y, family, offset);
  if (family.kind == FamilyKind::gaussian_identity) return fit_gaussian(x, y, offset);

  check_rank(x);
  const double ysum = y.sum();
  if (ysum == 0.0 || ysum == static_cast<double>(y.size()))
    throw Error(ErrorCode::Separation, "outcome is constant; logistic likelihood is unbounded");

  const Eigen::Index n = x.rows();
  const Eigen::Index k = x.cols();
  GlmFit fit;
  fit.family = family;
  VectorXd beta = VectorXd::Zero(k);
  double ll = glm_loglik(x, y, family, beta, offset);
  VectorXd w(n), resid(n);

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    const VectorXd eta = linear_predictor(x, beta, offset);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = family.mean(eta(i));
      w(i) = std::max(mu * (1.0 - mu), 1e-300);
      resid(i) = y(i) - mu;
    }
    const VectorXd score = x.transpose() * resid;
    fit.iterations = iter - 1;
    if (score.norm() <= options.score_tol) {
      fit.converged = true;
      break;
    }
    const MatrixXd info = x.transpose() * w.asDiagonal() * x;
    const VectorXd step = info.ldlt().solve(score);

    // Step halving keeps the log-likelihood non-decreasing up to rounding,
    // which near the optimum exceeds the true change.
    const double slack = 1e-12 * std::max(1.0, std::abs(ll));
    double scale = 1.0;
    VectorXd trial = beta + step;
    double trial_ll = glm_loglik(x, y, family, trial, offset);
    for (int halving = 0; halving < 30 && !(trial_ll >= ll - slack); ++halving) {
      scale *= 0.5;
      trial = beta + scale * step;
      trial_ll = glm_loglik(x, y, family, trial, offset);
    }
    if (!(trial_ll >= ll - slack)) {
      // No ascent direction left at working precision.
      fit.iterations = iter;
      break;
    }
    beta = trial;
    ll = trial_ll;
    if (beta.cwiseAbs().maxCoeff() > options.coef_cap) {
      throw Error(ErrorCode::Separation,
                  "coefficient magnitude exceeded " + std::to_string(options.coef_cap) +
                      "; data look (quasi-)separated");
    }
    fit.iterations = iter;
  }

  const VectorXd eta = linear_predictor(x, beta, offset);
  double worst_residual = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = family.mean(eta(i));
    w(i) = mu * (1.0 - mu);
    worst_residual = std::max(worst_residual, std::abs(y(i) - mu));
  }
  // Complete separation: the score can vanish before the cap is reached
  // because every fitted probability has already run to 0 or 1.
  if (worst_residual < 1e-6)
    throw Error(ErrorCode::Separation, "outcomes are perfectly separated by the predictors");
  fit.beta = beta;
  fit.loglik = ll;
  fit.score_norm = glm_score(x, y, family, beta, offset).norm();
  fit.converged = fit.score_norm <= options.score_tol;
  const MatrixXd info = x.transpose() * w.asDiagonal() * x;
  fit.cov = info.ldlt().solve(MatrixXd::Identity(k, k));
  fit.cov = 0.5 * (fit.cov + fit.cov.transpose()).eval();
  if (!fit.converged)
    throw Error(ErrorCode::NoConvergence,
                "IRLS did not converge in " + std::to_string(options.max_iter) +
                    " iterations (score norm " + std::to_string(fit.score_norm) + ")");
  return fit;
}

// ---------------------------------------------------------------------------

double model_weight(const VectorXd& x, const VectorXd& beta, const Family& family,
                    const FeatureMap& features, const VectorXd& z) {
  if (beta.size() != features.dim())
    throw Error(ErrorCode::DimensionMismatch, "coefficient length does not match feature map");
  const double eta = beta.dot(features.evaluate(x, z));
  const double mu = family.mean(eta);
  const double d = family.dmu_deta(eta);
  const double v = family.dispersion * family.variance(mu);
  if (v <= 0.0) return 0.0;
  return d * d / v;
}

MatrixXd information_matrix(const Design& design, const VectorXd& beta, const Family& family,
                            const FeatureMap& features) {
  if (design.size() == 0) throw Error(ErrorCode::EmptyDesign, "design has no support points");
  validate_weights(design);
  const int k = features.dim();
  MatrixXd info = MatrixXd::Zero(k, k);
  for (Eigen::Index j = 0; j < design.size(); ++j) {
    const VectorXd xj = design.support.row(j).transpose();
    const VectorXd phi = features.evaluate(xj);
    info.noalias() += design.weights(j) * model_weight(xj, beta, family, features) * phi * phi.transpose();
  }
  return info;
}

}  // namespace odiwi

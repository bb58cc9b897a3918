#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace odiwi {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class FamilyKind { bernoulli_logit, gaussian_identity };

// Outcome distribution, link and dispersion of a GLM.
struct Family {
  FamilyKind kind = FamilyKind::bernoulli_logit;
  double dispersion = 1.0;

  static Family bernoulli_logit() { return {FamilyKind::bernoulli_logit, 1.0}; }
  static Family gaussian_identity(double sigma2 = 1.0) {
    return {FamilyKind::gaussian_identity, sigma2};
  }

  double mean(double eta) const;
  double variance(double mu) const;  // V(mu), without dispersion
  double dmu_deta(double eta) const;
  bool in_support(double y) const;
};

std::string to_string(FamilyKind kind);
FamilyKind parse_family(const std::string& name);

enum class TermKind { intercept, exposure, covariate, exposure_power };

struct Term {
  TermKind kind = TermKind::intercept;
  int index = 0;  // exposure or covariate component
  int power = 1;  // exposure_power only
};

// Phi(x, z): ordered feature terms; the first term is always the intercept.
class FeatureMap {
public:
  FeatureMap() = default;
  explicit FeatureMap(std::vector<Term> terms);

  // (1, x_1..x_p, z_1..z_q) plus x_k^2..x_k^degree when degree > 1.
  static FeatureMap standard(int exposure_dim, int covariate_dim, int exposure_degree = 1);

  const std::vector<Term>& terms() const { return terms_; }
  int dim() const { return static_cast<int>(terms_.size()); }
  int exposure_dim() const;
  int covariate_dim() const;
  bool uses_covariates() const { return covariate_dim() > 0; }

  // Terms that only involve exposures; covariate terms dropped.
  FeatureMap exposure_only() const;
  // Positions of the exposure_only() terms within this map.
  std::vector<int> exposure_term_indices() const;

  VectorXd evaluate(const VectorXd& x, const VectorXd& z = VectorXd()) const;
  MatrixXd design_matrix(const MatrixXd& x, const MatrixXd& z = MatrixXd()) const;
  std::vector<std::string> names() const;

private:
  std::vector<Term> terms_;
};

struct GlmFit {
  VectorXd beta;
  MatrixXd cov;
  double loglik = 0.0;
  double score_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  Family family;
};

struct GlmOptions {
  int max_iter = 100;
  double score_tol = 1e-8;
  double coef_cap = 30.0;
};

double glm_loglik(const MatrixXd& x, const VectorXd& y, const Family& family,
                  const VectorXd& beta, const VectorXd& offset = VectorXd());
VectorXd glm_score(const MatrixXd& x, const VectorXd& y, const Family& family,
                   const VectorXd& beta, const VectorXd& offset = VectorXd());

// Maximum likelihood by IRLS with step halving. For gaussian_identity the
// returned family carries the residual-variance estimate RSS / (n - |Phi|).
GlmFit fit_glm(const MatrixXd& x, const VectorXd& y, const Family& family,
               const VectorXd& offset = VectorXd(), const GlmOptions& options = {});

// u(x) = (dmu/deta)^2 / (phi V(mu)).
double model_weight(const VectorXd& x, const VectorXd& beta, const Family& family,
                    const FeatureMap& features, const VectorXd& z = VectorXd());

struct Design;

MatrixXd information_matrix(const Design& design, const VectorXd& beta,
                            const Family& family, const FeatureMap& features);

}  // namespace odiwi

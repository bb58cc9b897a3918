#pragma once

#include "odiwi/glm.hpp"

#include <string>

namespace odiwi {

// Approximate design: support points (one row each) with probability weights.
struct Design {
  MatrixXd support;
  VectorXd weights;

  Eigen::Index size() const { return weights.size(); }
  int dim() const { return static_cast<int>(support.cols()); }
};

// Throws unless weights are non-negative and sum to one within 1e-12.
void validate_weights(const Design& design);

enum class Criterion { D, A, E };

std::string to_string(Criterion criterion);
Criterion parse_criterion(const std::string& name);

// Criterion value to be maximized: log det, -trace(inverse), or min eigenvalue.
double criterion_value(Criterion criterion, const MatrixXd& info);

struct CandidateGrid {
  MatrixXd points;  // N x p
  MatrixXd bounds;  // p x 2, columns are [min, max]

  Eigen::Index size() const { return points.rows(); }
  int dim() const { return static_cast<int>(points.cols()); }
  double max_range() const;
};

// Equally spaced grid over the range of the imputed exposures. For p = 2 the
// grid is restricted to the convex hull of the exposures.
CandidateGrid build_candidate_grid(const MatrixXd& exposures, int resolution);

// One-dimensional grid on [lo, hi].
CandidateGrid grid_on_interval(double lo, double hi, int resolution);

struct DesignOptions {
  Criterion criterion = Criterion::D;
  double tol = 1e-5;
  int max_iter = 5000;
  double merge_radius = -1.0;  // negative: 1% of the grid's largest range
  double min_weight = 1e-4;
  bool prune = true;
};

struct DesignSolution {
  Design design;
  Criterion criterion = Criterion::D;
  double objective = 0.0;
  // max over the grid of the D-sensitivity d(x); equals |Phi| at the D-optimum.
  double certificate = 0.0;
  double min_support_sensitivity = 0.0;
  int iterations = 0;
  bool converged = false;
  bool near_flat = false;
  // criterion never decreased across iterations
  bool monotone = true;
};

// Locally optimal approximate design on the grid via multiplicative weight
// updates, started from the uniform design. `features` must not depend on
// second-stage covariates.
DesignSolution solve_optimal_design(const CandidateGrid& grid, const VectorXd& beta,
                                    const Family& family, const FeatureMap& features,
                                    const DesignOptions& options = {});

// d(x) = u(x) Phi(x)' I(design, beta)^-1 Phi(x).
double sensitivity(const VectorXd& x, const Design& design, const VectorXd& beta,
                   const Family& family, const FeatureMap& features);

// Drops weights below min_weight, merges support points closer than
// merge_radius at their weighted centroid, keeps at most max_support of the
// heaviest points and renormalizes.
Design prune_design(const Design& design, double merge_radius, double min_weight,
                    int max_support = -1);

}  // namespace odiwi

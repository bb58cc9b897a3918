#include "odiwi/design.hpp"

#include "odiwi/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace odiwi {

void validate_weights(const Design& design) {
  if (design.support.rows() != design.weights.size())
    throw Error(ErrorCode::DimensionMismatch, "support and weight counts differ");
  if (design.size() == 0) throw Error(ErrorCode::EmptyDesign, "design has no support points");
  if ((design.weights.array() < 0.0).any())
    throw Error(ErrorCode::InvalidArgument, "design weights must be non-negative");
  if (std::abs(design.weights.sum() - 1.0) > 1e-12)
    throw Error(ErrorCode::InvalidArgument, "design weights must sum to one");
}

std::string to_string(Criterion criterion) {
  switch (criterion) {
    case Criterion::D: return "D";
    case Criterion::A: return "A";
    case Criterion::E: return "E";
  }
  return "?";
}

Criterion parse_criterion(const std::string& name) {
  if (name == "D" || name == "d") return Criterion::D;
  if (name == "A" || name == "a") return Criterion::A;
  if (name == "E" || name == "e") return Criterion::E;
  throw Error(ErrorCode::InvalidArgument, "unknown design criterion '" + name + "'");
}

double criterion_value(Criterion criterion, const MatrixXd& info) {
  switch (criterion) {
    case Criterion::D: {
      Eigen::LDLT<MatrixXd> ldlt(info);
      const VectorXd diag = ldlt.vectorD();
      if ((diag.array() <= 0.0).any()) return -std::numeric_limits<double>::infinity();
      return diag.array().log().sum();
    }
    case Criterion::A: {
      Eigen::LLT<MatrixXd> llt(info);
      if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
      return -llt.solve(MatrixXd::Identity(info.rows(), info.cols())).trace();
    }
    case Criterion::E: {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(info, Eigen::EigenvaluesOnly);
      return es.eigenvalues()(0);
    }
  }
  return 0.0;
}

double CandidateGrid::max_range() const {
  return (bounds.col(1) - bounds.col(0)).maxCoeff();
}

// ---------------------------------------------------------------------------
// Candidate grids

namespace {

using Point2 = Eigen::Vector2d;

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Andrew's monotone chain; counter-clockwise, collinear points dropped.
std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

bool inside_hull(const std::vector<Point2>& hull, const Point2& q, double tol) {
  if (hull.size() == 1) return (q - hull[0]).norm() <= tol;
  if (hull.size() == 2) {
    const Point2 ab = hull[1] - hull[0];
    const double t = std::clamp((q - hull[0]).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    return (hull[0] + t * ab - q).norm() <= tol;
  }
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point2& a = hull[i];
    const Point2& b = hull[(i + 1) % hull.size()];
    // signed distance of q to the edge line, positive inside
    if (cross(a, b, q) / (b - a).norm() < -tol) return false;
  }
  return true;
}

VectorXd linspace(double lo, double hi, int n) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  v(n - 1) = hi;
  return v;
}

}  // namespace

CandidateGrid grid_on_interval(double lo, double hi, int resolution) {
  if (resolution < 2) throw Error(ErrorCode::InvalidArgument, "grid resolution must be >= 2");
  if (!(hi > lo)) throw Error(ErrorCode::DegenerateRange, "grid range is empty");
  CandidateGrid grid;
  grid.points = linspace(lo, hi, resolution);
  grid.bounds.resize(1, 2);
  grid.bounds << lo, hi;
  return grid;
}

CandidateGrid build_candidate_grid(const MatrixXd& exposures, int resolution) {
  const Eigen::Index n = exposures.rows();
  const int p = static_cast<int>(exposures.cols());
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least two exposures for a grid");
  if (resolution < 2) throw Error(ErrorCode::InvalidArgument, "grid resolution must be >= 2");
  if (p != 1 && p != 2)
    throw Error(ErrorCode::InvalidArgument, "candidate grids support exposure dimension 1 or 2");

  MatrixXd bounds(p, 2);
  for (int k = 0; k < p; ++k) {
    bounds(k, 0) = exposures.col(k).minCoeff();
    bounds(k, 1) = exposures.col(k).maxCoeff();
    if (!(bounds(k, 1) > bounds(k, 0)))
      throw Error(ErrorCode::DegenerateRange, "all exposures are identical in dimension " +
                                                  std::to_string(k + 1));
  }
  if (p == 1) return grid_on_interval(bounds(0, 0), bounds(0, 1), resolution);

  std::vector<Point2> pts(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) pts[i] = exposures.row(i).transpose();
  const auto hull = convex_hull(std::move(pts));
  const double scale = std::max(bounds(0, 1) - bounds(0, 0), bounds(1, 1) - bounds(1, 0));
  const double tol = 1e-9 * scale;

  const VectorXd g0 = linspace(bounds(0, 0), bounds(0, 1), resolution);
  const VectorXd g1 = linspace(bounds(1, 0), bounds(1, 1), resolution);
  std::vector<Point2> kept;
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j) {
      const Point2 q(g0(i), g1(j));
      if (inside_hull(hull, q, tol)) kept.push_back(q);
    }
  if (kept.size() < 2)
    throw Error(ErrorCode::DegenerateRange, "convex hull of exposures contains < 2 grid points");

  CandidateGrid grid;
  grid.bounds = bounds;
  grid.points.resize(static_cast<Eigen::Index>(kept.size()), 2);
  for (std::size_t i = 0; i < kept.size(); ++i) grid.points.row(i) = kept[i].transpose();
  return grid;
}

// ---------------------------------------------------------------------------
// Optimal design

namespace {

void check_design_features(const FeatureMap& features, const VectorXd& beta, int p) {
  if (features.uses_covariates())
    throw Error(ErrorCode::InvalidArgument, "design feature map must not use covariates");
  if (beta.size() != features.dim())
    throw Error(ErrorCode::DimensionMismatch, "coefficient length does not match feature map");
  if (features.exposure_dim() > p)
    throw Error(ErrorCode::DimensionMismatch, "feature map needs more exposure components");
}

// Rows sqrt(u_j) Phi(x_j) so that I(w) = F' diag(w) F.
MatrixXd scaled_features(const MatrixXd& points, const VectorXd& beta, const Family& family,
                         const FeatureMap& features) {
  MatrixXd f(points.rows(), features.dim());
  for (Eigen::Index j = 0; j < points.rows(); ++j) {
    const VectorXd x = points.row(j).transpose();
    const double u = model_weight(x, beta, family, features);
    f.row(j) = std::sqrt(u) * features.evaluate(x).transpose();
  }
  return f;
}

bool nonsingular(const MatrixXd& info) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(info, Eigen::EigenvaluesOnly);
  const VectorXd ev = es.eigenvalues();
  return ev(0) > 1e-12 * std::max(1.0, ev(ev.size() - 1));
}

// Quadratic forms f_j' A f_j for every row of f.
VectorXd row_forms(const MatrixXd& f, const MatrixXd& a) {
  return (f * a).cwiseProduct(f).rowwise().sum();
}

double safe_max(const VectorXd& v) { return v.size() ? v.maxCoeff() : 0.0; }

}  // namespace

namespace {

// Moves mass toward the most sensitive grid point with the exact D-optimal
// step length.
void vertex_step(VectorXd& w, const VectorXd& deriv, int k) {
  Eigen::Index top = 0;
  const double dmax = deriv.maxCoeff(&top);
  if (!(dmax > k)) return;
  const double alpha = (dmax - k) / (k * (dmax - 1.0));
  w *= 1.0 - alpha;
  w(top) += alpha;
}

// Optimal pairwise exchanges between consecutive support points. For D the
// best shift from b to a is (d_a - d_b) / (2 (d_a d_b - d_ab^2)).
void neighbour_exchange(VectorXd& w, const MatrixXd& f) {
  MatrixXd info = f.transpose() * w.asDiagonal() * f;
  Eigen::Index prev = -1;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w(j) <= 0.0) continue;
    if (prev < 0) {
      prev = j;
      continue;
    }
    Eigen::LDLT<MatrixXd> ldlt(info);
    const VectorXd fa = f.row(prev).transpose();
    const VectorXd fb = f.row(j).transpose();
    const VectorXd ia = ldlt.solve(fa);
    const double da = fa.dot(ia);
    const double db = fb.dot(ldlt.solve(fb));
    const double dab = fb.dot(ia);
    const double denom = 2.0 * (da * db - dab * dab);
    if (denom > 0.0 && std::isfinite(denom)) {
      double delta = (da - db) / denom;
      delta = std::clamp(delta, -w(prev), w(j));
      if (delta == w(j)) {
        w(prev) += w(j);
        w(j) = 0.0;
      } else if (delta == -w(prev)) {
        w(j) += w(prev);
        w(prev) = 0.0;
      } else {
        w(prev) += delta;
        w(j) -= delta;
      }
      info.noalias() += delta * (fa * fa.transpose() - fb * fb.transpose());
    }
    if (w(j) > 0.0) prev = j;
  }
}

// Local continuous refinement of a pruned D-design. Merged support points
// sit at centroids between grid nodes, so each coordinate is line-searched
// within `radius` (inside the grid's bounding box) and the weights are
// re-balanced; log det never decreases.
void polish_d_design(Design& design, const VectorXd& beta, const Family& family,
                     const FeatureMap& features, const MatrixXd& bounds, double radius) {
  const int k = features.dim();
  auto logdet = [&](const Design& d) {
    const MatrixXd f = scaled_features(d.support, beta, family, features);
    return criterion_value(Criterion::D, f.transpose() * d.weights.asDiagonal() * f);
  };
  double current = logdet(design);
  if (!std::isfinite(current) || radius <= 0.0) return;
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int round = 0; round < 50; ++round) {
    const double start = current;
    for (Eigen::Index j = 0; j < design.size(); ++j) {
      for (Eigen::Index c = 0; c < design.support.cols(); ++c) {
        const double x0 = design.support(j, c);
        double a = std::max(bounds(c, 0), x0 - radius);
        double b = std::min(bounds(c, 1), x0 + radius);
        Design trial = design;
        auto at = [&](double v) {
          trial.support(j, c) = v;
          return logdet(trial);
        };
        double x1 = b - golden * (b - a), x2 = a + golden * (b - a);
        double f1 = at(x1), f2 = at(x2);
        for (int it = 0; it < 60 && b - a > 1e-12 * std::max(1.0, std::abs(x0)); ++it) {
          if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + golden * (b - a);
            f2 = at(x2);
          } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - golden * (b - a);
            f1 = at(x1);
          }
        }
        const double best_x = f1 > f2 ? x1 : x2;
        const double best_f = std::max(f1, f2);
        if (best_f > current) {
          design.support(j, c) = best_x;
          current = best_f;
        }
      }
    }
    for (int it = 0; it < 20; ++it) {
      const MatrixXd f = scaled_features(design.support, beta, family, features);
      const MatrixXd info = f.transpose() * design.weights.asDiagonal() * f;
      if (!nonsingular(info)) break;
      const VectorXd d = row_forms(f, info.ldlt().solve(MatrixXd::Identity(k, k)));
      Design trial = design;
      trial.weights = design.weights.cwiseProduct(d) / static_cast<double>(k);
      trial.weights /= trial.weights.sum();
      const double v = logdet(trial);
      if (!(v > current)) break;
      design = trial;
      current = v;
    }
    if (current - start <= 1e-15 * std::max(1.0, std::abs(current))) break;
  }
  // Restore an exact unit sum after the multiplicative steps.
  Eigen::Index heaviest = 0;
  design.weights.maxCoeff(&heaviest);
  design.weights(heaviest) += 1.0 - design.weights.sum();
}

}  // namespace

DesignSolution solve_optimal_design(const CandidateGrid& grid, const VectorXd& beta,
                                    const Family& family, const FeatureMap& features,
                                    const DesignOptions& options) {
  if (grid.size() < 2) throw Error(ErrorCode::DegenerateRange, "candidate grid has < 2 points");
  check_design_features(features, beta, grid.dim());

  const Eigen::Index n = grid.size();
  const int k = features.dim();
  const MatrixXd f = scaled_features(grid.points, beta, family, features);
  const MatrixXd identity = MatrixXd::Identity(k, k);

  VectorXd w = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  DesignSolution sol;
  sol.criterion = options.criterion;

  auto information = [&](const VectorXd& weights) -> MatrixXd {
    return f.transpose() * weights.asDiagonal() * f;
  };

  {
    const MatrixXd info0 = information(w);
    if (!nonsingular(info0))
      throw Error(ErrorCode::SingularInformation,
                  "information matrix of the uniform grid design is singular");
    const VectorXd d0 = row_forms(f, info0.ldlt().solve(identity));
    sol.near_flat = (d0.maxCoeff() - d0.minCoeff()) < options.tol;
  }

  double prev = -std::numeric_limits<double>::infinity();
  VectorXd best_w = w;
  double best_obj = prev;
  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    const MatrixXd info = information(w);
    const MatrixXd inv = info.ldlt().solve(identity);
    const double obj = criterion_value(options.criterion, info);
    if (obj < prev - 1e-12 * std::max(1.0, std::abs(prev))) sol.monotone = false;
    prev = obj;
    if (obj > best_obj) {
      best_obj = obj;
      best_w = w;
    }

    VectorXd deriv;
    double bound = 0.0;
    double exponent = 1.0;
    switch (options.criterion) {
      case Criterion::D:
        deriv = row_forms(f, inv);
        bound = static_cast<double>(k);
        break;
      case Criterion::A:
        deriv = row_forms(f, inv * inv);
        bound = inv.trace();
        exponent = 0.5;
        break;
      case Criterion::E: {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(info);
        const VectorXd v = es.eigenvectors().col(0);
        deriv = (f * v).array().square().matrix();
        bound = es.eigenvalues()(0);
        exponent = 0.5;
        break;
      }
    }
    if (safe_max(deriv) <= bound * (1.0 + (options.criterion == Criterion::D ? options.tol / k
                                                                              : options.tol))) {
      sol.converged = true;
      break;
    }
    if (bound <= 0.0) break;
    if (options.criterion == Criterion::D) {
      vertex_step(w, deriv, k);
      neighbour_exchange(w, f);
      const MatrixXd inv2 = information(w).ldlt().solve(identity);
      deriv = row_forms(f, inv2);
    }
    for (Eigen::Index j = 0; j < n; ++j) w(j) *= std::pow(deriv(j) / bound, exponent);
    w /= w.sum();
  }
  sol.iterations = iter;
  if (options.criterion != Criterion::D) w = best_w;
  if (!sol.converged && options.criterion == Criterion::D)
    throw Error(ErrorCode::NoConvergence,
                "design solver did not reach the equivalence bound in " +
                    std::to_string(options.max_iter) + " iterations");

  Design raw{grid.points, w};
  if (options.prune) {
    const double radius =
        options.merge_radius >= 0.0 ? options.merge_radius : 0.01 * grid.max_range();
    sol.design = prune_design(raw, radius, options.min_weight, k * (k + 1) / 2);
    if (options.criterion == Criterion::D) {
      // Polished points can run into each other on coarse grids.
      for (int pass = 0; pass < 5; ++pass) {
        polish_d_design(sol.design, beta, family, features, grid.bounds, radius);
        const Eigen::Index before = sol.design.size();
        sol.design = prune_design(sol.design, radius, options.min_weight, k * (k + 1) / 2);
        if (sol.design.size() == before) break;
      }
    }
  } else {
    sol.design = raw;
  }

  const MatrixXd fin = information_matrix(sol.design, beta, family, features);
  sol.objective = criterion_value(options.criterion, fin);
  if (nonsingular(fin)) {
    const MatrixXd inv = fin.ldlt().solve(identity);
    sol.certificate = row_forms(f, inv).maxCoeff();
    const MatrixXd fs = scaled_features(sol.design.support, beta, family, features);
    sol.min_support_sensitivity = row_forms(fs, inv).minCoeff();
  } else {
    sol.certificate = std::numeric_limits<double>::infinity();
  }
  return sol;
}

double sensitivity(const VectorXd& x, const Design& design, const VectorXd& beta,
                   const Family& family, const FeatureMap& features) {
  const MatrixXd info = information_matrix(design, beta, family, features);
  if (!nonsingular(info))
    throw Error(ErrorCode::SingularInformation, "design information matrix is singular");
  const VectorXd phi = features.evaluate(x);
  return model_weight(x, beta, family, features) * phi.dot(info.ldlt().solve(phi));
}

// ---------------------------------------------------------------------------

Design prune_design(const Design& design, double merge_radius, double min_weight,
                    int max_support) {
  validate_weights(design);
  const int p = design.dim();

  struct Cluster {
    VectorXd center;
    double weight;
  };
  std::vector<Cluster> clusters;
  for (Eigen::Index j = 0; j < design.size(); ++j)
    if (design.weights(j) >= min_weight && design.weights(j) > 0.0)
      clusters.push_back({design.support.row(j).transpose(), design.weights(j)});
  if (clusters.empty())
    throw Error(ErrorCode::EmptyAfterPrune, "every design weight is below the pruning threshold");

  // Agglomerative merging of the closest pair of centroids.
  while (clusters.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i)
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        const double dist = (clusters[i].center - clusters[j].center).norm();
        if (dist < best) {
          best = dist;
          bi = i;
          bj = j;
        }
      }
    if (best > merge_radius) break;
    Cluster& a = clusters[bi];
    const Cluster& b = clusters[bj];
    const double total = a.weight + b.weight;
    a.center = (a.weight * a.center + b.weight * b.center) / total;
    a.weight = total;
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
  }

  if (max_support > 0 && static_cast<int>(clusters.size()) > max_support) {
    std::stable_sort(clusters.begin(), clusters.end(),
                     [](const Cluster& a, const Cluster& b) { return a.weight > b.weight; });
    clusters.resize(static_cast<std::size_t>(max_support));
  }
  // Ascending order along the first coordinate keeps output stable.
  std::stable_sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
    for (Eigen::Index k = 0; k < a.center.size(); ++k)
      if (a.center(k) != b.center(k)) return a.center(k) < b.center(k);
    return false;
  });

  double total = 0.0;
  for (const auto& c : clusters) total += c.weight;
  Design out;
  out.support.resize(static_cast<Eigen::Index>(clusters.size()), p);
  out.weights.resize(static_cast<Eigen::Index>(clusters.size()));
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    out.support.row(i) = clusters[i].center.transpose();
    out.weights(i) = clusters[i].weight / total;
  }
  // Push the rounding residue onto the heaviest point so the sum is exact.
  Eigen::Index heaviest = 0;
  out.weights.maxCoeff(&heaviest);
  out.weights(heaviest) += 1.0 - out.weights.sum();
  return out;
}

}  // namespace odiwi

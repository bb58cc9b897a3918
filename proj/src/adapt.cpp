#include "odiwi/adapt.hpp"

#include "odiwi/error.hpp"

#include <algorithm>
#include <cmath>

namespace odiwi {

std::string to_string(KernelShape shape) {
  switch (shape) {
    case KernelShape::gaussian: return "gaussian";
    case KernelShape::uniform: return "uniform";
    case KernelShape::triangle: return "triangle";
  }
  return "?";
}

KernelShape parse_kernel(const std::string& name) {
  if (name == "gaussian") return KernelShape::gaussian;
  if (name == "uniform") return KernelShape::uniform;
  if (name == "triangle") return KernelShape::triangle;
  throw Error(ErrorCode::InvalidArgument, "unknown kernel '" + name + "'");
}

double kernel_density(KernelShape shape, double x, double center, double bandwidth) {
  const double t = (x - center) / bandwidth;
  switch (shape) {
    case KernelShape::gaussian:
      return std::exp(-0.5 * t * t) / (std::sqrt(2.0 * M_PI) * bandwidth);
    case KernelShape::uniform:
      return std::abs(t) <= 1.0 ? 0.5 / bandwidth : 0.0;
    case KernelShape::triangle:
      return std::abs(t) < 1.0 ? (1.0 - std::abs(t)) / bandwidth : 0.0;
  }
  return 0.0;
}

DensityEstimate::DensityEstimate(DensityKind kind, MatrixXd centers, VectorXd mixture_weights,
                                 KernelShape shape, VectorXd bandwidths)
    : kind_(kind),
      centers_(std::move(centers)),
      weights_(std::move(mixture_weights)),
      shape_(shape),
      bandwidths_(std::move(bandwidths)) {
  if (centers_.rows() == 0 || centers_.rows() != weights_.size())
    throw Error(ErrorCode::InvalidArgument, "density needs one weight per center");
  if (bandwidths_.size() != centers_.cols())
    throw Error(ErrorCode::DimensionMismatch, "density needs one bandwidth per dimension");
  if ((bandwidths_.array() <= 0.0).any() || !bandwidths_.allFinite())
    throw Error(ErrorCode::InvalidArgument, "kernel bandwidth must be positive");
  if ((weights_.array() < 0.0).any())
    throw Error(ErrorCode::InvalidArgument, "mixture weights must be non-negative");
  if (std::abs(weights_.sum() - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidArgument, "mixture weights must sum to one");
}

double DensityEstimate::operator()(const VectorXd& x) const {
  if (x.size() != dim()) throw Error(ErrorCode::DimensionMismatch, "density evaluated off-dimension");
  double total = 0.0;
  for (Eigen::Index i = 0; i < centers_.rows(); ++i) {
    double k = weights_(i);
    for (int c = 0; c < dim() && k != 0.0; ++c)
      k *= kernel_density(shape_, x(c), centers_(i, c), bandwidths_(c));
    total += k;
  }
  return total;
}

VectorXd DensityEstimate::evaluate(const MatrixXd& points) const {
  VectorXd out(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) out(i) = (*this)(points.row(i).transpose());
  return out;
}

VectorXd silverman_bandwidth(const MatrixXd& samples) {
  const double m = static_cast<double>(samples.rows());
  VectorXd h(samples.cols());
  for (Eigen::Index c = 0; c < samples.cols(); ++c) {
    const VectorXd col = samples.col(c);
    const double sd = std::sqrt((col.array() - col.mean()).square().sum() / (m - 1.0));
    h(c) = 1.06 * sd * std::pow(m, -0.2);
  }
  return h;
}

DensityEstimate kde_fit(const MatrixXd& samples, std::optional<KernelSpec> kernel) {
  const Eigen::Index m = samples.rows();
  if (m == 0 || samples.cols() == 0)
    throw Error(ErrorCode::DegenerateSample, "kernel density needs samples");
  VectorXd h;
  KernelShape shape = KernelShape::gaussian;
  if (kernel && kernel->bandwidth > 0.0) {
    shape = kernel->shape;
    h = VectorXd::Constant(samples.cols(), kernel->bandwidth);
  } else {
    if (kernel) shape = kernel->shape;
    if (m < 2) throw Error(ErrorCode::DegenerateSample, "automatic bandwidth needs >= 2 samples");
    h = silverman_bandwidth(samples);
    if ((h.array() <= 0.0).any())
      throw Error(ErrorCode::DegenerateSample, "sample has zero spread in some dimension");
  }
  return DensityEstimate(DensityKind::kde, samples,
                         VectorXd::Constant(m, 1.0 / static_cast<double>(m)), shape, h);
}

DensityEstimate design_density(const Design& design, const KernelSpec& kernel) {
  validate_weights(design);
  if (!(kernel.bandwidth > 0.0))
    throw Error(ErrorCode::InvalidArgument, "design density bandwidth must be positive");
  return DensityEstimate(DensityKind::design_mixture, design.support, design.weights, kernel.shape,
                         VectorXd::Constant(design.dim(), kernel.bandwidth));
}

double empirical_quantile(VectorXd values, double q) {
  if (values.size() == 0) throw Error(ErrorCode::InvalidArgument, "quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorCode::InvalidArgument, "quantile level outside [0,1]");
  std::sort(values.data(), values.data() + values.size());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<Eigen::Index>(std::floor(pos));
  const auto hi = std::min<Eigen::Index>(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values(lo) + frac * (values(hi) - values(lo));
}

ImportanceWeights importance_weights(const MatrixXd& source_exposures,
                                     const DensityEstimate& p_target,
                                     const DensityEstimate& p_source,
                                     std::optional<double> clip_quantile, double floor) {
  if (!(floor > 0.0)) throw Error(ErrorCode::InvalidArgument, "density floor must be positive");
  if (clip_quantile && !(*clip_quantile > 0.0 && *clip_quantile <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "clip quantile must lie in (0, 1]");
  const Eigen::Index n = source_exposures.rows();
  ImportanceWeights out;
  out.raw.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const VectorXd x = source_exposures.row(i).transpose();
    out.raw(i) = p_target(x) / std::max(p_source(x), floor);
  }
  out.values = out.raw;
  if (clip_quantile) {
    // A zero bound would wipe out the few informative points; skip it.
    const double bound = empirical_quantile(out.raw, *clip_quantile);
    if (bound > 0.0) {
      out.clip_bound = bound;
      out.values = out.values.cwiseMin(bound);
    }
  }
  const double mean = out.values.mean();
  if (!(mean > 0.0))
    throw Error(ErrorCode::AllZeroWeights, "target density has no mass at any source exposure");
  out.values /= mean;
  out.normalized = true;
  return out;
}

}  // namespace odiwi

#pragma once

#include "odiwi/design.hpp"

#include <optional>
#include <string>

namespace odiwi {

enum class KernelShape { gaussian, uniform, triangle };

std::string to_string(KernelShape shape);
KernelShape parse_kernel(const std::string& name);

// Unit-mass kernel of the given half-width (uniform, triangle) or sd (gaussian).
struct KernelSpec {
  KernelShape shape = KernelShape::gaussian;
  double bandwidth = 1.0;
};

// K((x - c) / h) / h for a single coordinate.
double kernel_density(KernelShape shape, double x, double center, double bandwidth);

enum class DensityKind { kde, design_mixture };

// Mixture of product kernels; immutable once built.
class DensityEstimate {
public:
  DensityEstimate(DensityKind kind, MatrixXd centers, VectorXd mixture_weights,
                  KernelShape shape, VectorXd bandwidths);

  DensityKind kind() const { return kind_; }
  const MatrixXd& centers() const { return centers_; }
  const VectorXd& mixture_weights() const { return weights_; }
  KernelShape shape() const { return shape_; }
  const VectorXd& bandwidths() const { return bandwidths_; }
  int dim() const { return static_cast<int>(centers_.cols()); }

  double operator()(const VectorXd& x) const;
  // Evaluates at every row of `points`.
  VectorXd evaluate(const MatrixXd& points) const;

private:
  DensityKind kind_;
  MatrixXd centers_;
  VectorXd weights_;
  KernelShape shape_;
  VectorXd bandwidths_;
};

// Silverman's rule 1.06 * sd * m^(-1/5), one value per column.
VectorXd silverman_bandwidth(const MatrixXd& samples);

// Kernel density estimate. Without a kernel the gaussian shape and
// Silverman bandwidths are used.
DensityEstimate kde_fit(const MatrixXd& samples, std::optional<KernelSpec> kernel = std::nullopt);

// Smooths the design into a density: sum_j w_j K(x, x_j).
DensityEstimate design_density(const Design& design, const KernelSpec& kernel);

struct ImportanceWeights {
  VectorXd values;
  VectorXd raw;  // target/source ratios before clipping and normalization
  std::optional<double> clip_bound;
  bool normalized = true;
};

// omega_i = p_target(x_i) / max(p_source(x_i), floor), optionally clipped at
// the clip_quantile empirical quantile of the raw ratios, normalized to mean 1.
ImportanceWeights importance_weights(const MatrixXd& source_exposures,
                                     const DensityEstimate& p_target,
                                     const DensityEstimate& p_source,
                                     std::optional<double> clip_quantile, double floor);

// Linear-interpolation empirical quantile (type 7).
double empirical_quantile(VectorXd values, double q);

}  // namespace odiwi

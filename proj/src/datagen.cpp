#include "dapto/datagen.hpp"

#include <cmath>
#include <random>
#include <string>

#include "dapto/error.hpp"
#include "dapto/random.hpp"

namespace dapto {

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.meta = meta;
  out.contexts.resize(static_cast<Eigen::Index>(rows.size()), contexts.cols());
  out.costs.resize(static_cast<Eigen::Index>(rows.size()), costs.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= size()) throw InputError("subset row out of range");
    const auto src = static_cast<Eigen::Index>(rows[i]);
    out.contexts.row(static_cast<Eigen::Index>(i)) = contexts.row(src);
    out.costs.row(static_cast<Eigen::Index>(i)) = costs.row(src);
  }
  return out;
}

void Dataset::validate() const {
  if (contexts.rows() != costs.rows()) {
    throw InputError("dataset has " + std::to_string(contexts.rows()) + " contexts but " +
                     std::to_string(costs.rows()) + " cost rows");
  }
  if (contexts.rows() == 0) throw InputError("dataset is empty");
  if (!contexts.allFinite() || !costs.allFinite()) throw InputError("dataset has non-finite entries");
}

void DgpParams::validate() const {
  if (features == 0) throw InputError("DGP needs at least one feature");
  if (degree < 1) throw InputError("DGP degree must be >= 1, got " + std::to_string(degree));
  if (!(noise_halfwidth >= 0.0 && noise_halfwidth < 1.0)) {
    throw InputError("noise half-width must lie in [0, 1), got " + std::to_string(noise_halfwidth));
  }
  if (base.rows() == 0 || static_cast<std::size_t>(base.cols()) != features) {
    throw InputError("DGP base matrix must be d x " + std::to_string(features));
  }
}

DgpParams DgpParams::with_random_base(std::size_t dimension, std::size_t features, int degree,
                                      double noise_halfwidth, std::uint64_t seed) {
  DgpParams params;
  params.features = features;
  params.degree = degree;
  params.noise_halfwidth = noise_halfwidth;
  params.base.resize(static_cast<Eigen::Index>(dimension), static_cast<Eigen::Index>(features));
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  for (Eigen::Index j = 0; j < params.base.rows(); ++j) {
    for (Eigen::Index k = 0; k < params.base.cols(); ++k) params.base(j, k) = coin(rng) ? 1.0 : 0.0;
  }
  params.validate();
  return params;
}

namespace {

double polynomial_mean(double projection, std::size_t features, int degree) {
  return std::pow(1.0 + (1.0 + projection / std::sqrt(static_cast<double>(features))), degree);
}

}  // namespace

CostVector true_conditional_mean(const DgpParams& params, const Eigen::Ref<const Eigen::VectorXd>& z) {
  params.validate();
  if (static_cast<std::size_t>(z.size()) != params.features) {
    throw InputError("context has length " + std::to_string(z.size()) + ", expected " +
                     std::to_string(params.features));
  }
  const Eigen::VectorXd projection = params.base * z;
  CostVector mean(projection.size());
  for (Eigen::Index j = 0; j < projection.size(); ++j) {
    mean[j] = polynomial_mean(projection[j], params.features, params.degree);
  }
  return mean;
}

Matrix true_conditional_means(const DgpParams& params, const Matrix& contexts) {
  Matrix out(contexts.rows(), static_cast<Eigen::Index>(params.dimension()));
  for (Eigen::Index i = 0; i < contexts.rows(); ++i) {
    out.row(i) = true_conditional_mean(params, contexts.row(i).transpose()).transpose();
  }
  return out;
}

Dataset generate_grid_dataset(const DgpParams& params, std::size_t n, std::uint64_t seed) {
  params.validate();
  if (n == 0) throw InputError("dataset size must be >= 1");

  const auto p = static_cast<Eigen::Index>(params.features);
  const auto d = static_cast<Eigen::Index>(params.dimension());
  Dataset data;
  data.contexts.resize(static_cast<Eigen::Index>(n), p);
  data.costs.resize(static_cast<Eigen::Index>(n), d);
  data.meta.degree = params.degree;
  data.meta.noise_halfwidth = params.noise_halfwidth;
  data.meta.seed = seed;
  data.meta.base = params.base;
  data.meta.problem = "grid";

  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> noise(1.0 - params.noise_halfwidth, 1.0 + params.noise_halfwidth);
  Eigen::VectorXd z(p);
  for (Eigen::Index i = 0; i < data.contexts.rows(); ++i) {
    for (Eigen::Index k = 0; k < p; ++k) z[k] = gauss(rng);
    data.contexts.row(i) = z.transpose();
    const Eigen::VectorXd projection = params.base * z;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double eps = params.noise_halfwidth > 0.0 ? noise(rng) : 1.0;
      data.costs(i, j) = polynomial_mean(projection[j], params.features, params.degree) * eps;
    }
  }
  return data;
}

namespace {

constexpr double kEdgeOneOffset = 0.5;
constexpr double kEdgeOneScale = 3.0;
constexpr double kEdgeTwoOffset = 0.6;

double edge_one_mean(double z) { return kEdgeOneOffset + kEdgeOneScale * std::pow(z, 4); }

// Slope of the square-root curve that meets edge 1 exactly at the crossing.
double edge_two_scale() {
  return (edge_one_mean(kTwoEdgeCrossing) - kEdgeTwoOffset) / std::sqrt(kTwoEdgeCrossing);
}

}  // namespace

CostVector two_edge_mean(double z) {
  CostVector mean(2);
  mean[0] = edge_one_mean(z);
  mean[1] = kEdgeTwoOffset + edge_two_scale() * std::sqrt(std::max(z, 0.0));
  return mean;
}

Dataset generate_two_edge_dataset(std::size_t n, std::uint64_t seed, const TwoEdgeParams& params) {
  if (n == 0) throw InputError("dataset size must be >= 1");
  if (!(params.noise_sd >= 0.0) || !std::isfinite(params.noise_sd)) {
    throw InputError("two-edge noise standard deviation must be finite and >= 0");
  }
  Dataset data;
  data.contexts.resize(static_cast<Eigen::Index>(n), 1);
  data.costs.resize(static_cast<Eigen::Index>(n), 2);
  data.meta.problem = "two-edge";
  data.meta.seed = seed;
  data.meta.crossing = kTwoEdgeCrossing;

  Rng rng(seed);
  std::uniform_real_distribution<double> feature(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index i = 0; i < data.contexts.rows(); ++i) {
    const double z = feature(rng);
    const CostVector mean = two_edge_mean(z);
    data.contexts(i, 0) = z;
    data.costs(i, 0) = mean[0] + params.noise_sd * gauss(rng);
    data.costs(i, 1) = mean[1] + params.noise_sd * gauss(rng);
  }
  return data;
}

}  // namespace dapto

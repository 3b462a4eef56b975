#pragma once

// Seeded generators for the three synthetic curve families in two or three
// dimensions. Each sample draws a latent s, then X ~ N(mu(s), sigma_f C(s)).

#include <cstddef>
#include <cstdint>
#include <span>

#include <Eigen/Core>

namespace monocurve::synth {

struct SyntheticSpec {
  int family = 2;  // 1, 2 or 3
  int dim = 2;     // 2 or 3
  std::size_t n = 5000;
  double sigma_f = 1.0;
  std::uint64_t seed = 0;

  /// InvalidArgument unless family in {1,2,3}, dim in {2,3}, n >= 1 and
  /// sigma_f finite and >= 0.
  void validate() const;
};

struct LabeledSample {
  Eigen::MatrixXd X;      // n x k observations
  Eigen::VectorXd S;      // latent index of each row
  Eigen::MatrixXd truth;  // mu(S[m]) per row
  /// Rows whose covariance needed the off-diagonal shrink.
  std::size_t repair_count = 0;
};

struct Range {
  double lo;
  double hi;
};

/// Support of the latent index: (-3, 3) for families 1 and 2, (0, 3) for 3.
Range family_range(int family);

Eigen::VectorXd mean_at(int family, int dim, double s);
/// Covariance before noise scaling and repair.
Eigen::MatrixXd covariance_at(int family, int dim, double s);

/// Returns `cov` if its smallest eigenvalue is at least `floor`; otherwise
/// scales every off-diagonal entry by the largest factor in [0, 1] (found by
/// bisection) that restores it. CovarianceNotPSD if even the diagonal part
/// falls short.
Eigen::MatrixXd repair_covariance(const Eigen::MatrixXd& cov, bool* repaired = nullptr,
                                  double floor = 1e-12);

/// Draws per row: s, then k standard normals; X = mu + sqrt(sigma_f) L z with
/// L the Cholesky factor of the repaired covariance. sigma_f = 0 gives X = truth.
LabeledSample generate(const SyntheticSpec& spec);

/// mu(s) per requested s; OutOfRange outside the closed family range.
Eigen::MatrixXd true_curve(const SyntheticSpec& spec, std::span<const double> s_values);

}  // namespace monocurve::synth

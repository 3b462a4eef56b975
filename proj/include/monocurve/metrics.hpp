#pragma once

// Point-set distances for scoring fitted curves against a reference.
// Rows are points.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace monocurve::metrics {

/// Symmetric Hausdorff distance, exact O(|A||B|). EmptySet if either is empty.
double hausdorff(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Minimum-cost perfect matching of a square cost matrix (shortest
/// augmenting paths with potentials). Returns the column assigned to each row.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

/// Exact 2-Wasserstein distance between equal-size uniform point sets.
/// SizeMismatch on unequal sizes, DimensionMismatch on unequal widths.
double wasserstein2(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Seeded sample of min(n, cap) distinct indices of [0, n), sorted.
std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t cap, std::uint64_t seed);

struct CappedDistance {
  double value = 0.0;
  std::size_t points = 0;  // size of each set actually matched
  bool subsampled = false;
};

/// wasserstein2 after subsampling each set larger than `cap` to `cap`
/// points. Both sets use the same index stream, so paired rows stay paired.
CappedDistance wasserstein2_capped(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                   std::size_t cap, std::uint64_t seed);

/// Mean squared row distance. DimensionMismatch on unequal shapes.
double empirical_mse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate);

struct ReplicateStats {
  double mean = 0.0;
  double std = 0.0;  // n - 1 denominator
};

/// TooFew with fewer than two scores.
ReplicateStats replicate_stats(std::span<const double> scores);

struct ScoreReport {
  double hausdorff_x100 = 0.0;
  double wasserstein2_x100 = 0.0;
  double mse = 0.0;  // NaN when the sets are not row-paired
  std::size_t n_curve = 0;
  std::size_t n_truth = 0;
  std::size_t subsample_cap = 0;
  std::size_t w2_points = 0;
  std::uint64_t seed = 0;

  /// One flat JSON object.
  std::string to_json() const;
};

ScoreReport score_curve(const Eigen::MatrixXd& curve, const Eigen::MatrixXd& truth,
                        std::size_t cap = 1024, std::uint64_t seed = 0);

}  // namespace monocurve::metrics

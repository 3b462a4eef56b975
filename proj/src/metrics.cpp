#include "monocurve/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "monocurve/error.hpp"

namespace monocurve::metrics {
namespace {

void check_width(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.cols() != B.cols()) {
    throw Error(Errc::DimensionMismatch, "point sets have " + std::to_string(A.cols()) + " and " +
                                             std::to_string(B.cols()) + " coordinates");
  }
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd d(A.rows(), B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) d(i, j) = (A.row(i) - B.row(j)).squaredNorm();
  }
  return d;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& M, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), M.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = M.row(static_cast<Eigen::Index>(rows[r]));
  return out;
}

}  // namespace

double hausdorff(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.rows() == 0 || B.rows() == 0) throw Error(Errc::EmptySet, "hausdorff needs nonempty sets");
  check_width(A, B);
  const Eigen::MatrixXd d = squared_distances(A, B);
  const double ab = d.rowwise().minCoeff().maxCoeff();
  const double ba = d.colwise().minCoeff().maxCoeff();
  return std::sqrt(std::max(ab, ba));
}

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw Error(Errc::SizeMismatch, "assignment needs a square cost matrix");
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is the virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

double wasserstein2(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.rows() != B.rows()) {
    throw Error(Errc::SizeMismatch, "wasserstein2 needs equal sizes, got " + std::to_string(A.rows()) +
                                        " and " + std::to_string(B.rows()));
  }
  if (A.rows() == 0) throw Error(Errc::EmptySet, "wasserstein2 needs nonempty sets");
  check_width(A, B);
  const Eigen::MatrixXd cost = squared_distances(A, B);
  const std::vector<int> match = solve_assignment(cost);
  double total = 0.0;
  for (std::size_t i = 0; i < match.size(); ++i) total += cost(static_cast<Eigen::Index>(i), match[i]);
  return std::sqrt(std::max(0.0, total / static_cast<double>(A.rows())));
}

std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t cap, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n <= cap) return idx;
  std::mt19937_64 rng(seed);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < cap; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

CappedDistance wasserstein2_capped(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                   std::size_t cap, std::uint64_t seed) {
  if (cap < 1) throw Error(Errc::InvalidArgument, "subsample cap must be >= 1");
  CappedDistance out;
  const auto na = static_cast<std::size_t>(A.rows());
  const auto nb = static_cast<std::size_t>(B.rows());
  out.subsampled = na > cap || nb > cap;
  const Eigen::MatrixXd a = na > cap ? take_rows(A, subsample_indices(na, cap, seed)) : A;
  const Eigen::MatrixXd b = nb > cap ? take_rows(B, subsample_indices(nb, cap, seed)) : B;
  out.value = wasserstein2(a, b);
  out.points = static_cast<std::size_t>(a.rows());
  return out;
}

double empirical_mse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols()) {
    throw Error(Errc::DimensionMismatch, "empirical_mse needs equal shapes");
  }
  if (truth.rows() == 0) throw Error(Errc::EmptySet, "empirical_mse needs at least one row");
  return (truth - estimate).rowwise().squaredNorm().mean();
}

ReplicateStats replicate_stats(std::span<const double> scores) {
  if (scores.size() < 2) throw Error(Errc::TooFew, "replicate statistics need at least 2 scores");
  const double n = static_cast<double>(scores.size());
  ReplicateStats st;
  st.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : scores) ss += (v - st.mean) * (v - st.mean);
  st.std = std::sqrt(ss / (n - 1.0));
  return st;
}

std::string ScoreReport::to_json() const {
  nlohmann::ordered_json j;
  j["hausdorff_x100"] = hausdorff_x100;
  j["wasserstein2_x100"] = wasserstein2_x100;
  if (std::isfinite(mse)) {
    j["mse"] = mse;
  } else {
    j["mse"] = nullptr;
  }
  j["n_curve"] = n_curve;
  j["n_truth"] = n_truth;
  j["subsample_cap"] = subsample_cap;
  j["w2_points"] = w2_points;
  j["seed"] = seed;
  return j.dump(2);
}

ScoreReport score_curve(const Eigen::MatrixXd& curve, const Eigen::MatrixXd& truth,
                        std::size_t cap, std::uint64_t seed) {
  ScoreReport r;
  r.hausdorff_x100 = 100.0 * hausdorff(curve, truth);
  const CappedDistance w2 = wasserstein2_capped(curve, truth, cap, seed);
  r.wasserstein2_x100 = 100.0 * w2.value;
  r.mse = curve.rows() == truth.rows() ? empirical_mse(truth, curve)
                                       : std::numeric_limits<double>::quiet_NaN();
  r.n_curve = static_cast<std::size_t>(curve.rows());
  r.n_truth = static_cast<std::size_t>(truth.rows());
  r.subsample_cap = cap;
  r.w2_points = w2.points;
  r.seed = seed;
  return r;
}

}  // namespace monocurve::metrics

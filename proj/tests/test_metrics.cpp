#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <json.hpp>

#include "monocurve/error.hpp"
#include "monocurve/metrics.hpp"

using namespace monocurve;
using namespace monocurve::metrics;

namespace {

Eigen::MatrixXd random_set(std::mt19937_64& rng, int n, int k = 2) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd A(n, k);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = nd(rng);
  return A;
}

double sqdist(const Eigen::MatrixXd& A, Eigen::Index i, const Eigen::MatrixXd& B, Eigen::Index j) {
  double acc = 0.0;
  for (Eigen::Index c = 0; c < A.cols(); ++c) acc += (A(i, c) - B(j, c)) * (A(i, c) - B(j, c));
  return acc;
}

double double_loop_hausdorff(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  auto directed = [](const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < Q.rows(); ++j) best = std::min(best, std::sqrt(sqdist(P, i, Q, j)));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(A, B), directed(B, A));
}

double permutation_w2(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  std::vector<int> perm(static_cast<std::size_t>(A.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) c += sqdist(A, static_cast<Eigen::Index>(i), B, perm[i]);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / static_cast<double>(A.rows()));
}

// Alternate exact solver: Held-Karp style DP over subsets, feasible for n <= 16.
double subset_dp_w2(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const int n = static_cast<int>(A.rows());
  std::vector<double> dp(std::size_t{1} << n, std::numeric_limits<double>::infinity());
  dp[0] = 0.0;
  for (std::size_t mask = 0; mask < dp.size(); ++mask) {
    const int i = std::popcount(mask);
    if (i >= n || !std::isfinite(dp[mask])) continue;
    for (int j = 0; j < n; ++j) {
      if (mask & (std::size_t{1} << j)) continue;
      const std::size_t next = mask | (std::size_t{1} << j);
      dp[next] = std::min(dp[next], dp[mask] + sqdist(A, i, B, j));
    }
  }
  return std::sqrt(dp.back() / n);
}

}  // namespace

TEST_CASE("hausdorff examples") {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd A = random_set(rng, 20);
  CHECK(hausdorff(A, A) == 0.0);
  Eigen::MatrixXd o(1, 2), p(1, 2);
  o << 0, 0;
  p << 3, 4;
  CHECK(hausdorff(o, p) == 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd X = random_set(rng, 20), Y = random_set(rng, 13);
    CHECK(hausdorff(X, Y) == double_loop_hausdorff(X, Y));
    CHECK(hausdorff(X, Y) == hausdorff(Y, X));
  }
  CHECK_THROWS_AS(hausdorff(Eigen::MatrixXd(0, 2), A), Error);
}

TEST_CASE("wasserstein2 examples and oracles") {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd A = random_set(rng, 30);
  CHECK(wasserstein2(A, A) == 0.0);
  Eigen::MatrixXd o(1, 2), p(1, 2);
  o << 0, 0;
  p << 3, 4;
  CHECK(wasserstein2(o, p) == doctest::Approx(5.0).epsilon(1e-15));
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd X = random_set(rng, 5), Y = random_set(rng, 5);
    CHECK(std::abs(wasserstein2(X, Y) - permutation_w2(X, Y)) <= 1e-9);
  }
  for (int n : {6, 9, 12}) {
    const Eigen::MatrixXd X = random_set(rng, n, 3), Y = random_set(rng, n, 3);
    CHECK(std::abs(wasserstein2(X, Y) - subset_dp_w2(X, Y)) <= 1e-9);
  }
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd X = random_set(rng, 40), Y = (random_set(rng, 40).array() + 0.5).matrix();
    const double centroid = (X.colwise().mean() - Y.colwise().mean()).norm();
    CHECK(wasserstein2(X, Y) >= centroid - 1e-9);
  }
  CHECK_THROWS_AS(wasserstein2(random_set(rng, 3), random_set(rng, 4)), Error);
  CHECK_THROWS_AS(wasserstein2(random_set(rng, 3, 2), random_set(rng, 3, 3)), Error);
}

TEST_CASE("assignment is a permutation with optimal cost") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  Eigen::MatrixXd cost(7, 7);
  for (Eigen::Index i = 0; i < cost.size(); ++i) cost.data()[i] = u(rng);
  const std::vector<int> a = solve_assignment(cost);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 7; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
  double got = 0.0;
  for (int i = 0; i < 7; ++i) got += cost(i, a[static_cast<std::size_t>(i)]);
  std::vector<int> perm(7);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double c = 0.0;
    for (int i = 0; i < 7; ++i) c += cost(i, perm[static_cast<std::size_t>(i)]);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(got == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("capped wasserstein keeps rows paired") {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd X = random_set(rng, 300);
  const CappedDistance same = wasserstein2_capped(X, X, 64, 9);
  CHECK(same.subsampled);
  CHECK(same.points == 64);
  CHECK(same.value == 0.0);
  const auto idx = subsample_indices(300, 64, 9);
  CHECK(idx.size() == 64);
  CHECK(std::is_sorted(idx.begin(), idx.end()));
  CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
  CHECK(subsample_indices(300, 64, 9) == idx);
  CHECK(subsample_indices(10, 64, 9).size() == 10);
  const CappedDistance small = wasserstein2_capped(X.topRows(20), X.bottomRows(20), 64, 1);
  CHECK_FALSE(small.subsampled);
  CHECK(small.value == wasserstein2(X.topRows(20), X.bottomRows(20)));
}

TEST_CASE("empirical_mse") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd A = random_set(rng, 10);
  CHECK(empirical_mse(A, A) == 0.0);
  Eigen::MatrixXd shifted = A;
  shifted.col(0).array() += 1.0;
  CHECK(empirical_mse(A, shifted) == doctest::Approx(1.0).epsilon(1e-14));
  const Eigen::MatrixXd B = random_set(rng, 10);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < 10; ++i)
    for (Eigen::Index c = 0; c < 2; ++c) acc += (A(i, c) - B(i, c)) * (A(i, c) - B(i, c));
  CHECK(std::abs(empirical_mse(A, B) - acc / 10.0) <= 1e-12);
  CHECK_THROWS_AS(empirical_mse(A, random_set(rng, 9)), Error);
}

TEST_CASE("replicate_stats") {
  const std::vector<double> ones{1, 1, 1};
  CHECK(replicate_stats(ones).mean == 1.0);
  CHECK(replicate_stats(ones).std == 0.0);
  const std::vector<double> two{0, 2};
  CHECK(replicate_stats(two).mean == 1.0);
  CHECK(replicate_stats(two).std == doctest::Approx(std::sqrt(2.0)));
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd(4.0, 2.0);
  std::vector<double> draws(10);
  for (double& d : draws) d = nd(rng);
  double mean = 0.0;
  for (double d : draws) mean += d;
  mean /= 10.0;
  double ss = 0.0;
  for (double d : draws) ss += (d - mean) * (d - mean);
  CHECK(std::abs(replicate_stats(draws).mean - mean) <= 1e-12);
  CHECK(std::abs(replicate_stats(draws).std - std::sqrt(ss / 9.0)) <= 1e-12);
  const std::vector<double> single{1.0};
  CHECK_THROWS_AS(replicate_stats(single), Error);
}

TEST_CASE("score report") {
  Eigen::MatrixXd o(1, 2), p(1, 2);
  o << 0, 0;
  p << 3, 4;
  const ScoreReport r = score_curve(o, p, 1024, 0);
  CHECK(r.hausdorff_x100 == doctest::Approx(500.0));
  CHECK(r.wasserstein2_x100 == doctest::Approx(500.0));
  CHECK(r.mse == doctest::Approx(25.0));
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j.at("subsample_cap").get<int>() == 1024);
  CHECK(j.at("hausdorff_x100").get<double>() == doctest::Approx(500.0));
}

#include "monocurve/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "monocurve/error.hpp"

namespace monocurve::synth {

void SyntheticSpec::validate() const {
  if (family < 1 || family > 3) throw Error(Errc::InvalidArgument, "family must be 1, 2 or 3");
  if (dim != 2 && dim != 3) throw Error(Errc::InvalidArgument, "dim must be 2 or 3");
  if (n < 1) throw Error(Errc::InvalidArgument, "n must be >= 1");
  if (!(sigma_f >= 0.0) || !std::isfinite(sigma_f)) {
    throw Error(Errc::InvalidArgument, "sigma_f must be finite and >= 0");
  }
}

Range family_range(int family) {
  switch (family) {
    case 1:
    case 2:
      return {-3.0, 3.0};
    case 3:
      return {0.0, 3.0};
  }
  throw Error(Errc::InvalidArgument, "unknown family " + std::to_string(family));
}

Eigen::VectorXd mean_at(int family, int dim, double s) {
  Eigen::VectorXd mu(dim);
  switch (family) {
    case 1:
      mu[0] = std::exp(s / 10.0) + s;
      mu[1] = s * s * s / 3.0 + s;
      break;
    case 2:
      mu[0] = s;
      mu[1] = s;
      break;
    case 3:
      mu[0] = -s * s;
      mu[1] = std::log(s + 1.0);
      break;
    default:
      throw Error(Errc::InvalidArgument, "unknown family " + std::to_string(family));
  }
  if (dim == 3) mu[2] = s;
  return mu;
}

Eigen::MatrixXd covariance_at(int family, int dim, double s) {
  using std::numbers::pi;
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(dim, dim, 0.0);
  c.diagonal().setConstant(0.1);
  double c12 = 0.0, c13 = 0.0, c23 = 0.0;
  switch (family) {
    case 1:
      c12 = 0.1 * std::min(std::cos(s * pi) * std::exp(std::abs(s)), 1.0);
      c13 = 0.1 * std::min(std::sin(s * pi) * std::exp(std::abs(s)), 1.0);
      c23 = 0.05;
      break;
    case 2:
      c12 = 0.1 * std::cos(s * pi);
      c13 = 0.1 * std::sin(s * pi);
      c23 = 0.09;
      break;
    case 3:
      c12 = 0.09;
      c13 = 0.09;
      c23 = 0.09;
      break;
    default:
      throw Error(Errc::InvalidArgument, "unknown family " + std::to_string(family));
  }
  c(0, 1) = c(1, 0) = c12;
  if (dim == 3) {
    c(0, 2) = c(2, 0) = c13;
    c(1, 2) = c(2, 1) = c23;
  }
  return c;
}

Eigen::MatrixXd repair_covariance(const Eigen::MatrixXd& cov, bool* repaired, double floor) {
  auto min_eig = [](const Eigen::MatrixXd& m) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues()[0];
  };
  if (repaired) *repaired = false;
  if (min_eig(cov) >= floor) return cov;

  const Eigen::MatrixXd diag = cov.diagonal().asDiagonal();
  const Eigen::MatrixXd off = cov - diag;
  if (min_eig(diag) < floor) {
    throw Error(Errc::CovarianceNotPSD, "diagonal variances fall below the eigenvalue floor");
  }
  double lo = 0.0, hi = 1.0;  // lo feasible, hi infeasible
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (min_eig(diag + mid * off) >= floor) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (repaired) *repaired = true;
  return diag + lo * off;
}

LabeledSample generate(const SyntheticSpec& spec) {
  spec.validate();
  const Range range = family_range(spec.family);
  const auto n = static_cast<Eigen::Index>(spec.n);
  const int k = spec.dim;

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(range.lo, range.hi);
  std::normal_distribution<double> normal(0.0, 1.0);

  LabeledSample out;
  out.X.resize(n, k);
  out.S.resize(n);
  out.truth.resize(n, k);
  const double scale = std::sqrt(spec.sigma_f);
  Eigen::VectorXd z(k);
  for (Eigen::Index m = 0; m < n; ++m) {
    const double s = unif(rng);
    for (int i = 0; i < k; ++i) z[i] = normal(rng);
    out.S[m] = s;
    const Eigen::VectorXd mu = mean_at(spec.family, k, s);
    out.truth.row(m) = mu.transpose();
    if (spec.sigma_f == 0.0) {
      out.X.row(m) = mu.transpose();
      continue;
    }
    bool repaired = false;
    const Eigen::MatrixXd cov = repair_covariance(covariance_at(spec.family, k, s), &repaired);
    if (repaired) ++out.repair_count;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw Error(Errc::CovarianceNotPSD, "Cholesky failed at s = " + std::to_string(s));
    }
    const Eigen::MatrixXd L = llt.matrixL();
    out.X.row(m) = (mu + scale * (L * z)).transpose();
  }
  return out;
}

Eigen::MatrixXd true_curve(const SyntheticSpec& spec, std::span<const double> s_values) {
  if (spec.family < 1 || spec.family > 3) throw Error(Errc::InvalidArgument, "family must be 1, 2 or 3");
  if (spec.dim != 2 && spec.dim != 3) throw Error(Errc::InvalidArgument, "dim must be 2 or 3");
  const Range range = family_range(spec.family);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(s_values.size()), spec.dim);
  for (std::size_t m = 0; m < s_values.size(); ++m) {
    const double s = s_values[m];
    if (!(s >= range.lo && s <= range.hi)) {
      throw Error(Errc::OutOfRange, "s = " + std::to_string(s) + " outside the family range");
    }
    out.row(static_cast<Eigen::Index>(m)) = mean_at(spec.family, spec.dim, s).transpose();
  }
  return out;
}

}  // namespace monocurve::synth

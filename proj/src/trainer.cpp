#include "monocurve/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include <Eigen/Dense>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "monocurve/error.hpp"
#include "monocurve/parallel.hpp"

namespace monocurve::trainer {
namespace {

// Tapes run to tens of megabytes. Left alone, glibc maps each one fresh and
// returns it on free, so every iteration pays for the page faults again.
void keep_large_blocks_on_heap() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 512 << 20);
    mallopt(M_TRIM_THRESHOLD, 1024 << 20);
    return true;
  }();
  (void)done;
#endif
}

double orthogonality_penalty(const Eigen::MatrixXd& U) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(U.rows(), U.cols());
  const double p = (U.transpose() * U - I).squaredNorm() + (U * U.transpose() - I).squaredNorm();
  return std::max(p, 0.0);
}

Eigen::MatrixXd orthogonality_gradient(const Eigen::MatrixXd& U) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(U.rows(), U.cols());
  return 4.0 * U * (U.transpose() * U - I) + 4.0 * (U * U.transpose() - I) * U;
}

// Forward quantities shared by loss evaluation and the gradient pass.
struct Forward {
  Eigen::MatrixXd Y;  // rows U x_m
  Eigen::VectorXd s;
  Eigen::VectorXd H;
  std::vector<nn::Tape> fx_tapes;    // f_i at x_i, with slopes
  std::vector<nn::Tape> fu_tapes;    // f_i at u = G_i^-(s), with slopes
  std::vector<nn::Tape> g_tapes;     // inputs s, values only
  Eigen::MatrixXd ginv;              // G_i^-(s_m)
  Eigen::MatrixXd fslope_x;          // f_i'(x_{m,i})
  Eigen::MatrixXd residual;          // e_{m,i} = f_i'(u) + u - s
  LossTerms terms;
};

Forward forward_pass(const Eigen::MatrixXd& batch, const CurveModel& model) {
  const std::size_t k = model.k();
  if (static_cast<std::size_t>(batch.cols()) != k) {
    throw Error(Errc::DimensionMismatch, "batch has " + std::to_string(batch.cols()) +
                                             " columns, model has k = " + std::to_string(k));
  }
  const Eigen::Index n = batch.rows();
  Forward fw;
  fw.Y.noalias() = batch * model.U.transpose();
  fw.s = fw.Y.rowwise().sum();
  fw.ginv.resize(n, static_cast<Eigen::Index>(k));
  fw.fslope_x.resize(n, static_cast<Eigen::Index>(k));
  fw.residual.resize(n, static_cast<Eigen::Index>(k));
  // sum_{i<j} y_i y_j = (s^2 - sum_i y_i^2) / 2
  fw.H = -0.5 * (fw.s.array().square() - fw.Y.rowwise().squaredNorm().array()).matrix();

  std::vector<double> xs(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < k; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    fw.g_tapes.push_back(model.ginv_nets[i].record({fw.s.data(), static_cast<std::size_t>(n)}, false));
    const auto gv = fw.g_tapes.back().values();
    for (Eigen::Index m = 0; m < n; ++m) {
      xs[static_cast<std::size_t>(m)] = fw.Y(m, col);
      fw.ginv(m, col) = gv[static_cast<std::size_t>(m)];
    }
    fw.fx_tapes.push_back(model.f_nets[i].record(xs, true));
    fw.fu_tapes.push_back(model.f_nets[i].record(gv, true));
    const auto fv = fw.fx_tapes.back().values();
    const auto fs = fw.fx_tapes.back().slopes();
    const auto us = fw.fu_tapes.back().slopes();
    for (Eigen::Index m = 0; m < n; ++m) {
      const auto um = static_cast<std::size_t>(m);
      fw.H[m] += fv[um];
      fw.fslope_x(m, col) = fs[um];
      fw.residual(m, col) = us[um] + gv[um] - fw.s[m];
    }
  }

  const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  fw.terms.L_plus = fw.H.cwiseMax(0.0).sum() * inv_n;
  fw.terms.L_minus = (-fw.H).cwiseMax(0.0).sum() * inv_n;
  fw.terms.R = (fw.Y - fw.ginv).squaredNorm() * inv_n;
  fw.terms.M = fw.residual.squaredNorm() * inv_n;
  fw.terms.P_O = orthogonality_penalty(model.U);
  return fw;
}

bool finite(const LossTerms& t) {
  return std::isfinite(t.L_plus) && std::isfinite(t.L_minus) && std::isfinite(t.R) &&
         std::isfinite(t.M) && std::isfinite(t.P_O);
}

class Stepper {
 public:
  Stepper(const TrainConfig& config, Eigen::Index size)
      : config_(config), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

  void step(double* params, const Eigen::VectorXd& grad, double r) {
    Eigen::Map<Eigen::VectorXd> theta(params, grad.size());
    if (config_.optimizer == Optimizer::LiteralSGD) {
      theta -= r * grad;
      return;
    }
    ++t_;
    const double b1 = config_.adam_beta1, b2 = config_.adam_beta2;
    m_ = b1 * m_ + (1.0 - b1) * grad;
    v_ = b2 * v_ + (1.0 - b2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(b1, t_);
    const double c2 = 1.0 - std::pow(b2, t_);
    theta.array() -= r * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.adam_eps);
  }

 private:
  const TrainConfig& config_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  int t_ = 0;
};

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& data, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), data.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = data.row(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::InvalidArgument, what); };
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be finite and >= 0");
  if (!(tau >= 0.0) || !std::isfinite(tau)) fail("tau must be finite and >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning rate must be > 0");
  if (max_iters < 0) fail("max_iters must be >= 0");
  if (patience < 1) fail("patience must be >= 1");
  if (min_iters < 0) fail("min_iters must be >= 0");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) fail("val_fraction must lie in (0, 1)");
  if (depth < 1 || width < 1) fail("network depth and width must be positive");
  if (!(rotation_eps > 0.0)) fail("rotation eps must be > 0");
  if (!(lr_final_fraction > 0.0 && lr_final_fraction <= 1.0)) fail("lr final fraction must be in (0, 1]");
  if (multiplier_rate && !(*multiplier_rate >= 0.0 && std::isfinite(*multiplier_rate))) {
    fail("multiplier rate must be finite and >= 0");
  }
  if (max_val_violation && !(*max_val_violation >= 0.0)) fail("max validation violation must be >= 0");
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd Standardization::apply(const Eigen::MatrixXd& data) const {
  if (data.cols() != mean.size()) {
    throw Error(Errc::DimensionMismatch, "data has " + std::to_string(data.cols()) +
                                             " columns, standardization has " +
                                             std::to_string(mean.size()));
  }
  return (data.rowwise() - mean).array().rowwise() / std.array();
}

Eigen::MatrixXd Standardization::invert(const Eigen::MatrixXd& standardized) const {
  if (standardized.cols() != mean.size()) {
    throw Error(Errc::DimensionMismatch, "column count does not match standardization");
  }
  Eigen::MatrixXd out = standardized.array().rowwise() * std.array();
  out.rowwise() += mean;
  return out;
}

Standardization standardize(const Eigen::MatrixXd& data, Eigen::MatrixXd* standardized) {
  const Eigen::Index n = data.rows();
  if (n < 2) throw Error(Errc::TooFew, "standardization needs at least 2 rows");
  Standardization stats;
  stats.mean = data.colwise().mean();
  stats.std.resize(data.cols());
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    const double var = (data.col(c).array() - stats.mean[c]).square().sum() / static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (!(sd > 0.0) || !std::isfinite(sd)) {
      throw Error(Errc::DegenerateColumn, "column " + std::to_string(c) + " has zero spread");
    }
    stats.std[c] = sd;
  }
  if (standardized) *standardized = stats.apply(data);
  return stats;
}

Eigen::VectorXd pca_first_component(const Eigen::MatrixXd& data) {
  const Eigen::Index k = data.cols();
  if (data.rows() < 2 || k < 1) throw Error(Errc::TooFew, "PCA needs at least 2 rows");
  const Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(data.rows() - 1);
  if (cov.norm() == 0.0 || !std::isfinite(cov.norm())) {
    throw Error(Errc::InvalidArgument, "covariance is zero");
  }

  // Several deterministic starts guard against a start orthogonal to the top
  // eigenvector; the one with the largest Rayleigh quotient wins.
  std::vector<Eigen::VectorXd> starts;
  Eigen::VectorXd ramp(k);
  for (Eigen::Index i = 0; i < k; ++i) ramp[i] = static_cast<double>(i + 1);
  starts.push_back(ramp.normalized());
  for (Eigen::Index i = 0; i < k; ++i) starts.push_back(Eigen::VectorXd::Unit(k, i));

  Eigen::VectorXd best;
  double best_rayleigh = -1.0;
  bool converged_any = false;
  for (Eigen::VectorXd v : starts) {
    bool converged = false;
    for (int it = 0; it < 1000000; ++it) {
      Eigen::VectorXd w = cov * v;
      const double norm = w.norm();
      if (norm == 0.0) break;
      w /= norm;
      const double rayleigh = w.dot(cov * w);
      const double residual = (cov * w - rayleigh * w).norm();
      v = w;
      if (residual <= 1e-10 * std::max(1.0, rayleigh)) {
        converged = true;
        break;
      }
    }
    if (!converged) continue;
    converged_any = true;
    const double rayleigh = v.dot(cov * v);
    if (rayleigh > best_rayleigh) {
      best_rayleigh = rayleigh;
      best = v;
    }
  }
  if (!converged_any) throw Error(Errc::NoConvergence, "power iteration did not converge");
  double sum = best.sum();
  if (sum == 0.0) {
    for (Eigen::Index i = 0; i < k; ++i) {
      if (best[i] != 0.0) {
        sum = best[i];
        break;
      }
    }
  }
  if (sum < 0.0) best = -best;
  return best;
}

Eigen::MatrixXd init_rotation(const Eigen::VectorXd& p, double eps, bool use_rotation) {
  const Eigen::Index k = p.size();
  if (!use_rotation) return Eigen::MatrixXd::Identity(k, k);
  if (!(eps > 0.0)) throw Error(Errc::InvalidArgument, "rotation eps must be > 0");
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double sgn = p[i] < 0.0 ? -1.0 : 1.0;
    U(i, i) = 1.0 / (sgn * std::max(std::abs(p[i]), eps));
  }
  return U;
}

// ---------------------------------------------------------------------------

LossTerms loss_terms(const Eigen::MatrixXd& batch, const CurveModel& model) {
  LossTerms t = forward_pass(batch, model).terms;
  if (!finite(t)) throw Error(Errc::NonFinite, "loss term is not finite");
  return t;
}

Gradients loss_gradients(const Eigen::MatrixXd& batch, const CurveModel& model, double lambda,
                         double tau) {
  const Forward fw = forward_pass(batch, model);
  const std::size_t k = model.k();
  const Eigen::Index n = batch.rows();
  const auto un = static_cast<std::size_t>(n);
  const double inv_n = 1.0 / static_cast<double>(n);

  Gradients out;
  out.terms = fw.terms;
  out.f.resize(k);
  out.ginv.resize(k);

  Eigen::MatrixXd dY = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(k));
  Eigen::VectorXd ds = Eigen::VectorXd::Zero(n);

  std::vector<double> value_w(un), zero_w(un, 0.0), slope_w(un), input_grad(un);
  std::vector<double> g_up(un), g_input(un);
  for (std::size_t i = 0; i < k; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    // f_i: L+ + tau M + lambda_L L-
    for (std::size_t m = 0; m < un; ++m) {
      const auto mm = static_cast<Eigen::Index>(m);
      const double h = fw.H[mm];
      value_w[m] = ((h > 0.0 ? 1.0 : 0.0) - (h < 0.0 ? model.lambda_L : 0.0)) * inv_n;
      slope_w[m] = tau * 2.0 * fw.residual(mm, col) * inv_n;
    }
    out.f[i] = model.f_nets[i].backward(fw.fx_tapes[i], value_w);
    out.f[i] += model.f_nets[i].backward(fw.fu_tapes[i], zero_w, slope_w, input_grad);

    // G_i^-: lambda R + tau M. input_grad[m] is tau 2 e f''(u) / n.
    for (std::size_t m = 0; m < un; ++m) {
      const auto mm = static_cast<Eigen::Index>(m);
      g_up[m] = -lambda * 2.0 * (fw.Y(mm, col) - fw.ginv(mm, col)) * inv_n + input_grad[m] + slope_w[m];
    }
    out.ginv[i] = model.ginv_nets[i].backward(fw.g_tapes[i], g_up, {}, g_input);

    // U: L+ + lambda R + tau M (+ lambda_O P_O below)
    for (std::size_t m = 0; m < un; ++m) {
      const auto mm = static_cast<Eigen::Index>(m);
      const double h = fw.H[mm];
      const double dh = h > 0.0 ? (fw.fslope_x(mm, col) - (fw.s[mm] - fw.Y(mm, col))) * inv_n : 0.0;
      dY(mm, col) += dh + lambda * 2.0 * (fw.Y(mm, col) - fw.ginv(mm, col)) * inv_n;
      ds[mm] += g_input[m] - tau * 2.0 * fw.residual(mm, col) * inv_n;
    }
  }
  dY.colwise() += ds;
  out.U = dY.transpose() * batch + model.lambda_O * orthogonality_gradient(model.U);
  return out;
}

// ---------------------------------------------------------------------------

Prepared prepare_fit(const Eigen::MatrixXd& data, const TrainConfig& config) {
  config.validate();
  if (data.cols() < 2) throw Error(Errc::InvalidArgument, "fitting needs k >= 2 columns");
  if (data.rows() < 20) throw Error(Errc::TooFew, "fitting needs at least 20 rows");
  if (!data.allFinite()) throw Error(Errc::NonFinite, "input data contains NaN or Inf");

  Prepared prep;
  prep.model.stats = standardize(data, &prep.standardized);

  const auto n = static_cast<std::size_t>(data.rows());
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  auto n_val = static_cast<std::size_t>(std::llround(config.val_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  prep.val_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  prep.train_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  const std::size_t k = static_cast<std::size_t>(data.cols());
  if (config.use_rotation) {
    const Eigen::VectorXd p = pca_first_component(select_rows(prep.standardized, prep.train_rows));
    prep.model.U = init_rotation(p, config.rotation_eps, true);
  } else {
    prep.model.U = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  }
  for (std::size_t i = 0; i < k; ++i) {
    prep.model.f_nets.emplace_back(config.depth, config.width);
    prep.model.f_nets.back().init_params(rng);
  }
  for (std::size_t i = 0; i < k; ++i) {
    prep.model.ginv_nets.emplace_back(config.depth, config.width);
    prep.model.ginv_nets.back().init_params(rng);
  }
  return prep;
}

FitResult fit(const Eigen::MatrixXd& data, const TrainConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  keep_large_blocks_on_heap();
  Prepared prep = prepare_fit(data, config);
  const Eigen::MatrixXd train = select_rows(prep.standardized, prep.train_rows);
  const Eigen::MatrixXd val = select_rows(prep.standardized, prep.val_rows);

  CurveModel model = std::move(prep.model);
  const std::size_t k = model.k();
  const double multiplier_rate = config.multiplier_rate.value_or(config.learning_rate);

  std::vector<Stepper> f_steps, g_steps;
  for (std::size_t i = 0; i < k; ++i) {
    f_steps.emplace_back(config, model.f_nets[i].params().size());
    g_steps.emplace_back(config, model.ginv_nets[i].params().size());
  }
  Stepper u_step(config, model.U.size());

  FitReport report;
  report.n_train = static_cast<std::size_t>(train.rows());
  report.n_val = static_cast<std::size_t>(val.rows());
  CurveModel best = model;
  double best_val = std::numeric_limits<double>::infinity();
  int stale = 0;

  for (int t = 0; t < config.max_iters; ++t) {
    Gradients grads = loss_gradients(train, model, config.lambda, config.tau);
    if (!finite(grads.terms)) {
      throw Error(Errc::NonFinite, "loss became non-finite at iteration " + std::to_string(t));
    }
    const LossTerms v = forward_pass(val, model).terms;
    const double val_metric = v.L_plus + config.lambda * v.R;
    if (!std::isfinite(val_metric)) {
      throw Error(Errc::NonFinite, "validation loss became non-finite at iteration " + std::to_string(t));
    }

    report.L_plus.push_back(grads.terms.L_plus);
    report.L_minus.push_back(grads.terms.L_minus);
    report.R.push_back(grads.terms.R);
    report.M.push_back(grads.terms.M);
    report.P_O.push_back(grads.terms.P_O);
    report.val.push_back(val_metric);
    report.val_L_minus.push_back(v.L_minus);
    report.lambda_L.push_back(model.lambda_L);
    report.lambda_O.push_back(model.lambda_O);
    report.stop_iteration = t + 1;

    // Iterations before min_iters are a warm-up: recorded, never selected.
    // Patience only runs once a snapshot exists.
    if (t >= config.min_iters) {
      const bool feasible = !config.max_val_violation || v.L_minus <= *config.max_val_violation;
      if (feasible && val_metric < best_val) {
        best_val = val_metric;
        best = model;
        report.best_iteration = t;
        stale = 0;
      } else if (report.best_iteration >= 0 && ++stale >= config.patience) {
        report.early_stopped = true;
        break;
      }
    }

    const double rate =
        config.learning_rate * std::pow(config.lr_final_fraction, double(t) / config.max_iters);
    for (std::size_t i = 0; i < k; ++i) {
      f_steps[i].step(model.f_nets[i].mutable_params().data(), grads.f[i], rate);
      nn::project_nonneg(model.f_nets[i]);
      g_steps[i].step(model.ginv_nets[i].mutable_params().data(), grads.ginv[i], rate);
    }
    model.lambda_L += multiplier_rate * grads.terms.L_minus;
    if (config.use_rotation) {
      const Eigen::VectorXd gu = Eigen::Map<const Eigen::VectorXd>(grads.U.data(), grads.U.size());
      u_step.step(model.U.data(), gu, rate);
      model.lambda_O += multiplier_rate * grads.terms.P_O;
    }
  }

  if (report.best_iteration < 0) {
    // No validation check ran; hand back the last iterate.
    best = model;
    if (config.max_iters > 0) report.best_iteration = report.stop_iteration;
  }
  report.final_val = loss_terms(val, best);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {std::move(best), std::move(report)};
}

Eigen::MatrixXd evaluate_curve(const CurveModel& model, const Eigen::MatrixXd& standardized) {
  const std::size_t k = model.k();
  if (static_cast<std::size_t>(standardized.cols()) != k) {
    throw Error(Errc::DimensionMismatch, "data has " + std::to_string(standardized.cols()) +
                                             " columns, model has k = " + std::to_string(k));
  }
  const Eigen::Index n = standardized.rows();
  const Eigen::VectorXd s = (standardized * model.U.transpose()).rowwise().sum();
  Eigen::MatrixXd g(n, static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    const nn::Tape tape = model.ginv_nets[i].record({s.data(), static_cast<std::size_t>(n)}, false);
    const auto v = tape.values();
    for (Eigen::Index m = 0; m < n; ++m) g(m, static_cast<Eigen::Index>(i)) = v[static_cast<std::size_t>(m)];
  }
  return g * model.U;  // rows of (U^T g_m)^T
}

Eigen::MatrixXd evaluate_curve_raw(const CurveModel& model, const Eigen::MatrixXd& data) {
  return model.stats.invert(evaluate_curve(model, model.stats.apply(data)));
}

double orthogonality_error(const Eigen::MatrixXd& U) {
  return (U.transpose() * U - Eigen::MatrixXd::Identity(U.cols(), U.cols())).norm();
}

double monotone_violation_fraction(const nn::ScalarNet& net, double lo, double hi, int points,
                                   double min_drop) {
  if (points < 2 || !(hi > lo)) throw Error(Errc::InvalidArgument, "need points >= 2 and hi > lo");
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
  const nn::Tape tape = net.record(grid, false);
  const auto v = tape.values();
  int drops = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i - 1] - v[i] > min_drop) ++drops;
  }
  return static_cast<double>(drops) / static_cast<double>(points - 1);
}

Eigen::VectorXd diagonal_coordinates(const CurveModel& model, const Eigen::MatrixXd& standardized) {
  if (standardized.cols() != model.U.cols()) {
    throw Error(Errc::DimensionMismatch, "column count does not match the model");
  }
  return (standardized * model.U.transpose()).rowwise().sum();
}

// ---------------------------------------------------------------------------

GridSearchResult grid_search(const Eigen::MatrixXd& data, const std::vector<double>& lambdas,
                             const std::vector<double>& taus, const TrainConfig& config,
                             unsigned threads) {
  if (lambdas.empty() || taus.empty()) throw Error(Errc::InvalidArgument, "grids must be nonempty");
  GridSearchResult out;
  for (double tau : taus) {
    for (double lambda : lambdas) {
      GridCell cell;
      cell.lambda = lambda;
      cell.tau = tau;
      cell.seed = config.seed + out.cells.size();
      out.cells.push_back(std::move(cell));
    }
  }
  parallel_for(out.cells.size(), threads, [&](std::size_t c) {
    GridCell& cell = out.cells[c];
    TrainConfig cfg = config;
    cfg.lambda = cell.lambda;
    cfg.tau = cell.tau;
    cfg.seed = cell.seed;
    try {
      FitResult res = fit(data, cfg);
      cell.L_H = res.report.final_val.L_plus;
      cell.L_R = res.report.final_val.R;
      cell.ok = std::isfinite(cell.score());
      if (!cell.ok) cell.error = "non-finite validation score";
      cell.result = std::move(res);
    } catch (const Error& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  });

  bool any = false;
  for (std::size_t c = 0; c < out.cells.size(); ++c) {
    const GridCell& cell = out.cells[c];
    if (!cell.ok) continue;
    if (!any || cell.score() < out.cells[out.selected].score()) out.selected = c;
    any = true;
  }
  if (!any) throw Error(Errc::NonFinite, "every grid cell failed; first: " + out.cells.front().error);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void write_row(std::ostream& out, const char* key, const double* v, Eigen::Index n) {
  char buf[32];
  out << key;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", v[i]);
    out << ' ' << buf;
  }
  out << '\n';
}

void expect(std::istream& in, const std::string& want) {
  std::string got;
  if (!(in >> got) || got != want) {
    throw Error(Errc::ParseError, "model file: expected '" + want + "', found '" + got + "'");
  }
}

double read_double(std::istream& in) {
  std::string token;
  if (!(in >> token)) throw Error(Errc::ParseError, "model file truncated");
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used == token.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(Errc::ParseError, "model file: bad number '" + token + "'");
}

}  // namespace

void write_model(std::ostream& out, const CurveModel& model) {
  const auto k = static_cast<Eigen::Index>(model.k());
  out << "monocurve-model v1\n";
  out << "k " << k << '\n';
  write_row(out, "lambda_L", &model.lambda_L, 1);
  write_row(out, "lambda_O", &model.lambda_O, 1);
  write_row(out, "mean", model.stats.mean.data(), k);
  write_row(out, "std", model.stats.std.data(), k);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> U = model.U;
  write_row(out, "U", U.data(), k * k);
  for (Eigen::Index i = 0; i < k; ++i) {
    out << "f " << i << '\n';
    nn::write_net(out, model.f_nets[static_cast<std::size_t>(i)]);
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    out << "ginv " << i << '\n';
    nn::write_net(out, model.ginv_nets[static_cast<std::size_t>(i)]);
  }
  out << "end\n";
}

CurveModel read_model(std::istream& in) {
  expect(in, "monocurve-model");
  expect(in, "v1");
  expect(in, "k");
  long k = 0;
  if (!(in >> k) || k < 2 || k > 1000) throw Error(Errc::ParseError, "model file: bad k");
  CurveModel model;
  expect(in, "lambda_L");
  model.lambda_L = read_double(in);
  expect(in, "lambda_O");
  model.lambda_O = read_double(in);
  model.stats.mean.resize(k);
  model.stats.std.resize(k);
  expect(in, "mean");
  for (long i = 0; i < k; ++i) model.stats.mean[i] = read_double(in);
  expect(in, "std");
  for (long i = 0; i < k; ++i) model.stats.std[i] = read_double(in);
  expect(in, "U");
  model.U.resize(k, k);
  for (long r = 0; r < k; ++r) {
    for (long c = 0; c < k; ++c) model.U(r, c) = read_double(in);
  }
  for (long i = 0; i < k; ++i) {
    expect(in, "f");
    expect(in, std::to_string(i));
    model.f_nets.push_back(nn::read_icnn(in));
  }
  for (long i = 0; i < k; ++i) {
    expect(in, "ginv");
    expect(in, std::to_string(i));
    model.ginv_nets.push_back(nn::read_plain(in));
  }
  expect(in, "end");
  return model;
}

}  // namespace monocurve::trainer

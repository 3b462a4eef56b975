#pragma once

// Monotone curve fitting by alternating gradient steps on input-convex
// potentials f_i, inverse-gradient networks G_i^- and a rotation U, with
// Lagrange multipliers for H >= 0 and U^T U = I, and validation-based early
// stopping.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "monocurve/nn.hpp"

namespace monocurve::trainer {

enum class Optimizer { LiteralSGD, Adam };

struct TrainConfig {
  double lambda = 1.0;  // reconstruction weight
  double tau = 1.0;     // inverse-penalty weight
  double learning_rate = 1e-3;
  /// Geometric step-size decay: the rate reaches learning_rate times this
  /// fraction at max_iters. 1 keeps it constant.
  double lr_final_fraction = 1.0;
  int max_iters = 2000;
  int patience = 1;
  /// Warm-up length: validation is recorded but neither snapshotted nor
  /// allowed to stop the run before this iteration.
  int min_iters = 0;
  Optimizer optimizer = Optimizer::Adam;
  bool use_rotation = true;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;

  int depth = 4;
  int width = 64;
  double rotation_eps = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Step size of the multiplier ascent; unset means the parameter learning
  /// rate.
  std::optional<double> multiplier_rate;
  /// When set, iterates whose validation L- exceeds this are never
  /// snapshotted. They count as non-improving for patience once an earlier
  /// iterate has been kept.
  std::optional<double> max_val_violation;

  /// Throws InvalidArgument on out-of-range settings.
  void validate() const;
};

struct Standardization {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd std;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& data) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& standardized) const;
};

/// Column-wise zero mean and unit population standard deviation.
/// DegenerateColumn when a column has zero spread; TooFew when n < 2.
Standardization standardize(const Eigen::MatrixXd& data, Eigen::MatrixXd* standardized);

/// Top eigenvector of the sample covariance by power iteration, signed so
/// that its coordinates sum to a positive number.
Eigen::VectorXd pca_first_component(const Eigen::MatrixXd& data);

/// diag(1 / (sign(p_i) max(|p_i|, eps))), or I when rotation is disabled.
Eigen::MatrixXd init_rotation(const Eigen::VectorXd& p, double eps, bool use_rotation = true);

struct CurveModel {
  Standardization stats;
  Eigen::MatrixXd U;
  std::vector<nn::IcnnNet> f_nets;
  std::vector<nn::PlainNet> ginv_nets;
  double lambda_L = 0.0;
  double lambda_O = 0.0;

  std::size_t k() const { return f_nets.size(); }
};

struct LossTerms {
  double L_plus = 0.0;   // mean max(H, 0)
  double L_minus = 0.0;  // mean max(-H, 0)
  double R = 0.0;        // mean |U x - G^-(s)|^2
  double M = 0.0;        // mean sum_i |G_i(G_i^-(s)) - s|^2
  double P_O = 0.0;      // |U^T U - I|_F^2 + |U U^T - I|_F^2
};

/// The five loss terms of `model` on rows of `batch` (standardized space).
LossTerms loss_terms(const Eigen::MatrixXd& batch, const CurveModel& model);

/// Gradients of the three update targets at the current model:
///   f_i   on L+ + tau M + lambda_L L-
///   G_i^- on lambda R + tau M
///   U     on L+ + lambda R + tau M + lambda_O P_O
struct Gradients {
  LossTerms terms;
  std::vector<Eigen::VectorXd> f;
  std::vector<Eigen::VectorXd> ginv;
  Eigen::MatrixXd U;
};

Gradients loss_gradients(const Eigen::MatrixXd& batch, const CurveModel& model, double lambda,
                         double tau);

struct FitReport {
  std::vector<double> L_plus, L_minus, R, M, P_O;
  std::vector<double> val;  // L_H + lambda L_R on validation rows
  std::vector<double> val_L_minus;
  std::vector<double> lambda_L, lambda_O;
  int stop_iteration = 0;   // iterations performed
  int best_iteration = -1;  // iterate returned; -1 only when max_iters = 0
  bool early_stopped = false;
  double wall_seconds = 0.0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  LossTerms final_val;  // loss terms of the returned model on validation rows
};

struct FitResult {
  CurveModel model;
  FitReport report;
};

/// Standardization, seeded split and network initialization shared by `fit`.
struct Prepared {
  Eigen::MatrixXd standardized;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;
  CurveModel model;
};

Prepared prepare_fit(const Eigen::MatrixXd& data, const TrainConfig& config);

/// Runs the training loop. Requires n >= 20 and k >= 2. Throws NonFinite
/// (message carries the iteration) when a loss term stops being finite.
FitResult fit(const Eigen::MatrixXd& data, const TrainConfig& config);

/// Rows of `standardized` mapped to U^T G^-(s), s = sum_j (U x)_j.
Eigen::MatrixXd evaluate_curve(const CurveModel& model, const Eigen::MatrixXd& standardized);

/// Same as evaluate_curve for raw data: standardizes with the model's stats
/// and maps the curve points back to data units.
Eigen::MatrixXd evaluate_curve_raw(const CurveModel& model, const Eigen::MatrixXd& data);

struct GridCell {
  double lambda = 0.0;
  double tau = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double L_H = 0.0;
  double L_R = 0.0;
  std::optional<FitResult> result;

  double score() const { return L_H + L_R; }
};

struct GridSearchResult {
  std::vector<GridCell> cells;  // tau-major, lambda-minor
  std::size_t selected = 0;
};

/// Fits every (lambda, tau) pair with seed config.seed + cell index and
/// selects the cell with minimal validation L_H + L_R. Failed cells are kept
/// with ok = false; throws the first failure if every cell fails.
GridSearchResult grid_search(const Eigen::MatrixXd& data, const std::vector<double>& lambdas,
                             const std::vector<double>& taus, const TrainConfig& config,
                             unsigned threads = 1);

/// ||U^T U - I||_F
double orthogonality_error(const Eigen::MatrixXd& U);

/// Fraction of the `points - 1` consecutive steps of `net` over an even grid
/// on [lo, hi] that drop by more than `min_drop`.
double monotone_violation_fraction(const nn::ScalarNet& net, double lo, double hi,
                                   int points = 512, double min_drop = 1e-3);

/// Diagonal coordinates s = sum_j (U x)_j of standardized rows.
Eigen::VectorXd diagonal_coordinates(const CurveModel& model, const Eigen::MatrixXd& standardized);

/// Self-describing text record ("monocurve-model v1").
void write_model(std::ostream& out, const CurveModel& model);
CurveModel read_model(std::istream& in);

}  // namespace monocurve::trainer

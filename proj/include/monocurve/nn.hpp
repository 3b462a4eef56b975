#pragma once

// Fixed-architecture scalar networks (one input, one output) with
// reverse-mode gradients.
//
// Both kinds share the layout
//   z_0 = elu(a_0 x + b_0)
//   z_l = elu(W_l z_{l-1} [+ a_l x] + b_l),   l = 1 .. depth-1
//   y   = w_out . z_{depth-1} [+ a_out x] + b_out
// where the bracketed input skips exist only for the input-convex kind, whose
// z-path weights (W_l, w_out) are kept entrywise nonnegative. ELU uses
// alpha = 1, which is convex and nondecreasing, so the input-convex kind is
// convex in x.
//
// A recorded Tape carries the value y and, optionally, the input slope dy/dx
// (forward tangent). The backward pass accepts upstream weights for both and
// returns parameter gradients plus d/dx of the weighted sum, so the slope can
// itself be differentiated (needed for the inverse penalty).

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace monocurve::nn {

enum class NetKind { InputConvex, Plain };

class ScalarNet;

class Tape {
 public:
  std::size_t size() const { return static_cast<std::size_t>(x_.size()); }
  bool has_slope() const { return with_slope_; }
  /// Network outputs y(x_m).
  std::span<const double> values() const { return {values_.data(), values_.size()}; }
  /// dy/dx at each x_m; empty unless recorded with slopes.
  std::span<const double> slopes() const { return {slopes_.data(), slopes_.size()}; }

 private:
  friend class ScalarNet;

  const ScalarNet* owner_ = nullptr;
  std::uint64_t version_ = 0;
  bool with_slope_ = false;
  Eigen::RowVectorXd x_;
  std::vector<Eigen::MatrixXd> act_;   // per layer, width x (m or 2m): [Z | dZ/dx]
  std::vector<Eigen::MatrixXd> d1_;    // elu'(P), width x m
  std::vector<Eigen::MatrixXd> curv_;  // elu''(P) dP/dx, width x m (slope tapes only)
  std::vector<double> values_;
  std::vector<double> slopes_;
};

class ScalarNet {
 public:
  ScalarNet(NetKind kind, int depth, int width);

  NetKind kind() const { return kind_; }
  int depth() const { return depth_; }
  int width() const { return width_; }
  std::size_t num_params() const { return static_cast<std::size_t>(params_.size()); }

  const Eigen::VectorXd& params() const { return params_; }
  /// Mutable access invalidates outstanding tapes.
  Eigen::VectorXd& mutable_params() {
    ++version_;
    return params_;
  }

  double forward(double x) const;
  double input_grad(double x) const;

  Tape record(std::span<const double> xs, bool with_slope) const;

  /// Gradient of sum_m (value_weights[m] y_m + slope_weights[m] y'_m) with
  /// respect to the parameters. `slope_weights` may be empty; it must be
  /// empty when the tape has no slopes. When `input_grads` is non-empty it
  /// receives d/dx_m of the same weighted sum. Throws TapeMismatch when the
  /// tape was recorded by another network or before a parameter update.
  Eigen::VectorXd backward(const Tape& tape, std::span<const double> value_weights,
                           std::span<const double> slope_weights = {},
                           std::span<double> input_grads = {}) const;

  /// Offsets (start, length) of the z-path weight blocks that must stay
  /// nonnegative for the input-convex kind. Empty for plain nets.
  const std::vector<std::pair<std::size_t, std::size_t>>& nonneg_blocks() const {
    return nonneg_blocks_;
  }

  /// Glorot-uniform weights and zero biases; nonnegative blocks are drawn
  /// uniformly from [0, 2 / fan_in].
  void init_params(std::mt19937_64& rng);

  bool operator==(const ScalarNet& other) const;

 private:
  struct Layer {
    std::size_t in_w = 0;    // a_l (width), or npos when absent
    std::size_t hidden = 0;  // W_l (width x width, row-major), npos for layer 0
    std::size_t bias = 0;    // b_l (width)
  };
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  NetKind kind_;
  int depth_;
  int width_;
  std::vector<Layer> layers_;
  std::size_t out_w_ = 0;
  std::size_t out_skip_ = npos;
  std::size_t out_bias_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> nonneg_blocks_;
  Eigen::VectorXd params_;
  std::uint64_t version_ = 0;
};

class IcnnNet : public ScalarNet {
 public:
  explicit IcnnNet(int depth = 4, int width = 64) : ScalarNet(NetKind::InputConvex, depth, width) {}
};

class PlainNet : public ScalarNet {
 public:
  explicit PlainNet(int depth = 4, int width = 64) : ScalarNet(NetKind::Plain, depth, width) {}
};

double net_forward(const ScalarNet& net, double x);
double net_input_grad(const ScalarNet& net, double x);
Eigen::VectorXd net_param_grads(const ScalarNet& net, const Tape& tape,
                                std::span<const double> upstream);
/// Clamps every z-path weight to max(w, 0); other parameters untouched.
void project_nonneg(IcnnNet& net);

/// Text record: "scalarnet v1", kind, depth, width, parameter count, then
/// the flat parameter list (layer by layer, matrices row-major) at 17
/// significant digits.
void write_net(std::ostream& out, const ScalarNet& net);
IcnnNet read_icnn(std::istream& in);
PlainNet read_plain(std::istream& in);

}  // namespace monocurve::nn

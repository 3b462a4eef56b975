#include "monocurve/nn.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "monocurve/error.hpp"

namespace monocurve::nn {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

const char* kind_name(NetKind kind) { return kind == NetKind::InputConvex ? "icnn" : "plain"; }

}  // namespace

ScalarNet::ScalarNet(NetKind kind, int depth, int width)
    : kind_(kind), depth_(depth), width_(width) {
  if (depth < 1 || width < 1) {
    throw Error(Errc::InvalidArgument, "network depth and width must be positive");
  }
  const auto w = static_cast<std::size_t>(width);
  std::size_t off = 0;
  layers_.resize(static_cast<std::size_t>(depth));
  for (int l = 0; l < depth; ++l) {
    Layer& layer = layers_[static_cast<std::size_t>(l)];
    if (l == 0) {
      layer.hidden = npos;
      layer.in_w = off;
      off += w;
    } else {
      layer.hidden = off;
      if (kind == NetKind::InputConvex) nonneg_blocks_.emplace_back(off, w * w);
      off += w * w;
      if (kind == NetKind::InputConvex) {
        layer.in_w = off;
        off += w;
      } else {
        layer.in_w = npos;
      }
    }
    layer.bias = off;
    off += w;
  }
  out_w_ = off;
  if (kind == NetKind::InputConvex) nonneg_blocks_.emplace_back(off, w);
  off += w;
  if (kind == NetKind::InputConvex) out_skip_ = off++;
  out_bias_ = off++;
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(off));
}

void ScalarNet::init_params(std::mt19937_64& rng) {
  Eigen::VectorXd& p = mutable_params();
  p.setZero();
  auto fill = [&](std::size_t off, std::size_t len, double fan_in, double fan_out, bool nonneg) {
    // Nonnegative blocks get mean 1 / fan_in so a sum over the z-path keeps
    // its scale; |Glorot| would grow it by ~sqrt(fan_in) per layer.
    const double a = nonneg ? 2.0 / fan_in : std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    for (std::size_t i = 0; i < len; ++i) {
      const double draw = dist(rng);
      p[static_cast<Eigen::Index>(off + i)] = nonneg ? std::abs(draw) : draw;
    }
  };
  const auto w = static_cast<std::size_t>(width_);
  const double wd = static_cast<double>(width_);
  const bool convex = kind_ == NetKind::InputConvex;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    if (layer.hidden != npos) fill(layer.hidden, w * w, wd, wd, convex);
    if (layer.in_w != npos) fill(layer.in_w, w, 1.0, wd, false);
  }
  fill(out_w_, w, wd, 1.0, convex);
  if (out_skip_ != npos) fill(out_skip_, 1, 1.0, 1.0, false);
}

double ScalarNet::forward(double x) const {
  const Tape tape = record(std::span<const double>(&x, 1), false);
  return tape.values()[0];
}

double ScalarNet::input_grad(double x) const {
  const Tape tape = record(std::span<const double>(&x, 1), true);
  return tape.slopes()[0];
}

Tape ScalarNet::record(std::span<const double> xs, bool with_slope) const {
  const Eigen::Index m = static_cast<Eigen::Index>(xs.size());
  const Eigen::Index w = width_;
  const Eigen::Index cols = with_slope ? 2 * m : m;
  const double* p = params_.data();

  Tape tape;
  tape.owner_ = this;
  tape.version_ = version_;
  tape.with_slope_ = with_slope;
  tape.x_ = Eigen::Map<const Eigen::RowVectorXd>(xs.data(), m);
  tape.act_.resize(layers_.size());
  tape.d1_.resize(layers_.size());
  if (with_slope) tape.curv_.resize(layers_.size());

  Eigen::MatrixXd P(w, cols);
  Eigen::ArrayXXd e(w, m);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    Eigen::Map<const Eigen::VectorXd> bias(p + layer.bias, w);
    if (layer.hidden == npos) {
      Eigen::Map<const Eigen::VectorXd> a(p + layer.in_w, w);
      P.leftCols(m).noalias() = a * tape.x_;
      if (with_slope) P.rightCols(m) = a.replicate(1, m);
    } else {
      Eigen::Map<const RowMajor> W(p + layer.hidden, w, w);
      P.noalias() = W * tape.act_[l - 1];
      if (layer.in_w != npos) {
        Eigen::Map<const Eigen::VectorXd> a(p + layer.in_w, w);
        P.leftCols(m).noalias() += a * tape.x_;
        if (with_slope) P.rightCols(m).colwise() += a;
      }
    }
    P.leftCols(m).colwise() += bias;

    e = P.leftCols(m).array().min(0.0).exp();
    Eigen::MatrixXd& Z = tape.act_[l];
    Eigen::MatrixXd& D1 = tape.d1_[l];
    Z.resize(w, cols);
    D1.resize(w, m);
    // Left blocks are contiguous (column-major), so plain loops vectorize.
    const Eigen::Index len = w * m;
    const double* pl = P.data();
    const double* ev = e.data();
    double* z = Z.data();
    double* d1 = D1.data();
    for (Eigen::Index i = 0; i < len; ++i) {
      const bool pos = pl[i] > 0.0;
      z[i] = pos ? pl[i] : ev[i] - 1.0;
      d1[i] = pos ? 1.0 : ev[i];
    }
    if (with_slope) {
      tape.curv_[l].resize(w, m);
      const double* pr = P.data() + len;
      double* zr = Z.data() + len;
      double* cv = tape.curv_[l].data();
      for (Eigen::Index i = 0; i < len; ++i) {
        zr[i] = d1[i] * pr[i];
        cv[i] = pl[i] > 0.0 ? 0.0 : ev[i] * pr[i];
      }
    }
  }

  Eigen::Map<const Eigen::RowVectorXd> wout(p + out_w_, w);
  const Eigen::MatrixXd& last = tape.act_.back();
  Eigen::RowVectorXd y = wout * last.leftCols(m);
  y.array() += p[out_bias_];
  if (out_skip_ != npos) y += p[out_skip_] * tape.x_;
  tape.values_.assign(y.data(), y.data() + m);
  if (with_slope) {
    Eigen::RowVectorXd dy = wout * last.rightCols(m);
    if (out_skip_ != npos) dy.array() += p[out_skip_];
    tape.slopes_.assign(dy.data(), dy.data() + m);
  }
  return tape;
}

Eigen::VectorXd ScalarNet::backward(const Tape& tape, std::span<const double> value_weights,
                                    std::span<const double> slope_weights,
                                    std::span<double> input_grads) const {
  const Eigen::Index m = static_cast<Eigen::Index>(tape.size());
  if (tape.owner_ != this || tape.version_ != version_) {
    throw Error(Errc::TapeMismatch, "tape was recorded by a different network state");
  }
  if (static_cast<Eigen::Index>(value_weights.size()) != m ||
      (!slope_weights.empty() && static_cast<Eigen::Index>(slope_weights.size()) != m) ||
      (!input_grads.empty() && static_cast<Eigen::Index>(input_grads.size()) != m)) {
    throw Error(Errc::TapeMismatch, "upstream gradient size does not match the tape");
  }
  if (!slope_weights.empty() && !tape.with_slope_) {
    throw Error(Errc::TapeMismatch, "slope weights given for a tape recorded without slopes");
  }

  // Without slope weights the tangent half carries no adjoint and is skipped.
  const bool slope = tape.with_slope_ && !slope_weights.empty();
  const Eigen::Index w = width_;
  const Eigen::Index cols = slope ? 2 * m : m;
  const double* p = params_.data();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
  double* g = grad.data();

  Eigen::RowVectorXd ybar(cols);
  ybar.leftCols(m) = Eigen::Map<const Eigen::RowVectorXd>(value_weights.data(), m);
  if (slope) ybar.rightCols(m) = Eigen::Map<const Eigen::RowVectorXd>(slope_weights.data(), m);
  const bool want_input = !input_grads.empty();
  Eigen::RowVectorXd xbar = Eigen::RowVectorXd::Zero(want_input ? m : 0);

  Eigen::Map<const Eigen::VectorXd> wout(p + out_w_, w);
  Eigen::Map<Eigen::VectorXd>(g + out_w_, w).noalias() = tape.act_.back().leftCols(cols) * ybar.transpose();
  g[out_bias_] = ybar.leftCols(m).sum();
  if (out_skip_ != npos) {
    g[out_skip_] = ybar.leftCols(m).dot(tape.x_) + (slope ? ybar.rightCols(m).sum() : 0.0);
    if (want_input) xbar += p[out_skip_] * ybar.leftCols(m);
  }
  Eigen::MatrixXd zbar(w, cols);
  zbar.noalias() = wout * ybar;

  Eigen::MatrixXd pbar(w, cols);
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& layer = layers_[li];
    const auto d1 = tape.d1_[li].array();
    if (slope) {
      pbar.leftCols(m).array() =
          zbar.leftCols(m).array() * d1 + zbar.rightCols(m).array() * tape.curv_[li].array();
      pbar.rightCols(m).array() = zbar.rightCols(m).array() * d1;
    } else {
      pbar.array() = zbar.array() * d1;
    }

    Eigen::Map<Eigen::VectorXd>(g + layer.bias, w) = pbar.leftCols(m).rowwise().sum();
    if (layer.in_w != npos) {
      Eigen::Map<Eigen::VectorXd> ga(g + layer.in_w, w);
      ga.noalias() = pbar.leftCols(m) * tape.x_.transpose();
      if (slope) ga += pbar.rightCols(m).rowwise().sum();
      if (want_input) {
        xbar.noalias() += Eigen::Map<const Eigen::RowVectorXd>(p + layer.in_w, w) * pbar.leftCols(m);
      }
    }
    if (layer.hidden != npos) {
      Eigen::Map<RowMajor>(g + layer.hidden, w, w).noalias() =
          pbar * tape.act_[li - 1].leftCols(cols).transpose();
      zbar.noalias() = Eigen::Map<const RowMajor>(p + layer.hidden, w, w).transpose() * pbar;
    }
  }
  if (want_input) {
    for (Eigen::Index i = 0; i < m; ++i) input_grads[static_cast<std::size_t>(i)] = xbar[i];
  }
  return grad;
}

bool ScalarNet::operator==(const ScalarNet& other) const {
  return kind_ == other.kind_ && depth_ == other.depth_ && width_ == other.width_ &&
         params_ == other.params_;
}

double net_forward(const ScalarNet& net, double x) { return net.forward(x); }

double net_input_grad(const ScalarNet& net, double x) { return net.input_grad(x); }

Eigen::VectorXd net_param_grads(const ScalarNet& net, const Tape& tape,
                                std::span<const double> upstream) {
  return net.backward(tape, upstream);
}

void project_nonneg(IcnnNet& net) {
  Eigen::VectorXd& p = net.mutable_params();
  for (const auto& [off, len] : net.nonneg_blocks()) {
    auto block = p.segment(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(len));
    block = block.cwiseMax(0.0);
  }
}

void write_net(std::ostream& out, const ScalarNet& net) {
  out << "scalarnet v1\n";
  out << "kind " << kind_name(net.kind()) << "\n";
  out << "depth " << net.depth() << "\n";
  out << "width " << net.width() << "\n";
  out << "params " << net.num_params() << "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < net.params().size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", net.params()[i]);
    out << buf << "\n";
  }
}

namespace {

template <class Net>
Net read_net(std::istream& in, NetKind expected) {
  std::string tag, version, key, kind;
  int depth = 0, width = 0;
  std::size_t count = 0;
  if (!(in >> tag >> version) || tag != "scalarnet" || version != "v1") {
    throw Error(Errc::ParseError, "expected 'scalarnet v1' record header");
  }
  if (!(in >> key >> kind) || key != "kind" || kind != kind_name(expected)) {
    throw Error(Errc::ParseError, std::string("expected network kind ") + kind_name(expected));
  }
  if (!(in >> key >> depth) || key != "depth") throw Error(Errc::ParseError, "missing depth");
  if (!(in >> key >> width) || key != "width") throw Error(Errc::ParseError, "missing width");
  if (!(in >> key >> count) || key != "params") throw Error(Errc::ParseError, "missing params");
  Net net(depth, width);
  if (count != net.num_params()) {
    throw Error(Errc::ParseError, "parameter count " + std::to_string(count) +
                                      " does not match architecture");
  }
  Eigen::VectorXd& p = net.mutable_params();
  std::string token;
  for (std::size_t i = 0; i < count; ++i) {
    if (!(in >> token)) throw Error(Errc::ParseError, "truncated parameter list");
    try {
      std::size_t used = 0;
      p[static_cast<Eigen::Index>(i)] = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw Error(Errc::ParseError, "bad parameter '" + token + "' at index " + std::to_string(i));
    }
  }
  return net;
}

}  // namespace

IcnnNet read_icnn(std::istream& in) { return read_net<IcnnNet>(in, NetKind::InputConvex); }

PlainNet read_plain(std::istream& in) { return read_net<PlainNet>(in, NetKind::Plain); }

}  // namespace monocurve::nn

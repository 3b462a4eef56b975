#include "monocurve/convex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>

#include "monocurve/error.hpp"

namespace monocurve::convex {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sign(double x) { return (x > 0.0) - (x < 0.0); }

std::vector<double> uniform_grid(Interval box, std::size_t nodes) {
  std::vector<double> grid(nodes);
  const double step = box.width() / static_cast<double>(nodes - 1);
  for (std::size_t i = 0; i < nodes; ++i) grid[i] = box.lo + step * static_cast<double>(i);
  grid.back() = box.hi;
  return grid;
}

void require_box(Interval box) {
  if (box.degenerate()) {
    throw Error(Errc::EmptyBox, "search box [" + std::to_string(box.lo) + ", " +
                                    std::to_string(box.hi) + "] is degenerate");
  }
}

struct GridMax {
  double value = -kInf;
  double argmax = 0.0;
};

GridMax grid_max(const std::function<double(double)>& f, double y, Interval box,
                 std::size_t nodes) {
  GridMax best;
  const double step = box.width() / static_cast<double>(nodes - 1);
  for (std::size_t i = 0; i < nodes; ++i) {
    const double x = (i + 1 == nodes) ? box.hi : box.lo + step * static_cast<double>(i);
    const double v = x * y - f(x);
    if (v > best.value) best = {v, x};
  }
  return best;
}

// Root of a nondecreasing function on [lo, hi] with phi(lo) <= 0 <= phi(hi).
template <class Phi>
double bisect_root(Phi&& phi, double lo, double hi, int iters = 200) {
  for (int it = 0; it < iters && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (phi(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

bool Interval::degenerate() const {
  return !(std::isfinite(lo) && std::isfinite(hi) && lo < hi);
}

// ---------------------------------------------------------------------------
// AnalyticConvexFn

AnalyticConvexFn AnalyticConvexFn::power(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) {
    throw Error(Errc::InvalidArgument, "power exponent must be > 1, got " + std::to_string(p));
  }
  return {Kind::Power, p, 0.0, 0.0, 0.0};
}

AnalyticConvexFn AnalyticConvexFn::quadratic(double a, double b, double c) {
  if (!(a >= 0.0) || !std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c)) {
    throw Error(Errc::InvalidArgument, "quadratic needs finite a >= 0");
  }
  return {Kind::Quadratic, 0.0, a, b, c};
}

AnalyticConvexFn AnalyticConvexFn::abs_val() { return {Kind::AbsVal, 0.0, 0.0, 0.0, 0.0}; }

double AnalyticConvexFn::operator()(double x) const {
  switch (kind_) {
    case Kind::Power: return std::pow(std::abs(x), p_) / p_;
    case Kind::Quadratic: return 0.5 * a_ * x * x + b_ * x + c_;
    case Kind::AbsVal: return std::abs(x);
  }
  return 0.0;
}

double AnalyticConvexFn::derivative(double x) const {
  switch (kind_) {
    case Kind::Power: return sign(x) * std::pow(std::abs(x), p_ - 1.0);
    case Kind::Quadratic: return a_ * x + b_;
    case Kind::AbsVal: return sign(x);
  }
  return 0.0;
}

double AnalyticConvexFn::second_derivative(double x) const {
  switch (kind_) {
    case Kind::Power:
      if (x == 0.0) return p_ < 2.0 ? kInf : (p_ == 2.0 ? 1.0 : 0.0);
      return (p_ - 1.0) * std::pow(std::abs(x), p_ - 2.0);
    case Kind::Quadratic: return a_;
    case Kind::AbsVal: return 0.0;
  }
  return 0.0;
}

ConjugateValue AnalyticConvexFn::conjugate(double y) const {
  switch (kind_) {
    case Kind::Power: {
      const double q = p_ / (p_ - 1.0);
      return {std::pow(std::abs(y), q) / q, false};
    }
    case Kind::Quadratic:
      if (a_ > 0.0) return {(y - b_) * (y - b_) / (2.0 * a_) - c_, false};
      if (y == b_) return {-c_, false};
      return {kInf, true};
    case Kind::AbsVal:
      if (std::abs(y) <= 1.0) return {0.0, false};
      return {kInf, true};
  }
  return {kInf, true};
}

// ---------------------------------------------------------------------------
// TabulatedConvexFn

TabulatedConvexFn::TabulatedConvexFn(std::vector<double> knots, std::vector<double> values,
                                     std::vector<double> slopes)
    : knots_(std::move(knots)), values_(std::move(values)), slopes_(std::move(slopes)) {
  const std::size_t n = knots_.size();
  if (n < 2 || values_.size() != n || slopes_.size() != n) {
    throw Error(Errc::DimensionMismatch, "tabulated function needs >= 2 knots with matching "
                                         "values and slopes");
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!(knots_[i + 1] > knots_[i])) {
      throw Error(Errc::NotStrictlyIncreasing, "knots must be strictly increasing");
    }
  }
  // Fritsch-Butland weighted harmonic mean (monotone cubic).
  std::vector<double> delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    delta[i] = (slopes_[i + 1] - slopes_[i]) / (knots_[i + 1] - knots_[i]);
  }
  curvature_.assign(n, 0.0);
  curvature_[0] = delta[0];
  curvature_[n - 1] = delta[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0.0) continue;
    const double h0 = knots_[i] - knots_[i - 1];
    const double h1 = knots_[i + 1] - knots_[i];
    const double w1 = 2.0 * h1 + h0;
    const double w2 = h1 + 2.0 * h0;
    curvature_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
  }
}

std::size_t TabulatedConvexFn::cell(double x) const {
  auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  std::size_t idx = static_cast<std::size_t>(it - knots_.begin());
  idx = idx == 0 ? 0 : idx - 1;
  return std::min(idx, knots_.size() - 2);
}

double TabulatedConvexFn::operator()(double x) const {
  if (x <= knots_.front()) return values_.front() + slopes_.front() * (x - knots_.front());
  if (x >= knots_.back()) return values_.back() + slopes_.back() * (x - knots_.back());
  const std::size_t k = cell(x);
  const double h = knots_[k + 1] - knots_[k];
  const double t = (x - knots_[k]) / h;
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
  const double H00 = 0.5 * t4 - t3 + t;
  const double H10 = 0.25 * t4 - 2.0 * t3 / 3.0 + 0.5 * t2;
  const double H01 = -0.5 * t4 + t3;
  const double H11 = 0.25 * t4 - t3 / 3.0;
  return values_[k] + h * (H00 * slopes_[k] + h * H10 * curvature_[k] +
                           H01 * slopes_[k + 1] + h * H11 * curvature_[k + 1]);
}

double TabulatedConvexFn::derivative(double x) const {
  if (x <= knots_.front()) return slopes_.front();
  if (x >= knots_.back()) return slopes_.back();
  if (exact_slope_) return exact_slope_(x);
  const std::size_t k = cell(x);
  const double h = knots_[k + 1] - knots_[k];
  const double t = (x - knots_[k]) / h;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
  const double h10 = t3 - 2.0 * t2 + t;
  const double h01 = -2.0 * t3 + 3.0 * t2;
  const double h11 = t3 - t2;
  return h00 * slopes_[k] + h * h10 * curvature_[k] + h01 * slopes_[k + 1] +
         h * h11 * curvature_[k + 1];
}

double TabulatedConvexFn::second_derivative(double x) const {
  if (x < knots_.front() || x > knots_.back()) return 0.0;
  const std::size_t k = cell(x);
  const double h = knots_[k + 1] - knots_[k];
  const double t = (x - knots_[k]) / h;
  const double t2 = t * t;
  const double d00 = 6.0 * t2 - 6.0 * t;
  const double d10 = 3.0 * t2 - 4.0 * t + 1.0;
  const double d01 = -6.0 * t2 + 6.0 * t;
  const double d11 = 3.0 * t2 - 2.0 * t;
  return (d00 * slopes_[k] + d01 * slopes_[k + 1]) / h + d10 * curvature_[k] +
         d11 * curvature_[k + 1];
}

// ---------------------------------------------------------------------------

double eval_fn(const ConvexFn& f, double x) {
  return std::visit([x](const auto& g) { return g(x); }, f);
}

double derivative(const ConvexFn& f, double x) {
  return std::visit([x](const auto& g) { return g.derivative(x); }, f);
}

double second_derivative(const ConvexFn& f, double x) {
  return std::visit([x](const auto& g) { return g.second_derivative(x); }, f);
}

ConjugateValue discrete_legendre(const std::function<double(double)>& f, double y, Interval box,
                                 std::size_t nodes) {
  require_box(box);
  if (nodes < 2) throw Error(Errc::InvalidArgument, "Legendre grid needs >= 2 nodes");
  const GridMax inner = grid_max(f, y, box, nodes);
  const double center = 0.5 * (box.lo + box.hi);
  const Interval wide{center - box.width(), center + box.width()};
  const GridMax outer = grid_max(f, y, wide, nodes);
  const double slack = 1e-12 * (1.0 + std::abs(inner.value));
  if (outer.value > inner.value + slack && !box.contains(outer.argmax)) {
    return {kInf, true};
  }
  return {inner.value, false};
}

ConjugateValue conjugate_eval(const ConvexFn& f, double y, Interval search_box) {
  require_box(search_box);
  if (const auto* analytic = std::get_if<AnalyticConvexFn>(&f)) {
    return analytic->conjugate(y);
  }
  const auto& tab = std::get<TabulatedConvexFn>(f);
  return discrete_legendre([&tab](double x) { return tab(x); }, y, search_box);
}

TabulatedConvexFn numeric_conjugate(const ConvexFn& f, Interval x_box, Interval y_box,
                                    std::size_t nodes) {
  require_box(x_box);
  require_box(y_box);
  if (nodes < 3) throw Error(Errc::InvalidArgument, "numeric conjugate needs >= 3 nodes");
  const std::vector<double> xs = uniform_grid(x_box, nodes);
  const std::vector<double> ys = uniform_grid(y_box, nodes);
  std::vector<double> fx(nodes);
  for (std::size_t i = 0; i < nodes; ++i) fx[i] = eval_fn(f, xs[i]);

  std::vector<double> values(nodes), slopes(nodes);
  std::size_t arg = 0;
  for (std::size_t m = 0; m < nodes; ++m) {
    const double y = ys[m];
    // x*y - f(x) is concave in x and its maximizer is nondecreasing in y.
    while (arg + 1 < nodes && xs[arg + 1] * y - fx[arg + 1] >= xs[arg] * y - fx[arg]) ++arg;
    double xstar = xs[arg];
    const double lo = xs[arg == 0 ? 0 : arg - 1];
    const double hi = xs[std::min(arg + 1, nodes - 1)];
    if (derivative(f, lo) - y <= 0.0 && derivative(f, hi) - y >= 0.0) {
      xstar = bisect_root([&](double x) { return derivative(f, x) - y; }, lo, hi);
    }
    values[m] = xstar * y - eval_fn(f, xstar);
    slopes[m] = xstar;
    if (arg > 0) --arg;
  }
  return TabulatedConvexFn(ys, std::move(values), std::move(slopes));
}

double prox(const ConvexFn& f, double x, double tol) {
  if (!(tol > 0.0)) throw Error(Errc::InvalidArgument, "prox tolerance must be positive");
  auto phi = [&](double p) { return derivative(f, p) + p - x; };
  const double fx = derivative(f, x);
  if (fx == 0.0) return x;
  double lo = fx > 0.0 ? x - fx : x;
  double hi = fx > 0.0 ? x : x - fx;

  double p = 0.5 * (lo + hi);
  double step_old = hi - lo;
  double step = step_old;
  for (int it = 0; it < 200; ++it) {
    const double val = phi(p);
    if (std::abs(val) <= tol) return p;
    if (val < 0.0) {
      lo = p;
    } else {
      hi = p;
    }
    if (hi - lo <= tol) return 0.5 * (lo + hi);
    const double slope = second_derivative(f, p) + 1.0;
    const double newton = std::isfinite(slope) ? p - val / slope : p;
    const bool newton_ok = newton > lo && newton < hi && std::abs(2.0 * val) <= std::abs(step_old * slope);
    step_old = step;
    if (newton_ok) {
      step = newton - p;
      p = newton;
    } else {
      step = 0.5 * (hi - lo);
      p = lo + step;
    }
  }
  throw Error(Errc::NoConvergence, "prox did not converge at x = " + std::to_string(x));
}

// ---------------------------------------------------------------------------
// CTuple and the diagonal curve

CTuple::CTuple(std::vector<ConvexFn> fns) : fns_(std::move(fns)) {
  if (fns_.size() < 2) throw Error(Errc::InvalidArgument, "a tuple needs k >= 2 functions");
}

double CTuple::check_duality(Interval box, std::size_t per_axis, double tol) {
  require_box(box);
  if (per_axis < 2) throw Error(Errc::InvalidArgument, "duality grid needs >= 2 nodes per axis");
  const std::vector<double> grid = uniform_grid(box, per_axis);
  const std::size_t k = fns_.size();
  // f_i on the grid once; H only needs these plus the cross products.
  std::vector<std::vector<double>> fvals(k, std::vector<double>(per_axis));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t m = 0; m < per_axis; ++m) fvals[i][m] = eval_fn(fns_[i], grid[m]);
  }
  std::vector<std::size_t> idx(k, 0);
  double min_h = kInf;
  while (true) {
    double fsum = 0.0, s = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double xi = grid[idx[i]];
      fsum += fvals[i][idx[i]];
      s += xi;
      sq += xi * xi;
    }
    min_h = std::min(min_h, fsum - 0.5 * (s * s - sq));
    std::size_t d = 0;
    while (d < k && ++idx[d] == per_axis) idx[d++] = 0;
    if (d == k) break;
  }
  duality_checked_ = min_h >= -tol;
  return min_h;
}

double H_eval(std::span<const double> x, const CTuple& fns) {
  if (x.size() != fns.k()) {
    throw Error(Errc::DimensionMismatch, "point has " + std::to_string(x.size()) +
                                             " coordinates, tuple has k = " +
                                             std::to_string(fns.k()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += eval_fn(fns.fn(i), x[i]);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) total -= x[i] * x[j];
  }
  return total;
}

MonotoneCurve::MonotoneCurve(CTuple fns, double tol) : fns_(std::move(fns)), tol_(tol) {}

double MonotoneCurve::component(std::size_t i, double s) const { return prox(fns_.fn(i), s, tol_); }

std::vector<double> MonotoneCurve::operator()(double s) const {
  std::vector<double> out(fns_.k());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = component(i, s);
  return out;
}

MonotoneCurve diagonal_curve(const CTuple& fns) { return MonotoneCurve(fns); }

// ---------------------------------------------------------------------------
// c-conjugate tuples from a monotone curve

namespace {

double invert_increasing(const std::function<double(double)>& g, double v, Interval box) {
  double lo = box.lo, hi = box.hi;
  double width = box.width();
  for (int it = 0; it < 200 && g(lo) > v; ++it) {
    lo -= width;
    width *= 2.0;
  }
  width = box.width();
  for (int it = 0; it < 200 && g(hi) < v; ++it) {
    hi += width;
    width *= 2.0;
  }
  if (g(lo) > v || g(hi) < v) {
    throw Error(Errc::NoConvergence, "cannot bracket inverse of pairwise map at " + std::to_string(v));
  }
  return bisect_root([&](double u) { return g(u) - v; }, lo, hi);
}

// Cumulative trapezoid integral of samples on `grid`, shifted so that it
// vanishes at `anchor` (linear interpolation of the integrand inside a cell).
std::vector<double> anchored_integral(const std::vector<double>& grid,
                                      const std::vector<double>& integrand, double anchor) {
  const std::size_t n = grid.size();
  std::vector<double> cum(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    cum[i] = cum[i - 1] + 0.5 * (grid[i] - grid[i - 1]) * (integrand[i] + integrand[i - 1]);
  }
  auto it = std::upper_bound(grid.begin(), grid.end(), anchor);
  std::size_t c = static_cast<std::size_t>(it - grid.begin());
  c = std::min(c == 0 ? 0 : c - 1, n - 2);
  const double dx = anchor - grid[c];
  const double h = grid[c + 1] - grid[c];
  const double at_anchor_integrand = integrand[c] + (integrand[c + 1] - integrand[c]) * dx / h;
  const double at_anchor = cum[c] + 0.5 * dx * (integrand[c] + at_anchor_integrand);
  for (double& v : cum) v -= at_anchor;
  return cum;
}

}  // namespace

CTuple build_ctuple_from_curve(std::size_t k, std::span<const PairwiseMap> maps, Interval box,
                               std::size_t nodes) {
  require_box(box);
  if (k < 2) throw Error(Errc::InvalidArgument, "k must be >= 2");
  if (nodes < 3) throw Error(Errc::InvalidArgument, "quadrature needs >= 3 nodes");
  if (!box.contains(0.0)) throw Error(Errc::OutOfRange, "box must contain the origin");

  std::map<std::pair<std::size_t, std::size_t>, const PairwiseMap*> by_pair;
  for (const auto& m : maps) {
    if (m.i >= m.j || m.j >= k || !m.map) {
      throw Error(Errc::InvalidArgument, "pairwise maps must be indexed i < j < k");
    }
    if (!by_pair.emplace(std::make_pair(m.i, m.j), &m).second) {
      throw Error(Errc::InvalidArgument, "duplicate pairwise map");
    }
  }
  if (by_pair.size() != k * (k - 1) / 2) {
    throw Error(Errc::InvalidArgument, "every pair i < j needs a map");
  }

  const std::vector<double> grid = uniform_grid(box, nodes);
  for (const auto& [key, m] : by_pair) {
    double prev = m->map(grid[0]);
    for (std::size_t n = 1; n < nodes; ++n) {
      const double cur = m->map(grid[n]);
      if (!(cur - prev > 0.0)) {
        throw Error(Errc::NotStrictlyIncreasing,
                    "map (" + std::to_string(key.first) + "," + std::to_string(key.second) +
                        ") is not strictly increasing near " + std::to_string(grid[n]));
      }
      prev = cur;
    }
  }

  std::vector<ConvexFn> fns;
  fns.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> slopes(nodes, 0.0), values(nodes, 0.0);
    // Exact slope sum_j G_ij(x) for use between knots.
    std::vector<std::pair<std::function<double(double)>, bool>> parts;  // (map, inverted)
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i) continue;
      std::vector<double> integrand(nodes);
      double anchor = 0.0;
      if (j > i) {
        const auto& g = by_pair.at({i, j})->map;
        for (std::size_t n = 0; n < nodes; ++n) integrand[n] = g(grid[n]);
        parts.emplace_back(g, false);
      } else {
        // x_j = G_ji(x_i) read backwards: x_i -> G_ji^{-1}(x_i), anchored at
        // the x_i-axis crossing y_ji = G_ji(0).
        const auto& g = by_pair.at({j, i})->map;
        for (std::size_t n = 0; n < nodes; ++n) integrand[n] = invert_increasing(g, grid[n], box);
        parts.emplace_back(g, true);
        anchor = g(0.0);
        if (!box.contains(anchor)) {
          throw Error(Errc::OutOfRange, "intercept " + std::to_string(anchor) + " lies outside the box");
        }
      }
      const std::vector<double> integral = anchored_integral(grid, integrand, anchor);
      for (std::size_t n = 0; n < nodes; ++n) {
        slopes[n] += integrand[n];
        values[n] += integral[n];
      }
    }
    TabulatedConvexFn fn(grid, std::move(values), std::move(slopes));
    fn.set_exact_slope([parts = std::move(parts), box](double x) {
      double acc = 0.0;
      for (const auto& [g, inverted] : parts) acc += inverted ? invert_increasing(g, x, box) : g(x);
      return acc;
    });
    fns.emplace_back(std::move(fn));
  }
  return CTuple(std::move(fns));
}

bool check_monotone_set(const Eigen::MatrixXd& points, double tol) {
  const Eigen::Index n = points.rows();
  const Eigen::Index k = points.cols();
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a + 1; b < n; ++b) {
      for (Eigen::Index i = 0; i < k; ++i) {
        const double di = points(b, i) - points(a, i);
        for (Eigen::Index j = i + 1; j < k; ++j) {
          if (di * (points(b, j) - points(a, j)) < -tol) return false;
        }
      }
    }
  }
  return true;
}

}  // namespace monocurve::convex

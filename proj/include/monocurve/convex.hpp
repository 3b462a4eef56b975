#pragma once

// One-dimensional convex analysis: closed-form and tabulated convex
// functions, Legendre conjugates, proximal maps, the duality loss H and the
// diagonal parametrization of the monotone set it exposes.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace monocurve::convex {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double x) const { return lo <= x && x <= hi; }
  bool degenerate() const;
};

struct ConjugateValue {
  double value = 0.0;
  /// Set when the supremum keeps growing with the search box; value is +inf.
  bool unbounded = false;
};

/// Closed-form convex functions of one variable.
class AnalyticConvexFn {
 public:
  enum class Kind { Power, Quadratic, AbsVal };

  /// |x|^p / p, p > 1.
  static AnalyticConvexFn power(double p);
  /// a x^2 / 2 + b x + c, a >= 0.
  static AnalyticConvexFn quadratic(double a, double b = 0.0, double c = 0.0);
  /// |x|
  static AnalyticConvexFn abs_val();

  Kind kind() const { return kind_; }
  double exponent() const { return p_; }
  double a() const { return a_; }
  double b() const { return b_; }
  double c() const { return c_; }

  double operator()(double x) const;
  /// Derivative; for AbsVal the subgradient sign(x), which is 0 at the kink.
  double derivative(double x) const;
  double second_derivative(double x) const;
  /// Exact conjugate for every kind (all three have one).
  ConjugateValue conjugate(double y) const;

 private:
  AnalyticConvexFn(Kind kind, double p, double a, double b, double c)
      : kind_(kind), p_(p), a_(a), b_(b), c_(c) {}

  Kind kind_;
  double p_;
  double a_;
  double b_;
  double c_;
};

/// Convex function stored on knots as (values, derivative values). The
/// derivative is interpolated with a monotone cubic (Fritsch-Carlson) and the
/// value is the running integral of that interpolant from the left knot, so
/// value and derivative stay consistent. Outside the knots the function is
/// extended affinely with the boundary slope.
class TabulatedConvexFn {
 public:
  TabulatedConvexFn(std::vector<double> knots, std::vector<double> values,
                    std::vector<double> slopes);

  double operator()(double x) const;
  double derivative(double x) const;
  double second_derivative(double x) const;

  /// Replaces the interpolated derivative inside the knots by `slope`
  /// (values stay tabulated). Useful where the derivative has an infinite
  /// slope the cubic cannot follow, e.g. a cube root at 0.
  void set_exact_slope(std::function<double(double)> slope) { exact_slope_ = std::move(slope); }
  bool has_exact_slope() const { return static_cast<bool>(exact_slope_); }

  Interval domain() const { return {knots_.front(), knots_.back()}; }
  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& slopes() const { return slopes_; }

 private:
  std::size_t cell(double x) const;

  std::vector<double> knots_;
  std::vector<double> values_;
  std::vector<double> slopes_;
  std::vector<double> curvature_;  // PCHIP tangents of the derivative
  std::function<double(double)> exact_slope_;
};

using ConvexFn = std::variant<AnalyticConvexFn, TabulatedConvexFn>;

double eval_fn(const ConvexFn& f, double x);
double derivative(const ConvexFn& f, double x);
double second_derivative(const ConvexFn& f, double x);

inline constexpr std::size_t kLegendreNodes = 4097;

/// max over a uniform grid on `box` of x*y - f(x). Flags the value as
/// unbounded when the maximum on a box of twice the width is larger and is
/// attained outside `box`.
ConjugateValue discrete_legendre(const std::function<double(double)>& f, double y,
                                 Interval box, std::size_t nodes = kLegendreNodes);

/// Exact conjugate for analytic functions, discrete Legendre transform on
/// `search_box` otherwise. Throws EmptyBox on a degenerate box.
ConjugateValue conjugate_eval(const ConvexFn& f, double y, Interval search_box);

/// Tabulates f* on `y_box`: values from a grid Legendre transform over
/// `x_box`, refined by solving f'(x) = y inside the maximizing grid cell;
/// slopes are the maximizers.
TabulatedConvexFn numeric_conjugate(const ConvexFn& f, Interval x_box, Interval y_box,
                                    std::size_t nodes = kLegendreNodes);

/// argmin_p f(p) + (x - p)^2 / 2, i.e. the root of f'(p) + p = x.
/// Safeguarded Newton inside a bisection bracket; NoConvergence after 200
/// iterations.
double prox(const ConvexFn& f, double x, double tol = 1e-10);

/// k scalar convex functions read as a tuple for the cost
/// c(x) = sum_{i<j} x_i x_j.
class CTuple {
 public:
  explicit CTuple(std::vector<ConvexFn> fns);

  std::size_t k() const { return fns_.size(); }
  const ConvexFn& fn(std::size_t i) const { return fns_.at(i); }
  const std::vector<ConvexFn>& fns() const { return fns_; }
  bool duality_checked() const { return duality_checked_; }

  /// Samples H on a uniform grid of `box`^k with `per_axis` nodes per axis.
  /// Marks the tuple as duality-checked when min H >= -tol. Returns min H.
  double check_duality(Interval box, std::size_t per_axis, double tol = 1e-6);

 private:
  std::vector<ConvexFn> fns_;
  bool duality_checked_ = false;
};

/// H(x; f) = sum_i f_i(x_i) - sum_{i<j} x_i x_j.
double H_eval(std::span<const double> x, const CTuple& fns);

/// The diagonal parametrization s -> (prox_{f_i}(s))_i.
class MonotoneCurve {
 public:
  explicit MonotoneCurve(CTuple fns, double tol = 1e-10);

  std::size_t k() const { return fns_.k(); }
  double component(std::size_t i, double s) const;
  std::vector<double> operator()(double s) const;

 private:
  CTuple fns_;
  double tol_;
};

MonotoneCurve diagonal_curve(const CTuple& fns);

/// Strictly increasing map x_j = map(x_i) for a pair i < j (0-based).
struct PairwiseMap {
  std::size_t i = 0;
  std::size_t j = 1;
  std::function<double(double)> map;
};

/// Builds f_i(x) = sum_{j<i} int_{y_ji}^x G_ij + sum_{j>i} int_0^x G_ij with
/// G_ji the numerical inverse of G_ij and y_ij = G_ij(0). Every pair i<j must
/// be supplied. Integrals use the composite trapezoid rule on `nodes` knots.
CTuple build_ctuple_from_curve(std::size_t k, std::span<const PairwiseMap> maps,
                               Interval box, std::size_t nodes = kLegendreNodes);

/// Rows are points. True iff (b_j - a_j)(b_i - a_i) >= -tol for every pair
/// of rows and every coordinate pair.
bool check_monotone_set(const Eigen::MatrixXd& points, double tol);

}  // namespace monocurve::convex

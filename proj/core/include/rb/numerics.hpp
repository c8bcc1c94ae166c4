#pragma once
// Shared numerical kernels: bracketed bisection and adaptive Simpson
// quadrature, plus a tagged extended-real value used wherever a
// root-finder is allowed to report "no finite solution".

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace rb {

struct NumericsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Extended reals
// ---------------------------------------------------------------------------

// A finite double, +infinity or -infinity, kept as an explicit tag so that
// branching on "no solution" never relies on sentinel floats.
struct Extended {
  enum class Tag { Finite, PosInf, NegInf };
  Tag tag = Tag::Finite;
  double x = 0.0;

  static Extended finite(double v) { return {Tag::Finite, v}; }
  static Extended pos_inf() { return {Tag::PosInf, 0.0}; }
  static Extended neg_inf() { return {Tag::NegInf, 0.0}; }

  bool is_finite() const { return tag == Tag::Finite; }
  bool is_pos_inf() const { return tag == Tag::PosInf; }
  bool is_neg_inf() const { return tag == Tag::NegInf; }

  // Throws if not finite; call sites that require a number use this.
  double value() const {
    if (tag != Tag::Finite) throw NumericsError("Extended: value() on infinite");
    return x;
  }
};

// ---------------------------------------------------------------------------
// Root finding
// ---------------------------------------------------------------------------

inline constexpr int kBisectMaxIter = 200;

// Bracketed bisection on [a, b]. Requires f(a) and f(b) of opposite sign
// (or zero). Stops when the bracket width falls below xtol. Monotonicity of
// f is not required, only the sign change.
inline double bisect(const std::function<double(double)>& f, double a, double b,
                     double xtol) {
  double fa = f(a);
  double fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0))
    throw NumericsError("bisect: no sign change on [" + std::to_string(a) +
                        ", " + std::to_string(b) + "]");
  for (int i = 0; i < kBisectMaxIter && (b - a) > xtol; ++i) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if (fm == 0.0) return m;
    if ((fm > 0.0) == (fa > 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

namespace detail {

inline double simpson(const std::function<double(double)>& f, double a,
                      double fa, double m, double fm, double b, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f,
                                   double a, double fa, double b, double fb,
                                   double m, double fm, double whole,
                                   double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(f, a, fa, lm, flm, m, fm);
  const double right = simpson(f, m, fm, rm, frm, b, fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol,
                              depth - 1) +
         adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol,
                              depth - 1);
}

}  // namespace detail

// Adaptive Simpson integration of f over [a, b] to absolute tolerance tol.
inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double tol = 1e-12) {
  if (a >= b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(m);
  const double whole = detail::simpson(f, a, fa, m, fm, b, fb);
  return detail::adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, 48);
}

}  // namespace rb

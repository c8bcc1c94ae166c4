#pragma once
// Market input: the call price curve K -> C(K) at the fixed maturity, the
// derived put and digital prices, the implied terminal law and the linear
// pricing operator on static portfolios.
//
// Conventions used throughout:
//  - zero interest rates, prices quoted forward;
//  - forwards cost nothing to enter, cash is priced at face value;
//  - C is convex non-increasing with C(0) = S0 and C(K) -> 0 at the
//    truncated right end of the support.

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rb/numerics.hpp"

namespace rb {

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ArbitrageViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class CurveFamily {
  UniformTerminal,
  Lognormal,
  GridInterpolated,
  HestonImplied,
};

// A point mass of the terminal law; smooth curves carry none, the
// finite-strike extremal surfaces are built from them.
struct Atom {
  double x = 0.0;
  double mass = 0.0;
};

// ---------------------------------------------------------------------------
// CallCurve
// ---------------------------------------------------------------------------

// The market input: C(K) with two derivatives on [0, k_max]. For kinked
// curves (atoms present) d1 is the right derivative, so -d1(x) is the mass
// strictly above x.
struct CallCurve {
  double spot = 0.0;
  double k_max = 0.0;
  CurveFamily family = CurveFamily::UniformTerminal;
  std::function<double(double)> value_fn;
  std::function<double(double)> d1_fn;
  std::function<double(double)> d2_fn;
  // Optional exact excess integral int_a^b (u - c) dmu(u), set by curve
  // families whose law admits a closed segment-wise form; avoids both the
  // cancellation and the cost of evaluating it through value/d1.
  std::function<double(double, double, double)> excess_fn;
  std::vector<Atom> atoms;  // sorted by position; empty for smooth curves

  double value(double k) const;
  double d1(double k) const;
  double d2(double k) const;
  double atom_mass_at(double x) const;

 private:
  void check_domain(double k) const;
};

// A traded quote (strike, call price).
struct Quote {
  double strike = 0.0;
  double price = 0.0;
};

// Analytic family: terminal law uniform on [lo, hi]; spot = (lo + hi) / 2.
CallCurve make_uniform_terminal_curve(double lo, double hi);

// Analytic family: lognormal terminal law with total log stdev sigma;
// support truncated where the call tail drops below 1e-10 * spot.
CallCurve make_lognormal_curve(double spot, double sigma);

// Quote-table family: fits a shape-preserving density through the quotes.
// The quotes must be strictly convex/decreasing with the zero-strike quote
// equal to the spot; the fitted density is piecewise linear, integrates to
// one and has mean equal to the spot by construction.
CallCurve make_grid_curve(const std::vector<Quote>& quotes);

// Wraps an externally tabulated density (piecewise linear between knots)
// as a curve; mass is renormalised to one and the mean becomes the spot.
CallCurve make_tabulated_density_curve(const std::vector<double>& knots,
                                       const std::vector<double>& density,
                                       CurveFamily family);

// ---------------------------------------------------------------------------
// Derived prices
// ---------------------------------------------------------------------------

enum class DigitalConvention { Geq, Gt };

// P(K) = K - S0 + C(K).
double put_price(const CallCurve& curve, double k);

// Price of the digital paying 1_{S_T >= x} (Geq) or 1_{S_T > x} (Gt).
double digital_price(const CallCurve& curve, double x, DigitalConvention conv);

// ---------------------------------------------------------------------------
// Implied law
// ---------------------------------------------------------------------------

// Terminal law mu(dK) = C''(K) dK plus any atoms the curve carries.
// Interval masses and partial moments follow from the curve derivatives:
//   mu([a,b])       = C'(b) - C'(a) (+ atoms)
//   int_a^b u mu(du) = b C'(b) - a C'(a) - (C(b) - C(a)) (+ atoms)
// which is exact, so no quadrature error enters downstream root-finding.
// Intervals are treated as closed; endpoint atoms are included.
struct ImpliedLaw {
  double support_lo = 0.0;
  double support_hi = 0.0;
  std::function<double(double)> density_fn;
  // Half-open mass/moment over (a, b]; atoms inside the interval are
  // already included because d1 is the right derivative.
  std::function<double(double, double)> mass_half_open_fn;
  std::function<double(double, double)> moment_half_open_fn;
  std::function<double(double)> cdf_fn;  // P(S_T <= u)
  // Exact excess integral when the backing curve provides one; may be null.
  std::function<double(double, double, double)> excess_fn;
  std::vector<Atom> atoms;  // sorted by position

  double density(double u) const;
  double cdf(double u) const;                 // P(S_T <= u)
  double mass(double a, double b) const;      // mu([a, b])
  double partial_moment(double a, double b) const;
  double total_mean() const;
};

ImpliedLaw implied_law(const CallCurve& curve);

// ---------------------------------------------------------------------------
// Static portfolios and the pricing operator
// ---------------------------------------------------------------------------

// Hitting-order events that can arm a forward leg. None means the leg is
// live from inception (a plain forward).
enum class TriggerEvent {
  None,
  UbFirst,    // H_ub < H_lb and H_ub <= T
  LbFirst,    // H_lb < H_ub and H_lb <= T
  UbThenLb,   // H_ub < H_lb <= T
  LbThenUb,   // H_lb < H_ub <= T
};

struct Leg {
  enum class Kind { Call, Put, Cash, DigitalGeq, DigitalGt, Forward };
  Kind kind = Kind::Cash;
  double param = 0.0;  // strike or digital level; unused for cash
  double qty = 0.0;    // cash: the amount itself is qty
  TriggerEvent trigger = TriggerEvent::None;  // forwards only
};

struct StaticPortfolio {
  std::vector<Leg> legs;
};

// Linear pricing operator: calls/puts/digitals at curve prices, cash at
// face value, forwards (triggered or not) at zero.
double price_static(const CallCurve& curve, const StaticPortfolio& portfolio);

// ---------------------------------------------------------------------------
// Quote diagnostics
// ---------------------------------------------------------------------------

struct QuoteViolation {
  std::size_t index = 0;
  std::string kind;    // "monotonicity" | "convexity" | "bound"
  std::string detail;
};

struct ArbitrageReport {
  std::vector<QuoteViolation> violations;
  bool clean() const { return violations.empty(); }
};

// Report-only scan of a quote table for convexity / monotonicity / bound
// violations. Does not throw.
ArbitrageReport check_no_arbitrage(const std::vector<Quote>& quotes);

}  // namespace rb

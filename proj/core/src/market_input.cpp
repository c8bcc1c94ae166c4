#include "rb/market_input.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace rb {

namespace {

constexpr double kDomainSlack = 1e-9;

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
}

}  // namespace

// ---------------------------------------------------------------------------
// CallCurve
// ---------------------------------------------------------------------------

void CallCurve::check_domain(double k) const {
  if (!(k >= -kDomainSlack * k_max) || !(k <= k_max * (1.0 + kDomainSlack)))
    throw DomainError("CallCurve: strike " + std::to_string(k) +
                      " outside [0, " + std::to_string(k_max) + "]");
}

double CallCurve::value(double k) const {
  check_domain(k);
  return value_fn(std::clamp(k, 0.0, k_max));
}

double CallCurve::d1(double k) const {
  check_domain(k);
  return d1_fn(std::clamp(k, 0.0, k_max));
}

double CallCurve::d2(double k) const {
  check_domain(k);
  return d2_fn(std::clamp(k, 0.0, k_max));
}

double CallCurve::atom_mass_at(double x) const {
  for (const Atom& a : atoms)
    if (std::fabs(a.x - x) <= 1e-12 * std::max(1.0, k_max)) return a.mass;
  return 0.0;
}

// ---------------------------------------------------------------------------
// Analytic families
// ---------------------------------------------------------------------------

CallCurve make_uniform_terminal_curve(double lo, double hi) {
  if (!(lo >= 0.0) || !(hi > lo))
    throw DomainError("uniform curve: need 0 <= lo < hi");
  CallCurve c;
  c.spot = 0.5 * (lo + hi);
  c.k_max = hi;
  c.family = CurveFamily::UniformTerminal;
  const double width = hi - lo;
  c.value_fn = [=](double k) {
    if (k <= lo) return 0.5 * (lo + hi) - k;
    return (hi - k) * (hi - k) / (2.0 * width);
  };
  c.d1_fn = [=](double k) {
    if (k < lo) return -1.0;
    return -(hi - k) / width;
  };
  c.d2_fn = [=](double k) {
    if (k < lo) return 0.0;
    return 1.0 / width;
  };
  return c;
}

CallCurve make_lognormal_curve(double spot, double sigma) {
  if (!(spot > 0.0) || !(sigma > 0.0))
    throw DomainError("lognormal curve: need spot > 0 and sigma > 0");
  auto black = [=](double k) {
    if (k <= 0.0) return spot;
    const double dp = std::log(spot / k) / sigma + 0.5 * sigma;
    return spot * norm_cdf(dp) - k * norm_cdf(dp - sigma);
  };
  const double tail = 1e-10 * spot;
  double hi = spot;
  while (black(hi) > tail) hi *= 2.0;
  const double k_max =
      bisect([&](double k) { return black(k) - tail; }, spot, hi, 1e-9 * spot);

  CallCurve c;
  c.spot = spot;
  c.k_max = k_max;
  c.family = CurveFamily::Lognormal;
  c.value_fn = black;
  c.d1_fn = [=](double k) {
    if (k <= 0.0) return -1.0;
    const double dm = std::log(spot / k) / sigma - 0.5 * sigma;
    return -norm_cdf(dm);
  };
  c.d2_fn = [=](double k) {
    if (k <= 0.0) return 0.0;
    const double dm = std::log(spot / k) / sigma - 0.5 * sigma;
    return norm_pdf(dm) / (k * sigma);
  };
  return c;
}

// ---------------------------------------------------------------------------
// Tabulated piecewise-linear densities
// ---------------------------------------------------------------------------

namespace {

// Exact integrals of a piecewise-linear density, shared by the grid and
// tabulated constructors.
struct DensityTable {
  std::vector<double> x;     // knots, ascending
  std::vector<double> f;     // density at knots, >= 0
  std::vector<double> cum_m; // mass of [x0, xi]
  std::vector<double> cum_u; // first moment of [x0, xi]

  void build_cumulatives() {
    const std::size_t n = x.size();
    cum_m.assign(n, 0.0);
    cum_u.assign(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
      const double dx = x[i] - x[i - 1];
      cum_m[i] = cum_m[i - 1] + 0.5 * (f[i - 1] + f[i]) * dx;
      cum_u[i] = cum_u[i - 1] +
                 dx * (f[i - 1] * (2.0 * x[i - 1] + x[i]) +
                       f[i] * (x[i - 1] + 2.0 * x[i])) / 6.0;
    }
  }

  std::size_t segment(double u) const {
    const auto it = std::upper_bound(x.begin(), x.end(), u);
    const std::size_t j = static_cast<std::size_t>(it - x.begin());
    return std::clamp<std::size_t>(j, 1, x.size() - 1) - 1;
  }

  double density(double u) const {
    if (u <= x.front() || u >= x.back()) {
      if (u == x.front()) return f.front();
      if (u == x.back()) return f.back();
      return 0.0;
    }
    const std::size_t i = segment(u);
    const double t = (u - x[i]) / (x[i + 1] - x[i]);
    return f[i] + t * (f[i + 1] - f[i]);
  }

  double mass_below(double u) const {
    if (u <= x.front()) return 0.0;
    if (u >= x.back()) return cum_m.back();
    const std::size_t i = segment(u);
    const double du = u - x[i];
    const double fu = density(u);
    return cum_m[i] + 0.5 * (f[i] + fu) * du;
  }

  double moment_below(double u) const {
    if (u <= x.front()) return 0.0;
    if (u >= x.back()) return cum_u.back();
    const std::size_t i = segment(u);
    const double du = u - x[i];
    const double fu = density(u);
    return cum_u[i] + du * (f[i] * (2.0 * x[i] + u) + fu * (x[i] + 2.0 * u)) / 6.0;
  }

  // int_a^b (u - c) f(u) du, accumulated segment by segment so nothing
  // large ever cancels; this keeps barycentre root-finding both exact and
  // cheap on table-backed laws.
  double excess_piece(double u, double v, double c) const {
    if (v <= u) return 0.0;
    const double fu = density(u);
    const double fv = density(v);
    const double du = v - u;
    const double mass = 0.5 * (fu + fv) * du;
    const double moment = du * (fu * (2.0 * u + v) + fv * (u + 2.0 * v)) / 6.0;
    return moment - c * mass;
  }

  double excess(double a, double b, double c) const {
    a = std::max(a, x.front());
    b = std::min(b, x.back());
    if (b <= a) return 0.0;
    const std::size_t ia = segment(a);
    const std::size_t ib = segment(b);
    if (ia == ib) return excess_piece(a, b, c);
    // exact partial end segments, prefix sums across whole interior ones
    double acc = excess_piece(a, x[ia + 1], c) + excess_piece(x[ib], b, c);
    acc += (cum_u[ib] - cum_u[ia + 1]) - c * (cum_m[ib] - cum_m[ia + 1]);
    return acc;
  }
};

CallCurve curve_from_density_table(DensityTable table, CurveFamily family) {
  for (double& v : table.f) v = std::max(v, 0.0);
  table.build_cumulatives();
  const double total = table.cum_m.back();
  if (!(total > 0.0))
    throw DomainError("density table: zero total mass");
  for (double& v : table.f) v /= total;
  table.build_cumulatives();

  auto shared = std::make_shared<DensityTable>(std::move(table));
  const double mean = shared->cum_u.back();
  const double k_max = shared->x.back();

  CallCurve c;
  c.spot = mean;
  c.k_max = k_max;
  c.family = family;
  c.value_fn = [shared, mean](double k) {
    const double f_below = shared->mass_below(k);
    const double m_below = shared->moment_below(k);
    return (mean - m_below) - k * (1.0 - f_below);
  };
  c.d1_fn = [shared](double k) { return shared->mass_below(k) - 1.0; };
  c.d2_fn = [shared](double k) { return shared->density(k); };
  c.excess_fn = [shared](double a, double b, double cc) {
    return shared->excess(a, b, cc);
  };
  return c;
}

}  // namespace

CallCurve make_tabulated_density_curve(const std::vector<double>& knots,
                                       const std::vector<double>& density,
                                       CurveFamily family) {
  if (knots.size() != density.size() || knots.size() < 2)
    throw DomainError("tabulated density: need matching knots/values, >= 2");
  if (!std::is_sorted(knots.begin(), knots.end()))
    throw DomainError("tabulated density: knots must be ascending");
  DensityTable t;
  t.x = knots;
  t.f = density;
  return curve_from_density_table(std::move(t), family);
}

CallCurve make_grid_curve(const std::vector<Quote>& quotes) {
  const ArbitrageReport report = check_no_arbitrage(quotes);
  if (!report.clean())
    throw ArbitrageViolation("grid curve: " + report.violations.front().kind +
                             " at quote index " +
                             std::to_string(report.violations.front().index));
  if (quotes.size() < 3)
    throw DomainError("grid curve: need at least 3 quotes");
  if (quotes.front().strike != 0.0)
    throw DomainError("grid curve: first quote must be the zero strike");

  const std::size_t n = quotes.size();
  // Implied atomic law: the atom at x_i is the slope change there, with the
  // conventions slope = -1 left of the zero strike and 0 beyond the last.
  std::vector<double> pos, mass;
  std::vector<double> slope(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i)
    slope[i] = (quotes[i + 1].price - quotes[i].price) /
               (quotes[i + 1].strike - quotes[i].strike);
  slope[n - 1] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double prev = (i == 0) ? -1.0 : slope[i - 1];
    const double m = slope[i] - prev;
    if (m > 1e-14) {
      pos.push_back(quotes[i].strike);
      mass.push_back(m);
    }
  }
  if (pos.size() < 2) throw DomainError("grid curve: degenerate quote set");
  if (pos.front() == 0.0)
    throw ArbitrageViolation("grid curve: implied mass at zero strike");

  // Smooth each atom into a symmetric triangle; symmetry preserves both the
  // total mass and the mean exactly. The domain is extended past the last
  // strike so the right-most triangle fits.
  std::vector<double> half(pos.size(), 0.0);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    double h = pos[i];
    if (i > 0) h = std::min(h, 0.5 * (pos[i] - pos[i - 1]));
    if (i + 1 < pos.size()) h = std::min(h, 0.5 * (pos[i + 1] - pos[i]));
    half[i] = std::max(h, 1e-9 * pos.back());
  }
  const double k_max = pos.back() + half.back();

  std::vector<double> knots;
  knots.push_back(0.0);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    knots.push_back(pos[i] - half[i]);
    knots.push_back(pos[i]);
    knots.push_back(pos[i] + half[i]);
  }
  knots.push_back(k_max);
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  DensityTable t;
  t.x = knots;
  t.f.assign(knots.size(), 0.0);
  for (std::size_t j = 0; j < knots.size(); ++j) {
    double v = 0.0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
      const double d = std::fabs(knots[j] - pos[i]);
      if (d < half[i]) v += mass[i] / half[i] * (1.0 - d / half[i]);
    }
    t.f[j] = v;
  }
  CallCurve c = curve_from_density_table(std::move(t), CurveFamily::GridInterpolated);
  return c;
}

// ---------------------------------------------------------------------------
// Derived prices
// ---------------------------------------------------------------------------

double put_price(const CallCurve& curve, double k) {
  return k - curve.spot + curve.value(k);
}

double digital_price(const CallCurve& curve, double x, DigitalConvention conv) {
  if (!(x > 0.0) || !(x < curve.k_max))
    throw DomainError("digital_price: level must be in the domain interior");
  const double gt = -curve.d1(x);  // right derivative: mass strictly above x
  if (conv == DigitalConvention::Gt) return std::clamp(gt, 0.0, 1.0);
  return std::clamp(gt + curve.atom_mass_at(x), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Implied law
// ---------------------------------------------------------------------------

ImpliedLaw implied_law(const CallCurve& curve) {
  ImpliedLaw law;
  law.support_lo = 0.0;
  law.support_hi = curve.k_max;
  law.atoms = curve.atoms;
  law.density_fn = [curve](double u) { return curve.d2(u); };
  law.cdf_fn = [curve](double u) {
    return std::clamp(1.0 + curve.d1(u), 0.0, 1.0);
  };
  // mu((a, b]) = C'(b) - C'(a); the Stieltjes identity
  // int_(a,b] u mu(du) = b C'(b) - a C'(a) - (C(b) - C(a)) also holds with
  // atoms because d1 is the right derivative.
  law.mass_half_open_fn = [curve](double a, double b) {
    if (b <= a) return 0.0;
    return curve.d1(b) - curve.d1(a);
  };
  law.moment_half_open_fn = [curve](double a, double b) {
    if (b <= a) return 0.0;
    return b * curve.d1(b) - a * curve.d1(a) - (curve.value(b) - curve.value(a));
  };
  law.excess_fn = curve.excess_fn;
  return law;
}

double ImpliedLaw::density(double u) const {
  return density_fn ? density_fn(u) : 0.0;
}

double ImpliedLaw::cdf(double u) const { return cdf_fn(u); }

double ImpliedLaw::mass(double a, double b) const {
  if (b < a) return 0.0;
  a = std::max(a, support_lo);
  b = std::min(b, support_hi);
  if (b < a) return 0.0;
  double m = mass_half_open_fn(a, b);
  for (const Atom& at : atoms)
    if (at.x == a) m += at.mass;
  return m;
}

double ImpliedLaw::partial_moment(double a, double b) const {
  if (b < a) return 0.0;
  a = std::max(a, support_lo);
  b = std::min(b, support_hi);
  if (b < a) return 0.0;
  double m = moment_half_open_fn(a, b);
  for (const Atom& at : atoms)
    if (at.x == a) m += at.x * at.mass;
  return m;
}

double ImpliedLaw::total_mean() const {
  return partial_moment(support_lo, support_hi);
}

// ---------------------------------------------------------------------------
// Pricing operator
// ---------------------------------------------------------------------------

double price_static(const CallCurve& curve, const StaticPortfolio& portfolio) {
  double total = 0.0;
  for (const Leg& leg : portfolio.legs) {
    switch (leg.kind) {
      case Leg::Kind::Call:
        total += leg.qty * curve.value(leg.param);
        break;
      case Leg::Kind::Put:
        total += leg.qty * put_price(curve, leg.param);
        break;
      case Leg::Kind::Cash:
        total += leg.qty;
        break;
      case Leg::Kind::DigitalGeq:
        total += leg.qty * digital_price(curve, leg.param, DigitalConvention::Geq);
        break;
      case Leg::Kind::DigitalGt:
        total += leg.qty * digital_price(curve, leg.param, DigitalConvention::Gt);
        break;
      case Leg::Kind::Forward:
        break;  // zero initial price, triggered or not
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Quote diagnostics
// ---------------------------------------------------------------------------

ArbitrageReport check_no_arbitrage(const std::vector<Quote>& quotes) {
  ArbitrageReport report;
  const double s0 = quotes.empty() ? 0.0
                    : (quotes.front().strike == 0.0 ? quotes.front().price
                                                    : -1.0);
  for (std::size_t i = 0; i < quotes.size(); ++i) {
    const Quote& q = quotes[i];
    if (q.strike < 0.0 || q.price < 0.0)
      report.violations.push_back({i, "bound", "negative strike or price"});
    if (s0 > 0.0 && q.strike > 0.0 && q.price > s0)
      report.violations.push_back({i, "bound", "price above the zero-strike call"});
    if (i > 0) {
      if (quotes[i].strike <= quotes[i - 1].strike)
        report.violations.push_back({i, "bound", "strikes not increasing"});
      else if (quotes[i].price > quotes[i - 1].price)
        report.violations.push_back({i, "monotonicity", "price increases with strike"});
      else {
        const double slope = (quotes[i].price - quotes[i - 1].price) /
                             (quotes[i].strike - quotes[i - 1].strike);
        if (slope < -1.0 - 1e-12)
          report.violations.push_back({i, "bound", "slope below -1"});
      }
    }
    if (i > 1) {
      const double s_prev = (quotes[i - 1].price - quotes[i - 2].price) /
                            (quotes[i - 1].strike - quotes[i - 2].strike);
      const double s_cur = (quotes[i].price - quotes[i - 1].price) /
                           (quotes[i].strike - quotes[i - 1].strike);
      if (s_cur < s_prev - 1e-12)
        report.violations.push_back({i - 1, "convexity", "concave quote triple"});
    }
  }
  return report;
}

}  // namespace rb

#include "rb/finite_strikes.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace rb {

namespace {

double inf() { return std::numeric_limits<double>::infinity(); }

// ---------------------------------------------------------------------------
// Piecewise-linear curves
// ---------------------------------------------------------------------------

// Wraps a convex decreasing point set as a CallCurve: linear between
// points, d1 the right slope (with the conventions slope = -1 left of the
// zero strike and 0 beyond the last point), atoms = slope changes. The
// implied law is purely atomic at the points.
CallCurve pw_linear_curve(std::vector<Quote> pts) {
  const std::size_t n = pts.size();
  std::vector<double> slope(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i)
    slope[i] = (pts[i + 1].price - pts[i].price) /
               (pts[i + 1].strike - pts[i].strike);
  slope[n - 1] = 0.0;

  CallCurve c;
  c.spot = pts.front().price;
  c.k_max = pts.back().strike;
  c.family = CurveFamily::GridInterpolated;
  for (std::size_t i = 0; i < n; ++i) {
    const double prev = (i == 0) ? -1.0 : slope[i - 1];
    const double m = slope[i] - prev;
    if (m > 1e-14) c.atoms.push_back({pts[i].strike, m});
  }

  const auto seg = [pts](double k) {
    // largest i with strike_i <= k, capped at the last segment start
    std::size_t lo = 0, hi = pts.size() - 1;
    while (lo + 1 < hi) {
      const std::size_t mid = (lo + hi) / 2;
      (pts[mid].strike <= k ? lo : hi) = mid;
    }
    return lo;
  };
  c.value_fn = [pts, seg](double k) {
    const std::size_t i = seg(k);
    const double w = (k - pts[i].strike) / (pts[i + 1].strike - pts[i].strike);
    return pts[i].price + w * (pts[i + 1].price - pts[i].price);
  };
  c.d1_fn = [pts, slope, seg](double k) {
    if (k >= pts.back().strike) return 0.0;
    return slope[seg(k)];
  };
  c.d2_fn = [](double) { return 0.0; };
  return c;
}

// ---------------------------------------------------------------------------
// Quote geometry helpers
// ---------------------------------------------------------------------------

double strike_tol(const QuoteSet& q) { return 1e-9 * q.k_max(); }

// Index of the traded strike equal to k, or npos.
std::size_t traded_index(const QuoteSet& q, double k) {
  for (std::size_t i = 0; i < q.quotes.size(); ++i)
    if (std::fabs(q.quotes[i].strike - k) <= strike_tol(q)) return i;
  return static_cast<std::size_t>(-1);
}

// Largest j with strike_j <= k (k inside [0, k_max]).
std::size_t segment_of(const QuoteSet& q, double k) {
  std::size_t j = 0;
  while (j + 1 < q.quotes.size() && q.quotes[j + 1].strike <= k) ++j;
  return j;
}

bool traded_strictly_inside(const QuoteSet& q, double lo, double hi) {
  for (const Quote& x : q.quotes)
    if (x.strike > lo + strike_tol(q) && x.strike < hi - strike_tol(q))
      return true;
  return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// Quote sets
// ---------------------------------------------------------------------------

QuoteSet make_quote_set(std::vector<Quote> quotes, bool digitals_traded) {
  if (quotes.size() < 3)
    throw DomainError("quote set: need at least three quotes");
  if (quotes.front().strike != 0.0)
    throw DomainError("quote set: first quote must be the zero strike");
  const ArbitrageReport rep = check_no_arbitrage(quotes);
  if (!rep.clean())
    throw ArbitrageViolation("quote set: " + rep.violations.front().kind +
                             " at quote index " +
                             std::to_string(rep.violations.front().index));
  QuoteSet q;
  q.quotes = std::move(quotes);
  q.digitals_traded = digitals_traded;
  return q;
}

QuoteSet sample_quotes(const CallCurve& curve, std::size_t n) {
  if (n < 2) throw DomainError("sample_quotes: need n >= 2");
  std::vector<Quote> quotes;
  quotes.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double k = curve.k_max * double(i) / double(n);
    quotes.push_back({k, curve.value(k)});
  }
  return make_quote_set(std::move(quotes));
}

// ---------------------------------------------------------------------------
// Envelope
// ---------------------------------------------------------------------------

PriceEnvelope price_envelope(const QuoteSet& q, double k) {
  const auto& x = q.quotes;
  if (!(k >= 0.0) || !(k <= q.k_max()))
    throw DomainError("price_envelope: strike outside the quoted range");
  const std::size_t at = traded_index(q, k);
  if (at != static_cast<std::size_t>(-1))
    return {x[at].price, x[at].price};

  const std::size_t j = segment_of(q, k);
  const double upper =
      x[j].price + (k - x[j].strike) * (x[j + 1].price - x[j].price) /
                       (x[j + 1].strike - x[j].strike);
  // candidates below any admissible convex completion
  double lower = std::max(0.0, q.spot() - k);   // global slope >= -1 floor
  lower = std::max(lower, x[j + 1].price);      // monotonicity floor
  if (j >= 1) {
    const double s = (x[j].price - x[j - 1].price) /
                     (x[j].strike - x[j - 1].strike);
    lower = std::max(lower, x[j].price + s * (k - x[j].strike));
  }
  if (j + 2 < x.size()) {
    const double s = (x[j + 2].price - x[j + 1].price) /
                     (x[j + 2].strike - x[j + 1].strike);
    lower = std::max(lower, x[j + 1].price + s * (k - x[j + 1].strike));
  }
  return {std::min(lower, upper), upper};
}

// ---------------------------------------------------------------------------
// Extremal surfaces
// ---------------------------------------------------------------------------

ExtremalSurfaces extremal_surfaces(const QuoteSet& q, const BarrierPair& b) {
  if (!(b.lb > 0.0) || !(b.lb < b.ub) || !(b.ub < q.k_max()))
    throw DomainError("extremal_surfaces: barriers outside the quoted range");

  std::vector<Quote> lowered = q.quotes;
  for (const double barrier : {b.lb, b.ub}) {
    if (traded_index(q, barrier) != static_cast<std::size_t>(-1)) continue;
    const std::size_t j = segment_of(q, barrier);
    // both one-sided secants must exist to pin the kink
    if (j < 1 || j + 2 >= q.quotes.size())
      throw InsufficientQuotes(
          "extremal_surfaces: barrier " + std::to_string(barrier) +
          " lacks a flanking quote pair");
    lowered.push_back({barrier, price_envelope(q, barrier).lower});
  }
  std::sort(lowered.begin(), lowered.end(),
            [](const Quote& a, const Quote& c) { return a.strike < c.strike; });

  ExtremalSurfaces s;
  s.upper_surface = pw_linear_curve(q.quotes);
  s.lower_kinked = pw_linear_curve(std::move(lowered));
  return s;
}

// ---------------------------------------------------------------------------
// Hedge discretisation
// ---------------------------------------------------------------------------

namespace {

double quoted_call(const QuoteSet& q, std::size_t i) {
  return q.quotes[i].price;
}

// Replaces a unit vanilla at an untraded strike k inside segment j.
// Dominating direction: chord split over the flanking strikes. Dominated
// direction: the better-priced of the two one-sided constructions (shift
// to a flanking strike, with a cash rebate when shifting toward the
// payoff).
void replace_vanilla(const QuoteSet& q, const Leg& leg, bool dominate,
                     std::vector<Leg>* out) {
  const auto& x = q.quotes;
  const double k = leg.param;
  const std::size_t j = segment_of(q, k);
  const double kl = x[j].strike, kr = x[j + 1].strike;

  if (dominate) {
    const double w = (kr - k) / (kr - kl);
    out->push_back({leg.kind, kl, leg.qty * w});
    out->push_back({leg.kind, kr, leg.qty * (1.0 - w)});
    return;
  }
  if (leg.kind == Leg::Kind::Call) {
    // A: call at kr; B: call at kl plus cash -(k - kl)
    const double va = quoted_call(q, j + 1);
    const double vb = quoted_call(q, j) - (k - kl);
    if (va >= vb) {
      out->push_back({Leg::Kind::Call, kr, leg.qty});
    } else {
      out->push_back({Leg::Kind::Call, kl, leg.qty});
      out->push_back({Leg::Kind::Cash, 0.0, -leg.qty * (k - kl)});
    }
  } else {
    // A: put at kl; B: put at kr plus cash -(kr - k)
    const double s0 = q.spot();
    const double va = kl - s0 + quoted_call(q, j);
    const double vb = kr - s0 + quoted_call(q, j + 1) - (kr - k);
    if (va >= vb) {
      out->push_back({Leg::Kind::Put, kl, leg.qty});
    } else {
      out->push_back({Leg::Kind::Put, kr, leg.qty});
      out->push_back({Leg::Kind::Cash, 0.0, -leg.qty * (kr - k)});
    }
  }
}

// Replaces a unit digital at level v by a call-spread ramp on the
// dominating or dominated side.
void replace_digital(const QuoteSet& q, const Leg& leg, bool dominate,
                     std::vector<Leg>* out) {
  const auto& x = q.quotes;
  const double v = leg.param;
  if (dominate) {
    // ramp reaching one at the largest traded strike <= v
    std::size_t j = segment_of(q, v);
    if (j == 0) {  // no room for a ramp: cash dominates any digital
      out->push_back({Leg::Kind::Cash, 0.0, leg.qty});
      return;
    }
    const double w = 1.0 / (x[j].strike - x[j - 1].strike);
    out->push_back({Leg::Kind::Call, x[j - 1].strike, leg.qty * w});
    out->push_back({Leg::Kind::Call, x[j].strike, -leg.qty * w});
    return;
  }
  // ramp starting at the smallest traded strike >= v; worth zero when no
  // strike trades above it
  std::size_t j = segment_of(q, v);
  if (traded_index(q, v) == static_cast<std::size_t>(-1)) ++j;
  if (j + 1 >= x.size()) return;
  const double w = 1.0 / (x[j + 1].strike - x[j].strike);
  out->push_back({Leg::Kind::Call, x[j].strike, leg.qty * w});
  out->push_back({Leg::Kind::Call, x[j + 1].strike, -leg.qty * w});
}

HedgeBlueprint discretize_impl(const HedgeBlueprint& bp, const QuoteSet& q) {
  HedgeBlueprint out = bp;
  out.static_legs.legs.clear();
  for (const Leg& leg : bp.static_legs.legs) {
    if (leg.qty == 0.0) continue;
    // a positive superhedge leg (or negative subhedge leg) may be replaced
    // by anything pointwise larger; the opposite sign needs a minorant
    const bool dominate = (bp.side == HedgeSide::Super) == (leg.qty > 0.0);
    switch (leg.kind) {
      case Leg::Kind::Cash:
      case Leg::Kind::Forward:
        out.static_legs.legs.push_back(leg);
        break;
      case Leg::Kind::Call:
      case Leg::Kind::Put:
        if (leg.param < -strike_tol(q) || leg.param > q.k_max() + strike_tol(q))
          throw DomainError("discretize_hedge: strike outside quoted range");
        if (traded_index(q, leg.param) != static_cast<std::size_t>(-1))
          out.static_legs.legs.push_back(leg);
        else
          replace_vanilla(q, leg, dominate, &out.static_legs.legs);
        break;
      case Leg::Kind::DigitalGeq:
      case Leg::Kind::DigitalGt:
        if (q.digitals_traded)
          out.static_legs.legs.push_back(leg);
        else
          replace_digital(q, leg, dominate, &out.static_legs.legs);
        break;
    }
  }
  return out;
}

double static_payoff(const StaticPortfolio& p, double s) {
  double v = 0.0;
  for (const Leg& leg : p.legs) {
    switch (leg.kind) {
      case Leg::Kind::Call: v += leg.qty * std::max(s - leg.param, 0.0); break;
      case Leg::Kind::Put: v += leg.qty * std::max(leg.param - s, 0.0); break;
      case Leg::Kind::Cash: v += leg.qty; break;
      case Leg::Kind::DigitalGeq: v += leg.qty * (s >= leg.param); break;
      case Leg::Kind::DigitalGt: v += leg.qty * (s > leg.param); break;
      case Leg::Kind::Forward: v += leg.qty * (s - leg.param); break;
    }
  }
  return v;
}

}  // namespace

HedgeBlueprint discretize_hedge(const HedgeBlueprint& bp, const QuoteSet& q) {
  HedgeBlueprint out = discretize_impl(bp, q);
  if (bp.side == HedgeSide::Zero) return out;
  const double sign = bp.side == HedgeSide::Super ? 1.0 : -1.0;
  const int kMesh = 10000;
  const double tol = 1e-9 * std::max(1.0, q.spot());
  for (int i = 0; i <= kMesh; ++i) {
    const double s = q.k_max() * double(i) / double(kMesh);
    const double gap = sign * (static_payoff(out.static_legs, s) -
                               static_payoff(bp.static_legs, s));
    if (gap < -tol)
      throw DominanceFailed("discretize_hedge: dominance fails at terminal " +
                            std::to_string(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finite bounds
// ---------------------------------------------------------------------------

namespace {

// Traded strikes strictly inside (lo, hi).
std::vector<double> traded_in(const QuoteSet& q, double lo, double hi) {
  std::vector<double> v;
  for (const Quote& x : q.quotes)
    if (x.strike > lo + strike_tol(q) && x.strike < hi - strike_tol(q))
      v.push_back(x.strike);
  return v;
}

std::vector<double> thin(const std::vector<double>& v, std::size_t cap) {
  if (v.size() <= cap) return v;
  std::vector<double> out;
  const double step = double(v.size() - 1) / double(cap - 1);
  for (std::size_t i = 0; i < cap; ++i)
    out.push_back(v[static_cast<std::size_t>(std::lround(i * step))]);
  return out;
}

// Best value of f over the candidates, then one refinement round of 16
// interior points between the winner's neighbours. f returns +/-inf for
// infeasible points.
double line_search(const std::function<double(double)>& f,
                   const std::vector<double>& cand, bool minimize,
                   double* arg) {
  double best = minimize ? inf() : -inf();
  std::size_t bi = 0;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    const double v = f(cand[i]);
    if (minimize ? v < best : v > best) {
      best = v;
      bi = i;
    }
  }
  if (!std::isfinite(best)) return best;
  const double lo = cand[bi > 0 ? bi - 1 : bi];
  const double hi = cand[bi + 1 < cand.size() ? bi + 1 : bi];
  double bx = cand[bi];
  for (int i = 1; i < 16; ++i) {
    const double k = lo + (hi - lo) * double(i) / 16.0;
    const double v = f(k);
    if (minimize ? v < best : v > best) {
      best = v;
      bx = k;
    }
  }
  *arg = bx;
  return best;
}

struct SuperSearch {
  double value = inf();
  SuperVariant variant = SuperVariant::I;
  std::vector<double> strikes;
};

struct SubSearch {
  double value = 0.0;  // the zero subhedge is always available
  SubVariant variant = SubVariant::Zero;
  double k1 = 0.0, k2 = 0.0;
  std::optional<double> k3;
};

}  // namespace

FiniteBounds finite_bounds(const QuoteSet& q, const BarrierPair& b) {
  const double s0 = q.spot();
  if (!(b.lb < s0 && s0 < b.ub))
    throw DomainError("finite_bounds: spot must lie between the barriers");
  const ExtremalSurfaces surf = extremal_surfaces(q, b);

  const auto super_cost = [&](SuperVariant v,
                              const std::vector<double>& ks) -> double {
    try {
      // superhedges carry only vanilla/cash/forward legs, and the
      // upper surface prices untraded vanillas at their chord split cost,
      // so the raw blueprint prices like its discretisation
      return static_cost(make_superhedge(v, b, s0, ks), surf.upper_surface);
    } catch (const std::exception&) {
      return inf();
    }
  };
  // One-sided slope of the kinked surface; its digital conventions are the
  // adverse ones: the digital at lb pays on S >= lb (left derivative), the
  // digital at ub on S > ub (right derivative).
  const auto kinked_digital = [&](double level) -> double {
    const CallCurve& c = surf.lower_kinked;
    const double h = 1e-7 * (b.ub - b.lb);
    if (level <= b.lb)
      return (c.value(level - h) - c.value(level)) / h;
    return -(c.value(level + h) - c.value(level)) / h;
  };
  const auto sub_value = [&](SubVariant v, double k1, double k2,
                             std::optional<double> k3) -> double {
    try {
      const HedgeBlueprint bp = make_subhedge(v, b, s0, k1, k2, k3);
      HedgeBlueprint d = discretize_impl(bp, q);
      double digitals = 0.0;
      if (q.digitals_traded) {
        StaticPortfolio rest;
        for (const Leg& leg : d.static_legs.legs) {
          if (leg.kind == Leg::Kind::DigitalGeq ||
              leg.kind == Leg::Kind::DigitalGt)
            digitals += leg.qty * kinked_digital(leg.param);
          else
            rest.legs.push_back(leg);
        }
        d.static_legs = std::move(rest);
      }
      return static_cost(d, surf.lower_kinked) + digitals;
    } catch (const std::exception&) {
      return -inf();
    }
  };

  const std::vector<double> above_ub = traded_in(q, b.ub, q.k_max() + 1.0);
  const std::vector<double> below_lb = traded_in(q, 0.0, b.lb);
  const std::vector<double> above_lb = traded_in(q, b.lb, q.k_max() + 1.0);
  const std::vector<double> below_ub = traded_in(q, 0.0, b.ub);
  const std::vector<double> between = traded_in(q, b.lb, b.ub);
  if (above_ub.empty() || below_lb.empty())
    throw InsufficientQuotes("finite_bounds: need traded strikes on both "
                             "sides of the barrier pair");

  // ---- upper bound: cheapest superhedge over the four families
  SuperSearch up;
  {
    double k = 0.0;
    const double c1 = line_search(
        [&](double x) { return super_cost(SuperVariant::I, {x}); }, above_lb,
        true, &k);
    if (c1 < up.value) up = {c1, SuperVariant::I, {k}};
    const double c2 = line_search(
        [&](double x) { return super_cost(SuperVariant::II, {x}); }, below_ub,
        true, &k);
    if (c2 < up.value) up = {c2, SuperVariant::II, {k}};
  }
  {
    // two-strike family: coarse scan then coordinate descent
    double k1 = above_ub[above_ub.size() / 2], k2 = below_lb[below_lb.size() / 2];
    double best = inf();
    for (const double a : thin(above_ub, 48))
      for (const double c : thin(below_lb, 48)) {
        const double v = super_cost(SuperVariant::IV, {a, c});
        if (v < best) {
          best = v;
          k1 = a;
          k2 = c;
        }
      }
    for (int sweep = 0; sweep < 2; ++sweep) {
      best = line_search(
          [&](double x) { return super_cost(SuperVariant::IV, {x, k2}); },
          above_ub, true, &k1);
      best = line_search(
          [&](double x) { return super_cost(SuperVariant::IV, {k1, x}); },
          below_lb, true, &k2);
    }
    if (best < up.value) up = {best, SuperVariant::IV, {k1, k2}};
  }
  if (!between.empty()) {
    // four-strike family: coordinate descent from a centred start
    double k1 = above_ub[above_ub.size() / 3];
    double k4 = below_lb[below_lb.size() / 2];
    double k2 = b.lb + 0.75 * (b.ub - b.lb);
    double k3 = b.lb + 0.25 * (b.ub - b.lb);
    double best = inf();
    for (int sweep = 0; sweep < 4; ++sweep) {
      best = line_search(
          [&](double x) { return super_cost(SuperVariant::III, {x, k2, k3, k4}); },
          above_ub, true, &k1);
      best = line_search(
          [&](double x) { return super_cost(SuperVariant::III, {k1, x, k3, k4}); },
          between, true, &k2);
      best = line_search(
          [&](double x) { return super_cost(SuperVariant::III, {k1, k2, x, k4}); },
          between, true, &k3);
      best = line_search(
          [&](double x) { return super_cost(SuperVariant::III, {k1, k2, k3, x}); },
          below_lb, true, &k4);
    }
    if (best < up.value) up = {best, SuperVariant::III, {k1, k2, k3, k4}};
  }

  // ---- lower bound: best subhedge value over the three families
  // middle strikes must be separated from both barriers by a traded quote
  const auto separated = [&](double k3) {
    return traded_strictly_inside(q, b.lb, k3) &&
           traded_strictly_inside(q, k3, b.ub);
  };
  SubSearch lo;
  bool k3_separated = true;
  {
    double k1 = above_ub[above_ub.size() / 2], k2 = below_lb[below_lb.size() / 2];
    double best = -inf();
    for (const double a : thin(above_ub, 48))
      for (const double c : thin(below_lb, 48)) {
        const double v = sub_value(SubVariant::I, a, c, std::nullopt);
        if (v > best) {
          best = v;
          k1 = a;
          k2 = c;
        }
      }
    for (int sweep = 0; sweep < 2 && std::isfinite(best); ++sweep) {
      best = line_search(
          [&](double x) { return sub_value(SubVariant::I, x, k2, std::nullopt); },
          above_ub, false, &k1);
      best = line_search(
          [&](double x) { return sub_value(SubVariant::I, k1, x, std::nullopt); },
          below_lb, false, &k2);
    }
    if (std::isfinite(best) && best > lo.value) {
      const HedgeBlueprint bp =
          make_subhedge(SubVariant::I, b, s0, k1, k2, std::nullopt);
      if (separated(bp.strikes[2])) {
        lo = {best, SubVariant::I, k1, k2, std::nullopt};
      } else {
        k3_separated = false;  // fall through to the restricted families
      }
    }
  }
  std::vector<double> mids;
  for (const double k3 : between)
    if (separated(k3)) mids.push_back(k3);
  for (const SubVariant v : {SubVariant::II, SubVariant::III}) {
    if (mids.empty()) break;
    double k1 = above_ub[above_ub.size() / 2], k2 = below_lb[below_lb.size() / 2];
    double k3 = mids[mids.size() / 2];
    double best = -inf();
    for (int sweep = 0; sweep < 3; ++sweep) {
      best = line_search([&](double x) { return sub_value(v, x, k2, k3); },
                         above_ub, false, &k1);
      best = line_search([&](double x) { return sub_value(v, k1, x, k3); },
                         below_lb, false, &k2);
      double kk = k3;
      const double b3 = line_search(
          [&](double x) { return separated(x) ? sub_value(v, k1, k2, x) : -inf(); },
          mids, false, &kk);
      if (std::isfinite(b3)) {
        best = b3;
        k3 = kk;
      }
    }
    if (std::isfinite(best) && best > lo.value) lo = {best, v, k1, k2, k3};
  }

  // ---- assemble the reports
  FiniteBounds out;
  out.k3_separated = k3_separated;

  out.upper.side = BoundSide::Upper;
  switch (up.variant) {
    case SuperVariant::I: out.upper.label = CaseLabel::I; break;
    case SuperVariant::II: out.upper.label = CaseLabel::II; break;
    case SuperVariant::III: out.upper.label = CaseLabel::III; break;
    case SuperVariant::IV: out.upper.label = CaseLabel::IV; break;
  }
  out.upper.value = std::min(up.value, 1.0);
  for (std::size_t i = 0; i < up.strikes.size(); ++i)
    out.upper.params["k" + std::to_string(i + 1)] = up.strikes[i];
  out.upper.blueprint =
      discretize_hedge(make_superhedge(up.variant, b, s0, up.strikes), q);

  out.lower.side = BoundSide::Lower;
  out.lower.value = std::max(lo.value, 0.0);
  if (lo.variant == SubVariant::Zero || !(lo.value > 0.0)) {
    out.lower.label = CaseLabel::IV;
    out.lower.value = 0.0;
    out.lower.blueprint = make_subhedge(SubVariant::Zero, b, s0);
  } else {
    switch (lo.variant) {
      case SubVariant::I: out.lower.label = CaseLabel::I; break;
      case SubVariant::II: out.lower.label = CaseLabel::II; break;
      case SubVariant::III: out.lower.label = CaseLabel::III; break;
      case SubVariant::Zero: break;
    }
    const HedgeBlueprint bp = make_subhedge(lo.variant, b, s0, lo.k1, lo.k2, lo.k3);
    out.lower.params = {{"k1", lo.k1}, {"k2", lo.k2}, {"k3", bp.strikes[2]}};
    out.lower.blueprint = discretize_hedge(bp, q);
  }
  return out;
}

}  // namespace rb

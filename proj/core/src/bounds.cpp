#include "rb/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace rb {

namespace {

// ---------------------------------------------------------------------------
// Upper-bound geometry
// ---------------------------------------------------------------------------

struct UpperGeometry {
  double r0 = 0.0;    // rho_-(0)
  double rinf = 0.0;  // rho_+(infinity)
  std::optional<double> z0;   // onset of gamma_-(z) = 0 (case I)
  std::optional<double> w0;   // onset of gamma_+(w) = infinity (case II)
  std::optional<double> wfp;  // fixed point of gamma_- o gamma_+ (case III)
};

UpperGeometry upper_geometry(const ImpliedLaw& law, const BarrierPair& b) {
  UpperGeometry g;
  const double lo = law.support_lo;
  const double hi = law.support_hi;
  g.r0 = rho_minus(law, b, lo);
  g.rinf = rho_plus(law, b, hi);

  // z0 solves gamma_-(z) = 0, i.e. [0, rho_-(0)] u [z, top] averages to ub;
  // the mass-weighted residual q is decreasing in z.
  const auto q = [&](double z) {
    const Interval low{lo, g.r0};
    const Interval high{z, hi};
    return union_moment(law, low, high) - b.ub * union_mass(law, low, high);
  };
  if (q(b.ub) >= 0.0) g.z0 = bisect(q, b.ub, hi, 1e-11 * hi);

  // w0 solves gamma_+(w) = infinity, i.e. [0, w] u [rho_+(inf), top]
  // averages to lb; the residual p is decreasing in w.
  const auto p = [&](double w) {
    const Interval low{lo, w};
    const Interval high{g.rinf, hi};
    return union_moment(law, low, high) - b.lb * union_mass(law, low, high);
  };
  if (p(b.lb) <= 0.0) g.w0 = bisect(p, lo, b.lb, 1e-11 * hi);

  // Case III fixed point of gamma_-(gamma_+(w)) = w, searched where
  // gamma_+ stays finite. A composite value of -infinity counts as a
  // negative sign.
  const double w_cap = g.w0 ? *g.w0 : b.lb;
  const auto f = [&](double w) -> double {
    const Extended gp = gamma_plus(law, b, w);
    if (!gp.is_finite()) return -hi;
    const Extended gm = gamma_minus(law, b, gp.x);
    if (!gm.is_finite()) return -hi;
    return gm.x - w;
  };
  constexpr int kGrid = 64;
  const double eps = 1e-9 * hi;
  double prev_w = eps;
  double prev_f = f(prev_w);
  for (int i = 1; i <= kGrid && !g.wfp; ++i) {
    const double w = eps + (w_cap - 2.0 * eps) * i / kGrid;
    const double fw = f(w);
    if ((prev_f >= 0.0) != (fw >= 0.0)) {
      double a = prev_w, c = w;
      double fa = prev_f;
      for (int it = 0; it < kBisectMaxIter && (c - a) > 1e-11 * hi; ++it) {
        const double m = 0.5 * (a + c);
        const double fm = f(m);
        if ((fm >= 0.0) == (fa >= 0.0)) {
          a = m;
          fa = fm;
        } else {
          c = m;
        }
      }
      g.wfp = 0.5 * (a + c);
    } else if (std::fabs(fw) <= 1e-9 * hi) {
      g.wfp = w;
    }
    prev_w = w;
    prev_f = fw;
  }
  if (!g.wfp && std::fabs(prev_f) <= 1e-7 * hi) g.wfp = prev_w;
  return g;
}

CaseConditions upper_conditions_from(const ImpliedLaw& law,
                                     const BarrierPair& b,
                                     const UpperGeometry& g) {
  CaseConditions c;
  const double tol = 1e-9 * law.support_hi;
  c.holds[0] = g.z0.has_value() && g.r0 <= b.ub + tol;
  c.holds[1] = g.w0.has_value() && g.rinf >= b.lb - tol;
  if (g.wfp) {
    const Extended gp = gamma_plus(law, b, *g.wfp);
    if (gp.is_finite())
      c.holds[2] =
          rho_minus(law, b, *g.wfp) <= rho_plus(law, b, gp.x) + tol;
  }
  if (g.r0 > b.ub + tol && g.rinf < b.lb - tol)
    c.holds[3] =
        rho_plus(law, b, g.r0) < rho_minus(law, b, g.rinf) - tol;
  return c;
}

// ---------------------------------------------------------------------------
// Lower-bound geometry
// ---------------------------------------------------------------------------

struct LowerGeometry {
  SubhedgeGeometry geo;
  double d_lo = 0.0;  // kappa(v_lo) - v_lo
  double d_hi = 0.0;  // kappa(v_hi) - v_hi
};

LowerGeometry lower_geometry(const ImpliedLaw& law, const BarrierPair& b) {
  LowerGeometry g{kappa_and_range(law, b)};
  if (g.geo.has_range) {
    g.d_lo = g.geo.kappa_of(g.geo.v_lo) - g.geo.v_lo;
    g.d_hi = g.geo.kappa_of(g.geo.v_hi) - g.geo.v_hi;
  }
  return g;
}

CaseConditions lower_conditions_from(const BarrierPair& b,
                                     const LowerGeometry& g) {
  CaseConditions c;
  const double tol = 1e-9 * (b.ub - b.lb);
  if (!g.geo.has_range) {
    c.holds[3] = true;
    return c;
  }
  c.holds[1] = g.d_hi > tol;
  c.holds[2] = g.d_lo < -tol;
  c.holds[0] = !c.holds[1] && !c.holds[2];
  return c;
}

CaseLabel single_case(const CaseConditions& c, const char* side) {
  if (c.count() != 1)
    throw ClassificationAmbiguous(std::string(side) + " classification: " +
                                  std::to_string(c.count()) +
                                  " case conditions hold");
  for (int i = 0; i < 4; ++i)
    if (c.holds[i]) return static_cast<CaseLabel>(i);
  throw ClassificationAmbiguous("unreachable");
}

}  // namespace

std::string case_name(CaseLabel label) {
  switch (label) {
    case CaseLabel::I: return "I";
    case CaseLabel::II: return "II";
    case CaseLabel::III: return "III";
    case CaseLabel::IV: return "IV";
  }
  return "?";
}

CaseConditions upper_case_conditions(const ImpliedLaw& law,
                                     const BarrierPair& b) {
  return upper_conditions_from(law, b, upper_geometry(law, b));
}

CaseConditions lower_case_conditions(const ImpliedLaw& law,
                                     const BarrierPair& b) {
  return lower_conditions_from(b, lower_geometry(law, b));
}

// ---------------------------------------------------------------------------
// Upper bound
// ---------------------------------------------------------------------------

Classification classify_upper(const ImpliedLaw& law, const BarrierPair& b) {
  const UpperGeometry g = upper_geometry(law, b);
  const CaseConditions cond = upper_conditions_from(law, b, g);
  Classification cls;
  cls.label = single_case(cond, "upper");
  switch (cls.label) {
    case CaseLabel::I:
      cls.params = {{"z0", *g.z0}, {"k", g.r0}};
      break;
    case CaseLabel::II:
      cls.params = {{"w0", *g.w0}, {"k", g.rinf}};
      break;
    case CaseLabel::III: {
      const double w0 = *g.wfp;
      const double k1 = gamma_plus(law, b, w0).value();
      cls.params = {{"w0", w0},
                    {"k1", k1},
                    {"k2", rho_plus(law, b, k1)},
                    {"k3", rho_minus(law, b, w0)},
                    {"k4", w0}};
      break;
    }
    case CaseLabel::IV:
      cls.params = {{"k1", g.r0}, {"k2", g.rinf}};
      break;
  }
  return cls;
}

namespace {

double grid_point(double lo, double hi, int i, int n) {
  return lo + (hi - lo) * (i + 0.5) / n;
}

// Cheapest cost over a strike grid of all four superhedge families.
double superhedge_grid_min(const CallCurve& curve, const BarrierPair& b) {
  const double hi = curve.k_max;
  const double spot = curve.spot;
  double best = 1.0;  // the trivial bound: probability is at most one
  constexpr int n = 50;
  for (int i = 0; i < n; ++i) {
    const double k = grid_point(b.lb, hi, i, n);
    best = std::min(best,
                    static_cost(make_superhedge(SuperVariant::I, b, spot, {k}),
                                curve));
  }
  for (int i = 0; i < n; ++i) {
    const double k = grid_point(0.0, b.ub, i, n);
    best = std::min(best,
                    static_cost(make_superhedge(SuperVariant::II, b, spot, {k}),
                                curve));
  }
  for (int i = 0; i < n; ++i) {
    const double k1 = grid_point(b.ub, hi, i, n);
    for (int j = 0; j < n; ++j) {
      const double k2 = grid_point(0.0, b.lb, j, n);
      best = std::min(
          best, static_cost(
                    make_superhedge(SuperVariant::IV, b, spot, {k1, k2}),
                    curve));
    }
  }
  constexpr int m = 10;
  for (int i1 = 0; i1 < m; ++i1)
    for (int i2 = 0; i2 < m; ++i2)
      for (int i3 = 0; i3 < m; ++i3)
        for (int i4 = 0; i4 < m; ++i4) {
          const double k1 = grid_point(b.ub, hi, i1, m);
          const double k2 = grid_point(b.lb, b.ub, i2, m);
          const double k3 = grid_point(b.lb, b.ub, i3, m);
          const double k4 = grid_point(0.0, b.lb, i4, m);
          if (!(k3 < k2)) continue;
          try {
            best = std::min(
                best,
                static_cost(make_superhedge(SuperVariant::III, b, spot,
                                            {k1, k2, k3, k4}),
                            curve));
          } catch (const SingularSystem&) {
          }
        }
  return best;
}

double subhedge_grid_max(const CallCurve& curve, const BarrierPair& b) {
  const double hi = curve.k_max;
  const double spot = curve.spot;
  double best = 0.0;  // the trivial zero subhedge
  constexpr int n = 50;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double k1 = grid_point(b.ub, hi, i, n);
      const double k2 = grid_point(0.0, b.lb, j, n);
      best = std::max(
          best,
          static_cost(make_subhedge(SubVariant::I, b, spot, k1, k2), curve));
    }
  constexpr int m = 20;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int l = 0; l < m; ++l) {
        const double k1 = grid_point(b.ub, hi, i, m);
        const double k2 = grid_point(0.0, b.lb, j, m);
        const double k3 = grid_point(b.lb, b.ub, l, m);
        for (SubVariant v : {SubVariant::II, SubVariant::III}) {
          try {
            best = std::max(
                best,
                static_cost(make_subhedge(v, b, spot, k1, k2, k3), curve));
          } catch (const ThresholdSide&) {
          }
        }
      }
  return best;
}

}  // namespace

PriceBound upper_bound(const ImpliedLaw& law, const CallCurve& curve,
                       const BarrierPair& b) {
  const Classification cls = classify_upper(law, b);
  PriceBound bound;
  bound.side = BoundSide::Upper;
  bound.label = cls.label;
  bound.params = cls.params;
  const double spot = curve.spot;
  switch (cls.label) {
    case CaseLabel::I:
      bound.blueprint =
          make_superhedge(SuperVariant::I, b, spot, {cls.params.at("k")});
      break;
    case CaseLabel::II:
      bound.blueprint =
          make_superhedge(SuperVariant::II, b, spot, {cls.params.at("k")});
      break;
    case CaseLabel::III:
      bound.blueprint = make_superhedge(
          SuperVariant::III, b, spot,
          {cls.params.at("k1"), cls.params.at("k2"), cls.params.at("k3"),
           cls.params.at("k4")});
      break;
    case CaseLabel::IV:
      bound.blueprint = make_superhedge(
          SuperVariant::IV, b, spot, {cls.params.at("k1"), cls.params.at("k2")});
      break;
  }
  bound.value = static_cost(bound.blueprint, curve);
  const double grid_min = superhedge_grid_min(curve, b);
  if (bound.value > grid_min + 1e-6)
    throw ClassificationAmbiguous(
        "upper bound exceeds the strike-grid minimum by " +
        std::to_string(bound.value - grid_min));
  bound.value = std::clamp(bound.value, 0.0, 1.0);
  return bound;
}

Classification classify_lower(const ImpliedLaw& law, const BarrierPair& b) {
  const LowerGeometry g = lower_geometry(law, b);
  const CaseConditions cond = lower_conditions_from(b, g);
  Classification cls;
  cls.label = single_case(cond, "lower");
  if (cls.label == CaseLabel::IV) return cls;

  double v0 = 0.0;
  if (cls.label == CaseLabel::I) {
    if (g.geo.v_hi - g.geo.v_lo < 1e-12) {
      v0 = g.geo.v_lo;
    } else {
      const auto d = [&](double v) { return g.geo.kappa_of(v) - v; };
      v0 = bisect(d, g.geo.v_lo, g.geo.v_hi, 1e-11 * b.ub);
    }
  } else if (cls.label == CaseLabel::II) {
    v0 = g.geo.v_hi;
  } else {
    v0 = g.geo.v_lo;
  }
  cls.params = {{"v0", v0},
                {"k1", g.geo.theta_of(v0).value()},
                {"k2", g.geo.psi_of(v0).value()},
                {"k3", v0}};
  return cls;
}

PriceBound lower_bound(const ImpliedLaw& law, const CallCurve& curve,
                       const BarrierPair& b) {
  const Classification cls = classify_lower(law, b);
  PriceBound bound;
  bound.side = BoundSide::Lower;
  bound.label = cls.label;
  bound.params = cls.params;
  const double spot = curve.spot;
  switch (cls.label) {
    case CaseLabel::I:
      bound.blueprint = make_subhedge(SubVariant::I, b, spot,
                                      cls.params.at("k1"), cls.params.at("k2"));
      break;
    case CaseLabel::II:
      bound.blueprint =
          make_subhedge(SubVariant::II, b, spot, cls.params.at("k1"),
                        cls.params.at("k2"), cls.params.at("k3"));
      break;
    case CaseLabel::III:
      bound.blueprint =
          make_subhedge(SubVariant::III, b, spot, cls.params.at("k1"),
                        cls.params.at("k2"), cls.params.at("k3"));
      break;
    case CaseLabel::IV:
      bound.blueprint = make_subhedge(SubVariant::Zero, b, spot);
      bound.value = 0.0;
      return bound;
  }
  bound.value = static_cost(bound.blueprint, curve);
  const double grid_max = subhedge_grid_max(curve, b);
  if (bound.value < grid_max - 1e-6)
    throw ClassificationAmbiguous(
        "lower bound falls short of the strike-grid maximum by " +
        std::to_string(grid_max - bound.value));
  bound.value = std::clamp(bound.value, 0.0, 1.0);
  return bound;
}

}  // namespace rb

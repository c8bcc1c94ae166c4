#include "rb/barycentre.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace rb {

namespace {

constexpr double kMassFloor = 1e-13;

void check_barriers(const ImpliedLaw& law, const BarrierPair& b) {
  const double mean = law.total_mean();
  if (!(b.lb > law.support_lo) || !(b.lb < mean) || !(b.ub > mean) ||
      !(b.ub < law.support_hi))
    throw DomainError("barriers must satisfy 0 < lb < S0 < ub < support top");
}

// Mass-weighted residuals are compared against this scale; the defining
// equations hold at the root to 1e-9 * S0 on smooth laws. Atomic laws have
// discontinuous residuals, so the guard is skipped for them.
void guard_residual(const ImpliedLaw& law, double residual) {
  if (!law.atoms.empty()) return;
  if (std::fabs(residual) > 1e-9 * law.total_mean())
    throw NumericsError("barycentre root: residual above tolerance");
}

// Root tolerance scales with the mean, not the support top: fat-tailed
// laws have support_hi >> mean, and the residual guard below is on the
// mean scale, so a support-scaled bracket would be too coarse to meet it.
double xtol_for(const ImpliedLaw& law) { return 1e-11 * law.total_mean(); }

// int_a^b (u - c) mu(du). The parts identity cancels catastrophically when
// the interval shrinks onto c (the rho roots become degenerate there), so
// narrow atom-free intervals integrate the excess directly instead.
double excess(const ImpliedLaw& law, double a, double b, double c) {
  if (b <= a) return 0.0;
  if (law.excess_fn) return law.excess_fn(a, b, c);
  if (law.atoms.empty() && (b - a) < 0.05 * law.support_hi)
    return adaptive_simpson(
        [&](double u) { return (u - c) * law.density(u); }, a, b, 1e-13);
  return law.partial_moment(a, b) - c * law.mass(a, b);
}

}  // namespace

double barycentre(const ImpliedLaw& law, const IntervalUnion& gamma) {
  double mass = 0.0;
  double moment = 0.0;
  for (const Interval& iv : gamma.parts) {
    mass += law.mass(iv.lo, iv.hi);
    moment += law.partial_moment(iv.lo, iv.hi);
  }
  if (mass <= kMassFloor) throw ZeroMass("barycentre: union carries no mass");
  return moment / mass;
}

namespace {

template <typename F>
double union_reduce(const Interval& a, const Interval& b, F per_interval) {
  Interval lo = a, hi = b;
  if (hi.lo < lo.lo) std::swap(lo, hi);
  if (hi.lo <= lo.hi)  // overlap: merge
    return per_interval(lo.lo, std::max(lo.hi, hi.hi));
  return per_interval(lo.lo, lo.hi) + per_interval(hi.lo, hi.hi);
}

}  // namespace

double union_mass(const ImpliedLaw& law, const Interval& a, const Interval& b) {
  return union_reduce(a, b,
                      [&](double x, double y) { return law.mass(x, y); });
}

double union_moment(const ImpliedLaw& law, const Interval& a,
                    const Interval& b) {
  return union_reduce(
      a, b, [&](double x, double y) { return law.partial_moment(x, y); });
}

double rho_minus(const ImpliedLaw& law, const BarrierPair& b, double w) {
  check_barriers(law, b);
  if (!(w >= law.support_lo - 1e-12) || !(w <= b.lb))
    throw DomainError("rho_minus: need w in [0, lb]");
  const auto g = [&](double r) { return excess(law, w, r, b.lb); };
  // g is increasing in r and g(lb) <= 0 in exact arithmetic; when w is at
  // lb the residual is a cancellation of large terms and can round to the
  // wrong side, in which case the root is the boundary itself.
  if (g(b.lb) >= 0.0) return b.lb;
  const double root = bisect(g, b.lb, law.support_hi, xtol_for(law));
  guard_residual(law, g(root));
  return root;
}

double rho_plus(const ImpliedLaw& law, const BarrierPair& b, double z) {
  check_barriers(law, b);
  z = std::min(z, law.support_hi);
  if (!(z >= b.ub)) throw DomainError("rho_plus: need z >= ub");
  const auto g = [&](double r) { return excess(law, r, z, b.ub); };
  // mirror boundary guard: g(ub) >= 0 in exact arithmetic but the
  // residual cancels to rounding noise when z is at ub.
  if (g(b.ub) <= 0.0) return b.ub;
  const double root = bisect(g, law.support_lo, b.ub, xtol_for(law));
  guard_residual(law, g(root));
  return root;
}

Extended gamma_plus(const ImpliedLaw& law, const BarrierPair& b, double w) {
  check_barriers(law, b);
  if (!(w >= law.support_lo - 1e-12) || !(w <= b.lb))
    throw DomainError("gamma_plus: need w in [0, lb]");
  if (law.mass(law.support_lo, w) <= kMassFloor)
    return Extended::finite(b.ub);  // limiting value as w drops to 0
  const auto g = [&](double gam) {
    const double rp = rho_plus(law, b, gam);
    const Interval low{law.support_lo, w};
    const Interval high{rp, gam};
    return union_moment(law, low, high) - b.lb * union_mass(law, low, high);
  };
  if (g(law.support_hi) < 0.0) return Extended::pos_inf();
  const double root = bisect(g, b.ub, law.support_hi, xtol_for(law));
  guard_residual(law, g(root));
  return Extended::finite(root);
}

Extended gamma_minus(const ImpliedLaw& law, const BarrierPair& b, double z) {
  check_barriers(law, b);
  z = std::min(z, law.support_hi);
  if (!(z >= b.ub)) throw DomainError("gamma_minus: need z >= ub");
  const auto g = [&](double gam) {
    const double rm = rho_minus(law, b, gam);
    const Interval low{gam, rm};
    const Interval high{z, law.support_hi};
    return union_moment(law, low, high) - b.ub * union_mass(law, low, high);
  };
  if (g(law.support_lo) > 0.0) return Extended::neg_inf();
  const double root = bisect(g, law.support_lo, b.lb, xtol_for(law));
  guard_residual(law, g(root));
  return Extended::finite(root);
}

Extended psi(const ImpliedLaw& law, const BarrierPair& b, double v) {
  check_barriers(law, b);
  if (!(v >= b.lb) || !(v <= b.ub)) throw DomainError("psi: need v in [lb, ub]");
  const double s0 = law.total_mean();
  const double cap = (b.ub - s0) / (b.ub - b.lb);
  const auto set_mass = [&](double z) {
    return law.mass(z, b.lb) + law.mass(v, b.ub);
  };
  const auto set_moment = [&](double z) {
    return law.partial_moment(z, b.lb) + law.partial_moment(v, b.ub);
  };
  // g(z) = mean of the set plus the compensating atom at ub, minus the
  // target mean lb * cap; increasing in z.
  const auto g = [&](double z) {
    return set_moment(z) + b.ub * (cap - set_mass(z)) - b.lb * cap;
  };
  if (set_mass(b.lb) > cap) return Extended::pos_inf();
  if (g(law.support_lo) > 0.0) return Extended::pos_inf();
  if (g(b.lb) < 0.0) return Extended::pos_inf();
  const double root = bisect(g, law.support_lo, b.lb, xtol_for(law));
  if (set_mass(root) > cap + 1e-9) return Extended::pos_inf();
  guard_residual(law, g(root));
  return Extended::finite(root);
}

Extended theta(const ImpliedLaw& law, const BarrierPair& b, double v) {
  check_barriers(law, b);
  if (!(v >= b.lb) || !(v <= b.ub))
    throw DomainError("theta: need v in [lb, ub]");
  const double s0 = law.total_mean();
  const double cap = (s0 - b.lb) / (b.ub - b.lb);
  const auto set_mass = [&](double z) {
    return law.mass(b.lb, v) + law.mass(b.ub, z);
  };
  const auto set_moment = [&](double z) {
    return law.partial_moment(b.lb, v) + law.partial_moment(b.ub, z);
  };
  // h(z) = mean of the set plus the compensating atom at lb, minus the
  // target mean ub * cap; increasing in z.
  const auto h = [&](double z) {
    return set_moment(z) + b.lb * (cap - set_mass(z)) - b.ub * cap;
  };
  if (set_mass(b.ub) > cap) return Extended::neg_inf();
  if (h(law.support_hi) < 0.0) return Extended::neg_inf();
  if (h(b.ub) > 0.0) return Extended::neg_inf();
  const double root = bisect(h, b.ub, law.support_hi, xtol_for(law));
  if (set_mass(root) > cap + 1e-9) return Extended::neg_inf();
  guard_residual(law, h(root));
  return Extended::finite(root);
}

namespace {

// Finds the closed sub-interval of [lo, hi] on which the predicate holds,
// assuming (per the monotonicity lemmas) the true set is an interval.
// Returns false when the predicate fails on the whole grid.
bool feasible_interval(const std::function<bool(double)>& ok, double lo,
                       double hi, double* out_lo, double* out_hi) {
  constexpr int kGrid = 64;
  std::vector<double> v(kGrid + 1);
  std::vector<bool> f(kGrid + 1);
  int first = -1, last = -1;
  for (int i = 0; i <= kGrid; ++i) {
    v[i] = lo + (hi - lo) * i / kGrid;
    f[i] = ok(v[i]);
    if (f[i]) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first < 0) return false;
  const auto refine = [&](double good, double bad) {
    for (int it = 0; it < 60 && std::fabs(good - bad) > 1e-10 * hi; ++it) {
      const double m = 0.5 * (good + bad);
      (ok(m) ? good : bad) = m;
    }
    return good;
  };
  *out_lo = (first == 0) ? lo : refine(v[first], v[first - 1]);
  *out_hi = (last == kGrid) ? hi : refine(v[last], v[last + 1]);
  return true;
}

}  // namespace

SubhedgeGeometry kappa_and_range(const ImpliedLaw& law, const BarrierPair& b) {
  check_barriers(law, b);
  SubhedgeGeometry geo;
  geo.psi_of = [law, b](double v) { return psi(law, b, v); };
  geo.theta_of = [law, b](double v) { return theta(law, b, v); };
  geo.kappa_of = [law, b](double v) {
    const Extended p = psi(law, b, v);
    const Extended t = theta(law, b, v);
    if (!p.is_finite() || !t.is_finite())
      throw DomainError("kappa: psi/theta not finite at v");
    const double den = t.x - b.lb + b.ub - p.x;
    return b.ub * (t.x - b.lb) / den + b.lb * (b.ub - p.x) / den;
  };

  // Evaluate on an interval shrunk by 1e-6 of the barrier gap to avoid
  // equality chatter in the mass caps at the endpoints.
  const double shrink = 1e-6 * (b.ub - b.lb);
  const double lo = b.lb + shrink;
  const double hi = b.ub - shrink;
  double p_lo, p_hi, t_lo, t_hi;
  const bool p_ok = feasible_interval(
      [&](double v) { return psi(law, b, v).is_finite(); }, lo, hi, &p_lo,
      &p_hi);
  const bool t_ok = feasible_interval(
      [&](double v) { return theta(law, b, v).is_finite(); }, lo, hi, &t_lo,
      &t_hi);
  if (p_ok && t_ok) {
    geo.v_lo = std::max(p_lo, t_lo);
    geo.v_hi = std::min(p_hi, t_hi);
    geo.has_range = geo.v_lo <= geo.v_hi;
  }
  return geo;
}

void dump_geometry_csv(std::ostream& os, const ImpliedLaw& law,
                       const BarrierPair& b, int n) {
  const SubhedgeGeometry geo = kappa_and_range(law, b);
  os << "v,psi,theta,kappa\n";
  for (int i = 0; i < n; ++i) {
    const double v = b.lb + (b.ub - b.lb) * (i + 0.5) / n;
    const Extended p = geo.psi_of(v);
    const Extended t = geo.theta_of(v);
    os << v << ",";
    if (p.is_finite()) os << p.x; else os << "inf";
    os << ",";
    if (t.is_finite()) os << t.x; else os << "-inf";
    os << ",";
    if (p.is_finite() && t.is_finite()) os << geo.kappa_of(v); else os << "nan";
    os << "\n";
  }
}

}  // namespace rb

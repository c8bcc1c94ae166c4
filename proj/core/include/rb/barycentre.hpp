#pragma once
// Barycentre machinery: the mu-mean over interval unions and the derived
// strike-selection functions. All equations are solved by bracketed
// bisection; monotonicity of every defining function in its argument makes
// the brackets safe. "No finite solution" is reported through the tagged
// Extended type, never through sentinel floats.

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "rb/market_input.hpp"
#include "rb/numerics.hpp"

namespace rb {

struct ZeroMass : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BarrierPair {
  double lb = 0.0;
  double ub = 0.0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Disjoint ascending open/closed intervals inside the law's support.
struct IntervalUnion {
  std::vector<Interval> parts;
};

// mu-mean of the union: ratio of partial first moment to mass.
// Throws ZeroMass when the union carries no mass.
double barycentre(const ImpliedLaw& law, const IntervalUnion& gamma);

// Mass/moment of the set union of two closed intervals, merging any
// overlap (the intervals appearing in the gamma definitions can overlap).
double union_mass(const ImpliedLaw& law, const Interval& a, const Interval& b);
double union_moment(const ImpliedLaw& law, const Interval& a,
                    const Interval& b);

// rho_-(w) > lb: the point making [w, rho_-(w)] have barycentre lb.
// Defined for w in [0, lb].
double rho_minus(const ImpliedLaw& law, const BarrierPair& b, double w);

// rho_+(z) < ub: the point making [rho_+(z), z] have barycentre ub.
// Defined for z in [ub, support_hi]; pass the support top for z = infinity
// (the two coincide on compactly supported laws).
double rho_plus(const ImpliedLaw& law, const BarrierPair& b, double z);

// gamma_+(w) >= ub: solves barycentre([0,w] u [rho_+(g), g]) = lb.
// PosInf when no root exists below the support top.
Extended gamma_plus(const ImpliedLaw& law, const BarrierPair& b, double w);

// gamma_-(z) <= lb: solves barycentre([g, rho_-(g)] u [z, top]) = ub.
// NegInf when the root would fall below zero.
Extended gamma_minus(const ImpliedLaw& law, const BarrierPair& b, double z);

// psi(v) in [0, lb]: the cut point below lb such that the mass on
// (psi(v), lb) u (v, ub), topped up by an atom at ub, averages to lb with
// total mass (ub - S0) / (ub - lb). PosInf when no such cut exists.
Extended psi(const ImpliedLaw& law, const BarrierPair& b, double v);

// theta(v) >= ub: mirror cut above ub with mass cap (S0 - lb) / (ub - lb)
// and compensating atom at lb. NegInf when no such cut exists.
Extended theta(const ImpliedLaw& law, const BarrierPair& b, double v);

// The K3 feasibility geometry for subhedging: evaluators for psi, theta
// and kappa plus the interval [v_lo, v_hi] on which both cuts exist.
// has_range == false signals the empty range (lower-bound case IV).
struct SubhedgeGeometry {
  std::function<Extended(double)> psi_of;
  std::function<Extended(double)> theta_of;
  std::function<double(double)> kappa_of;  // only valid on [v_lo, v_hi]
  double v_lo = 0.0;
  double v_hi = 0.0;
  bool has_range = false;
};

SubhedgeGeometry kappa_and_range(const ImpliedLaw& law, const BarrierPair& b);

// CSV dump "v,psi,theta,kappa" on n sample points across [lb, ub];
// infinite values render as inf / -inf, kappa as nan outside the range.
void dump_geometry_csv(std::ostream& os, const ImpliedLaw& law,
                       const BarrierPair& b, int n = 200);

}  // namespace rb

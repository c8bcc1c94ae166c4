#include "rb/embedding.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <thread>

namespace rb {

namespace {

constexpr int kCells = 2000;   // discretisation grid, 4 cells per TV bin
constexpr int kTvBins = 500;   // recomposition mesh
constexpr double kMassEps = 1e-12;
constexpr double kDropStage = 1e-10;  // stages lighter than this are omitted

double inf() { return std::numeric_limits<double>::infinity(); }

}  // namespace

// ---------------------------------------------------------------------------
// DiscreteLaw
// ---------------------------------------------------------------------------

double DiscreteLaw::mass() const {
  double m = 0.0;
  for (const Atom& a : atoms) m += a.mass;
  return m;
}

double DiscreteLaw::mean() const {
  double m = 0.0, mom = 0.0;
  for (const Atom& a : atoms) {
    m += a.mass;
    mom += a.mass * a.x;
  }
  if (m <= kMassEps) throw ZeroMass("DiscreteLaw::mean: no mass");
  return mom / m;
}

DiscreteLaw discretize_restriction(const ImpliedLaw& law,
                                   const std::vector<Interval>& parts,
                                   const std::vector<double>& cuts) {
  DiscreteLaw out;
  const double lo = law.support_lo;
  const double hi = law.support_hi;
  const double w = (hi - lo) / kCells;
  for (Interval iv : parts) {
    // the implied laws here carry no mass at the support bottom, so
    // clamping the lower end to the support keeps the half-open pieces a
    // partition
    iv.lo = std::max(iv.lo, lo);
    iv.hi = std::min(iv.hi, hi);
    if (iv.hi <= iv.lo) continue;
    // cell edges: the interval ends, the aligned grid points strictly
    // inside, and any cut points strictly inside
    std::vector<double> edges;
    edges.push_back(iv.lo);
    const long first = static_cast<long>(std::floor((iv.lo - lo) / w)) + 1;
    for (long i = std::max(first, 1L); lo + i * w < iv.hi - 1e-12 * hi; ++i)
      edges.push_back(lo + i * w);
    for (double c : cuts)
      if (c > iv.lo + 1e-12 * hi && c < iv.hi - 1e-12 * hi) edges.push_back(c);
    edges.push_back(iv.hi);
    std::sort(edges.begin(), edges.end());
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
      const double a = edges[i], b = edges[i + 1];
      if (b - a < 1e-12 * hi) continue;
      const double m = law.mass_half_open_fn(a, b);
      if (m <= kMassEps) continue;
      double x = law.moment_half_open_fn(a, b) / m;
      x = std::clamp(x, a, b);
      out.atoms.push_back({x, m});
    }
  }
  std::sort(out.atoms.begin(), out.atoms.end(),
            [](const Atom& a, const Atom& b) { return a.x < b.x; });
  return out;
}

std::size_t find_atom(const DiscreteLaw& law, double x) {
  for (std::size_t i = 0; i < law.atoms.size(); ++i)
    if (law.atoms[i].x == x) return i;
  throw DomainError("find_atom: no atom at " + std::to_string(x));
}

namespace {

// Appends an explicit atom (a barrier or interior meeting point); zero and
// slightly negative masses (bisection noise) are dropped / rejected.
void add_atom(DiscreteLaw& law, double x, double m) {
  if (m < -1e-8) throw StageMassNegative("atom mass " + std::to_string(m) +
                                         " at " + std::to_string(x));
  if (m <= kMassEps) return;
  law.atoms.push_back({x, m});
  std::sort(law.atoms.begin(), law.atoms.end(),
            [](const Atom& a, const Atom& b) { return a.x < b.x; });
}

DiscreteLaw normalized(const DiscreteLaw& law) {
  const double m = law.mass();
  if (m <= kMassEps) throw ZeroMass("normalized: no mass");
  DiscreteLaw out = law;
  for (Atom& a : out.atoms) a.mass /= m;
  return out;
}

void check_center(const DiscreteLaw& target, double start) {
  const double scale =
      std::max({std::fabs(start), std::fabs(target.atoms.back().x), 1.0});
  const double mean = target.mean();
  if (std::fabs(mean - start) > 2e-8 * scale)
    throw CenterMismatch("stage mean " + std::to_string(mean) +
                         " != start " + std::to_string(start));
}

}  // namespace

// ---------------------------------------------------------------------------
// Stopping rules
// ---------------------------------------------------------------------------

StoppingRule ay_rule(const DiscreteLaw& target, double start) {
  if (target.atoms.empty()) throw ZeroMass("ay_rule: empty target");
  check_center(target, start);
  StoppingRule r;
  r.kind = StoppingRule::Kind::AzemaYor;
  r.start = start;
  r.target = target;
  const std::size_t n = target.atoms.size();
  r.threshold.resize(n);
  double m = 0.0, mom = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    m += target.atoms[i].mass;
    mom += target.atoms[i].mass * target.atoms[i].x;
    r.threshold[i] = mom / m;
  }
  // the full-measure threshold equals the start in exact arithmetic; clamp
  // so the rule is armed at time zero
  r.threshold.front() = std::min(r.threshold.front(), start);
  for (std::size_t i = 1; i < n; ++i)
    r.threshold[i] = std::max(r.threshold[i], r.threshold[i - 1]);
  return r;
}

StoppingRule reversed_ay_rule(const DiscreteLaw& target, double start) {
  if (target.atoms.empty()) throw ZeroMass("reversed_ay_rule: empty target");
  check_center(target, start);
  StoppingRule r;
  r.kind = StoppingRule::Kind::ReversedAzemaYor;
  r.start = start;
  r.target = target;
  const std::size_t n = target.atoms.size();
  r.threshold.resize(n);
  double m = 0.0, mom = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    m += target.atoms[i].mass;
    mom += target.atoms[i].mass * target.atoms[i].x;
    r.threshold[i] = mom / m;
  }
  r.threshold.back() = std::max(r.threshold.back(), start);
  for (std::size_t i = n - 1; i-- > 0;)
    r.threshold[i] = std::min(r.threshold[i], r.threshold[i + 1]);
  return r;
}

StoppingRule hit_two_levels_rule(double lo, double hi, double start) {
  if (!(lo < start && start < hi))
    throw DomainError("hit_two_levels_rule: need lo < start < hi");
  StoppingRule r;
  r.kind = StoppingRule::Kind::HitTwoLevels;
  r.start = start;
  r.target.atoms = {{lo, (hi - start) / (hi - lo)},
                    {hi, (start - lo) / (hi - lo)}};
  return r;
}

// ---------------------------------------------------------------------------
// Build helpers
// ---------------------------------------------------------------------------

namespace {

// Re-solves a cut-point equation locally around the classification value so
// the stage-mean identities hold to full precision rather than to the
// classifier's bisection tolerance. Returns x unchanged when no sign change
// is found nearby (x already optimal to rounding).
double refine_cut(const std::function<double(double)>& g, double x,
                  double span) {
  const double fx = g(x);
  if (fx == 0.0) return x;
  for (double h = 1e-9 * span; h <= 3e-5 * span; h *= 4.0) {
    const double a = x - h, b = x + h;
    if ((g(a) > 0.0) != (fx > 0.0)) return bisect(g, a, x, 1e-13 * span);
    if ((g(b) > 0.0) != (fx > 0.0)) return bisect(g, x, b, 1e-13 * span);
  }
  return x;
}

struct Builder {
  const ImpliedLaw& law;
  BarrierPair b;
  double s0, lo, hi, bottom;
  ExtremalModel model;

  Builder(const ImpliedLaw& l, const BarrierPair& bp, BoundSide side,
          CaseLabel label)
      : law(l), b(bp), s0(l.total_mean()), lo(l.support_lo), hi(l.support_hi),
        bottom(l.support_lo - 1.0) {
    model.side = side;
    model.label = label;
    model.barriers = bp;
    model.spot = s0;
    model.scale = hi;
    model.law = l;
  }

  double mass(double a, double c) const {
    a = std::max(a, lo);
    c = std::min(c, hi);
    return c > a ? law.mass_half_open_fn(a, c) : 0.0;
  }
  double mom(double a, double c) const {
    a = std::max(a, lo);
    c = std::min(c, hi);
    return c > a ? law.moment_half_open_fn(a, c) : 0.0;
  }

  DiscreteLaw cells(const std::vector<Interval>& parts,
                    std::vector<double> extra_cuts = {}) const {
    extra_cuts.push_back(b.lb);
    extra_cuts.push_back(b.ub);
    return discretize_restriction(law, parts, extra_cuts);
  }

  int add(const std::string& name, const DiscreteLaw& raw, StoppingRule rule,
          double weight) {
    Stage s;
    s.rule = std::move(rule);
    s.weight = weight;
    s.name = name;
    // weight consistency between graph bookkeeping and the raw measure
    if (std::fabs(raw.mass() - weight) > 1e-7)
      throw StageMassNegative("stage " + name + ": raw mass " +
                              std::to_string(raw.mass()) +
                              " != weight " + std::to_string(weight));
    model.stages.push_back(std::move(s));
    return static_cast<int>(model.stages.size()) - 1;
  }

  void link(int parent, double atom_x, int child) {
    Stage& p = model.stages[parent];
    const std::size_t idx = find_atom(p.rule.target, atom_x);
    p.next[idx] = child;
  }

  // Terminal-atom recomposition against the law on the TV mesh.
  void verify_recompose() const {
    std::vector<double> emp(kTvBins, 0.0), ref(kTvBins, 0.0);
    const double w = (hi - lo) / kTvBins;
    for (const Stage& s : model.stages) {
      for (std::size_t i = 0; i < s.rule.target.atoms.size(); ++i) {
        if (s.next.count(i)) continue;
        const Atom& a = s.rule.target.atoms[i];
        // atoms sitting exactly on a bin edge belong to the bin below,
        // matching the half-open reference masses
        int bin = static_cast<int>(std::ceil((a.x - lo) / w)) - 1;
        bin = std::clamp(bin, 0, kTvBins - 1);
        emp[bin] += s.weight * a.mass;
      }
    }
    for (int i = 0; i < kTvBins; ++i)
      ref[i] = law.mass_half_open_fn(lo + i * w, lo + (i + 1) * w);
    double tv = 0.0;
    for (int i = 0; i < kTvBins; ++i) tv += std::fabs(emp[i] - ref[i]);
    tv *= 0.5;
    if (tv > 1e-6)
      throw StageMassNegative("recomposition TV " + std::to_string(tv) +
                              " exceeds 1e-6");
  }

  ExtremalModel take() {
    for (const Stage& s : model.stages)
      if (s.weight < -kMassEps)
        throw StageMassNegative("negative stage weight in " + s.name);
    verify_recompose();
    return std::move(model);
  }
};

// ---------------------------------------------------------------------------
// Upper-side constructions
// ---------------------------------------------------------------------------

// Case I: embed the middle of the law plus an atom at ub, then diffuse the
// atom into the two outer pieces from above. Paths that end in the outer
// pieces passed through ub, and those ending below the lower strike also
// dipped below lb on the way down.
ExtremalModel upper_case_one(const ImpliedLaw& law, const BarrierPair& b,
                             const Classification& cls) {
  Builder bld(law, b, BoundSide::Upper, CaseLabel::I);
  const double r0 = cls.params.at("k");
  double z0 = cls.params.at("z0");
  z0 = refine_cut(
      [&](double z) {
        return bld.mom(bld.bottom, r0) + bld.mom(z, bld.hi) -
               b.ub * (bld.mass(bld.bottom, r0) + bld.mass(z, bld.hi));
      },
      z0, bld.hi);

  DiscreteLaw nu1 = bld.cells({{r0, z0}}, {r0, z0});
  const double p = bld.mass(bld.bottom, r0) + bld.mass(z0, bld.hi);
  add_atom(nu1, b.ub, p);
  const int s0 = bld.add("root", nu1, ay_rule(normalized(nu1), bld.s0),
                         nu1.mass());

  DiscreteLaw nu2 = bld.cells({{bld.bottom, r0}, {z0, bld.hi}}, {r0, z0});
  const int s1 =
      bld.add("from-ub", nu2, reversed_ay_rule(normalized(nu2), b.ub), p);
  bld.link(s0, b.ub, s1);

  bld.model.params = cls.params;
  bld.model.params["p"] = p;
  return bld.take();
}

// Case II: mirror of case I around the spot; the atom sits at lb and the
// outer pieces are embedded from below.
ExtremalModel upper_case_two(const ImpliedLaw& law, const BarrierPair& b,
                             const Classification& cls) {
  Builder bld(law, b, BoundSide::Upper, CaseLabel::II);
  const double rinf = cls.params.at("k");
  double w0 = cls.params.at("w0");
  w0 = refine_cut(
      [&](double w) {
        return bld.mom(bld.bottom, w) + bld.mom(rinf, bld.hi) -
               b.lb * (bld.mass(bld.bottom, w) + bld.mass(rinf, bld.hi));
      },
      w0, bld.hi);

  DiscreteLaw nu1 = bld.cells({{w0, rinf}}, {w0, rinf});
  const double p = bld.mass(bld.bottom, w0) + bld.mass(rinf, bld.hi);
  add_atom(nu1, b.lb, p);
  const int s0 = bld.add("root", nu1, ay_rule(normalized(nu1), bld.s0),
                         nu1.mass());

  DiscreteLaw nu2 = bld.cells({{bld.bottom, w0}, {rinf, bld.hi}}, {w0, rinf});
  const int s1 = bld.add("from-lb", nu2, ay_rule(normalized(nu2), b.lb), p);
  bld.link(s0, b.lb, s1);

  bld.model.params = cls.params;
  bld.model.params["p"] = p;
  return bld.take();
}

// Case III: five stages. The root embeds the central piece plus atoms at
// both barriers; each barrier atom diffuses into one outer piece plus an
// atom at the opposite barrier, and those second-round atoms embed the two
// remaining inner pieces.
ExtremalModel upper_case_three(const ImpliedLaw& law, const BarrierPair& b,
                               const Classification& cls) {
  Builder bld(law, b, BoundSide::Upper, CaseLabel::III);
  const double w0 = cls.params.at("k4");
  const double z0 = cls.params.at("k1");
  const double r2 = cls.params.at("k2");
  const double r3 = cls.params.at("k3");
  // The four cut equations are coupled through the fixed point the
  // classifier already solved; iterating them one at a time diverges (the
  // fixed point repels the single-equation update), so the classifier's
  // values are used as-is and the stage-mean guards below verify them.

  const double ma = bld.mass(w0, r3);
  const double mb = bld.mass(r2, z0);
  const double p = bld.mass(bld.bottom, w0) + mb;
  const double q = ma + bld.mass(z0, bld.hi);
  const std::vector<double> cuts = {w0, r3, r2, z0};

  DiscreteLaw nu1 = bld.cells({{r3, r2}}, cuts);
  add_atom(nu1, b.lb, p);
  add_atom(nu1, b.ub, q);
  const int s0 = bld.add("root", nu1, ay_rule(normalized(nu1), bld.s0),
                         nu1.mass());

  DiscreteLaw nu2 = bld.cells({{z0, bld.hi}}, cuts);
  add_atom(nu2, b.lb, ma);
  const int s1 =
      bld.add("from-ub", nu2, reversed_ay_rule(normalized(nu2), b.ub), q);
  bld.link(s0, b.ub, s1);

  DiscreteLaw nu4 = bld.cells({{w0, r3}}, cuts);
  const int s2 = bld.add("ub-lb", nu4, ay_rule(normalized(nu4), b.lb), ma);
  bld.link(s1, b.lb, s2);

  DiscreteLaw nu3 = bld.cells({{bld.bottom, w0}}, cuts);
  add_atom(nu3, b.ub, mb);
  const int s3 = bld.add("from-lb", nu3, ay_rule(normalized(nu3), b.lb), p);
  bld.link(s0, b.lb, s3);

  DiscreteLaw nu5 = bld.cells({{r2, z0}}, cuts);
  const int s4 =
      bld.add("lb-ub", nu5, reversed_ay_rule(normalized(nu5), b.ub), mb);
  bld.link(s3, b.ub, s4);

  bld.model.params = {{"w0", w0}, {"k1", z0}, {"k2", r2}, {"k3", r3},
                      {"p", p},   {"q", q}};
  return bld.take();
}

// Case IV: run to the barriers first, embed each outer piece from its
// barrier with a compensating atom at the other barrier, then split the
// central piece at an interior meeting point z*.
ExtremalModel upper_case_four(const ImpliedLaw& law, const BarrierPair& b,
                              const Classification& cls) {
  Builder bld(law, b, BoundSide::Upper, CaseLabel::IV);
  double r0 = cls.params.at("k1");
  double rinf = cls.params.at("k2");
  r0 = refine_cut(
      [&](double r) {
        return bld.mom(bld.bottom, r) - b.lb * bld.mass(bld.bottom, r);
      },
      r0, bld.hi);
  rinf = refine_cut(
      [&](double r) { return bld.mom(r, bld.hi) - b.ub * bld.mass(r, bld.hi); },
      rinf, bld.hi);

  const double cap_ub = (bld.s0 - b.lb) / (b.ub - b.lb);  // P(hit ub first)
  const double cap_lb = 1.0 - cap_ub;
  double a_lb = cap_ub - bld.mass(r0, bld.hi);   // lb atom mass after ub
  double a_ub = cap_lb - bld.mass(bld.bottom, rinf);
  if (a_lb < -1e-8 || a_ub < -1e-8)
    throw StageMassNegative("case IV compensating atom negative");
  a_lb = std::max(a_lb, 0.0);
  a_ub = std::max(a_ub, 0.0);

  const int s0 = bld.add(
      "root", DiscreteLaw{{{b.lb, cap_lb}, {b.ub, cap_ub}}},
      hit_two_levels_rule(b.lb, b.ub, bld.s0), 1.0);

  DiscreteLaw nu1 = bld.cells({{r0, bld.hi}}, {r0, rinf});
  add_atom(nu1, b.lb, a_lb);
  const int s1 = bld.add("from-ub", nu1,
                         reversed_ay_rule(normalized(nu1), b.ub), cap_ub);
  bld.link(s0, b.ub, s1);

  DiscreteLaw nu2 = bld.cells({{bld.bottom, rinf}}, {r0, rinf});
  add_atom(nu2, b.ub, a_ub);
  const int s2 = bld.add("from-lb", nu2, ay_rule(normalized(nu2), b.lb),
                         cap_lb);
  bld.link(s0, b.lb, s2);

  bld.model.params = {{"k1", r0}, {"k2", rinf}, {"a_lb", a_lb},
                      {"a_ub", a_ub}};

  const double mid = bld.mass(rinf, r0);
  if (mid <= kDropStage) return bld.take();

  if (a_lb <= kDropStage || a_ub <= kDropStage) {
    // degenerate split: the whole central piece is reachable from one side
    const double start = a_lb > a_ub ? b.lb : b.ub;
    DiscreteLaw nu = bld.cells({{rinf, r0}}, {rinf, r0});
    const double wgt = std::max(a_lb, a_ub);
    const int s = bld.add(
        "middle", nu,
        start == b.lb ? ay_rule(normalized(nu), start)
                      : reversed_ay_rule(normalized(nu), start),
        wgt);
    // the side starting at lb is fed by the lb atom of the from-ub stage
    bld.link(start == b.lb ? s1 : s2, start, s);
    return bld.take();
  }

  // interior meeting point: the lb-side atom mass equals the central mass
  // below z*
  const auto gz = [&](double z) { return bld.mass(rinf, z) - a_lb; };
  double zs;
  try {
    zs = bisect(gz, rinf, r0, 1e-13 * bld.hi);
  } catch (const NumericsError&) {
    throw ZStarNotFound("case IV: no interior meeting point");
  }
  // cuts z1 (below z*) and z2 (above): each side piece plus the residual
  // atom at z* averages to its barrier
  const auto g1 = [&](double z) {
    return bld.mom(rinf, z) + zs * (a_lb - bld.mass(rinf, z)) - b.lb * a_lb;
  };
  const auto g2 = [&](double z) {
    return bld.mom(z, r0) + zs * (a_ub - bld.mass(z, r0)) - b.ub * a_ub;
  };
  double z1, z2;
  try {
    z1 = bisect(g1, rinf, zs, 1e-13 * bld.hi);
    z2 = bisect(g2, zs, r0, 1e-13 * bld.hi);
  } catch (const NumericsError&) {
    throw ZStarNotFound("case IV: side-piece cut not bracketed");
  }
  const double ra = a_lb - bld.mass(rinf, z1);  // z* atom from the lb side
  const double rb = a_ub - bld.mass(z2, r0);

  DiscreteLaw nu3 = bld.cells({{rinf, z1}}, {rinf, z1});
  add_atom(nu3, zs, ra);
  const int s3 = bld.add("lb-middle", nu3, ay_rule(normalized(nu3), b.lb),
                         a_lb);
  bld.link(s1, b.lb, s3);  // fed by the lb atom of the from-ub stage

  bld.model.params["z_star"] = zs;
  bld.model.params["z1"] = z1;
  bld.model.params["z2"] = z2;

  DiscreteLaw nu4 = bld.cells({{z2, r0}}, {z2, r0});
  add_atom(nu4, zs, rb);
  const int s4 =
      bld.add("ub-middle", nu4, reversed_ay_rule(normalized(nu4), b.ub), a_ub);
  bld.link(s2, b.ub, s4);

  if (ra + rb > kDropStage) {
    DiscreteLaw nu5 = bld.cells({{z1, z2}}, {z1, z2});
    const int s5 = bld.add("meeting", nu5, ay_rule(normalized(nu5), zs),
                           ra + rb);
    bld.link(s3, zs, s5);
    bld.link(s4, zs, s5);
  }
  return bld.take();
}

}  // namespace

ExtremalModel build_upper_extremal(const ImpliedLaw& law, const BarrierPair& b,
                                   const Classification& cls) {
  switch (cls.label) {
    case CaseLabel::I: return upper_case_one(law, b, cls);
    case CaseLabel::II: return upper_case_two(law, b, cls);
    case CaseLabel::III: return upper_case_three(law, b, cls);
    case CaseLabel::IV: return upper_case_four(law, b, cls);
  }
  throw DomainError("build_upper_extremal: bad case label");
}

// ---------------------------------------------------------------------------
// Lower-side constructions
// ---------------------------------------------------------------------------

namespace {

// Cases I-III share one construction: run to the barriers, embed the inner
// sets with compensating atoms at the opposite barrier, then split the
// outer tails between the two second-round atoms so each side averages to
// its barrier. At the boundary cases (II/III) one compensating atom
// vanishes and its stage is dropped.
ExtremalModel lower_attaining(const ImpliedLaw& law, const BarrierPair& b,
                              const Classification& cls) {
  Builder bld(law, b, BoundSide::Lower, cls.label);
  const double v0 = cls.params.at("v0");
  const double cap_ub = (bld.s0 - b.lb) / (b.ub - b.lb);
  const double cap_lb = 1.0 - cap_ub;

  double psi0 = cls.params.at("k2");
  double th0 = cls.params.at("k1");
  psi0 = refine_cut(
      [&](double z) {
        const double m = bld.mass(z, b.lb) + bld.mass(v0, b.ub);
        const double mo = bld.mom(z, b.lb) + bld.mom(v0, b.ub);
        return mo + b.ub * (cap_lb - m) - b.lb * cap_lb;
      },
      psi0, bld.hi);
  th0 = refine_cut(
      [&](double z) {
        const double m = bld.mass(b.lb, v0) + bld.mass(b.ub, z);
        const double mo = bld.mom(b.lb, v0) + bld.mom(b.ub, z);
        return mo + b.lb * (cap_ub - m) - b.ub * cap_ub;
      },
      th0, bld.hi);

  double m_ub = cap_lb - bld.mass(psi0, b.lb) - bld.mass(v0, b.ub);
  double m_lb = cap_ub - bld.mass(b.lb, v0) - bld.mass(b.ub, th0);
  if (m_ub < -1e-8 || m_lb < -1e-8)
    throw StageMassNegative("lower compensating atom negative");
  m_ub = std::max(m_ub, 0.0);
  m_lb = std::max(m_lb, 0.0);
  const std::vector<double> cuts = {psi0, v0, th0};

  const int s0 = bld.add(
      "root", DiscreteLaw{{{b.lb, cap_lb}, {b.ub, cap_ub}}},
      hit_two_levels_rule(b.lb, b.ub, bld.s0), 1.0);

  DiscreteLaw nu1 = bld.cells({{psi0, b.lb}, {v0, b.ub}}, cuts);
  add_atom(nu1, b.ub, m_ub);
  const int s1 = bld.add("from-lb", nu1, ay_rule(normalized(nu1), b.lb),
                         cap_lb);
  bld.link(s0, b.lb, s1);

  DiscreteLaw nu2 = bld.cells({{b.lb, v0}, {b.ub, th0}}, cuts);
  add_atom(nu2, b.lb, m_lb);
  const int s2 =
      bld.add("from-ub", nu2, reversed_ay_rule(normalized(nu2), b.ub), cap_ub);
  bld.link(s0, b.ub, s2);

  bld.model.params = cls.params;
  bld.model.params["k1"] = th0;
  bld.model.params["k2"] = psi0;
  bld.model.params["m_ub"] = m_ub;
  bld.model.params["m_lb"] = m_lb;

  // tails split: fractions (xl, xh) of the lower/upper tail route to the
  // ub-side atom so that its share averages to ub; the complement then
  // averages to lb automatically
  const double ml = bld.mass(bld.bottom, psi0);
  const double mh = bld.mass(th0, bld.hi);
  if (ml + mh <= kDropStage) return bld.take();
  double xl = 0.0, xh = 0.0;
  if (m_ub > kDropStage) {
    if (ml <= kMassEps) {
      xh = m_ub / mh;
    } else if (mh <= kMassEps) {
      xl = m_ub / ml;
    } else {
      const double bl = bld.mom(bld.bottom, psi0) / ml;
      const double bh = bld.mom(th0, bld.hi) / mh;
      xh = m_ub * (b.ub - bl) / (mh * (bh - bl));
      xl = m_ub * (bh - b.ub) / (ml * (bh - bl));
    }
    if (xl < -1e-9 || xl > 1.0 + 1e-9 || xh < -1e-9 || xh > 1.0 + 1e-9)
      throw StageMassNegative("tail split fraction out of range");
    xl = std::clamp(xl, 0.0, 1.0);
    xh = std::clamp(xh, 0.0, 1.0);

    DiscreteLaw tails_ub;
    for (const Atom& a : bld.cells({{bld.bottom, psi0}}, cuts).atoms)
      add_atom(tails_ub, a.x, a.mass * xl);
    for (const Atom& a : bld.cells({{th0, bld.hi}}, cuts).atoms)
      add_atom(tails_ub, a.x, a.mass * xh);
    const int s3 = bld.add(
        "tails-ub", tails_ub, reversed_ay_rule(normalized(tails_ub), b.ub),
        m_ub);
    bld.link(s1, b.ub, s3);
  }
  if (m_lb > kDropStage) {
    DiscreteLaw tails_lb;
    for (const Atom& a : bld.cells({{bld.bottom, psi0}}, cuts).atoms)
      add_atom(tails_lb, a.x, a.mass * (1.0 - xl));
    for (const Atom& a : bld.cells({{th0, bld.hi}}, cuts).atoms)
      add_atom(tails_lb, a.x, a.mass * (1.0 - xh));
    const int s4 = bld.add("tails-lb", tails_lb,
                           ay_rule(normalized(tails_lb), b.lb), m_lb);
    bld.link(s2, b.lb, s4);
  }
  bld.model.params["xl"] = xl;
  bld.model.params["xh"] = xh;
  return bld.take();
}

// Case IV: an embedding in which no path touches both barriers. When the
// law lives strictly between the barriers a single stage suffices; the
// running extremes of the rule never leave the hull of the target. With
// outer mass, split the law at an interior point beta so that the piece
// reachable from ub averages to ub, run first to {b*, ub}, and embed each
// share from its own start; the ub share stays above lb and the b* share
// stays below ub.
ExtremalModel lower_avoiding(const ImpliedLaw& law, const BarrierPair& b,
                             const Classification& cls) {
  Builder bld(law, b, BoundSide::Lower, cls.label);
  const double outer =
      bld.mass(bld.bottom, b.lb) + bld.mass(b.ub, bld.hi);
  if (outer <= 1e-9) {
    DiscreteLaw nu = bld.cells({{bld.bottom, bld.hi}});
    bld.add("root", nu, ay_rule(normalized(nu), bld.s0), nu.mass());
    bld.model.params["p"] = 0.0;
    return bld.take();
  }

  const auto build_side = [&](bool from_ub) -> ExtremalModel {
    Builder bd(law, b, BoundSide::Lower, cls.label);
    if (from_ub) {
      // beta in (lb, ub): mass on (lb, beta] u (ub, top] averages to ub
      const auto g = [&](double beta) {
        return bd.mom(b.lb, beta) + bd.mom(b.ub, bd.hi) -
               b.ub * (bd.mass(b.lb, beta) + bd.mass(b.ub, bd.hi));
      };
      if (g(b.ub) > 0.0)
        throw StageMassNegative("avoiding: no upper-side split point");
      const double beta = bisect(g, b.lb, b.ub, 1e-13 * bd.hi);
      const double p = bd.mass(b.lb, beta) + bd.mass(b.ub, bd.hi);
      const double bstar = (bd.s0 - p * b.ub) / (1.0 - p);
      if (!(bstar > b.lb && bstar < bd.s0))
        throw StageMassNegative("avoiding: start level outside (lb, spot)");
      const int s0 = bd.add(
          "root", DiscreteLaw{{{bstar, 1.0 - p}, {b.ub, p}}},
          hit_two_levels_rule(bstar, b.ub, bd.s0), 1.0);
      DiscreteLaw hiSide = bd.cells({{b.lb, beta}, {b.ub, bd.hi}}, {beta});
      const int s1 = bd.add("from-ub", hiSide,
                            reversed_ay_rule(normalized(hiSide), b.ub), p);
      bd.link(s0, b.ub, s1);
      DiscreteLaw loSide =
          bd.cells({{bd.bottom, b.lb}, {beta, b.ub}}, {beta});
      const int s2 = bd.add("from-inner", loSide,
                            ay_rule(normalized(loSide), bstar), 1.0 - p);
      bd.link(s0, bstar, s2);
      bd.model.params = {{"beta", beta}, {"p", p}, {"b_star", bstar}};
    } else {
      // mirror: alpha in (lb, ub): mass on [bottom, lb] u [alpha, ub)
      // averages to lb, run first to {lb, a*}
      const auto g = [&](double alpha) {
        return bd.mom(bd.bottom, b.lb) + bd.mom(alpha, b.ub) -
               b.lb * (bd.mass(bd.bottom, b.lb) + bd.mass(alpha, b.ub));
      };
      if (g(b.lb) < 0.0)
        throw StageMassNegative("avoiding: no lower-side split point");
      const double alpha = bisect(g, b.lb, b.ub, 1e-13 * bd.hi);
      const double p = bd.mass(bd.bottom, b.lb) + bd.mass(alpha, b.ub);
      const double astar = (bd.s0 - p * b.lb) / (1.0 - p);
      if (!(astar < b.ub && astar > bd.s0))
        throw StageMassNegative("avoiding: start level outside (spot, ub)");
      const int s0 = bd.add(
          "root", DiscreteLaw{{{b.lb, p}, {astar, 1.0 - p}}},
          hit_two_levels_rule(b.lb, astar, bd.s0), 1.0);
      DiscreteLaw loSide =
          bd.cells({{bd.bottom, b.lb}, {alpha, b.ub}}, {alpha});
      const int s1 =
          bd.add("from-lb", loSide, ay_rule(normalized(loSide), b.lb), p);
      bd.link(s0, b.lb, s1);
      DiscreteLaw hiSide = bd.cells({{b.lb, alpha}, {b.ub, bd.hi}}, {alpha});
      const int s2 = bd.add("from-inner", hiSide,
                            reversed_ay_rule(normalized(hiSide), astar),
                            1.0 - p);
      bd.link(s0, astar, s2);
      bd.model.params = {{"alpha", alpha}, {"p", p}, {"a_star", astar}};
    }
    return bd.take();
  };

  try {
    return build_side(true);
  } catch (const StageMassNegative&) {
    return build_side(false);
  } catch (const CenterMismatch&) {
    return build_side(false);
  }
}

}  // namespace

ExtremalModel build_lower_extremal(const ImpliedLaw& law, const BarrierPair& b,
                                   const Classification& cls) {
  if (cls.label == CaseLabel::IV) return lower_avoiding(law, b, cls);
  return lower_attaining(law, b, cls);
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

struct Crossings {
  double lb, ub;
  PathOutcome* o;

  void step(double a, double c) const {
    if (!o->hit_lb && (a - lb) * (c - lb) <= 0.0) {
      o->hit_lb = true;
      if (o->first == FirstHit::Neither) o->first = FirstHit::LbFirst;
    }
    if (!o->hit_ub && (a - ub) * (c - ub) <= 0.0) {
      o->hit_ub = true;
      if (o->first == FirstHit::Neither) o->first = FirstHit::UbFirst;
    }
  }
};

int simulation_threads() {
  if (const char* env = std::getenv("ROBUST_BARRIERS_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Moves the path from x inside the corridor (d, u) to one of its ends by
// sampling successive first hits among the decision levels in between: the
// not-yet-touched barriers. First-hit sides follow the martingale rule
// P(up) = (x - below) / (above - below), which is exact for Brownian
// motion by optional stopping, so barrier flags carry no discretisation
// bias. Landing values are the stored level doubles, making the end
// comparisons in the callers exact.
double corridor_walk(double x, double d, double u, const Crossings& cx,
                     std::mt19937_64& rng,
                     std::uniform_real_distribution<double>& unif) {
  while (true) {
    double a = d, c = u;
    if (!cx.o->hit_lb && cx.lb > a && cx.lb < x) a = cx.lb;
    if (!cx.o->hit_ub && cx.ub > a && cx.ub < x) a = cx.ub;
    if (!cx.o->hit_ub && cx.ub < c && cx.ub > x) c = cx.ub;
    if (!cx.o->hit_lb && cx.lb < c && cx.lb > x) c = cx.lb;
    x = unif(rng) < (x - a) / (c - a) ? c : a;
    cx.step(x, x);
    if (x <= d || x >= u) return x;
  }
}

// Runs one path through the stage graph by exact first-passage sampling.
// An Azema-Yor stage stops at the largest atom whose threshold the running
// max has passed, so between decisions the path lives in the corridor
// (current stop atom, next threshold); it is sampled only at those levels.
// Hitting the threshold advances the max pointer, hitting the atom stops
// the stage. The reversed rule mirrors this with the running min. Each
// corridor transition either stops the stage, advances the pointer or
// flags a barrier, so a stage finishes in at most ~2n transitions; the
// guard below only trips on a logic error.
void run_path(const ExtremalModel& model, std::mt19937_64& rng,
              PathOutcome* o, std::vector<std::uint64_t>* visits) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int s = 0;
  double x = model.stages[0].rule.start;
  while (true) {
    (*visits)[static_cast<std::size_t>(s)] += 1;
    const Stage& st = model.stages[static_cast<std::size_t>(s)];
    const auto& atoms = st.rule.target.atoms;
    const auto& th = st.rule.threshold;
    const std::size_t n = atoms.size();
    const Crossings cx{model.barriers.lb, model.barriers.ub, o};
    const std::size_t guard = 4 * n + 100;
    std::size_t iter = 0;
    std::size_t idx = 0;

    switch (st.rule.kind) {
      case StoppingRule::Kind::HitTwoLevels: {
        if (x <= atoms[0].x)
          idx = 0;
        else if (x >= atoms[1].x)
          idx = 1;
        else
          idx = corridor_walk(x, atoms[0].x, atoms[1].x, cx, rng, unif) >=
                        atoms[1].x
                    ? 1
                    : 0;
        break;
      }
      case StoppingRule::Kind::AzemaYor: {
        std::size_t j = 0;
        while (j + 1 < n && th[j + 1] <= x) ++j;
        while (j + 1 < n && x > atoms[j].x) {
          if (++iter > guard)
            throw HorizonExceeded("stage walk failed to stop");
          x = corridor_walk(x, atoms[j].x, th[j + 1], cx, rng, unif);
          if (x >= th[j + 1])
            while (j + 1 < n && th[j + 1] <= x) ++j;
        }
        idx = j;
        break;
      }
      case StoppingRule::Kind::ReversedAzemaYor: {
        std::size_t j = n - 1;
        while (j > 0 && th[j - 1] >= x) --j;
        while (j > 0 && x < atoms[j].x) {
          if (++iter > guard)
            throw HorizonExceeded("stage walk failed to stop");
          x = corridor_walk(x, th[j - 1], atoms[j].x, cx, rng, unif);
          if (x <= th[j - 1])
            while (j > 0 && th[j - 1] >= x) --j;
        }
        idx = j;
        break;
      }
    }

    x = atoms[idx].x;
    cx.step(x, x);
    const auto it = st.next.find(idx);
    if (it == st.next.end()) {
      o->terminal = x;
      return;
    }
    s = it->second;
  }
}

}  // namespace

SimulationResult simulate(const ExtremalModel& model, std::size_t n_paths,
                          double dt, std::uint64_t seed) {
  if (model.stages.empty()) throw DomainError("simulate: empty model");
  if (!(dt > 0.0)) throw DomainError("simulate: dt must be positive");
  // dt is validated for interface stability but the exact sampler does not
  // discretise time, so it never enters the path law.

  SimulationResult res;
  res.n_paths = n_paths;
  res.outcomes.resize(n_paths);
  const std::size_t n_stages = model.stages.size();

  const int n_threads =
      std::max(1, std::min<int>(simulation_threads(),
                                static_cast<int>(std::max<std::size_t>(
                                    n_paths / 256, 1))));
  std::vector<std::vector<std::uint64_t>> visits(
      static_cast<std::size_t>(n_threads),
      std::vector<std::uint64_t>(n_stages, 0));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_threads));

  const auto worker = [&](int t, std::size_t first, std::size_t last) {
    try {
      std::vector<std::uint64_t> local(n_stages, 0);
      for (std::size_t i = first; i < last; ++i) {
        std::mt19937_64 rng(splitmix(seed ^ splitmix(i * 0x10001ULL)));
        PathOutcome o;
        run_path(model, rng, &o, &local);
        res.outcomes[i] = o;
      }
      visits[static_cast<std::size_t>(t)] = local;
    } catch (...) {
      errors[static_cast<std::size_t>(t)] = std::current_exception();
    }
  };

  if (n_threads == 1) {
    worker(0, 0, n_paths);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n_paths + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      const std::size_t first = chunk * static_cast<std::size_t>(t);
      const std::size_t last = std::min(n_paths, first + chunk);
      if (first >= last) break;
      pool.emplace_back(worker, t, first, last);
    }
    for (std::thread& th : pool) th.join();
  }

  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  res.stage_visits.assign(n_stages, 0.0);
  for (int t = 0; t < n_threads; ++t)
    for (std::size_t k = 0; k < n_stages; ++k)
      res.stage_visits[k] += double(visits[static_cast<std::size_t>(t)][k]);
  for (double& v : res.stage_visits) v /= double(n_paths);

  std::uint64_t touched = 0;
  for (const PathOutcome& o : res.outcomes) touched += o.hit_lb && o.hit_ub;
  res.touch_fraction = double(touched) / double(n_paths);
  return res;
}

double ks_terminal(const std::vector<PathOutcome>& outcomes,
                   const ImpliedLaw& law) {
  std::vector<double> xs;
  xs.reserve(outcomes.size());
  for (const PathOutcome& o : outcomes) xs.push_back(o.terminal);
  std::sort(xs.begin(), xs.end());
  const double n = double(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = law.cdf(xs[i]);
    d = std::max(d, std::fabs(f - double(i) / n));
    d = std::max(d, std::fabs(f - double(i + 1) / n));
  }
  return d;
}

TightnessReport verify_tightness(const ExtremalModel& model,
                                 const PriceBound& bound, std::size_t n_paths,
                                 std::uint64_t seed) {
  const SimulationResult sim = simulate(model, n_paths, 1e-5, seed);
  TightnessReport rep;
  rep.mc_estimate = sim.touch_fraction;
  rep.std_err = std::sqrt(std::max(
      rep.mc_estimate * (1.0 - rep.mc_estimate) / double(n_paths), 0.0));
  rep.bound_value = bound.value;
  rep.ks = ks_terminal(sim.outcomes, model.law);
  rep.pass =
      std::fabs(rep.mc_estimate - rep.bound_value) <= 3.0 * rep.std_err + 0.005;
  return rep;
}

}  // namespace rb

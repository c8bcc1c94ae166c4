#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rb/embedding.hpp"
#include "rb/hedging_sim.hpp"

using namespace rb;

namespace {

// Shared fixtures; built once, the heavy ones lazily.

const HestonParams& paper_params() {
  static const HestonParams p;  // defaults are the study parameters
  return p;
}

const PathSet& paper_paths() {
  static const PathSet ps = heston_paths(paper_params(), 3000, 7);
  return ps;
}

struct HestonMarket {
  CallCurve curve;
  ImpliedLaw law;
  double atm_vol;
};

const HestonMarket& heston_market() {
  static const HestonMarket m = [] {
    CallCurve c = heston_call_curve(paper_params(), heston_knots(paper_params()));
    ImpliedLaw l = implied_law(c);
    const double iv = implied_vol(c, c.spot, paper_params().horizon);
    return HestonMarket{std::move(c), std::move(l), iv};
  }();
  return m;
}

double sample_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double acc = 0.0;
  for (const double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / (n - 1.0));
}

// Hand-built path set: per path a vector of daily closes (the first entry
// is the spot). Day extremes default to the close endpoints so nothing is
// crossed between observations unless a test overrides them.
PathSet synthetic_paths(double spot, const std::vector<std::vector<double>>& closes) {
  PathSet ps;
  ps.params.spot = spot;
  ps.n_paths = closes.size();
  ps.n_steps = closes.front().size();
  for (const auto& path : closes) {
    REQUIRE(path.size() == ps.n_steps);
    ps.close.push_back(spot);
    double prev = spot;
    for (const double s : path) {
      ps.close.push_back(s);
      ps.day_min.push_back(std::min(prev, s));
      ps.day_max.push_back(std::max(prev, s));
      ps.min_first.push_back(0);
      prev = s;
    }
    ps.terminal_variance.push_back(0.0);
  }
  return ps;
}

// Reduces embedding simulation outcomes to single-day paths so the
// quasi-static runner can consume them under exact monitoring.
PathSet adapt_outcomes(const SimulationResult& sim, double spot,
                       const BarrierPair& b) {
  PathSet ps;
  ps.params.spot = spot;
  ps.n_paths = sim.outcomes.size();
  ps.n_steps = 1;
  for (const PathOutcome& o : sim.outcomes) {
    ps.close.push_back(spot);
    ps.close.push_back(o.terminal);
    const double lo = std::min(spot, o.terminal);
    const double hi = std::max(spot, o.terminal);
    ps.day_min.push_back(o.hit_lb ? std::min(lo, b.lb) : lo);
    ps.day_max.push_back(o.hit_ub ? std::max(hi, b.ub) : hi);
    ps.min_first.push_back(o.first == FirstHit::LbFirst ? 1 : 0);
    ps.terminal_variance.push_back(0.0);
  }
  return ps;
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameters and path generation
// ---------------------------------------------------------------------------

TEST_CASE("parameter validation rejects bad inputs") {
  HestonParams p;
  p.spot = -1.0;
  CHECK_THROWS_AS(validate(p), DomainError);
  p = HestonParams{};
  p.correlation = 1.0;
  CHECK_THROWS_AS(validate(p), DomainError);
  p = HestonParams{};
  p.steps_per_year = 0;
  CHECK_THROWS_AS(heston_paths(p, 10, 1), DomainError);
}

TEST_CASE("driftless dynamics: terminal mean equals the spot") {
  HestonParams p;
  p.v0 = 0.04;
  p.long_run_variance = 0.04;
  p.vol_of_vol = 0.5;
  p.steps_per_year = 50;
  p.substeps = 1;
  const PathSet ps = heston_paths(p, 100000, 3);
  std::vector<double> terminals(ps.n_paths);
  for (std::size_t i = 0; i < ps.n_paths; ++i) terminals[i] = ps.terminal(i);
  const double mean =
      std::accumulate(terminals.begin(), terminals.end(), 0.0) /
      static_cast<double>(ps.n_paths);
  const double se = sample_std(terminals) / std::sqrt(100000.0);
  CHECK(std::fabs(mean - p.spot) <= 3.0 * se);
}

TEST_CASE("zero vol of vol: variance path is the deterministic decay") {
  HestonParams p;
  p.vol_of_vol = 0.0;
  const PathSet ps = heston_paths(p, 8, 5);
  const double target =
      p.long_run_variance +
      (p.v0 - p.long_run_variance) *
          std::exp(-p.mean_reversion * p.horizon);
  for (std::size_t i = 0; i < ps.n_paths; ++i)
    CHECK(ps.terminal_variance[i] ==
          doctest::Approx(target).epsilon(1e-3));

  // no mean reversion either: the variance never moves at all
  p.mean_reversion = 0.0;
  const PathSet flat = heston_paths(p, 4, 5);
  for (std::size_t i = 0; i < flat.n_paths; ++i)
    CHECK(flat.terminal_variance[i] == p.v0);
}

TEST_CASE("same seed reproduces paths bit for bit, offsets concatenate") {
  HestonParams p;
  p.steps_per_year = 30;
  p.substeps = 2;
  const PathSet a = heston_paths(p, 50, 42);
  const PathSet b = heston_paths(p, 50, 42);
  CHECK(a.close == b.close);
  CHECK(a.day_min == b.day_min);
  CHECK(a.terminal_variance == b.terminal_variance);

  const PathSet c = heston_paths(p, 50, 43);
  CHECK(a.close != c.close);

  // chunked generation concatenates exactly
  const PathSet head = heston_paths(p, 20, 42, 0);
  const PathSet tail = heston_paths(p, 30, 42, 20);
  std::vector<double> glued(head.close);
  glued.insert(glued.end(), tail.close.begin(), tail.close.end());
  CHECK(glued == a.close);
}

// ---------------------------------------------------------------------------
// Monitoring semantics
// ---------------------------------------------------------------------------

TEST_CASE("daily monitoring sees closes, exact monitoring sees extremes") {
  const BarrierPair b{90.0, 110.0};
  // path closes stay inside the corridor but dip through lb intraday
  PathSet ps = synthetic_paths(100.0, {{95.0, 96.0, 100.0}});
  ps.day_min[1] = 89.0;  // intraday spike through the lower barrier

  const PathOutcome daily = path_outcome(ps, 0, b, Monitoring::Daily);
  CHECK_FALSE(daily.hit_lb);
  CHECK_FALSE(daily.hit_ub);
  CHECK(daily.first == FirstHit::Neither);

  const PathOutcome exact = path_outcome(ps, 0, b, Monitoring::Exact);
  CHECK(exact.hit_lb);
  CHECK_FALSE(exact.hit_ub);
  CHECK(exact.first == FirstHit::LbFirst);
  CHECK(std::isnan(exact.exec_lb));  // exact mode trades at the barrier
}

TEST_CASE("daily detection executes at the detection close") {
  const BarrierPair b{90.0, 110.0};
  const PathSet ps = synthetic_paths(100.0, {{112.0, 88.0, 100.0}});
  const PathOutcome o = path_outcome(ps, 0, b, Monitoring::Daily);
  CHECK(o.hit_lb);
  CHECK(o.hit_ub);
  CHECK(o.first == FirstHit::UbFirst);
  CHECK(o.exec_ub == doctest::Approx(112.0));
  CHECK(o.exec_lb == doctest::Approx(88.0));
}

TEST_CASE("same-day double crossing is ordered by the sub-day extreme flag") {
  const BarrierPair b{90.0, 110.0};
  PathSet ps = synthetic_paths(100.0, {{100.0}});
  ps.day_min[0] = 85.0;
  ps.day_max[0] = 115.0;
  ps.min_first[0] = 1;
  CHECK(path_outcome(ps, 0, b, Monitoring::Exact).first == FirstHit::LbFirst);
  ps.min_first[0] = 0;
  CHECK(path_outcome(ps, 0, b, Monitoring::Exact).first == FirstHit::UbFirst);
}

// ---------------------------------------------------------------------------
// Heston call curve
// ---------------------------------------------------------------------------

TEST_CASE("heston curve: deep ITM limit, arbitrage cleanliness, mean") {
  const HestonMarket& m = heston_market();
  CHECK(m.curve.value(0.0) == doctest::Approx(100.0).epsilon(5e-3));
  CHECK(m.curve.value(1e-6 * 100.0) > m.curve.value(50.0));
  CHECK(m.law.total_mean() == doctest::Approx(100.0).epsilon(5e-3));

  std::vector<Quote> quotes;
  for (double k = 0.0; k <= 400.0; k += 10.0)
    quotes.push_back({k, m.curve.value(k)});
  CHECK(check_no_arbitrage(quotes).clean());
}

TEST_CASE("heston curve prices match Monte Carlo within three standard errors") {
  const HestonMarket& m = heston_market();
  const PathSet& ps = paper_paths();
  for (const double k : {60.0, 80.0, 90.0, 100.0, 110.0, 120.0, 140.0, 170.0,
                         200.0, 250.0}) {
    std::vector<double> pay(ps.n_paths);
    for (std::size_t i = 0; i < ps.n_paths; ++i)
      pay[i] = std::max(ps.terminal(i) - k, 0.0);
    const double mc = std::accumulate(pay.begin(), pay.end(), 0.0) /
                      static_cast<double>(ps.n_paths);
    const double se = sample_std(pay) / std::sqrt(static_cast<double>(ps.n_paths));
    CHECK(std::fabs(mc - m.curve.value(k)) <= 3.0 * se);
  }
}

TEST_CASE("heston curve rejects bad knot meshes") {
  CHECK_THROWS_AS(heston_call_curve(paper_params(), {0.0, 100.0}), DomainError);
  CHECK_THROWS_AS(heston_call_curve(paper_params(), {1.0, 2.0, 3.0}),
                  DomainError);
  CHECK_THROWS_AS(heston_call_curve(paper_params(), {0.0, 2.0, 2.0}),
                  DomainError);
}

TEST_CASE("implied vol round-trips a lognormal curve") {
  const CallCurve c = make_lognormal_curve(100.0, 0.3);
  for (const double k : {70.0, 100.0, 140.0})
    CHECK(implied_vol(c, k, 1.0) == doctest::Approx(0.3).epsilon(1e-6));
  CHECK_THROWS_AS(implied_vol(c, 1e-9, 1.0), DomainError);  // at intrinsic
}

// ---------------------------------------------------------------------------
// Ledgers and utility
// ---------------------------------------------------------------------------

TEST_CASE("ledger mean adjustment and the zero-error utility") {
  const Ledger l = make_ledger({1.0, 2.0, 3.0, 6.0});
  CHECK(l.mean == doctest::Approx(3.0));
  const double adj_mean =
      std::accumulate(l.adjusted.begin(), l.adjusted.end(), 0.0) / 4.0;
  CHECK(std::fabs(adj_mean) <= 1e-12);
  CHECK(std::is_sorted(l.cdf.begin(), l.cdf.end()));

  const Ledger flat = make_ledger(std::vector<double>(100, 0.7));
  CHECK(flat.utility == doctest::Approx(0.0));
}

TEST_CASE("utility report flags the better ledger with a sane bootstrap CI") {
  std::vector<double> tight, wide;
  for (int i = 0; i < 400; ++i) {
    const double u = (i % 40) / 39.0 - 0.5;
    tight.push_back(0.1 * u);
    wide.push_back(2.0 * u);
  }
  const auto rows = utility_report(
      {{"tight", make_ledger(tight)}, {"wide", make_ledger(wide)}});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].preferred);
  CHECK_FALSE(rows[1].preferred);
  CHECK(rows[0].utility > rows[1].utility);
  for (const auto& r : rows) {
    CHECK(r.ci_lo <= r.utility);
    CHECK(r.ci_hi >= r.utility);
  }
}

// ---------------------------------------------------------------------------
// Quasi-static execution
// ---------------------------------------------------------------------------

TEST_CASE("superhedge floor: exact monitoring, pre-cost errors never drop "
          "below the premium difference") {
  const HestonMarket& m = heston_market();
  const BarrierPair b{83.0, 117.0};
  const PriceBound up = upper_bound(m.law, m.curve, b);
  const CostSpec zero{0.0, 0.0};
  const Ledger l = run_quasi_static(up.blueprint, m.curve, up.value,
                                    paper_paths(), zero, Monitoring::Exact,
                                    true);
  const double floor = up.value - static_cost(up.blueprint, m.curve);
  std::size_t violations = 0;
  for (const double e : l.errors)
    if (e < floor - 1e-9) ++violations;
  CHECK(violations == 0);
  // the floor is attained: paths that touch both barriers with no slack
  CHECK(*std::min_element(l.errors.begin(), l.errors.end()) ==
        doctest::Approx(floor).epsilon(1e-9));
}

TEST_CASE("extremal-model paths replicate the payoff exactly at zero cost") {
  const CallCurve c = make_uniform_terminal_curve(0.0, 200.0);
  const ImpliedLaw law = implied_law(c);
  const BarrierPair b{83.0, 117.0};
  const CostSpec zero{0.0, 0.0};

  const PriceBound up = upper_bound(law, c, b);
  const ExtremalModel um = build_upper_extremal(law, b, classify_upper(law, b));
  const PathSet upper_ps = adapt_outcomes(simulate(um, 2000, 1e-5, 5), um.spot, b);
  const Ledger ul = run_quasi_static(up.blueprint, c, up.value, upper_ps, zero,
                                     Monitoring::Exact, true);
  for (const double e : ul.errors) CHECK(std::fabs(e) <= 1e-9);

  const PriceBound lo = lower_bound(law, c, b);
  const ExtremalModel lm = build_lower_extremal(law, b, classify_lower(law, b));
  const PathSet lower_ps = adapt_outcomes(simulate(lm, 2000, 1e-5, 5), lm.spot, b);
  const Ledger ll = run_quasi_static(lo.blueprint, c, lo.value, lower_ps, zero,
                                     Monitoring::Exact, false);
  for (const double e : ll.errors) CHECK(std::fabs(e) <= 1e-9);
}

TEST_CASE("seed determinism carries through to identical ledgers") {
  const HestonMarket& m = heston_market();
  const BarrierPair b{83.0, 117.0};
  const PriceBound up = upper_bound(m.law, m.curve, b);
  const CostSpec costs;
  HestonParams p;
  p.steps_per_year = 60;
  p.substeps = 2;
  const PathSet a = heston_paths(p, 200, 9);
  const PathSet c = heston_paths(p, 200, 9);
  const Ledger la = run_quasi_static(up.blueprint, m.curve, up.value, a, costs,
                                     Monitoring::Daily, true);
  const Ledger lc = run_quasi_static(up.blueprint, m.curve, up.value, c, costs,
                                     Monitoring::Daily, true);
  CHECK(la.errors == lc.errors);
  CHECK(la.utility == lc.utility);
}

// ---------------------------------------------------------------------------
// Bracketing
// ---------------------------------------------------------------------------

TEST_CASE("Monte Carlo touch probability lies between the model-free bounds") {
  const HestonMarket& m = heston_market();
  const PathSet& ps = paper_paths();
  const double n = static_cast<double>(ps.n_paths);
  for (const BarrierPair b : {BarrierPair{83.0, 117.0}, BarrierPair{95.0, 105.0}}) {
    const double upper = upper_bound(m.law, m.curve, b).value;
    const double lower = lower_bound(m.law, m.curve, b).value;
    REQUIRE(lower <= upper);
    const double mc = touch_probability(ps, b, Monitoring::Exact);
    const double se = std::sqrt(std::max(mc * (1.0 - mc), 1e-12) / n);
    CHECK(mc >= lower - 3.0 * se);
    CHECK(mc <= upper + 3.0 * se);
  }
}

// ---------------------------------------------------------------------------
// Delta/vega benchmark
// ---------------------------------------------------------------------------

TEST_CASE("delta/vega self-consistency: in its own model at zero cost the "
          "errors concentrate near zero") {
  HestonParams p;
  p.v0 = 0.0625;
  p.long_run_variance = 0.0625;
  p.mean_reversion = 0.0;
  p.vol_of_vol = 0.0;  // exactly the flat-vol world the grid assumes
  const PathSet ps = heston_paths(p, 10000, 11);
  DeltaVegaConfig cfg;
  cfg.barriers = {85.0, 115.0};
  cfg.implied_vol = 0.25;
  cfg.premium = touch_probability(ps, cfg.barriers, Monitoring::Daily);
  const Ledger l = run_delta_vega(ps, CostSpec{0.0, 0.0}, cfg);
  CHECK(std::fabs(l.mean) < 0.01);
  CHECK(sample_std(l.adjusted) < 0.05);
}

TEST_CASE("after the option knocks the book is flat: the error ignores the "
          "rest of the path") {
  // two paths that knock out on day 2 and then diverge wildly
  std::vector<double> base = {115.0, 85.0};
  std::vector<double> calm = base, wild = base;
  for (int d = 2; d < 40; ++d) {
    calm.push_back(100.0);
    wild.push_back(d % 2 ? 140.0 : 70.0);
  }
  PathSet ps = synthetic_paths(100.0, {calm, wild});
  ps.params.horizon = 40.0 / 365.0;
  DeltaVegaConfig cfg;
  cfg.barriers = {90.0, 110.0};
  cfg.implied_vol = 0.3;
  cfg.premium = 0.5;
  const Ledger l = run_delta_vega(ps, CostSpec{0.0, 0.0}, cfg);
  CHECK(l.errors[0] == doctest::Approx(l.errors[1]).epsilon(1e-12));
}

TEST_CASE("raising cost rates lowers mean utility") {
  HestonParams p;
  const PathSet ps = heston_paths(p, 500, 13);
  const HestonMarket& m = heston_market();
  DeltaVegaConfig cfg;
  cfg.barriers = {83.0, 117.0};
  cfg.implied_vol = m.atm_vol;
  cfg.premium = touch_probability(ps, cfg.barriers, Monitoring::Daily);
  const Ledger free = run_delta_vega(ps, CostSpec{0.0, 0.0}, cfg);
  const Ledger paper = run_delta_vega(ps, CostSpec{0.005, 0.01}, cfg);
  const Ledger steep = run_delta_vega(ps, CostSpec{0.01, 0.02}, cfg);
  CHECK(free.mean > paper.mean);
  CHECK(paper.mean > steep.mean);
  CHECK(free.utility > paper.utility);
  CHECK(paper.utility > steep.utility);
}

TEST_CASE("delta/vega rejects a non-positive valuation vol") {
  DeltaVegaConfig cfg;
  cfg.barriers = {90.0, 110.0};
  cfg.implied_vol = 0.0;
  const PathSet ps = synthetic_paths(100.0, {{100.0}});
  CHECK_THROWS_AS(run_delta_vega(ps, CostSpec{}, cfg), DomainError);
}

// ---------------------------------------------------------------------------
// Type map
// ---------------------------------------------------------------------------

TEST_CASE("type map on a symmetric law mirrors labels across the spot") {
  const CallCurve c = make_uniform_terminal_curve(0.0, 200.0);
  const ImpliedLaw law = implied_law(c);
  const std::vector<double> lbs = {20.0, 40.0, 60.0, 80.0, 95.0};
  const std::vector<double> ubs = {105.0, 120.0, 140.0, 160.0, 180.0};
  const auto grid = type_map(law, lbs, ubs);
  REQUIRE(grid.size() == lbs.size() * ubs.size());

  const auto find = [&](double lb, double ub) -> const TypeMapEntry& {
    for (const auto& e : grid)
      if (e.lb == lb && e.ub == ub) return e;
    REQUIRE(false);
    return grid.front();
  };
  // reflection S -> 200 - S swaps the barrier roles: the one-sided upper
  // families trade places (I <-> II) and so do the one-sided lower
  // families (II <-> III); the symmetric and trivial families are fixed
  const auto mirror_upper = [](CaseLabel l) {
    return l == CaseLabel::I ? CaseLabel::II
           : l == CaseLabel::II ? CaseLabel::I
                                : l;
  };
  const auto mirror_lower = [](CaseLabel l) {
    return l == CaseLabel::II ? CaseLabel::III
           : l == CaseLabel::III ? CaseLabel::II
                                 : l;
  };
  for (const auto& e : grid) {
    const TypeMapEntry& r = find(200.0 - e.ub, 200.0 - e.lb);
    CHECK(r.upper_label == mirror_upper(e.upper_label));
    CHECK(r.lower_label == mirror_lower(e.lower_label));
  }

  // wide barriers admit only the trivial zero subhedge
  CHECK(find(20.0, 180.0).lower_label == CaseLabel::IV);
  // several distinct families appear across the grid
  bool any_I = false, any_III = false;
  for (const auto& e : grid) {
    any_I = any_I || e.upper_label == CaseLabel::I;
    any_III = any_III || e.upper_label == CaseLabel::III;
  }
  CHECK(any_I);
  CHECK(any_III);
}

TEST_CASE("type map skips pairs that do not flank the spot") {
  const CallCurve c = make_uniform_terminal_curve(0.0, 200.0);
  const ImpliedLaw law = implied_law(c);
  const auto grid = type_map(law, {50.0, 150.0}, {30.0, 170.0});
  REQUIRE(grid.size() == 1);  // only 50/170 flanks the spot
  CHECK(grid.front().lb == 50.0);
  CHECK(grid.front().ub == 170.0);
}

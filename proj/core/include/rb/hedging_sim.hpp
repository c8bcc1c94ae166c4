#pragma once
// Desk-scale hedging simulation: Heston path generation with sub-daily
// extreme tracking, semi-analytic Heston call curves, execution of
// quasi-static barrier hedges under transaction costs with daily or exact
// barrier monitoring, a delta/vega benchmark hedger on a Black-Scholes
// finite-difference grid with knock-state tracking, exponential-utility
// comparison of hedging-error ledgers, and barrier-grid hedge-type maps.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rb/bounds.hpp"

namespace rb {

struct QuadratureFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridUnstable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Model and cost parameters
// ---------------------------------------------------------------------------

struct HestonParams {
  double spot = 100.0;
  double v0 = 0.5;             // initial variance
  double mean_reversion = 0.6;
  double long_run_variance = 1.0;
  double vol_of_vol = 1.3;
  double correlation = 0.15;
  double horizon = 1.0;        // years
  int steps_per_year = 365;    // daily observation grid
  int substeps = 16;           // fine sub-grid per day for exact monitoring
};

// Throws DomainError on non-positive sizes, negative variances or a
// correlation outside (-1, 1).
void validate(const HestonParams& params);

struct CostSpec {
  double underlying_rate = 0.005;  // proportional, on traded notional
  double option_rate = 0.01;       // proportional, on traded premium
};

// ---------------------------------------------------------------------------
// Paths
// ---------------------------------------------------------------------------

// A batch of simulated paths observed on the daily grid, with per-day
// extremes taken over the fine sub-grid. Full-truncation Euler in the
// variance, exponential Euler in the asset (so each path is a martingale in
// expectation step by step). Layout is row-major per path.
struct PathSet {
  HestonParams params;
  std::size_t n_paths = 0;
  std::size_t n_steps = 0;                 // daily steps = steps_per_year * T
  std::vector<double> close;               // (n_steps + 1) per path, [0] = S0
  std::vector<double> day_min;             // n_steps per path, sub-grid min
  std::vector<double> day_max;             // n_steps per path, sub-grid max
  std::vector<std::uint8_t> min_first;     // day's min attained before its max
  std::vector<double> terminal_variance;   // one per path

  double close_at(std::size_t path, std::size_t day) const {
    return close[path * (n_steps + 1) + day];
  }
  double terminal(std::size_t path) const { return close_at(path, n_steps); }
};

// Deterministic given (seed, path_offset): path i derives its generator
// from seed and the global index path_offset + i, so large runs can be
// produced in memory-bounded chunks that concatenate exactly.
PathSet heston_paths(const HestonParams& params, std::size_t n_paths,
                     std::uint64_t seed, std::size_t path_offset = 0);

enum class Monitoring { Daily, Exact };

// Reduces path i to what a hedge sees for the given barriers. Daily mode
// detects touches on closes and executes triggered forwards at the
// detection close; exact mode detects on the sub-grid extremes and
// executes at the barrier level. When both barriers are first crossed
// within the same day in exact mode, the day's min-before-max flag decides
// the order (sub-day resolution).
PathOutcome path_outcome(const PathSet& paths, std::size_t path,
                         const BarrierPair& b, Monitoring monitoring);

// Monte Carlo double-touch probability over the path set.
double touch_probability(const PathSet& paths, const BarrierPair& b,
                         Monitoring monitoring);

// ---------------------------------------------------------------------------
// Heston call curve
// ---------------------------------------------------------------------------

// Semi-analytic call curve: the terminal density is evaluated at each knot
// by characteristic-function quadrature and wrapped as a piecewise-linear
// density curve, so downstream mass/moment operations stay exact. Knots
// must be increasing and start at 0; the last knot should be deep enough
// in the tail that the truncated mass is negligible. QuadratureFailure on
// non-finite or materially negative density values.
CallCurve heston_call_curve(const HestonParams& params,
                            const std::vector<double>& knots);

// Convenience mesh: n equal steps on [0, k_max].
std::vector<double> uniform_knots(double k_max, std::size_t n);

// Default knot mesh for heston_call_curve: dense linear spacing through the
// bulk of the distribution, then geometric spacing deep into the tail
// (Heston tails are close to power laws, so the far tail still carries
// visible mean).
std::vector<double> heston_knots(const HestonParams& params);

// Black-Scholes implied volatility of the curve's call at strike k
// (zero rates, maturity = horizon); used for the delta/vega benchmark.
double implied_vol(const CallCurve& curve, double k, double horizon);

// ---------------------------------------------------------------------------
// Ledgers and utility
// ---------------------------------------------------------------------------

struct Ledger {
  std::vector<double> errors;    // raw per-path hedging error
  double mean = 0.0;
  std::vector<double> adjusted;  // mean-adjusted errors, path order
  std::vector<double> cdf;       // sorted copy of adjusted (CDF sample)
  double utility = 0.0;          // E[1 - exp(-adjusted)]
};

Ledger make_ledger(std::vector<double> errors);

struct UtilityRow {
  std::string name;
  double utility = 0.0;
  double ci_lo = 0.0;   // bootstrap 5th percentile
  double ci_hi = 0.0;   // bootstrap 95th percentile
  bool preferred = false;
};

// Exponential utility per ledger with a 1000-resample bootstrap interval;
// the highest-utility ledger is flagged preferred.
std::vector<UtilityRow> utility_report(
    const std::vector<std::pair<std::string, Ledger>>& ledgers,
    std::uint64_t seed = 1);

// ---------------------------------------------------------------------------
// Hedge execution
// ---------------------------------------------------------------------------

// Runs the quasi-static hedge over every path. Short position: the exotic
// is sold at `premium` and the blueprint is bought; per-path error =
// premium - static cost + (hedge payoff - touch indicator) - transaction
// costs. Long position mirrors the signs (exotic bought, blueprint sold).
// Option legs are costed once at inception on their curve premium;
// triggered forwards are costed on the executed notional.
Ledger run_quasi_static(const HedgeBlueprint& blueprint,
                        const CallCurve& curve, double premium,
                        const PathSet& paths, const CostSpec& costs,
                        Monitoring monitoring, bool short_position = true);

struct DeltaVegaConfig {
  BarrierPair barriers;
  double premium = 0.0;        // price at which the exotic is dealt
  bool short_position = true;
  double implied_vol = 0.0;    // flat vol for the valuation grid
  double vanilla_strike = 0.0; // vega instrument; defaults to the spot
  int space_nodes = 400;
  int time_nodes = 400;
};

// Daily-rebalanced benchmark: delta from a Black-Scholes finite-difference
// double-touch price with four knock states, neutralised with the
// underlying; vega neutralised with the at-the-money vanilla, also daily.
// All trades carry proportional costs. GridUnstable if the grid solution
// leaves [0, 1] materially.
Ledger run_delta_vega(const PathSet& paths, const CostSpec& costs,
                      const DeltaVegaConfig& config);

// ---------------------------------------------------------------------------
// Type map
// ---------------------------------------------------------------------------

struct TypeMapEntry {
  double lb = 0.0;
  double ub = 0.0;
  CaseLabel upper_label = CaseLabel::I;
  CaseLabel lower_label = CaseLabel::I;  // IV = trivial zero subhedge
};

// Upper/lower case labels over the barrier grid; pairs that do not flank
// the spot are skipped.
std::vector<TypeMapEntry> type_map(const ImpliedLaw& law,
                                   const std::vector<double>& lbs,
                                   const std::vector<double>& ubs);

}  // namespace rb

#include "rb/hedging_sim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <exception>
#include <random>
#include <thread>

#include "rb/numerics.hpp"

namespace rb {

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

int worker_threads() {
  if (const char* env = std::getenv("ROBUST_BARRIERS_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

void validate(const HestonParams& p) {
  if (!(p.spot > 0.0)) throw DomainError("heston: spot must be positive");
  if (!(p.v0 >= 0.0)) throw DomainError("heston: v0 must be non-negative");
  if (!(p.mean_reversion >= 0.0))
    throw DomainError("heston: mean reversion must be non-negative");
  if (!(p.long_run_variance >= 0.0))
    throw DomainError("heston: long-run variance must be non-negative");
  if (!(p.vol_of_vol >= 0.0))
    throw DomainError("heston: vol of vol must be non-negative");
  if (!(p.correlation > -1.0 && p.correlation < 1.0))
    throw DomainError("heston: correlation must lie in (-1, 1)");
  if (!(p.horizon > 0.0)) throw DomainError("heston: horizon must be positive");
  if (p.steps_per_year <= 0 || p.substeps <= 0)
    throw DomainError("heston: grid sizes must be positive");
}

// ---------------------------------------------------------------------------
// Path generation
// ---------------------------------------------------------------------------

PathSet heston_paths(const HestonParams& params, std::size_t n_paths,
                     std::uint64_t seed, std::size_t path_offset) {
  validate(params);
  PathSet out;
  out.params = params;
  out.n_paths = n_paths;
  out.n_steps = static_cast<std::size_t>(
      std::lround(params.steps_per_year * params.horizon));
  if (out.n_steps == 0) throw DomainError("heston: horizon below one step");
  const std::size_t n = out.n_steps;
  out.close.assign(n_paths * (n + 1), 0.0);
  out.day_min.assign(n_paths * n, 0.0);
  out.day_max.assign(n_paths * n, 0.0);
  out.min_first.assign(n_paths * n, 0);
  out.terminal_variance.assign(n_paths, 0.0);

  const double dt =
      params.horizon / (static_cast<double>(n) * params.substeps);
  const double sq_dt = std::sqrt(dt);
  const double rho = params.correlation;
  const double rho_bar = std::sqrt(1.0 - rho * rho);

  const auto run_one = [&](std::size_t i) {
    std::mt19937_64 rng(mix64(seed ^ mix64(path_offset + i + 1)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    double s = params.spot;
    double v = params.v0;
    out.close[i * (n + 1)] = s;
    for (std::size_t d = 0; d < n; ++d) {
      double lo = s, hi = s;
      std::size_t lo_at = 0, hi_at = 0;
      for (int k = 0; k < params.substeps; ++k) {
        const double z1 = gauss(rng);
        const double z2 = gauss(rng);
        const double vp = std::max(v, 0.0);
        const double dw_s = sq_dt * z1;
        const double dw_v = sq_dt * (rho * z1 + rho_bar * z2);
        // exponential Euler in the asset keeps it positive and an exact
        // per-step martingale; full truncation in the variance
        s *= std::exp(std::sqrt(vp) * dw_s - 0.5 * vp * dt);
        v += params.mean_reversion * (params.long_run_variance - vp) * dt +
             params.vol_of_vol * std::sqrt(vp) * dw_v;
        const std::size_t at = static_cast<std::size_t>(k) + 1;
        if (s < lo) { lo = s; lo_at = at; }
        if (s > hi) { hi = s; hi_at = at; }
      }
      out.close[i * (n + 1) + d + 1] = s;
      out.day_min[i * n + d] = lo;
      out.day_max[i * n + d] = hi;
      out.min_first[i * n + d] = lo_at <= hi_at ? 1 : 0;
    }
    out.terminal_variance[i] = v;
  };

  const int n_threads =
      std::max(1, std::min<int>(worker_threads(),
                                static_cast<int>(n_paths / 64 + 1)));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < n_paths; ++i) run_one(i);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(n_threads);
  for (int t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n_paths; i += n_threads) run_one(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

PathOutcome path_outcome(const PathSet& paths, std::size_t path,
                         const BarrierPair& b, Monitoring monitoring) {
  const std::size_t n = paths.n_steps;
  PathOutcome o;
  o.terminal = paths.terminal(path);
  std::size_t lb_day = n + 1, ub_day = n + 1;
  bool lb_first_on_tie = true;
  if (monitoring == Monitoring::Daily) {
    for (std::size_t d = 1; d <= n; ++d) {
      const double s = paths.close_at(path, d);
      if (lb_day > n && s <= b.lb) {
        lb_day = d;
        o.exec_lb = s;  // forward executes at the detection close
      }
      if (ub_day > n && s >= b.ub) {
        ub_day = d;
        o.exec_ub = s;
      }
      if (lb_day <= n && ub_day <= n) break;
    }
  } else {
    for (std::size_t d = 0; d < n; ++d) {
      if (lb_day > n && paths.day_min[path * n + d] <= b.lb) lb_day = d + 1;
      if (ub_day > n && paths.day_max[path * n + d] >= b.ub) ub_day = d + 1;
      if (lb_day <= n && ub_day <= n) break;
    }
    if (lb_day == ub_day && lb_day <= n)
      // both first crossed the same day; sub-day extreme order decides
      lb_first_on_tie = paths.min_first[path * n + (lb_day - 1)] != 0;
    // exec prices stay NaN: exact mode trades at the barrier level
  }
  o.hit_lb = lb_day <= n;
  o.hit_ub = ub_day <= n;
  if (o.hit_lb && o.hit_ub)
    o.first = (lb_day < ub_day || (lb_day == ub_day && lb_first_on_tie))
                  ? FirstHit::LbFirst
                  : FirstHit::UbFirst;
  else if (o.hit_lb)
    o.first = FirstHit::LbFirst;
  else if (o.hit_ub)
    o.first = FirstHit::UbFirst;
  return o;
}

double touch_probability(const PathSet& paths, const BarrierPair& b,
                         Monitoring monitoring) {
  double acc = 0.0;
  for (std::size_t i = 0; i < paths.n_paths; ++i)
    acc += double_touch_indicator(path_outcome(paths, i, b, monitoring));
  return paths.n_paths == 0 ? 0.0 : acc / static_cast<double>(paths.n_paths);
}

// ---------------------------------------------------------------------------
// Heston call curve
// ---------------------------------------------------------------------------

namespace {

// Characteristic function of log(S_T / S_0) under zero rates, in the
// branch-stable formulation (the ratio g below keeps |g| <= 1 so the
// complex logarithm never crosses a cut over the integration range).
std::complex<double> heston_cf(const HestonParams& p, double u) {
  const std::complex<double> iu(0.0, u);
  const double t = p.horizon;
  if (p.vol_of_vol == 0.0) {
    // deterministic variance path: Gaussian log-return
    const double k = p.mean_reversion;
    const double w =
        k > 0.0 ? p.long_run_variance * t +
                      (p.v0 - p.long_run_variance) * (1.0 - std::exp(-k * t)) / k
                : p.v0 * t;
    return std::exp(-0.5 * w * (u * u + iu));
  }
  const double xi = p.vol_of_vol;
  const std::complex<double> beta =
      p.mean_reversion - std::complex<double>(0.0, p.correlation * xi * u);
  const std::complex<double> d =
      std::sqrt(beta * beta + xi * xi * (u * u + iu));
  const std::complex<double> g = (beta - d) / (beta + d);
  const std::complex<double> edt = std::exp(-d * t);
  const std::complex<double> log_term =
      std::log((1.0 - g * edt) / (1.0 - g));
  const std::complex<double> big_c =
      p.mean_reversion * p.long_run_variance / (xi * xi) *
      ((beta - d) * t - 2.0 * log_term);
  const std::complex<double> big_d =
      (beta - d) / (xi * xi) * (1.0 - edt) / (1.0 - g * edt);
  return std::exp(big_c + big_d * p.v0);
}

// Truncation point for the inversion integral: where the transform has
// decayed below rounding relevance.
double cf_truncation(const HestonParams& p) {
  double u = 64.0;
  for (int i = 0; i < 24; ++i) {
    if (std::abs(heston_cf(p, u)) < 1e-13) return u;
    u *= 2.0;
  }
  throw QuadratureFailure("heston curve: transform decays too slowly");
}

}  // namespace

std::vector<double> uniform_knots(double k_max, std::size_t n) {
  if (!(k_max > 0.0) || n < 2)
    throw DomainError("uniform_knots: need k_max > 0 and at least two steps");
  std::vector<double> knots(n + 1);
  for (std::size_t i = 0; i <= n; ++i)
    knots[i] = k_max * static_cast<double>(i) / static_cast<double>(n);
  return knots;
}

std::vector<double> heston_knots(const HestonParams& params) {
  validate(params);
  const double s0 = params.spot;
  std::vector<double> knots;
  const double step = s0 / 200.0;
  for (double k = 0.0; k <= 6.0 * s0 + 0.5 * step; k += step) knots.push_back(k);
  for (double k = knots.back() * 1.02; k < 300.0 * s0; k *= 1.02)
    knots.push_back(k);
  knots.push_back(300.0 * s0);
  return knots;
}

CallCurve heston_call_curve(const HestonParams& params,
                            const std::vector<double>& knots) {
  validate(params);
  if (knots.size() < 3 || knots.front() != 0.0)
    throw DomainError("heston curve: knots must start at 0 with >= 3 points");
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (!(knots[i] > knots[i - 1]))
      throw DomainError("heston curve: knots must be increasing");

  const double u_max = cf_truncation(params);
  const double s0 = params.spot;
  // terminal density by Fourier inversion of the log-return transform
  const auto density = [&](double strike) -> double {
    if (strike <= 0.0) return 0.0;
    const double k = std::log(strike / s0);
    const double fx =
        adaptive_simpson(
            [&](double u) {
              return std::real(std::exp(std::complex<double>(0.0, -u * k)) *
                               heston_cf(params, u));
            },
            0.0, u_max, 1e-10) /
        3.14159265358979323846;
    return fx / strike;
  };

  std::vector<double> dens(knots.size());
  for (std::size_t i = 0; i < knots.size(); ++i) {
    const double f = density(knots[i]);
    if (!std::isfinite(f) || f < -1e-6)
      throw QuadratureFailure("heston curve: bad density value at strike " +
                              std::to_string(knots[i]));
    dens[i] = std::max(f, 0.0);
  }
  return make_tabulated_density_curve(knots, dens, CurveFamily::HestonImplied);
}

// ---------------------------------------------------------------------------
// Black-Scholes helpers (zero rates)
// ---------------------------------------------------------------------------

namespace {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
}

double bs_call(double s, double k, double sigma, double tau) {
  if (tau <= 0.0 || sigma <= 0.0) return std::max(s - k, 0.0);
  const double sd = sigma * std::sqrt(tau);
  const double d1 = std::log(s / k) / sd + 0.5 * sd;
  return s * norm_cdf(d1) - k * norm_cdf(d1 - sd);
}

double bs_delta(double s, double k, double sigma, double tau) {
  if (tau <= 0.0 || sigma <= 0.0) return s >= k ? 1.0 : 0.0;
  const double sd = sigma * std::sqrt(tau);
  return norm_cdf(std::log(s / k) / sd + 0.5 * sd);
}

double bs_vega(double s, double k, double sigma, double tau) {
  if (tau <= 0.0 || sigma <= 0.0) return 0.0;
  const double sd = sigma * std::sqrt(tau);
  return s * norm_pdf(std::log(s / k) / sd + 0.5 * sd) * std::sqrt(tau);
}

}  // namespace

double implied_vol(const CallCurve& curve, double k, double horizon) {
  const double target = curve.value(k);
  const double intrinsic = std::max(curve.spot - k, 0.0);
  if (target <= intrinsic + 1e-14)
    throw DomainError("implied_vol: price at intrinsic value");
  return bisect(
      [&](double sigma) { return bs_call(curve.spot, k, sigma, horizon) - target; },
      1e-6, 10.0, 1e-10);
}

// ---------------------------------------------------------------------------
// Ledgers and utility
// ---------------------------------------------------------------------------

Ledger make_ledger(std::vector<double> errors) {
  Ledger l;
  l.errors = std::move(errors);
  if (l.errors.empty()) return l;
  double acc = 0.0;
  for (const double e : l.errors) acc += e;
  l.mean = acc / static_cast<double>(l.errors.size());
  l.adjusted.reserve(l.errors.size());
  double util = 0.0;
  for (const double e : l.errors) {
    const double a = e - l.mean;
    l.adjusted.push_back(a);
    util += 1.0 - std::exp(-a);
  }
  l.utility = util / static_cast<double>(l.errors.size());
  l.cdf = l.adjusted;
  std::sort(l.cdf.begin(), l.cdf.end());
  return l;
}

std::vector<UtilityRow> utility_report(
    const std::vector<std::pair<std::string, Ledger>>& ledgers,
    std::uint64_t seed) {
  constexpr int kResamples = 1000;
  std::vector<UtilityRow> rows;
  rows.reserve(ledgers.size());
  for (const auto& [name, ledger] : ledgers) {
    UtilityRow row;
    row.name = name;
    row.utility = ledger.utility;
    const std::size_t n = ledger.errors.size();
    if (n > 0) {
      std::mt19937_64 rng(mix64(seed ^ mix64(rows.size() + 1)));
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      std::vector<double> draw(n);
      std::vector<double> utils(kResamples);
      for (int r = 0; r < kResamples; ++r) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          draw[i] = ledger.errors[pick(rng)];
          mean += draw[i];
        }
        mean /= static_cast<double>(n);
        double util = 0.0;
        for (const double e : draw) util += 1.0 - std::exp(-(e - mean));
        utils[r] = util / static_cast<double>(n);
      }
      std::sort(utils.begin(), utils.end());
      row.ci_lo = utils[kResamples / 20];
      row.ci_hi = utils[kResamples - 1 - kResamples / 20];
    }
    rows.push_back(std::move(row));
  }
  if (!rows.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (rows[i].utility > rows[best].utility) best = i;
    rows[best].preferred = true;
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Quasi-static execution
// ---------------------------------------------------------------------------

namespace {

// Premium paid or received per unit of each option leg; used for the
// proportional option transaction cost.
double leg_unit_price(const CallCurve& curve, const Leg& leg) {
  switch (leg.kind) {
    case Leg::Kind::Call:
      return curve.value(leg.param);
    case Leg::Kind::Put:
      return put_price(curve, leg.param);
    case Leg::Kind::DigitalGeq:
      return digital_price(curve, leg.param, DigitalConvention::Geq);
    case Leg::Kind::DigitalGt:
      return digital_price(curve, leg.param, DigitalConvention::Gt);
    default:
      return 0.0;
  }
}

}  // namespace

Ledger run_quasi_static(const HedgeBlueprint& blueprint,
                        const CallCurve& curve, double premium,
                        const PathSet& paths, const CostSpec& costs,
                        Monitoring monitoring, bool short_position) {
  const double hedge_cost = static_cost(blueprint, curve);
  double inception_costs = 0.0;
  for (const Leg& leg : blueprint.static_legs.legs) {
    if (leg.kind == Leg::Kind::Cash) continue;
    if (leg.kind == Leg::Kind::Forward) {
      // a forward live from inception trades the underlying at the spot
      inception_costs +=
          costs.underlying_rate * std::fabs(leg.qty) * curve.spot;
      continue;
    }
    inception_costs += costs.option_rate * std::fabs(leg.qty) *
                       std::fabs(leg_unit_price(curve, leg));
  }

  const double s = short_position ? 1.0 : -1.0;
  std::vector<double> errors(paths.n_paths);
  for (std::size_t i = 0; i < paths.n_paths; ++i) {
    const PathOutcome o = path_outcome(paths, i, blueprint.barriers, monitoring);
    const double payoff = evaluate_payoff(blueprint, o);
    double trigger_costs = 0.0;
    for (const TriggerLeg& t : blueprint.triggers) {
      if (!event_fired(t.event, o)) continue;
      const bool at_lb = t.strike <= blueprint.barriers.lb;
      double exec = at_lb ? o.exec_lb : o.exec_ub;
      if (std::isnan(exec)) exec = t.strike;  // executed at the barrier
      trigger_costs += costs.underlying_rate * std::fabs(t.qty) * exec;
    }
    errors[i] = s * (premium - double_touch_indicator(o)) +
                (short_position ? 1.0 : -1.0) * (payoff - hedge_cost) -
                inception_costs - trigger_costs;
  }
  return make_ledger(std::move(errors));
}

// ---------------------------------------------------------------------------
// Delta/vega benchmark
// ---------------------------------------------------------------------------

namespace {

// Backward implicit-Euler solve of V_t + sigma^2/2 (V_xx - V_x) = 0 in
// x = log price, Dirichlet boundaries. The implicit scheme is monotone, so
// the solution stays inside the boundary range. Row m holds time t_m =
// m T / n_time; row n_time is the terminal condition (zero).
struct PdeSlab {
  double x_lo = 0.0, x_hi = 0.0;
  int nx = 0, nt = 0;
  double horizon = 0.0;
  std::vector<double> v;  // (nt + 1) * nx

  double at(int m, int i) const { return v[static_cast<std::size_t>(m) * nx + i]; }

  // bilinear interpolation at (x, t); clamps to the domain
  double value(double x, double t) const {
    const double dx = (x_hi - x_lo) / (nx - 1);
    const double dt = horizon / nt;
    double fx = (std::clamp(x, x_lo, x_hi) - x_lo) / dx;
    double ft = std::clamp(t, 0.0, horizon) / dt;
    const int i = std::min(static_cast<int>(fx), nx - 2);
    const int m = std::min(static_cast<int>(ft), nt - 1);
    fx -= i;
    ft -= m;
    const double lo = (1.0 - fx) * at(m, i) + fx * at(m, i + 1);
    const double hi = (1.0 - fx) * at(m + 1, i) + fx * at(m + 1, i + 1);
    return (1.0 - ft) * lo + ft * hi;
  }
};

// left_value/right_value give the Dirichlet data per time index.
PdeSlab solve_slab(double x_lo, double x_hi, int nx, int nt, double horizon,
                   double sigma,
                   const std::function<double(int)>& left_value,
                   const std::function<double(int)>& right_value) {
  PdeSlab slab{x_lo, x_hi, nx, nt, horizon, {}};
  slab.v.assign(static_cast<std::size_t>(nt + 1) * nx, 0.0);
  const double dx = (x_hi - x_lo) / (nx - 1);
  const double dt = horizon / nt;
  const double a = 0.5 * sigma * sigma;
  const double sub = -dt * (a / (dx * dx) + a / (2.0 * dx));
  const double sup = -dt * (a / (dx * dx) - a / (2.0 * dx));
  const double diag = 1.0 + 2.0 * dt * a / (dx * dx);

  std::vector<double> c_star(nx), d_star(nx);
  for (int m = nt - 1; m >= 0; --m) {
    double* cur = &slab.v[static_cast<std::size_t>(m) * nx];
    const double* nxt = &slab.v[static_cast<std::size_t>(m + 1) * nx];
    cur[0] = left_value(m);
    cur[nx - 1] = right_value(m);
    // Thomas solve on the interior
    c_star[1] = sup / diag;
    d_star[1] = (nxt[1] - sub * cur[0]) / diag;
    for (int i = 2; i <= nx - 2; ++i) {
      const double rhs = nxt[i] - (i == nx - 2 ? sup * cur[nx - 1] : 0.0);
      const double denom = diag - sub * c_star[i - 1];
      c_star[i] = sup / denom;
      d_star[i] = (rhs - sub * d_star[i - 1]) / denom;
    }
    cur[nx - 2] = d_star[nx - 2];
    for (int i = nx - 3; i >= 1; --i) cur[i] = d_star[i] - c_star[i] * cur[i + 1];
  }
  for (const double x : slab.v)
    if (!std::isfinite(x) || x < -1e-6 || x > 1.0 + 1e-6)
      throw GridUnstable("delta/vega grid: value outside [0, 1]");
  return slab;
}

// The three live knock states of the double touch under flat volatility.
struct DoubleTouchGrids {
  PdeSlab none;     // neither barrier hit yet; domain [log lb, log ub]
  PdeSlab lb_hit;   // lower hit; pays on reaching ub
  PdeSlab ub_hit;   // upper hit; pays on reaching lb
};

DoubleTouchGrids build_grids(const BarrierPair& b, double sigma,
                             double horizon, int nx, int nt) {
  const double xl = std::log(b.lb);
  const double xu = std::log(b.ub);
  const double wing = 6.0 * sigma * std::sqrt(horizon) + 0.5;
  DoubleTouchGrids g;
  g.lb_hit = solve_slab(xl - wing, xu, nx, nt, horizon, sigma,
                        [](int) { return 0.0; }, [](int) { return 1.0; });
  g.ub_hit = solve_slab(xl, xu + wing, nx, nt, horizon, sigma,
                        [](int) { return 1.0; }, [](int) { return 0.0; });
  const double t_step = horizon / nt;
  g.none = solve_slab(
      xl, xu, nx, nt, horizon, sigma,
      [&, xl, t_step](int m) { return g.lb_hit.value(xl, m * t_step); },
      [&, xu, t_step](int m) { return g.ub_hit.value(xu, m * t_step); });
  return g;
}

enum class KnockState { None, LbHit, UbHit, Both };

double grid_value(const DoubleTouchGrids& g, KnockState st, double x, double t) {
  switch (st) {
    case KnockState::None:
      return g.none.value(x, t);
    case KnockState::LbHit:
      return g.lb_hit.value(x, t);
    case KnockState::UbHit:
      return g.ub_hit.value(x, t);
    case KnockState::Both:
      return 1.0;
  }
  return 1.0;
}

}  // namespace

Ledger run_delta_vega(const PathSet& paths, const CostSpec& costs,
                      const DeltaVegaConfig& config) {
  const HestonParams& p = paths.params;
  const double horizon = p.horizon;
  const double sigma = config.implied_vol;
  if (!(sigma > 0.0)) throw DomainError("delta/vega: implied vol must be positive");
  const double k_van =
      config.vanilla_strike > 0.0 ? config.vanilla_strike : p.spot;
  const BarrierPair& b = config.barriers;

  // value grids at the centre vol and bumped vols for the vega
  const double bump = 0.01;
  const DoubleTouchGrids mid =
      build_grids(b, sigma, horizon, config.space_nodes, config.time_nodes);
  const DoubleTouchGrids up = build_grids(b, sigma + bump, horizon,
                                          config.space_nodes, config.time_nodes);
  const DoubleTouchGrids dn = build_grids(b, sigma - bump, horizon,
                                          config.space_nodes, config.time_nodes);

  const double w = config.short_position ? -1.0 : 1.0;  // exotic book position
  const double dx_fd =
      (std::log(b.ub) - std::log(b.lb)) / (config.space_nodes - 1);
  const std::size_t n = paths.n_steps;
  const double day = horizon / static_cast<double>(n);

  std::vector<double> errors(paths.n_paths);
  for (std::size_t i = 0; i < paths.n_paths; ++i) {
    double cash = -w * config.premium;
    double units = 0.0;    // underlying position
    double vans = 0.0;     // vanilla position
    bool hit_lb = false, hit_ub = false;
    // rebalance daily, including inception
    for (std::size_t d = 0; d <= n; ++d) {
      const double s = paths.close_at(i, d);
      if (d > 0) {
        hit_lb = hit_lb || s <= b.lb;
        hit_ub = hit_ub || s >= b.ub;
      }
      const double t = day * static_cast<double>(d);
      const double tau = horizon - t;
      if (d == n) {
        // settle: unwind the underlying, let the vanilla expire
        cash += units * s - costs.underlying_rate * std::fabs(units) * s;
        cash += vans * std::max(s - k_van, 0.0);
        cash += w * ((hit_lb && hit_ub) ? 1.0 : 0.0);
        break;
      }
      const KnockState st = hit_lb && hit_ub ? KnockState::Both
                            : hit_lb         ? KnockState::LbHit
                            : hit_ub         ? KnockState::UbHit
                                             : KnockState::None;
      double delta_v = 0.0, vega_v = 0.0;
      if (st != KnockState::Both) {
        const double x = std::log(s);
        delta_v = (grid_value(mid, st, x + dx_fd, t) -
                   grid_value(mid, st, x - dx_fd, t)) /
                  (2.0 * dx_fd) / s;
        vega_v = (grid_value(up, st, x, t) - grid_value(dn, st, x, t)) /
                 (2.0 * bump);
      }
      // only vega-hedge while the vanilla actually carries vega; once it is
      // deep in or out of the money, 1/vega sizing trades huge premium for
      // almost no vega and the churn cost swamps the hedge
      const double van_vega = bs_vega(s, k_van, sigma, tau);
      double target_vans = vans;
      if (van_vega > 1e-2 * p.spot) target_vans = -w * vega_v / van_vega;
      const double target_units =
          -(w * delta_v + target_vans * bs_delta(s, k_van, sigma, tau));
      const double dv = target_vans - vans;
      if (dv != 0.0) {
        const double price = bs_call(s, k_van, sigma, tau);
        cash -= dv * price + costs.option_rate * std::fabs(dv) * price;
        vans = target_vans;
      }
      const double du = target_units - units;
      if (du != 0.0) {
        cash -= du * s + costs.underlying_rate * std::fabs(du) * s;
        units = target_units;
      }
    }
    errors[i] = cash;
  }
  return make_ledger(std::move(errors));
}

// ---------------------------------------------------------------------------
// Type map
// ---------------------------------------------------------------------------

std::vector<TypeMapEntry> type_map(const ImpliedLaw& law,
                                   const std::vector<double>& lbs,
                                   const std::vector<double>& ubs) {
  const double spot = law.total_mean();
  std::vector<TypeMapEntry> out;
  for (const double lb : lbs) {
    if (!(lb > law.support_lo && lb < spot)) continue;
    for (const double ub : ubs) {
      if (!(ub > spot && ub < law.support_hi)) continue;
      const BarrierPair b{lb, ub};
      TypeMapEntry e;
      e.lb = lb;
      e.ub = ub;
      e.upper_label = classify_upper(law, b).label;
      e.lower_label = classify_lower(law, b).label;
      out.push_back(e);
    }
  }
  return out;
}

}  // namespace rb

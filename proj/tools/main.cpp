// robust-barriers: command-line front end.
//
// Subcommands: bounds, hedge-plan, verify-embedding, simulate, typemap,
// envelope. Structured results are written as JSON artifacts (with the run
// configuration and version embedded), bulk path/grid data as CSV. Exit
// codes: 0 success, 1 module error (machine-readable error JSON on stdout),
// 2 usage error.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rb/barycentre.hpp"
#include "rb/bounds.hpp"
#include "rb/embedding.hpp"
#include "rb/finite_strikes.hpp"
#include "rb/hedges.hpp"
#include "rb/hedging_sim.hpp"
#include "rb/market_input.hpp"

using nlohmann::json;
using namespace rb;

namespace {

#ifndef RB_VERSION
#define RB_VERSION "0.0.0"
#endif
constexpr const char* kVersion = "robust-barriers " RB_VERSION;

// ---------------------------------------------------------------------------
// Market specification shared by the law-consuming subcommands
// ---------------------------------------------------------------------------

struct MarketSpec {
  std::string law = "uniform";     // uniform | lognormal | heston
  std::vector<double> support;     // uniform: lo hi
  double spot = 0.0;               // 0 = family default
  double sigma = 0.3;              // lognormal
  HestonParams heston;             // heston family parameters
  std::string quotes_path;         // CSV/JSON quotes override the family
  std::string config_path;         // JSON analytic spec
};

void add_market_flags(CLI::App* cmd, MarketSpec* m) {
  cmd->add_option("--law", m->law, "Law family: uniform, lognormal, heston")
      ->check(CLI::IsMember({"uniform", "lognormal", "heston"}));
  cmd->add_option("--support", m->support,
                  "Uniform support: low high")->expected(2);
  cmd->add_option("--spot", m->spot, "Spot (defaults to the family's own)");
  cmd->add_option("--sigma", m->sigma, "Lognormal total log stdev");
  cmd->add_option("--v0", m->heston.v0, "Heston initial variance");
  cmd->add_option("--mean-reversion", m->heston.mean_reversion,
                  "Heston mean-reversion speed");
  cmd->add_option("--long-run-variance", m->heston.long_run_variance,
                  "Heston long-run variance");
  cmd->add_option("--vol-of-vol", m->heston.vol_of_vol, "Heston vol of vol");
  cmd->add_option("--correlation", m->heston.correlation,
                  "Heston spot/variance correlation");
  cmd->add_option("--horizon", m->heston.horizon, "Maturity in years");
  cmd->add_option("--quotes", m->quotes_path,
                  "Quote table (CSV `strike,price` or JSON array); overrides --law");
  cmd->add_option("--config", m->config_path,
                  "Analytic curve config JSON {family, params, S0, K_max}");
}

std::vector<Quote> load_quotes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open quote file: " + path);
  std::vector<Quote> quotes;
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    json j;
    in >> j;
    for (const auto& q : j)
      quotes.push_back({q.at("strike").get<double>(),
                        q.at("price").get<double>()});
    return quotes;
  }
  std::string line;
  if (!std::getline(in, line) || line.rfind("strike,price", 0) != 0)
    throw DomainError("quote CSV must start with header `strike,price`: " + path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw DomainError("malformed quote line: " + line);
    quotes.push_back(
        {std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
  }
  return quotes;
}

CallCurve curve_from_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open config file: " + path);
  json j;
  in >> j;
  const std::string family = j.at("family");
  if (family == "uniform") {
    const auto& s = j.at("params").at("support");
    return make_uniform_terminal_curve(s.at(0), s.at(1));
  }
  if (family == "lognormal")
    return make_lognormal_curve(j.at("S0"), j.at("params").at("sigma"));
  if (family == "heston") {
    HestonParams p;
    const json& q = j.at("params");
    if (j.contains("S0")) p.spot = j["S0"];
    if (q.contains("v0")) p.v0 = q["v0"];
    if (q.contains("mean_reversion")) p.mean_reversion = q["mean_reversion"];
    if (q.contains("long_run_variance"))
      p.long_run_variance = q["long_run_variance"];
    if (q.contains("vol_of_vol")) p.vol_of_vol = q["vol_of_vol"];
    if (q.contains("correlation")) p.correlation = q["correlation"];
    if (q.contains("horizon")) p.horizon = q["horizon"];
    return heston_call_curve(p, heston_knots(p));
  }
  throw DomainError("unknown curve family in config: " + family);
}

CallCurve build_curve(const MarketSpec& m) {
  if (!m.config_path.empty()) return curve_from_config(m.config_path);
  if (!m.quotes_path.empty()) return make_grid_curve(load_quotes(m.quotes_path));
  if (m.law == "uniform") {
    if (m.support.size() != 2)
      throw DomainError("uniform law needs --support low high");
    CallCurve c = make_uniform_terminal_curve(m.support[0], m.support[1]);
    if (m.spot > 0.0 && std::fabs(m.spot - c.spot) > 1e-9)
      throw DomainError("--spot disagrees with the uniform support midpoint");
    return c;
  }
  if (m.law == "lognormal")
    return make_lognormal_curve(m.spot > 0.0 ? m.spot : 100.0, m.sigma);
  HestonParams p = m.heston;
  if (m.spot > 0.0) p.spot = m.spot;
  return heston_call_curve(p, heston_knots(p));
}

json market_config_json(const MarketSpec& m) {
  json j;
  j["law"] = m.law;
  if (!m.quotes_path.empty()) j["quotes"] = m.quotes_path;
  if (!m.config_path.empty()) j["config"] = m.config_path;
  if (m.law == "uniform" && m.support.size() == 2)
    j["support"] = m.support;
  if (m.law == "lognormal") j["sigma"] = m.sigma;
  if (m.law == "heston")
    j["heston"] = {{"spot", m.heston.spot},
                   {"v0", m.heston.v0},
                   {"mean_reversion", m.heston.mean_reversion},
                   {"long_run_variance", m.heston.long_run_variance},
                   {"vol_of_vol", m.heston.vol_of_vol},
                   {"correlation", m.heston.correlation},
                   {"horizon", m.heston.horizon}};
  if (m.spot > 0.0) j["spot"] = m.spot;
  return j;
}

// ---------------------------------------------------------------------------
// Artifact plumbing
// ---------------------------------------------------------------------------

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write artifact: " + path);
  out << text;
}

void emit_artifact(const std::string& out_dir, const std::string& name,
                   json artifact) {
  artifact["version"] = kVersion;
  const std::string text = artifact.dump(2) + "\n";
  write_file(out_dir + "/" + name, text);
  std::cout << text;
}

json bound_json(const PriceBound& b) {
  return {{"value", b.value},
          {"case", case_name(b.label)},
          {"params", b.params},
          {"blueprint", json::parse(blueprint_to_json(b.blueprint))}};
}

std::string fmt_cell(double x, int width) {
  char buf[32];
  if (std::isnan(x))
    std::snprintf(buf, sizeof buf, "%*s", width, "n/a");
  else
    std::snprintf(buf, sizeof buf, "%*.4f", width, x);
  return buf;
}

// Fixed-width utility table in the layout of the study's comparison table;
// NaN entries render as "n/a" with a warning on stderr.
std::string render_report(const std::vector<UtilityRow>& rows) {
  std::ostringstream os;
  os << "hedge                 utility       5%      95%  preferred\n";
  bool warned = false;
  for (const UtilityRow& r : rows) {
    if (!warned && (std::isnan(r.utility) || std::isnan(r.ci_lo) ||
                    std::isnan(r.ci_hi))) {
      std::cerr << "warning: non-finite utility entries rendered as n/a\n";
      warned = true;
    }
    os << r.name;
    for (std::size_t i = r.name.size(); i < 20; ++i) os << ' ';
    os << fmt_cell(r.utility, 9) << fmt_cell(r.ci_lo, 9)
       << fmt_cell(r.ci_hi, 9) << (r.preferred ? "          *" : "") << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_bounds(const MarketSpec& m, const std::vector<double>& barriers,
               bool finite, std::size_t n_strikes,
               const std::string& dump_geometry, const std::string& out_dir) {
  const BarrierPair b{barriers[0], barriers[1]};
  const CallCurve curve = build_curve(m);
  json art;
  art["config"] = {{"command", "bounds"},
                   {"market", market_config_json(m)},
                   {"barriers", {b.lb, b.ub}},
                   {"finite", finite}};
  if (finite) {
    QuoteSet q = m.quotes_path.empty()
                     ? sample_quotes(curve, n_strikes)
                     : make_quote_set(load_quotes(m.quotes_path));
    art["config"]["strikes"] = q.quotes.size();
    const FiniteBounds fb = finite_bounds(q, b);
    art["upper"] = bound_json(fb.upper);
    art["lower"] = bound_json(fb.lower);
    art["k3_separated"] = fb.k3_separated;
  } else {
    const ImpliedLaw law = implied_law(curve);
    art["upper"] = bound_json(upper_bound(law, curve, b));
    art["lower"] = bound_json(lower_bound(law, curve, b));
    if (!dump_geometry.empty()) {
      std::ofstream os(dump_geometry);
      if (!os) throw DomainError("cannot write " + dump_geometry);
      dump_geometry_csv(os, law, b, 200);
      art["geometry_csv"] = dump_geometry;
    }
  }
  emit_artifact(out_dir, "bounds.json", std::move(art));
  return 0;
}

int cmd_hedge_plan(const MarketSpec& m, const std::vector<double>& barriers,
                   const std::string& side, const std::string& out_dir) {
  const BarrierPair b{barriers[0], barriers[1]};
  const CallCurve curve = build_curve(m);
  const ImpliedLaw law = implied_law(curve);
  json art;
  art["config"] = {{"command", "hedge-plan"},
                   {"market", market_config_json(m)},
                   {"barriers", {b.lb, b.ub}},
                   {"side", side}};
  if (side != "sub") {
    const PriceBound up = upper_bound(law, curve, b);
    art["superhedge"] = bound_json(up);
  }
  if (side != "super") {
    const PriceBound lo = lower_bound(law, curve, b);
    art["subhedge"] = bound_json(lo);
  }
  emit_artifact(out_dir, "hedge_plan.json", std::move(art));
  return 0;
}

int cmd_verify_embedding(const MarketSpec& m, const std::vector<double>& barriers,
                         const std::string& side, std::size_t n_paths,
                         std::uint64_t seed, const std::string& terminal_csv,
                         const std::string& out_dir) {
  const BarrierPair b{barriers[0], barriers[1]};
  const CallCurve curve = build_curve(m);
  const ImpliedLaw law = implied_law(curve);
  const bool upper = side == "upper";
  const PriceBound bound =
      upper ? upper_bound(law, curve, b) : lower_bound(law, curve, b);
  const ExtremalModel model =
      upper ? build_upper_extremal(law, b, classify_upper(law, b))
            : build_lower_extremal(law, b, classify_lower(law, b));
  const TightnessReport rep = verify_tightness(model, bound, n_paths, seed);
  json art;
  art["config"] = {{"command", "verify-embedding"},
                   {"market", market_config_json(m)},
                   {"barriers", {b.lb, b.ub}},
                   {"side", side},
                   {"paths", n_paths},
                   {"seed", seed}};
  art["bound"] = {{"value", bound.value}, {"case", case_name(bound.label)}};
  art["mc_estimate"] = rep.mc_estimate;
  art["std_err"] = rep.std_err;
  art["ks_terminal"] = rep.ks;
  art["pass"] = rep.pass;
  if (!terminal_csv.empty()) {
    const SimulationResult sim = simulate(model, n_paths, 1e-5, seed);
    std::ostringstream os;
    os << "terminal,hit_lb,hit_ub\n";
    for (const PathOutcome& o : sim.outcomes)
      os << o.terminal << ',' << (o.hit_lb ? 1 : 0) << ','
         << (o.hit_ub ? 1 : 0) << "\n";
    write_file(terminal_csv, os.str());
    art["terminal_csv"] = terminal_csv;
  }
  emit_artifact(out_dir, "verify_embedding.json", std::move(art));
  return 0;
}

int cmd_simulate(const MarketSpec& m, const std::vector<double>& barriers,
                 const std::string& position, std::vector<std::string> hedges,
                 const std::string& monitoring, std::size_t n_paths,
                 std::uint64_t seed, const std::vector<double>& cost_rates,
                 const std::string& premium_spec, const std::string& out_dir) {
  const BarrierPair b{barriers[0], barriers[1]};
  HestonParams p = m.heston;
  if (m.spot > 0.0) p.spot = m.spot;
  const CostSpec costs{cost_rates[0], cost_rates[1]};
  const Monitoring mon =
      monitoring == "exact" ? Monitoring::Exact : Monitoring::Daily;
  const bool short_position = position == "short";

  const PathSet paths = heston_paths(p, n_paths, seed);
  const CallCurve curve = heston_call_curve(p, heston_knots(p));
  const ImpliedLaw law = implied_law(curve);
  const double premium = premium_spec == "fair"
                             ? touch_probability(paths, b, mon)
                             : std::stod(premium_spec);

  json art;
  art["config"] = {{"command", "simulate"},
                   {"market", market_config_json(m)},
                   {"barriers", {b.lb, b.ub}},
                   {"position", position},
                   {"hedges", hedges},
                   {"monitoring", monitoring},
                   {"paths", n_paths},
                   {"seed", seed},
                   {"costs", {costs.underlying_rate, costs.option_rate}},
                   {"premium", premium}};

  std::vector<std::pair<std::string, Ledger>> ledgers;
  for (const std::string& h : hedges) {
    if (h == "superhedge") {
      const PriceBound up = upper_bound(law, curve, b);
      ledgers.emplace_back(h, run_quasi_static(up.blueprint, curve, premium,
                                               paths, costs, mon,
                                               short_position));
    } else if (h == "subhedge") {
      const PriceBound lo = lower_bound(law, curve, b);
      ledgers.emplace_back(h, run_quasi_static(lo.blueprint, curve, premium,
                                               paths, costs, mon,
                                               short_position));
    } else {  // deltavega
      DeltaVegaConfig cfg;
      cfg.barriers = b;
      cfg.premium = premium;
      cfg.short_position = short_position;
      cfg.implied_vol = implied_vol(curve, curve.spot, p.horizon);
      ledgers.emplace_back(h, run_delta_vega(paths, costs, cfg));
    }
  }

  const std::vector<UtilityRow> rows = utility_report(ledgers, seed);
  art["utilities"] = json::array();
  for (const UtilityRow& r : rows)
    art["utilities"].push_back({{"hedge", r.name},
                                {"utility", r.utility},
                                {"ci", {r.ci_lo, r.ci_hi}},
                                {"preferred", r.preferred}});

  std::ostringstream os;
  os << "path";
  for (const auto& [name, ledger] : ledgers) os << ',' << name;
  os << "\n";
  for (std::size_t i = 0; i < n_paths; ++i) {
    os << i;
    for (const auto& [name, ledger] : ledgers) os << ',' << ledger.errors[i];
    os << "\n";
  }
  write_file(out_dir + "/errors.csv", os.str());
  art["errors_csv"] = out_dir + "/errors.csv";

  emit_artifact(out_dir, "simulate.json", std::move(art));
  std::cout << render_report(rows);
  return 0;
}

int cmd_typemap(const MarketSpec& m, const std::vector<double>& lb_grid,
                const std::vector<double>& ub_grid,
                const std::string& out_dir) {
  const CallCurve curve = build_curve(m);
  const ImpliedLaw law = implied_law(curve);
  const auto mesh = [](const std::vector<double>& g) {
    std::vector<double> v;
    const int n = static_cast<int>(g[2]);
    for (int i = 0; i < n; ++i)
      v.push_back(n == 1 ? g[0] : g[0] + (g[1] - g[0]) * i / (n - 1));
    return v;
  };
  const std::vector<TypeMapEntry> grid =
      type_map(law, mesh(lb_grid), mesh(ub_grid));
  std::ostringstream os;
  os << "lb,ub,upper_case,lower_case\n";
  for (const TypeMapEntry& e : grid)
    os << e.lb << ',' << e.ub << ',' << case_name(e.upper_label) << ','
       << case_name(e.lower_label) << "\n";
  write_file(out_dir + "/typemap.csv", os.str());
  json art;
  art["config"] = {{"command", "typemap"},
                   {"market", market_config_json(m)},
                   {"lb_grid", lb_grid},
                   {"ub_grid", ub_grid}};
  art["entries"] = grid.size();
  art["csv"] = out_dir + "/typemap.csv";
  emit_artifact(out_dir, "typemap.json", std::move(art));
  return 0;
}

int cmd_envelope(const std::string& quotes_path,
                 const std::vector<double>& strikes, std::size_t samples,
                 const std::string& out_dir) {
  const QuoteSet q = make_quote_set(load_quotes(quotes_path));
  std::vector<double> ks = strikes;
  if (samples > 0)
    for (std::size_t i = 0; i <= samples; ++i)
      ks.push_back(q.k_max() * static_cast<double>(i) /
                   static_cast<double>(samples));
  std::ostringstream os;
  os << "strike,lower,upper\n";
  json rows = json::array();
  for (const double k : ks) {
    const PriceEnvelope env = price_envelope(q, k);
    os << k << ',' << env.lower << ',' << env.upper << "\n";
    rows.push_back({{"strike", k}, {"lower", env.lower}, {"upper", env.upper}});
  }
  write_file(out_dir + "/envelope.csv", os.str());
  json art;
  art["config"] = {{"command", "envelope"},
                   {"quotes", quotes_path},
                   {"strikes", strikes},
                   {"samples", samples}};
  art["envelope"] = rows;
  art["csv"] = out_dir + "/envelope.csv";
  emit_artifact(out_dir, "envelope.json", std::move(art));
  return 0;
}

std::string error_type(const std::exception& e) {
  if (dynamic_cast<const ArbitrageViolation*>(&e)) return "ArbitrageViolation";
  if (dynamic_cast<const InsufficientQuotes*>(&e)) return "InsufficientQuotes";
  if (dynamic_cast<const DominanceFailed*>(&e)) return "DominanceFailed";
  if (dynamic_cast<const QuadratureFailure*>(&e)) return "QuadratureFailure";
  if (dynamic_cast<const GridUnstable*>(&e)) return "GridUnstable";
  if (dynamic_cast<const ZeroMass*>(&e)) return "ZeroMass";
  if (dynamic_cast<const NumericsError*>(&e)) return "NumericsError";
  if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
  return "Error";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-free double-touch bounds and robust hedges"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string out_dir = ".";
  app.add_option("--out", out_dir, "Artifact output directory")
      ->capture_default_str();

  MarketSpec market;
  std::vector<double> barriers;
  std::uint64_t seed = 0;

  // bounds
  auto* bounds_cmd = app.add_subcommand("bounds", "Model-free price bounds");
  add_market_flags(bounds_cmd, &market);
  bounds_cmd->add_option("--barriers", barriers, "Barrier pair: lb ub")
      ->expected(2)->required();
  bool finite = false;
  std::size_t n_strikes = 1000;
  std::string dump_geometry;
  bounds_cmd->add_flag("--finite", finite,
                       "Bounds from finitely many strikes only");
  bounds_cmd->add_option("--strikes", n_strikes,
                         "Number of sampled strikes for --finite without --quotes");
  bounds_cmd->add_option("--dump-geometry", dump_geometry,
                         "Write the subhedge geometry CSV (v,psi,theta,kappa)");

  // hedge-plan
  auto* plan_cmd = app.add_subcommand("hedge-plan", "Optimal hedge blueprints");
  add_market_flags(plan_cmd, &market);
  plan_cmd->add_option("--barriers", barriers, "Barrier pair: lb ub")
      ->expected(2)->required();
  std::string plan_side = "both";
  plan_cmd->add_option("--side", plan_side, "super, sub or both")
      ->check(CLI::IsMember({"super", "sub", "both"}));

  // verify-embedding
  auto* verify_cmd = app.add_subcommand(
      "verify-embedding", "Check bound tightness by extremal-model simulation");
  add_market_flags(verify_cmd, &market);
  verify_cmd->add_option("--barriers", barriers, "Barrier pair: lb ub")
      ->expected(2)->required();
  std::string verify_side = "upper";
  verify_cmd->add_option("--side", verify_side, "upper or lower")
      ->check(CLI::IsMember({"upper", "lower"}));
  std::size_t verify_paths = 100000;
  verify_cmd->add_option("--paths", verify_paths, "Simulated paths");
  verify_cmd->add_option("--seed", seed, "RNG seed")->required();
  std::string terminal_csv;
  verify_cmd->add_option("--terminal-csv", terminal_csv,
                         "Also write terminal samples to this CSV");

  // simulate
  auto* sim_cmd = app.add_subcommand(
      "simulate", "Hedging simulation under the stochastic-volatility model");
  add_market_flags(sim_cmd, &market);
  sim_cmd->add_option("--barriers", barriers, "Barrier pair: lb ub")
      ->expected(2)->required();
  std::string position = "short";
  sim_cmd->add_option("--position", position, "Exotic position")
      ->check(CLI::IsMember({"short", "long"}));
  std::vector<std::string> hedges;
  sim_cmd->add_option("--hedge", hedges,
                      "Hedges to run (repeatable): superhedge, subhedge, deltavega")
      ->check(CLI::IsMember({"superhedge", "subhedge", "deltavega"}))
      ->required();
  std::string monitoring = "daily";
  sim_cmd->add_option("--monitoring", monitoring, "Barrier monitoring")
      ->check(CLI::IsMember({"daily", "exact"}));
  std::size_t sim_paths = 5000;
  sim_cmd->add_option("--paths", sim_paths, "Simulated paths");
  sim_cmd->add_option("--seed", seed, "RNG seed")->required();
  std::vector<double> cost_rates = {0.005, 0.01};
  sim_cmd->add_option("--costs", cost_rates,
                      "Proportional costs: underlying option")->expected(2);
  std::string premium_spec = "fair";
  sim_cmd->add_option("--premium", premium_spec,
                      "Exotic premium: `fair` (MC fair value) or a number");

  // typemap
  auto* typemap_cmd =
      app.add_subcommand("typemap", "Hedge-case labels over a barrier grid");
  add_market_flags(typemap_cmd, &market);
  std::vector<double> lb_grid, ub_grid;
  typemap_cmd->add_option("--lb-grid", lb_grid, "Lower barriers: low high count")
      ->expected(3)->required();
  typemap_cmd->add_option("--ub-grid", ub_grid, "Upper barriers: low high count")
      ->expected(3)->required();

  // envelope
  auto* env_cmd = app.add_subcommand(
      "envelope", "No-arbitrage call price envelope at untraded strikes");
  std::string env_quotes;
  env_cmd->add_option("--quotes", env_quotes, "Quote table")->required();
  std::vector<double> env_strikes;
  env_cmd->add_option("--strike", env_strikes, "Strike to evaluate (repeatable)");
  std::size_t env_samples = 0;
  env_cmd->add_option("--samples", env_samples,
                      "Also evaluate on this many equal steps across the range");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (bounds_cmd->parsed())
      return cmd_bounds(market, barriers, finite, n_strikes, dump_geometry,
                        out_dir);
    if (plan_cmd->parsed())
      return cmd_hedge_plan(market, barriers, plan_side, out_dir);
    if (verify_cmd->parsed())
      return cmd_verify_embedding(market, barriers, verify_side, verify_paths,
                                  seed, terminal_csv, out_dir);
    if (sim_cmd->parsed())
      return cmd_simulate(market, barriers, position, hedges, monitoring,
                          sim_paths, seed, cost_rates, premium_spec, out_dir);
    if (typemap_cmd->parsed())
      return cmd_typemap(market, lb_grid, ub_grid, out_dir);
    if (env_cmd->parsed())
      return cmd_envelope(env_quotes, env_strikes, env_samples, out_dir);
  } catch (const std::exception& e) {
    const json err = {
        {"error", {{"type", error_type(e)}, {"message", e.what()}}}};
    std::cout << err.dump(2) << "\n";
    return 1;
  }
  return 2;
}

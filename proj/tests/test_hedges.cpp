#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "rb/hedges.hpp"
#include "rb/market_input.hpp"

using namespace rb;

namespace {

const BarrierPair golden{83.0, 117.0};
const double kSpot = 100.0;

PathOutcome path(double terminal, bool hit_lb, bool hit_ub, FirstHit first) {
  PathOutcome p;
  p.terminal = terminal;
  p.hit_lb = hit_lb;
  p.hit_ub = hit_ub;
  p.first = first;
  return p;
}

// random path outcome consistent with barriers and spot
PathOutcome random_path(std::mt19937& rng, const BarrierPair& b, double hi) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  PathOutcome p;
  const double r = u01(rng);
  if (r < 0.25) {
    p.hit_lb = false;
    p.hit_ub = false;
    p.first = FirstHit::Neither;
    p.terminal = b.lb + (b.ub - b.lb) * u01(rng);
  } else if (r < 0.5) {
    p.hit_lb = true;
    p.hit_ub = false;
    p.first = FirstHit::LbFirst;
    p.terminal = b.ub * u01(rng);
  } else if (r < 0.75) {
    p.hit_lb = false;
    p.hit_ub = true;
    p.first = FirstHit::UbFirst;
    p.terminal = b.lb + (hi - b.lb) * u01(rng);
  } else {
    p.hit_lb = true;
    p.hit_ub = true;
    p.first = u01(rng) < 0.5 ? FirstHit::LbFirst : FirstHit::UbFirst;
    p.terminal = hi * u01(rng);
  }
  return p;
}

}  // namespace

TEST_CASE("double touch indicator and event logic") {
  CHECK(double_touch_indicator(path(100, true, true, FirstHit::LbFirst)) == 1.0);
  CHECK(double_touch_indicator(path(100, true, false, FirstHit::LbFirst)) == 0.0);
  CHECK(double_touch_indicator(path(100, false, false, FirstHit::Neither)) == 0.0);

  const PathOutcome both_lb = path(90, true, true, FirstHit::LbFirst);
  CHECK(event_fired(TriggerEvent::LbFirst, both_lb));
  CHECK(event_fired(TriggerEvent::LbThenUb, both_lb));
  CHECK(!event_fired(TriggerEvent::UbFirst, both_lb));
  CHECK(!event_fired(TriggerEvent::UbThenLb, both_lb));

  const PathOutcome only_ub = path(130, false, true, FirstHit::UbFirst);
  CHECK(event_fired(TriggerEvent::UbFirst, only_ub));
  CHECK(!event_fired(TriggerEvent::UbThenLb, only_ub));
}

TEST_CASE("wide-barrier superhedge coefficients and cost") {
  const HedgeBlueprint h = make_superhedge(SuperVariant::IV, golden, kSpot, {166.0, 34.0});
  CHECK(h.coeffs.at("alpha1") == doctest::Approx(1.0 / 83.0));
  CHECK(h.coeffs.at("alpha2") == doctest::Approx(1.0 / 83.0));
  CHECK(h.coeffs.at("alpha3") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(h.coeffs.at("alpha4") == doctest::Approx(4067.0 / 6889.0));

  const CallCurve c = make_uniform_terminal_curve(0.0, 200.0);
  CHECK(static_cost(h, c) == doctest::Approx(0.6600).epsilon(1e-8));

  // payoff is exactly 1 when both barriers were hit and S_T = spot
  CHECK(evaluate_payoff(h, path(100, true, true, FirstHit::UbFirst)) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(evaluate_payoff(h, path(100, true, true, FirstHit::LbFirst)) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single-sided superhedges") {
  SUBCASE("put-based variant") {
    const HedgeBlueprint h = make_superhedge(SuperVariant::I, golden, kSpot, {100.0});
    CHECK(h.coeffs.at("alpha") == doctest::Approx(1.0 / (100.0 - golden.lb)));
    // dominates the double-touch payoff pathwise
    CHECK(evaluate_payoff(h, path(50, true, true, FirstHit::LbFirst)) >=
          1.0 - 1e-12);
  }
  SUBCASE("call-based variant") {
    const HedgeBlueprint h = make_superhedge(SuperVariant::II, golden, kSpot, {100.0});
    CHECK(h.coeffs.at("alpha") == doctest::Approx(1.0 / (golden.ub - 100.0)));
    CHECK(evaluate_payoff(h, path(150, true, true, FirstHit::UbFirst)) >=
          1.0 - 1e-12);
  }
}

TEST_CASE("four-strike superhedge solves its constraints") {
  const BarrierPair b{40.0, 160.0};
  // strikes from the tight-barrier geometry of the uniform law
  const std::vector<double> ks = {163.3094, 156.6906, 43.3094, 36.6906};
  const HedgeBlueprint h = make_superhedge(SuperVariant::III, b, kSpot, ks);
  // coefficients positive and triggers present
  CHECK(h.coeffs.at("alpha1") > 0.0);
  CHECK(h.coeffs.at("alpha2") > 0.0);
  CHECK(h.triggers.size() == 4);
  // pathwise domination on random admissible paths
  std::mt19937 rng(23);
  for (int i = 0; i < 4000; ++i) {
    const PathOutcome p = random_path(rng, b, 200.0);
    CHECK(evaluate_payoff(h, p) >= double_touch_indicator(p) - 1e-9);
  }
}

TEST_CASE("subhedge coefficients for the golden case") {
  const double s = std::sqrt(7667.0);
  const double k1 = 83.0 + s;   // theta(100)
  const double k2 = 117.0 - s;  // psi(100)
  const HedgeBlueprint h = make_subhedge(SubVariant::I, golden, kSpot, k1, k2);
  CHECK(h.coeffs.at("alpha0") == doctest::Approx(0.611699).epsilon(1e-4));
  CHECK(h.coeffs.at("alpha1") == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(h.coeffs.at("alpha2") == doctest::Approx(0.0114204).epsilon(1e-4));
  CHECK(h.coeffs.at("alpha3") == doctest::Approx(0.0228408).epsilon(1e-4));
  CHECK(h.coeffs.at("gamma1") == doctest::Approx(0.388301).epsilon(1e-4));
  CHECK(h.coeffs.at("gamma2") == doctest::Approx(0.388301).epsilon(1e-4));
  // derived middle strike coincides with the fixed point
  CHECK(h.strikes.at(2) == doctest::Approx(100.0).epsilon(1e-8));

  const CallCurve c = make_uniform_terminal_curve(0.0, 200.0);
  CHECK(static_cost(h, c) == doctest::Approx(0.294373).epsilon(2e-4));

  // payoff equals 1 at terminal K2 when both barriers were hit
  CHECK(evaluate_payoff(h, path(k2, true, true, FirstHit::UbFirst)) ==
        doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("subhedges stay below the double-touch payoff") {
  std::mt19937 rng(5);
  const double s = std::sqrt(7667.0);
  const HedgeBlueprint h1 =
      make_subhedge(SubVariant::I, golden, kSpot, 83.0 + s, 117.0 - s);
  for (int i = 0; i < 4000; ++i) {
    const PathOutcome p = random_path(rng, golden, 200.0);
    CHECK(evaluate_payoff(h1, p) <= double_touch_indicator(p) + 1e-9);
  }
  // three-strike variants with an explicit middle strike
  const HedgeBlueprint h2 =
      make_subhedge(SubVariant::II, golden, kSpot, 170.0, 30.0, 90.0);
  const HedgeBlueprint h3 =
      make_subhedge(SubVariant::III, golden, kSpot, 170.0, 30.0, 110.0);
  for (int i = 0; i < 4000; ++i) {
    const PathOutcome p = random_path(rng, golden, 200.0);
    CHECK(evaluate_payoff(h2, p) <= double_touch_indicator(p) + 1e-9);
    CHECK(evaluate_payoff(h3, p) <= double_touch_indicator(p) + 1e-9);
  }
}

TEST_CASE("middle strike must sit on the declared side") {
  // threshold between the two three-strike families
  const double k1 = 170.0, k2 = 30.0;
  const double thr = (golden.ub * (k1 - golden.lb) + golden.lb * (golden.ub - k2)) /
                     ((k1 - golden.lb) + (golden.ub - k2));
  CHECK_THROWS_AS(
      make_subhedge(SubVariant::II, golden, kSpot, k1, k2, thr + 5.0),
      ThresholdSide);
  CHECK_THROWS_AS(
      make_subhedge(SubVariant::III, golden, kSpot, k1, k2, thr - 5.0),
      ThresholdSide);
}

TEST_CASE("strike ordering is validated") {
  CHECK_THROWS_AS(make_superhedge(SuperVariant::I, golden, kSpot, {80.0}),
                  StrikeOrdering);
  CHECK_THROWS_AS(make_superhedge(SuperVariant::IV, golden, kSpot, {90.0, 34.0}),
                  StrikeOrdering);
  CHECK_THROWS_AS(make_subhedge(SubVariant::I, golden, kSpot, 90.0, 30.0),
                  StrikeOrdering);
}

TEST_CASE("jump executions degrade the sell-side but not domination") {
  const HedgeBlueprint h = make_superhedge(SuperVariant::IV, golden, kSpot, {166.0, 34.0});
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> over(0.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    PathOutcome p = random_path(rng, golden, 200.0);
    // crossings happen by jumps: executions at prices beyond the barrier
    if (p.hit_lb) p.exec_lb = golden.lb - over(rng);
    if (p.hit_ub) p.exec_ub = golden.ub + over(rng);
    CHECK(evaluate_payoff(h, p) >= double_touch_indicator(p) - 1e-9);
  }
}

TEST_CASE("blueprint JSON round trip") {
  const double s = std::sqrt(7667.0);
  for (const HedgeBlueprint& h :
       {make_superhedge(SuperVariant::IV, golden, kSpot, {166.0, 34.0}),
        make_subhedge(SubVariant::I, golden, kSpot, 83.0 + s, 117.0 - s)}) {
    const HedgeBlueprint back = blueprint_from_json(blueprint_to_json(h));
    CHECK(back.variant == h.variant);
    CHECK(back.static_legs.legs.size() == h.static_legs.legs.size());
    CHECK(back.triggers.size() == h.triggers.size());
    std::mt19937 rng(3);
    for (int i = 0; i < 200; ++i) {
      const PathOutcome p = random_path(rng, golden, 200.0);
      CHECK(evaluate_payoff(back, p) ==
            doctest::Approx(evaluate_payoff(h, p)).epsilon(1e-12));
    }
  }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "rb/bounds.hpp"
#include "rb/finite_strikes.hpp"
#include "rb/market_input.hpp"

using namespace rb;

namespace {

const CallCurve& uniform_curve() {
  static const CallCurve c = make_uniform_terminal_curve(0.0, 200.0);
  return c;
}

QuoteSet coarse_quotes() {
  return sample_quotes(uniform_curve(), 4);  // strikes 0,50,100,150,200
}

}  // namespace

TEST_CASE("quote validation rejects bad tables") {
  CHECK_THROWS_AS(
      (void)make_quote_set({{0.0, 100.0}, {50.0, 60.0}}), DomainError);
  CHECK_THROWS_AS(
      (void)make_quote_set({{10.0, 90.0}, {50.0, 60.0}, {100.0, 30.0}}),
      DomainError);
  // concave kink at the middle quote
  CHECK_THROWS_AS(
      (void)make_quote_set({{0.0, 100.0}, {50.0, 80.0}, {100.0, 30.0},
                            {150.0, 10.0}, {200.0, 0.0}}),
      ArbitrageViolation);
  CHECK_NOTHROW((void)coarse_quotes());
}

TEST_CASE("price envelope brackets the smooth curve and collapses at quotes") {
  const QuoteSet q = coarse_quotes();
  const PriceEnvelope e = price_envelope(q, 75.0);
  // chord of C(50) = 56.25 and C(100) = 25
  CHECK(e.upper == doctest::Approx(40.625).epsilon(1e-12));
  // both one-sided secants extrapolate to the same value here
  CHECK(e.lower == doctest::Approx(34.375).epsilon(1e-12));
  CHECK(e.lower <= uniform_curve().value(75.0));
  CHECK(uniform_curve().value(75.0) <= e.upper);

  const PriceEnvelope at = price_envelope(q, 100.0);
  CHECK(at.lower == at.upper);
  CHECK(at.upper == doctest::Approx(uniform_curve().value(100.0)));
  CHECK_THROWS_AS((void)price_envelope(q, 200.5), DomainError);
}

TEST_CASE("envelope is exact across a linear stretch of quotes") {
  // slopes -0.8, -0.5, -0.5, -0.2: the middle two segments are collinear
  const QuoteSet q = make_quote_set(
      {{0.0, 100.0}, {50.0, 60.0}, {100.0, 35.0}, {150.0, 10.0}, {200.0, 0.0}});
  for (const double k : {60.0, 75.0, 110.0, 125.0, 140.0}) {
    const PriceEnvelope e = price_envelope(q, k);
    CHECK(e.lower == doctest::Approx(e.upper).epsilon(1e-12));
  }
}

TEST_CASE("envelope sandwiches random admissible completions") {
  const QuoteSet q = sample_quotes(uniform_curve(), 8);
  // three admissible completions through the same quotes: the smooth
  // original, the maximal linear interpolation, and a minimal completion
  // kinked at two interior points
  const CallCurve& smooth = uniform_curve();
  const CallCurve grid =
      extremal_surfaces(q, BarrierPair{62.5, 137.5}).lower_kinked;
  const ExtremalSurfaces surf =
      extremal_surfaces(q, BarrierPair{83.0, 117.0});
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    // a random convex mixture of admissible curves is admissible
    double w1 = unif(rng), w2 = unif(rng), w3 = unif(rng);
    const double ws = w1 + w2 + w3;
    w1 /= ws; w2 /= ws; w3 /= ws;
    const double k = 1.0 + 198.0 * unif(rng);
    const double mix = w1 * smooth.value(k) + w2 * grid.value(k) +
                       w3 * surf.upper_surface.value(k);
    const PriceEnvelope e = price_envelope(q, k);
    CHECK(e.lower <= mix + 1e-9);
    CHECK(mix <= e.upper + 1e-9);
  }
}

TEST_CASE("upper surface carries the quote law as atoms at the strikes") {
  const QuoteSet q = coarse_quotes();
  const ExtremalSurfaces surf = extremal_surfaces(q, BarrierPair{83.0, 117.0});
  const CallCurve& u = surf.upper_surface;
  for (const Quote& x : q.quotes)
    CHECK(u.value(x.strike) == doctest::Approx(x.price).epsilon(1e-12));
  double total = 0.0, mean = 0.0;
  for (const Atom& a : u.atoms) {
    CHECK(a.mass > 0.0);
    total += a.mass;
    mean += a.x * a.mass;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mean == doctest::Approx(q.spot()).epsilon(1e-12));
  // masses are the scaled second differences of the quotes
  const ImpliedLaw law = implied_law(u);
  CHECK(law.mass(99.0, 101.0) ==
        doctest::Approx((56.25 - 2 * 25.0 + 6.25) / 50.0).epsilon(1e-9));
}

TEST_CASE("lower kinked surface dips to the envelope at the barriers") {
  const QuoteSet q = coarse_quotes();
  const BarrierPair b{83.0, 117.0};
  const ExtremalSurfaces surf = extremal_surfaces(q, b);
  for (const Quote& x : q.quotes)
    CHECK(surf.lower_kinked.value(x.strike) ==
          doctest::Approx(x.price).epsilon(1e-12));
  CHECK(surf.lower_kinked.value(b.lb) ==
        doctest::Approx(price_envelope(q, b.lb).lower).epsilon(1e-12));
  CHECK(surf.lower_kinked.value(b.ub) ==
        doctest::Approx(price_envelope(q, b.ub).lower).epsilon(1e-12));
  // the kink flattens the curve right of ub, so the one-sided digital
  // (right derivative) is cheaper than on the interpolated surface
  const auto right_digital = [&](const CallCurve& c) {
    return -(c.value(b.ub + 1.0) - c.value(b.ub)) / 1.0;
  };
  CHECK(right_digital(surf.lower_kinked) <=
        right_digital(surf.upper_surface) + 1e-12);
}

TEST_CASE("surfaces need a flanking quote pair at each barrier") {
  const QuoteSet q = coarse_quotes();  // strikes every 50
  CHECK_THROWS_AS((void)extremal_surfaces(q, BarrierPair{30.0, 117.0}),
                  InsufficientQuotes);
  CHECK_THROWS_AS((void)extremal_surfaces(q, BarrierPair{83.0, 170.0}),
                  InsufficientQuotes);
}

TEST_CASE("discretised superhedge dominates and costs the same chord price") {
  const QuoteSet q = sample_quotes(uniform_curve(), 20);
  const BarrierPair b{83.0, 117.0};
  const ExtremalSurfaces surf = extremal_surfaces(q, b);
  // strikes deliberately between quotes
  const HedgeBlueprint bp =
      make_superhedge(SuperVariant::IV, b, q.spot(), {166.0, 34.0});
  const HedgeBlueprint d = discretize_hedge(bp, q);
  for (const Leg& leg : d.static_legs.legs)
    if (leg.kind == Leg::Kind::Call || leg.kind == Leg::Kind::Put) {
      bool traded = false;
      for (const Quote& x : q.quotes) traded = traded || x.strike == leg.param;
      CHECK(traded);
    }
  // the linear-interpolation law puts no mass where the payoffs differ
  CHECK(static_cost(d, surf.upper_surface) ==
        doctest::Approx(static_cost(bp, surf.upper_surface)).epsilon(1e-12));
  // a blueprint already on traded strikes passes through unchanged
  const HedgeBlueprint on =
      make_superhedge(SuperVariant::IV, b, q.spot(), {170.0, 40.0});
  const HedgeBlueprint don = discretize_hedge(on, q);
  CHECK(don.static_legs.legs.size() == on.static_legs.legs.size());
}

TEST_CASE("discretised subhedge stays below the original payoff") {
  const QuoteSet q = sample_quotes(uniform_curve(), 20);
  const BarrierPair b{83.0, 117.0};
  // the dominance mesh check inside discretize_hedge throws on violation
  const HedgeBlueprint bp =
      make_subhedge(SubVariant::I, b, q.spot(), 171.0, 29.0);
  CHECK_NOTHROW((void)discretize_hedge(bp, q));
}

TEST_CASE("finite bounds converge to the continuum bounds") {
  const CallCurve& c = uniform_curve();
  const ImpliedLaw law = implied_law(c);
  const BarrierPair b{83.0, 117.0};
  const PriceBound cu = upper_bound(law, c, b);
  const PriceBound cl = lower_bound(law, c, b);

  const FiniteBounds fine = finite_bounds(sample_quotes(c, 1000), b);
  CHECK(std::fabs(fine.upper.value - cu.value) <= 0.01 * cu.value);
  CHECK(std::fabs(fine.lower.value - cl.value) <= 0.015 * cl.value);
  CHECK(fine.upper.label == CaseLabel::IV);
  CHECK(fine.lower.label == CaseLabel::I);
  CHECK(fine.k3_separated);

  // four-strike case converges too
  const BarrierPair b3{40.0, 160.0};
  const PriceBound cu3 = upper_bound(law, c, b3);
  const FiniteBounds fine3 = finite_bounds(sample_quotes(c, 1000), b3);
  CHECK(fine3.upper.label == CaseLabel::III);
  CHECK(std::fabs(fine3.upper.value - cu3.value) <= 0.01 * cu3.value);
}

TEST_CASE("finite bounds bracket the continuum and widen with few quotes") {
  const CallCurve& c = uniform_curve();
  const ImpliedLaw law = implied_law(c);
  const BarrierPair b{83.0, 117.0};
  const double cu = upper_bound(law, c, b).value;
  const double cl = lower_bound(law, c, b).value;
  for (const std::size_t n : {10, 20, 100, 400}) {
    const FiniteBounds fb = finite_bounds(sample_quotes(c, n), b);
    CHECK(fb.upper.value >= cu - 1e-9);
    CHECK(fb.lower.value <= cl + 1e-9);
  }
  // six quotes leave no traded strike strictly between the barriers
  const FiniteBounds five = finite_bounds(sample_quotes(c, 5), b);
  CHECK(five.upper.value > cu + 1e-4);
  CHECK(five.lower.value < cl - 1e-4);
  CHECK_FALSE(five.k3_separated);
}

TEST_CASE("adding a consistent quote never widens the bounds") {
  const CallCurve& c = uniform_curve();
  const BarrierPair b{83.0, 117.0};
  double prev_u = 2.0, prev_l = -1.0;
  for (const std::size_t n : {10, 20, 40, 80, 160}) {  // nested grids
    const FiniteBounds fb = finite_bounds(sample_quotes(c, n), b);
    CHECK(fb.upper.value <= prev_u + 1e-9);
    CHECK(fb.lower.value >= prev_l - 1e-9);
    prev_u = fb.upper.value;
    prev_l = fb.lower.value;
  }
}

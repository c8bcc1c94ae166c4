#pragma once
// Finite-strike markets: only finitely many call strikes trade. Provides
// the no-arbitrage price envelope at untraded strikes, the two extremal
// call surfaces around a barrier pair (maximal linear interpolation and
// the minimal completion kinked at the barriers), discretisation of hedge
// blueprints onto traded strikes with pointwise dominance preserved, and
// the resulting model-free bounds for the weak double-touch payoff.

#include <vector>

#include "rb/bounds.hpp"

namespace rb {

struct InsufficientQuotes : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DominanceFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Quotes
// ---------------------------------------------------------------------------

// Traded call quotes, strictly increasing strikes starting at the zero
// strike whose price is the spot. Digitals are assumed untraded unless
// flagged, in which case digital legs survive hedge discretisation and are
// priced off the adverse extremal surface.
struct QuoteSet {
  std::vector<Quote> quotes;
  bool digitals_traded = false;

  double spot() const { return quotes.front().price; }
  double k_max() const { return quotes.back().strike; }
};

// Validates ordering, convexity/monotonicity and the zero-strike
// convention; throws ArbitrageViolation or DomainError.
QuoteSet make_quote_set(std::vector<Quote> quotes, bool digitals_traded = false);

// Samples n+1 equally spaced strikes (including 0 and curve.k_max) off a
// smooth curve.
QuoteSet sample_quotes(const CallCurve& curve, std::size_t n);

// ---------------------------------------------------------------------------
// Envelope and extremal surfaces
// ---------------------------------------------------------------------------

struct PriceEnvelope {
  double lower = 0.0;
  double upper = 0.0;
};

// No-arbitrage bracket for the call price at k: upper = chord
// interpolation of the flanking quotes, lower = best of the one-sided
// secant extrapolations (plus the intrinsic and monotonicity floors). The
// envelope collapses to the quote at a traded strike. DomainError outside
// [0, k_max].
PriceEnvelope price_envelope(const QuoteSet& q, double k);

struct ExtremalSurfaces {
  CallCurve upper_surface;  // linear interpolation; law purely atomic at strikes
  CallCurve lower_kinked;   // minimal completion, kinked at lb and ub
};

// Builds both surfaces. Each matches the quotes exactly; lower_kinked
// takes the envelope-lower value at each barrier, which needs a flanking
// quote pair on both sides of each barrier (InsufficientQuotes otherwise).
ExtremalSurfaces extremal_surfaces(const QuoteSet& q, const BarrierPair& b);

// ---------------------------------------------------------------------------
// Hedge discretisation and bounds
// ---------------------------------------------------------------------------

// Rewrites every vanilla leg onto traded strikes so that the static payoff
// dominates the original for superhedges (is dominated for subhedges),
// leg by signed leg: convex chord splitting in the favourable direction,
// the better of the two one-sided under-constructions otherwise; untraded
// digitals become call-spread ramps on the dominating side. Dominance is
// verified on a dense terminal-value mesh (DominanceFailed guards bugs).
HedgeBlueprint discretize_hedge(const HedgeBlueprint& blueprint,
                                const QuoteSet& q);

struct FiniteBounds {
  PriceBound upper;
  PriceBound lower;
  // False when the best subhedge middle strike is not separated from both
  // barriers by a traded strike; the reported lower bound is then the best
  // over the separated choices only.
  bool k3_separated = true;
};

// Price bounds from quotes alone: the upper bound is the cheapest
// discretised superhedge priced under upper_surface (= its traded-strike
// cost), the lower bound the best discretised subhedge priced under
// lower_kinked.
FiniteBounds finite_bounds(const QuoteSet& q, const BarrierPair& b);

}  // namespace rb

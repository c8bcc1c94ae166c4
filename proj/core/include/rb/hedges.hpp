#pragma once
// Hedge blueprints for the double-touch digital: four superhedges and three
// subhedges (plus the trivial zero subhedge), each a static portfolio of
// vanillas/digitals/cash plus forward trades armed by barrier hitting-order
// events. Coefficients are the exact closed forms; payoff evaluation is a
// pure function of a path outcome.

#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rb/barycentre.hpp"
#include "rb/market_input.hpp"

namespace rb {

struct StrikeOrdering : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularSystem : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ThresholdSide : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InequalityViolated : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Path outcomes
// ---------------------------------------------------------------------------

enum class FirstHit { Neither, LbFirst, UbFirst };

// Reduction of a price path to what the hedges can see: the terminal value,
// which barriers were touched before T and in which order. exec_lb/exec_ub
// optionally override the price at which barrier-triggered forwards execute
// (a jump across a barrier executes at the post-jump price); NaN means the
// trade happens exactly at the barrier.
struct PathOutcome {
  double terminal = 0.0;
  bool hit_lb = false;
  bool hit_ub = false;
  FirstHit first = FirstHit::Neither;
  double exec_lb = std::numeric_limits<double>::quiet_NaN();
  double exec_ub = std::numeric_limits<double>::quiet_NaN();
};

// 1 iff both barriers were hit before T.
int double_touch_indicator(const PathOutcome& outcome);

bool event_fired(TriggerEvent event, const PathOutcome& outcome);

// ---------------------------------------------------------------------------
// Blueprints
// ---------------------------------------------------------------------------

enum class HedgeSide { Super, Sub, Zero };

enum class SuperVariant { I, II, III, IV };
enum class SubVariant { I, II, III, Zero };

struct TriggerLeg {
  TriggerEvent event = TriggerEvent::None;
  double strike = 0.0;  // lb or ub
  double qty = 0.0;     // signed; positive buys the forward
};

struct HedgeBlueprint {
  HedgeSide side = HedgeSide::Zero;
  std::string variant;  // "I" | "II" | "III" | "IV" | "zero"
  BarrierPair barriers;
  StaticPortfolio static_legs;
  std::vector<TriggerLeg> triggers;
  std::vector<double> strikes;              // K or K1.. in the variant's order
  std::map<std::string, double> coeffs;     // alpha/beta/gamma by name
};

// Superhedge constructors. Strikes per variant:
//   I:   {K} with K > lb        II:  {K} with K < ub
//   III: {K1, K2, K3, K4} with 0 < K4 < lb < K3 < K2 < ub < K1
//   IV:  {K1, K2} with 0 < K2 < lb < ub < K1
// spot is needed by variant IV (static forward and cash legs).
HedgeBlueprint make_superhedge(SuperVariant variant, const BarrierPair& b,
                               double spot, const std::vector<double>& strikes);

// Subhedge constructors, common payoff shape with per-variant coefficient
// solutions. K1 > ub and K2 < lb always; K3 is derived for variant I and
// must be supplied in (lb, ub) for II/III, on the correct side of the
// chord-intersection threshold.
HedgeBlueprint make_subhedge(SubVariant variant, const BarrierPair& b,
                             double spot, double k1 = 0.0, double k2 = 0.0,
                             std::optional<double> k3 = std::nullopt);

// Terminal payoff of the blueprint on the outcome, including any triggered
// forwards and the digital conventions (strictly-above at lb, at-or-above
// at ub).
double evaluate_payoff(const HedgeBlueprint& blueprint,
                       const PathOutcome& outcome);

// Signed slack of the defining inequality: payoff - indicator for
// superhedges, indicator - payoff for subhedges. Throws InequalityViolated
// when a superhedge slack is below -1e-12 (subhedges may violate on jump
// outcomes; callers decide how to treat those).
double check_pathwise(const HedgeBlueprint& blueprint,
                      const PathOutcome& outcome);

// Initial premium of the blueprint: static legs at curve prices, forwards
// free.
double static_cost(const HedgeBlueprint& blueprint, const CallCurve& curve);

// JSON round trip used by the hedge-plan command.
std::string blueprint_to_json(const HedgeBlueprint& blueprint);
HedgeBlueprint blueprint_from_json(const std::string& text);

}  // namespace rb

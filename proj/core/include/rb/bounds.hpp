#pragma once
// Case classification and optimal price bounds. For each barrier pair the
// upper bound picks exactly one of the four superhedges and the lower bound
// exactly one of the three subhedges (or the trivial zero hedge); the case
// conditions are re-verified after classification and any disagreement is
// surfaced as ClassificationAmbiguous rather than silently resolved.

#include <map>
#include <stdexcept>
#include <string>

#include "rb/barycentre.hpp"
#include "rb/hedges.hpp"
#include "rb/market_input.hpp"

namespace rb {

struct ClassificationAmbiguous : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class BoundSide { Upper, Lower };
enum class CaseLabel { I, II, III, IV };

std::string case_name(CaseLabel label);

struct Classification {
  CaseLabel label = CaseLabel::I;
  // upper: "z0"/"w0" and the optimal strikes "k", "k1".."k4";
  // lower: "v0", "k1", "k2", "k3" (absent for case IV).
  std::map<std::string, double> params;
};

struct PriceBound {
  BoundSide side = BoundSide::Upper;
  CaseLabel label = CaseLabel::I;
  std::map<std::string, double> params;
  double value = 0.0;
  HedgeBlueprint blueprint;
};

// Decides which superhedge family is optimal and locates its parameters.
Classification classify_upper(const ImpliedLaw& law, const BarrierPair& b);

// Decides which subhedge family is optimal; case IV is the zero subhedge.
Classification classify_lower(const ImpliedLaw& law, const BarrierPair& b);

// Optimal superhedge cost. The reported value is the static cost of the
// optimal blueprint and is cross-checked against a strike grid over all
// four superhedge families.
PriceBound upper_bound(const ImpliedLaw& law, const CallCurve& curve,
                       const BarrierPair& b);

// Optimal subhedge value, cross-checked against a strike grid over the
// three subhedge families.
PriceBound lower_bound(const ImpliedLaw& law, const CallCurve& curve,
                       const BarrierPair& b);

// Exposed for the exclusivity property test: whether each case's defining
// conditions hold at tolerance. Exactly one entry should be true.
struct CaseConditions {
  bool holds[4] = {false, false, false, false};
  int count() const {
    return (holds[0] ? 1 : 0) + (holds[1] ? 1 : 0) + (holds[2] ? 1 : 0) +
           (holds[3] ? 1 : 0);
  }
};

CaseConditions upper_case_conditions(const ImpliedLaw& law,
                                     const BarrierPair& b);
CaseConditions lower_case_conditions(const ImpliedLaw& law,
                                     const BarrierPair& b);

}  // namespace rb

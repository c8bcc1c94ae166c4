#include "rb/hedges.hpp"

#include <cmath>

#include "json.hpp"

namespace rb {

namespace {

using nlohmann::json;

void require(bool cond, const char* msg) {
  if (!cond) throw StrikeOrdering(msg);
}

Leg call_leg(double k, double q) { return {Leg::Kind::Call, k, q}; }
Leg put_leg(double k, double q) { return {Leg::Kind::Put, k, q}; }
Leg cash_leg(double q) { return {Leg::Kind::Cash, 0.0, q}; }

// K3 threshold shared by subhedge variants II/III: the intersection of the
// chords (lb,0)-(K1,1) and (K2,1)-(ub,0) projected onto the barrier gap.
double k3_threshold(const BarrierPair& b, double k1, double k2) {
  const double a = k1 - b.lb;
  const double c = b.ub - k2;
  return (b.ub * a + b.lb * c) / (a + c);
}

}  // namespace

// ---------------------------------------------------------------------------
// Outcomes and events
// ---------------------------------------------------------------------------

int double_touch_indicator(const PathOutcome& outcome) {
  return (outcome.hit_lb && outcome.hit_ub) ? 1 : 0;
}

bool event_fired(TriggerEvent event, const PathOutcome& o) {
  switch (event) {
    case TriggerEvent::None:
      return true;
    case TriggerEvent::UbFirst:
      return o.hit_ub && o.first == FirstHit::UbFirst;
    case TriggerEvent::LbFirst:
      return o.hit_lb && o.first == FirstHit::LbFirst;
    case TriggerEvent::UbThenLb:
      return o.hit_ub && o.hit_lb && o.first == FirstHit::UbFirst;
    case TriggerEvent::LbThenUb:
      return o.hit_ub && o.hit_lb && o.first == FirstHit::LbFirst;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Superhedges
// ---------------------------------------------------------------------------

HedgeBlueprint make_superhedge(SuperVariant variant, const BarrierPair& b,
                               double spot, const std::vector<double>& ks) {
  require(b.lb > 0.0 && b.lb < b.ub, "superhedge: need 0 < lb < ub");
  HedgeBlueprint h;
  h.side = HedgeSide::Super;
  h.barriers = b;
  h.strikes = ks;

  switch (variant) {
    case SuperVariant::I: {
      require(ks.size() == 1 && ks[0] > b.lb, "superhedge I: need one strike K > lb");
      const double k = ks[0];
      const double a = 1.0 / (k - b.lb);
      h.variant = "I";
      h.coeffs = {{"alpha", a}, {"beta", a}};
      h.static_legs.legs = {put_leg(k, a)};
      // forward bought whenever lb is hit, in either order
      h.triggers = {{TriggerEvent::LbFirst, b.lb, a},
                    {TriggerEvent::UbThenLb, b.lb, a}};
      break;
    }
    case SuperVariant::II: {
      require(ks.size() == 1 && ks[0] < b.ub && ks[0] >= 0.0,
              "superhedge II: need one strike K < ub");
      const double k = ks[0];
      const double a = 1.0 / (b.ub - k);
      h.variant = "II";
      h.coeffs = {{"alpha", a}, {"beta", a}};
      h.static_legs.legs = {call_leg(k, a)};
      h.triggers = {{TriggerEvent::UbFirst, b.ub, -a},
                    {TriggerEvent::LbThenUb, b.ub, -a}};
      break;
    }
    case SuperVariant::III: {
      require(ks.size() == 4, "superhedge III: need four strikes");
      const double k1 = ks[0], k2 = ks[1], k3 = ks[2], k4 = ks[3];
      require(0.0 < k4 && k4 < b.lb && b.lb < k3 && k3 < k2 && k2 < b.ub &&
                  b.ub < k1,
              "superhedge III: need 0 < K4 < lb < K3 < K2 < ub < K1");
      const double den = (k1 - k2) * (k3 - k4) * (b.ub - b.lb) * (b.ub - b.lb) -
                         (k3 - b.lb) * (k1 - b.ub) * (b.ub - k2) * (b.lb - k4);
      if (std::fabs(den) < 1e-14)
        throw SingularSystem("superhedge III: coefficient system singular");
      const double a3 = ((k1 - k2) * (b.lb - k4) * (b.ub - b.lb) -
                         (k1 - b.ub) * (b.ub - k2) * (b.lb - k4)) /
                        den;
      const double common = 1.0 - a3 * (k3 - k4) / (b.lb - k4) * (b.ub - b.lb);
      const double a1 = common / (k1 - b.ub);
      const double a2 = common / (b.ub - k2);
      const double a4 = a3 * (k3 - b.lb) / (b.lb - k4);
      const double b1 = a1 + a2;
      const double b2 = a3 + a4;
      const double b3 = a3 + b1;
      const double b4 = a2 + b2;
      // plug the solution back into all six defining constraints
      const double res[6] = {
          a1 + a2 - b1,
          a2 * (k1 - k2) - b1 * (k1 - b.ub),
          a3 * (k3 - b.lb) - b1 * (b.lb - b.ub) - 1.0,
          a3 + a4 - b2,
          a3 * (k3 - k4) + b2 * (k4 - b.lb),
          a2 * (b.ub - k2) + b2 * (b.ub - b.lb) - 1.0,
      };
      for (double r : res)
        if (std::fabs(r) > 1e-12)
          throw SingularSystem("superhedge III: constraint residual too large");
      h.variant = "III";
      h.coeffs = {{"alpha1", a1}, {"alpha2", a2}, {"alpha3", a3},
                  {"alpha4", a4}, {"beta1", b1},  {"beta2", b2},
                  {"beta3", b3},  {"beta4", b4}};
      h.static_legs.legs = {call_leg(k1, a1), call_leg(k2, a2), put_leg(k3, a3),
                            put_leg(k4, a4)};
      h.triggers = {{TriggerEvent::UbFirst, b.ub, -b1},
                    {TriggerEvent::LbFirst, b.lb, b2},
                    {TriggerEvent::UbThenLb, b.lb, b3},
                    {TriggerEvent::LbThenUb, b.ub, -b4}};
      break;
    }
    case SuperVariant::IV: {
      require(ks.size() == 2, "superhedge IV: need two strikes");
      const double k1 = ks[0], k2 = ks[1];
      require(0.0 < k2 && k2 < b.lb && b.ub < k1,
              "superhedge IV: need 0 < K2 < lb < ub < K1");
      const double a1 = 1.0 / (k1 - b.lb);
      const double a2 = 1.0 / (b.ub - k2);
      const double a3 = ((k1 - b.lb) - (b.ub - k2)) / ((k1 - b.lb) * (b.ub - k2));
      const double a4 =
          (b.lb * b.ub - k1 * k2) / ((k1 - b.lb) * (b.ub - k2)) + a3 * spot;
      h.variant = "IV";
      h.coeffs = {{"alpha1", a1}, {"alpha2", a2},        {"alpha3", a3},
                  {"alpha4", a4}, {"beta1", a2},         {"beta2", a1},
                  {"beta3", a1},  {"beta4", a2}};
      h.static_legs.legs = {call_leg(k1, a1), put_leg(k2, a2),
                            {Leg::Kind::Forward, spot, a3}, cash_leg(a4)};
      h.triggers = {{TriggerEvent::UbFirst, b.ub, -a2},
                    {TriggerEvent::LbFirst, b.lb, a1},
                    {TriggerEvent::UbThenLb, b.lb, a1},
                    {TriggerEvent::LbThenUb, b.ub, -a2}};
      break;
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Subhedges
// ---------------------------------------------------------------------------

namespace {

struct SubCoeffs {
  double a0, a1, a2, a3, k3, g1, g2;
};

HedgeBlueprint assemble_subhedge(const BarrierPair& b, double spot,
                                 const SubCoeffs& c, double k1, double k2,
                                 const std::string& variant) {
  HedgeBlueprint h;
  h.side = HedgeSide::Sub;
  h.variant = variant;
  h.barriers = b;
  h.strikes = {k1, k2, c.k3};
  h.coeffs = {{"alpha0", c.a0}, {"alpha1", c.a1}, {"alpha2", c.a2},
              {"alpha3", c.a3}, {"gamma1", c.g1}, {"gamma2", c.g2},
              {"k3", c.k3}};
  h.static_legs.legs = {
      cash_leg(c.a0),
      {Leg::Kind::Forward, spot, c.a1},
      call_leg(k2, -c.a2),
      call_leg(b.lb, c.a3),
      call_leg(c.k3, -c.a3),
      call_leg(b.ub, c.a3),
      call_leg(k1, -(c.a3 - c.a2)),
      {Leg::Kind::DigitalGt, b.lb, -c.g1},
      {Leg::Kind::DigitalGeq, b.ub, c.g2},
  };
  h.triggers = {
      {TriggerEvent::LbFirst, b.lb, c.a2 - c.a1},
      {TriggerEvent::LbThenUb, b.ub, -c.a2},
      {TriggerEvent::UbFirst, b.ub, -(c.a3 - c.a2 + c.a1)},
      {TriggerEvent::UbThenLb, b.lb, c.a3 - c.a2},
  };
  return h;
}

}  // namespace

HedgeBlueprint make_subhedge(SubVariant variant, const BarrierPair& b,
                             double spot, double k1, double k2,
                             std::optional<double> k3_in) {
  if (variant == SubVariant::Zero) {
    HedgeBlueprint h;
    h.side = HedgeSide::Zero;
    h.variant = "zero";
    h.barriers = b;
    return h;
  }
  require(0.0 < k2 && k2 < b.lb && b.lb < spot && spot < b.ub && b.ub < k1,
          "subhedge: need 0 < K2 < lb < S0 < ub < K1");
  SubCoeffs c{};
  switch (variant) {
    case SubVariant::I: {
      const double den = (b.ub - k2) * (k1 - b.lb);
      c.a0 = (spot * (k1 + k2 - b.ub - b.lb) + b.ub * b.lb - k1 * k2) / den;
      c.a1 = (k1 + k2 - b.ub - b.lb) / den;
      c.a2 = 1.0 / (b.ub - k2);
      c.a3 = (b.ub - k2 + k1 - b.lb) / den;
      c.k3 = (b.ub * k1 - b.lb * k2) / (b.ub - k2 - b.lb + k1);
      c.g1 = (b.ub - b.lb) / (b.ub - k2);
      c.g2 = (b.ub - b.lb) / (k1 - b.lb);
      return assemble_subhedge(b, spot, c, k1, k2, "I");
    }
    case SubVariant::II: {
      if (!k3_in) throw StrikeOrdering("subhedge II: K3 required");
      const double k3 = *k3_in;
      require(b.lb < k3 && k3 < b.ub, "subhedge II: need K3 in (lb, ub)");
      if (k3 > k3_threshold(b, k1, k2) + 1e-12)
        throw ThresholdSide("subhedge II: K3 above the chord threshold");
      const double den = (b.ub - b.lb) * (k1 - k3) * (b.ub - k2);
      c.a0 = ((b.ub * b.lb + spot * k3) * (k1 - k2) -
              (b.lb * k1 + spot * b.ub) * (k3 - k2) -
              (b.ub * k2 + spot * b.lb) * (k1 - k3)) /
             den;
      c.a1 = (k3 * (k1 - k2) - b.lb * (k1 - k3) - b.ub * (k3 - k2)) / den;
      c.a2 = 1.0 / (b.ub - k2);
      c.a3 = (k1 - k2) / ((k1 - k3) * (b.ub - k2));
      c.k3 = k3;
      c.g1 = (k3 - b.lb) * (k1 - k2) / ((b.ub - k2) * (k1 - k3));
      c.g2 = (b.ub - k3) * (k1 - k2) / ((b.ub - k2) * (k1 - k3));
      return assemble_subhedge(b, spot, c, k1, k2, "II");
    }
    case SubVariant::III: {
      if (!k3_in) throw StrikeOrdering("subhedge III: K3 required");
      const double k3 = *k3_in;
      require(b.lb < k3 && k3 < b.ub, "subhedge III: need K3 in (lb, ub)");
      if (k3 < k3_threshold(b, k1, k2) - 1e-12)
        throw ThresholdSide("subhedge III: K3 below the chord threshold");
      const double den = (b.ub - b.lb) * (k3 - k2) * (k1 - b.lb);
      c.a0 = ((b.ub * b.lb + spot * k3) * (k1 - k2) -
              (b.lb * k1 + spot * b.ub) * (k3 - k2) -
              (b.ub * k2 + spot * b.lb) * (k1 - k3)) /
             den;
      c.a1 = (k3 * (k1 - k2) - b.lb * (k1 - k3) - b.ub * (k3 - k2)) / den;
      c.a2 = (k1 - k3) / ((k3 - k2) * (k1 - b.lb));
      c.a3 = (k1 - k2) / ((k3 - k2) * (k1 - b.lb));
      c.k3 = k3;
      c.g1 = (k3 - b.lb) * (k1 - k2) / ((k3 - k2) * (k1 - b.lb));
      c.g2 = (b.ub - k3) * (k1 - k2) / ((k3 - k2) * (k1 - b.lb));
      return assemble_subhedge(b, spot, c, k1, k2, "III");
    }
    default:
      throw StrikeOrdering("subhedge: unknown variant");
  }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

double evaluate_payoff(const HedgeBlueprint& h, const PathOutcome& o) {
  const double s = o.terminal;
  double total = 0.0;
  for (const Leg& leg : h.static_legs.legs) {
    switch (leg.kind) {
      case Leg::Kind::Call:
        total += leg.qty * std::max(s - leg.param, 0.0);
        break;
      case Leg::Kind::Put:
        total += leg.qty * std::max(leg.param - s, 0.0);
        break;
      case Leg::Kind::Cash:
        total += leg.qty;
        break;
      case Leg::Kind::DigitalGeq:
        total += leg.qty * (s >= leg.param ? 1.0 : 0.0);
        break;
      case Leg::Kind::DigitalGt:
        total += leg.qty * (s > leg.param ? 1.0 : 0.0);
        break;
      case Leg::Kind::Forward:
        total += leg.qty * (s - leg.param);
        break;
    }
  }
  for (const TriggerLeg& t : h.triggers) {
    if (!event_fired(t.event, o)) continue;
    double entry = t.strike;
    // jumps across a barrier execute the forward at the post-jump price
    if (t.strike == h.barriers.lb && !std::isnan(o.exec_lb)) entry = o.exec_lb;
    if (t.strike == h.barriers.ub && !std::isnan(o.exec_ub)) entry = o.exec_ub;
    total += t.qty * (s - entry);
  }
  return total;
}

double check_pathwise(const HedgeBlueprint& h, const PathOutcome& o) {
  const double payoff = evaluate_payoff(h, o);
  const double indicator = double_touch_indicator(o);
  const double slack = (h.side == HedgeSide::Super) ? payoff - indicator
                                                    : indicator - payoff;
  if (h.side == HedgeSide::Super && slack < -1e-12)
    throw InequalityViolated("superhedge payoff below the indicator at S_T = " +
                             std::to_string(o.terminal));
  return slack;
}

double static_cost(const HedgeBlueprint& h, const CallCurve& curve) {
  return price_static(curve, h.static_legs);
}

// ---------------------------------------------------------------------------
// JSON round trip
// ---------------------------------------------------------------------------

namespace {

const char* kind_name(Leg::Kind k) {
  switch (k) {
    case Leg::Kind::Call: return "call";
    case Leg::Kind::Put: return "put";
    case Leg::Kind::Cash: return "cash";
    case Leg::Kind::DigitalGeq: return "digital_geq";
    case Leg::Kind::DigitalGt: return "digital_gt";
    case Leg::Kind::Forward: return "forward";
  }
  return "?";
}

Leg::Kind kind_from(const std::string& s) {
  if (s == "call") return Leg::Kind::Call;
  if (s == "put") return Leg::Kind::Put;
  if (s == "cash") return Leg::Kind::Cash;
  if (s == "digital_geq") return Leg::Kind::DigitalGeq;
  if (s == "digital_gt") return Leg::Kind::DigitalGt;
  if (s == "forward") return Leg::Kind::Forward;
  throw DomainError("blueprint json: unknown leg kind " + s);
}

const char* event_name(TriggerEvent e) {
  switch (e) {
    case TriggerEvent::None: return "none";
    case TriggerEvent::UbFirst: return "ub_first";
    case TriggerEvent::LbFirst: return "lb_first";
    case TriggerEvent::UbThenLb: return "ub_then_lb";
    case TriggerEvent::LbThenUb: return "lb_then_ub";
  }
  return "?";
}

TriggerEvent event_from(const std::string& s) {
  if (s == "none") return TriggerEvent::None;
  if (s == "ub_first") return TriggerEvent::UbFirst;
  if (s == "lb_first") return TriggerEvent::LbFirst;
  if (s == "ub_then_lb") return TriggerEvent::UbThenLb;
  if (s == "lb_then_ub") return TriggerEvent::LbThenUb;
  throw DomainError("blueprint json: unknown event " + s);
}

const char* side_name(HedgeSide s) {
  switch (s) {
    case HedgeSide::Super: return "super";
    case HedgeSide::Sub: return "sub";
    case HedgeSide::Zero: return "zero";
  }
  return "?";
}

}  // namespace

std::string blueprint_to_json(const HedgeBlueprint& h) {
  json j;
  j["side"] = side_name(h.side);
  j["variant"] = h.variant;
  j["barriers"] = {{"lb", h.barriers.lb}, {"ub", h.barriers.ub}};
  j["strikes"] = h.strikes;
  j["coeffs"] = h.coeffs;
  j["legs"] = json::array();
  for (const Leg& leg : h.static_legs.legs)
    j["legs"].push_back(
        {{"kind", kind_name(leg.kind)}, {"param", leg.param}, {"qty", leg.qty}});
  j["triggers"] = json::array();
  for (const TriggerLeg& t : h.triggers)
    j["triggers"].push_back(
        {{"event", event_name(t.event)}, {"strike", t.strike}, {"qty", t.qty}});
  return j.dump(2);
}

HedgeBlueprint blueprint_from_json(const std::string& text) {
  const json j = json::parse(text);
  HedgeBlueprint h;
  const std::string side = j.at("side");
  h.side = side == "super" ? HedgeSide::Super
           : side == "sub" ? HedgeSide::Sub
                           : HedgeSide::Zero;
  h.variant = j.at("variant");
  h.barriers.lb = j.at("barriers").at("lb");
  h.barriers.ub = j.at("barriers").at("ub");
  h.strikes = j.at("strikes").get<std::vector<double>>();
  for (const auto& [key, val] : j.at("coeffs").items())
    h.coeffs[key] = val.get<double>();
  for (const auto& leg : j.at("legs"))
    h.static_legs.legs.push_back(
        {kind_from(leg.at("kind")), leg.at("param"), leg.at("qty")});
  for (const auto& t : j.at("triggers"))
    h.triggers.push_back(
        {event_from(t.at("event")), t.at("strike"), t.at("qty")});
  return h;
}

}  // namespace rb

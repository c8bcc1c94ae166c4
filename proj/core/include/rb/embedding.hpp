#pragma once
// Extremal market models: composed Skorokhod-embedding stages on a Brownian
// path that attain the computed price bounds. A model is a small stage
// graph. Each stage stops the path in a discrete target law, either by an
// exact two-level hit or by an Azema-Yor rule (running max against the
// tail-mean threshold; the reversed rule uses the running min against the
// prefix mean). Designated target atoms hand the path on to a follow-up
// stage. Simulating the model yields terminal samples distributed as the
// market-implied law together with barrier-touch flags, which is how
// tightness of the bounds is verified.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rb/bounds.hpp"

namespace rb {

struct StageMassNegative : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ZStarNotFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CenterMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HorizonExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Discrete laws and stopping rules
// ---------------------------------------------------------------------------

// A finite measure given by atoms sorted by position. Stage targets are
// normalised to probability one; restrictions of the implied law keep their
// raw mass until attached to a stage.
struct DiscreteLaw {
  std::vector<Atom> atoms;

  double mass() const;
  double mean() const;
};

// Restriction of the law to a union of half-open intervals (a, b],
// discretised on a fixed grid aligned with the recomposition mesh. Interval
// ends and the supplied cut points split cells exactly, so masses and first
// moments of the pieces are preserved to rounding. Pass a lower end below
// the support bottom to include any mass at the bottom edge.
DiscreteLaw discretize_restriction(const ImpliedLaw& law,
                                   const std::vector<Interval>& parts,
                                   const std::vector<double>& cuts = {});

// Index of the atom at exactly x; throws DomainError when absent.
std::size_t find_atom(const DiscreteLaw& law, double x);

struct StoppingRule {
  enum class Kind { HitTwoLevels, AzemaYor, ReversedAzemaYor };

  Kind kind = Kind::AzemaYor;
  double start = 0.0;
  DiscreteLaw target;  // probability law the rule embeds
  // One threshold per atom. Azema-Yor: the mean of the target on
  // [atom, top] (non-decreasing); the rule stops at atom i once the running
  // max reaches threshold[i+1] .. is not yet reached, i.e. the path stops at
  // the largest atom whose threshold the max has passed. Reversed rule:
  // prefix means against the running min. Unused for two-level hits.
  std::vector<double> threshold;
};

// Builds the Azema-Yor rule for a probability target centred at start.
// Throws CenterMismatch when the target mean differs from start.
StoppingRule ay_rule(const DiscreteLaw& target, double start);

// The mirror rule driven by the running minimum, used when embedding from
// above the bulk of the target.
StoppingRule reversed_ay_rule(const DiscreteLaw& target, double start);

// Exact first exit from (lo, hi): two-point target with the martingale
// hit probabilities.
StoppingRule hit_two_levels_rule(double lo, double hi, double start);

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

struct Stage {
  StoppingRule rule;
  double weight = 0.0;                 // probability of entering the stage
  std::map<std::size_t, int> next;     // target atom index -> next stage
  std::string name;
};

struct ExtremalModel {
  BoundSide side = BoundSide::Upper;
  CaseLabel label = CaseLabel::I;
  BarrierPair barriers;
  double spot = 0.0;
  double scale = 0.0;  // price scale used to rescale the Brownian clock
  ImpliedLaw law;      // the law the model recomposes; kept for diagnostics
  std::vector<Stage> stages;  // stage 0 is the root
  std::map<std::string, double> params;
};

// Builds the bound-attaining model for the classified case. Build-time
// invariants: every stage target is a probability law centred at its start
// level (CenterMismatch), stage masses are non-negative (StageMassNegative)
// and the weighted terminal atoms recompose the implied law within 1e-6
// total variation on a 500-bin mesh.
ExtremalModel build_upper_extremal(const ImpliedLaw& law, const BarrierPair& b,
                                   const Classification& cls);

// Lower-side models: cases I-III attain the subhedge value; case IV builds
// an embedding in which no path touches both barriers. ZStarNotFound
// signals a failed interior-cut bisection in the splitting stages.
ExtremalModel build_lower_extremal(const ImpliedLaw& law, const BarrierPair& b,
                                   const Classification& cls);

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

struct SimulationResult {
  std::vector<PathOutcome> outcomes;
  std::vector<double> stage_visits;  // empirical entry fraction per stage
  double touch_fraction = 0.0;       // mean double-touch indicator
  std::size_t n_paths = 0;
  std::size_t restarts = 0;          // always 0 with the exact sampler
};

// Simulates n_paths through the stage graph by exact first-passage
// sampling: the Brownian path is observed only at its decision levels (the
// current stop atom, the next running-extreme threshold and any untouched
// barrier in between) and moves between adjacent levels with the
// martingale hit probabilities. Stopped laws, barrier flags and first-hit
// order are exact; dt is accepted for interface stability but does not
// enter the path law. Deterministic given seed: every path derives its own
// generator from (seed, index), so results do not depend on the thread
// count (ROBUST_BARRIERS_THREADS overrides the default). HorizonExceeded
// guards against a non-terminating stage walk, which indicates an
// inconsistent model.
SimulationResult simulate(const ExtremalModel& model, std::size_t n_paths,
                          double dt = 1e-5, std::uint64_t seed = 1);

// Kolmogorov-Smirnov distance between the terminal samples and the law.
double ks_terminal(const std::vector<PathOutcome>& outcomes,
                   const ImpliedLaw& law);

struct TightnessReport {
  double mc_estimate = 0.0;
  double std_err = 0.0;
  double bound_value = 0.0;
  double ks = 0.0;
  bool pass = false;
};

// Monte Carlo check that the model attains the bound:
// pass iff |mc - bound| <= 3 * std_err + 0.005.
TightnessReport verify_tightness(const ExtremalModel& model,
                                 const PriceBound& bound, std::size_t n_paths,
                                 std::uint64_t seed = 1);

}  // namespace rb

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "metatutor/domain.hpp"

namespace metatutor {

using Rng = std::mt19937_64;

enum class Strategy : std::uint8_t { FC = 0, BC = 1 };
std::string_view strategy_name(Strategy s);

enum class SwitchTiming : std::uint8_t { Early, Late, NoSwitch };

/// Switches to BC within the first kEarlySwitchLimit actions are early.
inline constexpr int kEarlySwitchLimit = 30;

/// Throws Error for an index below 1.
SwitchTiming classify_switch(std::optional<int> switch_action_index);

// ---------------------------------------------------------------------------
// Curriculum
// ---------------------------------------------------------------------------

enum class SlotKind : std::uint8_t { Pretest, Training, WorkedExample, EvaluationOnly, Posttest };
std::string_view slot_kind_name(SlotKind k);

struct Curriculum {
  static constexpr int pretest_count = 2;
  static constexpr int levels = kLevels;
  static constexpr int problems_per_level = kProblemsPerLevel;
  static constexpr int posttest_count = 6;
  static constexpr int isomorphic_posttest_count = 2;

  /// Training slots replaced by BC worked examples; must not be last-of-level.
  std::vector<int> worked_example_slots = {0, 1};
  /// Post-test problems demand this many times the reference time and length.
  double posttest_difficulty = 1.5;
  /// Reference solution length (actions) per training level.
  std::array<double, kLevels> ref_len_by_level = {30, 35, 40, 45, 50};
  double pretest_ref_len = 35;
  double posttest_ref_len = 40;

  static constexpr int training_count() { return levels * problems_per_level; }
  static constexpr bool is_evaluation_only(int slot) {
    return slot % problems_per_level == problems_per_level - 1;
  }
  bool is_worked_example(int slot) const;
  SlotKind kind_of(int slot) const;
  double ref_len(int slot) const;
  std::vector<int> decision_points() const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// Nudge delay
// ---------------------------------------------------------------------------

struct LogNormalDelay {
  double mu = 4.0943445622221;  // ln 60
  double sigma = 0.5;
};
struct PointMassDelay {
  double seconds = 45.0;
};
struct EmpiricalDelay {
  std::vector<double> values;
  std::vector<double> weights;
};
using DelayDistribution = std::variant<LogNormalDelay, PointMassDelay, EmpiricalDelay>;

void validate_delay(const DelayDistribution& dist);
double sample_nudge_delay(const DelayDistribution& dist, Rng& rng);

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

struct ScoreWeights {
  double accuracy = 0.5;
  double time = 0.25;
  double length = 0.25;
};

/// 100 * (w_a * accuracy + w_t * min(1, ref_time/time) + w_l * min(1, ref_len/len)).
double score_problem(double accuracy, double time_s, double solution_len, double ref_time_s,
                     double ref_len, const ScoreWeights& w = {});

// ---------------------------------------------------------------------------
// Students
// ---------------------------------------------------------------------------

struct StudentProfile {
  MetacognitiveGroup group = MetacognitiveGroup::Declarative;
  double p_early_switch_spontaneous = 0.0;
  double p_late_switch_spontaneous = 0.0;
  double p_comply_nudge = 0.0;
  double p_comply_present = 0.0;
  double skill_fc = 0.5;
  double skill_bc = 0.5;
  double learning_rate = 0.0;
  double noise_sd = 0.0;

  void validate() const;
  friend bool operator==(const StudentProfile&, const StudentProfile&) = default;
};

StudentProfile default_profile(MetacognitiveGroup g);

/// Constants of the strategy and score dynamics shared by every student.
struct BehaviorModel {
  double seconds_per_action = 5.0;
  /// FC solutions are this many times longer than BC at equal skill.
  double fc_overhead = 2.0;
  /// skill_fc grows by learning_rate * fc_learning_scale per FC problem.
  double fc_learning_scale = 0.25;
  /// Expected hints per 10 actions at zero skill (training only).
  double hint_rate = 0.8;
  double seconds_per_hint = 10.0;
  /// Log-sd of per-problem pace variation.
  double pace_sd = 0.1;
  /// Actions after the late threshold within which a late switch happens.
  int late_switch_window = 20;
  ScoreWeights score_weights;
  DelayDistribution nudge_delay = LogNormalDelay{};
};

struct TutorConfig {
  Curriculum curriculum;
  BehaviorModel behavior;
};

struct ProblemOutcome {
  SlotKind kind = SlotKind::Training;
  int slot = 0;  // training slot, or position within pre/post-test
  double score = 0.0;
  Strategy strategy_used = Strategy::FC;
  std::optional<int> switch_action_index;  // switch to BC
  int action_count = 1;
  double time_s = 1.0;
  double ref_time_s = 1.0;
  double ref_len = 1.0;
  int hints = 0;
  Action intervention = Action::NoIntervention;
  bool complied = false;

  friend bool operator==(const ProblemOutcome&, const ProblemOutcome&) = default;
};

/// Mutable state of one student working through the curriculum.
struct Session {
  std::string student_id;
  StudentProfile profile;  // skills evolve with practice
  TutorConfig config;
  std::vector<ProblemOutcome> pretest;
  std::vector<ProblemOutcome> training;
  std::vector<ProblemOutcome> posttest;
};

/// Solves one training slot; appends the outcome to session.training.
/// Throws Error for an intervention on an evaluation-only or worked-example
/// slot, or a slot out of order.
ProblemOutcome step_problem(Session& session, int slot, Action intervention, Rng& rng);

// ---------------------------------------------------------------------------
// Policies and curriculum runs
// ---------------------------------------------------------------------------

struct PolicyChoice {
  Action action = Action::NoIntervention;
  std::optional<std::array<double, kActionCount>> q_values;
};
using DecisionFn = std::function<PolicyChoice(const StudentState&)>;
/// Builds a per-student policy from a per-student seed.
using PolicyFactory = std::function<DecisionFn(std::uint64_t seed)>;

DecisionFn constant_policy(Action a);
DecisionFn uniform_random_policy(std::uint64_t seed);
PolicyFactory uniform_random_policy_factory();

struct DecisionPoint {
  int problem_index = 0;
  Action action = Action::NoIntervention;
  StudentState state;
  std::optional<std::array<double, kActionCount>> q_values;

  friend bool operator==(const DecisionPoint&, const DecisionPoint&) = default;
};

struct SessionLog {
  std::string student_id;
  std::string condition;  // cohort label, e.g. "DRL", "Ctrl", "CDL", "logged"
  StudentProfile profile;  // as at the start of the session
  std::vector<ProblemOutcome> pretest;
  std::vector<ProblemOutcome> training;
  std::vector<ProblemOutcome> posttest;
  std::vector<DecisionPoint> decisions;

  std::vector<double> pre_scores() const;
  std::vector<double> post_scores() const;
  const ProblemOutcome& training_outcome(int slot) const;

  /// Empty iff the log satisfies every SessionLog invariant.
  std::vector<std::string> violations(const Curriculum& c) const;

  friend bool operator==(const SessionLog&, const SessionLog&) = default;
};

SessionLog run_curriculum(const StudentProfile& profile, const DecisionFn& policy,
                          std::uint64_t seed, const TutorConfig& config = {},
                          std::string student_id = "s0", std::string condition = {});

// ---------------------------------------------------------------------------
// Cohorts and synthetic datasets
// ---------------------------------------------------------------------------

/// Group proportions in Declarative, Procedural, Conditional order.
using GroupMix = std::array<double, kGroupCount>;
inline constexpr GroupMix kDefaultMix = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

struct CohortOptions {
  TutorConfig tutor;
  /// Per-group profile replacements; unset groups use default_profile.
  std::array<std::optional<StudentProfile>, kGroupCount> profile_overrides;
  /// Per-student Gaussian jitter applied to skill_fc and skill_bc.
  double skill_jitter_sd = 0.05;
  std::string id_prefix = "s";
  std::string condition = "logged";
};

/// Exact per-group counts (largest remainder), in a seeded random order.
std::vector<MetacognitiveGroup> assign_groups(const GroupMix& mix, int n_students,
                                              std::uint64_t seed);

StudentProfile student_profile(MetacognitiveGroup g, const CohortOptions& options, Rng& rng);

/// One SessionLog per student; students are independent given the seed.
std::vector<SessionLog> simulate_cohort(const GroupMix& mix, int n_students,
                                        const PolicyFactory& policy, std::uint64_t seed,
                                        const CohortOptions& options = {});

/// Convenience overload for an explicit group roster.
std::vector<SessionLog> simulate_roster(const std::vector<MetacognitiveGroup>& roster,
                                        const PolicyFactory& policy, std::uint64_t seed,
                                        const CohortOptions& options = {});

/// One Transition per decision point; reward is the decision problem's score.
Dataset dataset_from_sessions(const std::vector<SessionLog>& sessions);

Dataset generate_synthetic_dataset(const GroupMix& mix, int n_students,
                                   const PolicyFactory& behavior_policy, std::uint64_t seed,
                                   const CohortOptions& options = {});

// ---------------------------------------------------------------------------
// State features
// ---------------------------------------------------------------------------

/// State observed just before training slot `slot`, from the session history.
StudentState build_state(const Session& session, int slot);

}  // namespace metatutor

#include "metatutor/tutor_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "metatutor/rule_miner.hpp"

namespace metatutor {

std::string_view strategy_name(Strategy s) { return s == Strategy::BC ? "BC" : "FC"; }

SwitchTiming classify_switch(std::optional<int> switch_action_index) {
  if (!switch_action_index) return SwitchTiming::NoSwitch;
  if (*switch_action_index < 1) {
    throw Error("switch action index must be >= 1, got " + std::to_string(*switch_action_index));
  }
  return *switch_action_index <= kEarlySwitchLimit ? SwitchTiming::Early : SwitchTiming::Late;
}

std::string_view slot_kind_name(SlotKind k) {
  switch (k) {
    case SlotKind::Pretest: return "pretest";
    case SlotKind::Training: return "training";
    case SlotKind::WorkedExample: return "worked_example";
    case SlotKind::EvaluationOnly: return "evaluation_only";
    case SlotKind::Posttest: return "posttest";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Curriculum

bool Curriculum::is_worked_example(int slot) const {
  return std::find(worked_example_slots.begin(), worked_example_slots.end(), slot) !=
         worked_example_slots.end();
}

SlotKind Curriculum::kind_of(int slot) const {
  if (slot < 0 || slot >= training_count()) {
    throw Error("training slot " + std::to_string(slot) + " out of range");
  }
  if (is_evaluation_only(slot)) return SlotKind::EvaluationOnly;
  if (is_worked_example(slot)) return SlotKind::WorkedExample;
  return SlotKind::Training;
}

double Curriculum::ref_len(int slot) const {
  return ref_len_by_level[static_cast<std::size_t>(level_of_slot(slot) - 1)];
}

std::vector<int> Curriculum::decision_points() const {
  std::vector<int> out;
  for (int slot = 0; slot < training_count(); ++slot) {
    if (kind_of(slot) == SlotKind::Training) out.push_back(slot);
  }
  return out;
}

void Curriculum::validate() const {
  std::vector<int> seen;
  for (int slot : worked_example_slots) {
    if (slot < 0 || slot >= training_count()) throw Error("worked-example slot out of range");
    if (is_evaluation_only(slot)) throw Error("worked-example slot on an evaluation-only slot");
    if (std::find(seen.begin(), seen.end(), slot) != seen.end()) {
      throw Error("duplicate worked-example slot");
    }
    seen.push_back(slot);
  }
  if (!(posttest_difficulty > 0.0)) throw Error("posttest difficulty must be positive");
  for (double r : ref_len_by_level)
    if (!(r >= 1.0)) throw Error("reference length must be >= 1");
  if (!(pretest_ref_len >= 1.0) || !(posttest_ref_len >= 1.0)) {
    throw Error("reference length must be >= 1");
  }
}

// ---------------------------------------------------------------------------
// Nudge delay

void validate_delay(const DelayDistribution& dist) {
  std::visit(
      [](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, LogNormalDelay>) {
          if (!std::isfinite(d.mu) || !(d.sigma >= 0.0) || !std::isfinite(d.sigma)) {
            throw Error("log-normal delay needs finite mu and sigma >= 0");
          }
        } else if constexpr (std::is_same_v<T, PointMassDelay>) {
          if (!(d.seconds > 0.0) || !std::isfinite(d.seconds)) {
            throw Error("point-mass delay must be positive and finite");
          }
        } else {
          if (d.values.empty() || d.values.size() != d.weights.size()) {
            throw Error("empirical delay needs matching nonempty values and weights");
          }
          double total = 0.0;
          for (std::size_t i = 0; i < d.values.size(); ++i) {
            if (!(d.values[i] > 0.0) || !std::isfinite(d.values[i])) {
              throw Error("empirical delay values must be positive and finite");
            }
            if (!(d.weights[i] >= 0.0) || !std::isfinite(d.weights[i])) {
              throw Error("empirical delay weights must be nonnegative");
            }
            total += d.weights[i];
          }
          if (!(total > 0.0)) throw Error("empirical delay weights sum to zero");
        }
      },
      dist);
}

double sample_nudge_delay(const DelayDistribution& dist, Rng& rng) {
  validate_delay(dist);
  return std::visit(
      [&rng](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, LogNormalDelay>) {
          if (d.sigma == 0.0) return std::exp(d.mu);
          return std::lognormal_distribution<double>(d.mu, d.sigma)(rng);
        } else if constexpr (std::is_same_v<T, PointMassDelay>) {
          return d.seconds;
        } else {
          std::discrete_distribution<std::size_t> pick(d.weights.begin(), d.weights.end());
          return d.values[pick(rng)];
        }
      },
      dist);
}

// ---------------------------------------------------------------------------
// Scoring

double score_problem(double accuracy, double time_s, double solution_len, double ref_time_s,
                     double ref_len, const ScoreWeights& w) {
  if (!(time_s > 0.0) || !(ref_time_s > 0.0)) throw Error("time must be positive");
  if (!(solution_len >= 1.0) || !(ref_len >= 1.0)) throw Error("solution length must be >= 1");
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw Error("accuracy must lie in [0,1]");
  return 100.0 * (w.accuracy * accuracy + w.time * std::min(1.0, ref_time_s / time_s) +
                  w.length * std::min(1.0, ref_len / solution_len));
}

// ---------------------------------------------------------------------------
// Profiles

void StudentProfile::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(std::string(name) + " must lie in [0,1]");
  };
  prob(p_early_switch_spontaneous, "p_early_switch_spontaneous");
  prob(p_late_switch_spontaneous, "p_late_switch_spontaneous");
  prob(p_comply_nudge, "p_comply_nudge");
  prob(p_comply_present, "p_comply_present");
  prob(skill_fc, "skill_fc");
  prob(skill_bc, "skill_bc");
  if (p_early_switch_spontaneous + p_late_switch_spontaneous > 1.0 + 1e-12) {
    throw Error("spontaneous switch probabilities sum above 1");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error("learning_rate must be >= 0");
  }
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw Error("noise_sd must be >= 0");
}

StudentProfile default_profile(MetacognitiveGroup g) {
  StudentProfile p;
  p.group = g;
  p.learning_rate = 0.03;
  p.noise_sd = 4.0;
  p.skill_fc = 0.6;
  switch (g) {
    case MetacognitiveGroup::Declarative:
      p.p_early_switch_spontaneous = 0.0;
      p.p_late_switch_spontaneous = 0.0;
      p.p_comply_nudge = 0.9;
      p.p_comply_present = 0.85;
      p.skill_bc = 0.5;
      break;
    case MetacognitiveGroup::Procedural:
      p.p_early_switch_spontaneous = 0.05;
      p.p_late_switch_spontaneous = 0.85;
      p.p_comply_nudge = 0.6;
      p.p_comply_present = 0.9;
      p.skill_bc = 0.55;
      break;
    case MetacognitiveGroup::Conditional:
      // Conditional students already know when to switch and tend to
      // overrule interventions.
      p.p_early_switch_spontaneous = 0.9;
      p.p_late_switch_spontaneous = 0.05;
      p.p_comply_nudge = 0.3;
      p.p_comply_present = 0.2;
      p.skill_bc = 0.65;
      break;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Problem solving

namespace {

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double gaussian(Rng& rng, double sd) {
  return sd > 0.0 ? std::normal_distribution<double>(0.0, sd)(rng) : 0.0;
}

int to_actions(double len) { return std::max(1, static_cast<int>(std::lround(len))); }

ProblemOutcome worked_example(const Session& s, int slot) {
  const auto& c = s.config.curriculum;
  ProblemOutcome o;
  o.kind = SlotKind::WorkedExample;
  o.slot = slot;
  o.ref_len = c.ref_len(slot);
  o.ref_time_s = o.ref_len * s.config.behavior.seconds_per_action;
  o.action_count = to_actions(o.ref_len);
  o.time_s = o.ref_time_s;
  o.strategy_used = Strategy::BC;
  o.score = score_problem(1.0, o.time_s, o.action_count, o.ref_time_s, o.ref_len,
                          s.config.behavior.score_weights);
  o.intervention = Action::NoIntervention;
  o.complied = encode_compliance(o.intervention, o) == Compliance::Agree;
  return o;
}

ProblemOutcome solve(Session& s, SlotKind kind, int slot, double ref_len, double difficulty,
                     Action intervention, Rng& rng) {
  const auto& b = s.config.behavior;
  auto& p = s.profile;

  const double fc_len = ref_len * difficulty * (2.0 - p.skill_fc) * b.fc_overhead;
  const double bc_len = ref_len * difficulty * (2.0 - p.skill_bc);

  enum class Path { FC, BCFromStart, SwitchToBC, RevertToFC };
  Path path = Path::FC;
  int k = 0;

  auto late_switch = [&] {
    const int idx = uniform_int(rng, kEarlySwitchLimit + 1, kEarlySwitchLimit + b.late_switch_window);
    if (idx < fc_len) {
      path = Path::SwitchToBC;
      k = idx;
    }
  };

  switch (intervention) {
    case Action::NoIntervention: {
      const double u = uniform01(rng);
      if (u < p.p_early_switch_spontaneous) {
        path = Path::SwitchToBC;
        k = uniform_int(rng, 1, kEarlySwitchLimit);
      } else if (u < p.p_early_switch_spontaneous + p.p_late_switch_spontaneous) {
        late_switch();
      }
      break;
    }
    case Action::Nudge: {
      const double delay = sample_nudge_delay(b.nudge_delay, rng);
      if (uniform01(rng) < p.p_comply_nudge) {
        path = Path::SwitchToBC;
        k = std::clamp(static_cast<int>(std::ceil(delay / b.seconds_per_action)), 1,
                       kEarlySwitchLimit);
      } else if (uniform01(rng) < p.p_late_switch_spontaneous) {
        late_switch();
      }
      break;
    }
    case Action::PresentBC: {
      if (uniform01(rng) < p.p_comply_present) {
        path = Path::BCFromStart;
      } else {
        path = Path::RevertToFC;
        k = uniform_int(rng, 1, kEarlySwitchLimit);
      }
      break;
    }
  }

  ProblemOutcome o;
  o.kind = kind;
  o.slot = slot;
  o.intervention = intervention;
  o.ref_len = ref_len;
  o.ref_time_s = ref_len * b.seconds_per_action;
  switch (path) {
    case Path::FC:
      o.strategy_used = Strategy::FC;
      o.action_count = to_actions(fc_len);
      break;
    case Path::BCFromStart:
      o.strategy_used = Strategy::BC;
      o.action_count = to_actions(bc_len);
      break;
    case Path::SwitchToBC:
      o.strategy_used = Strategy::BC;
      o.switch_action_index = k;
      o.action_count = k + to_actions(bc_len);
      break;
    case Path::RevertToFC:
      o.strategy_used = Strategy::FC;
      o.action_count = k + to_actions(fc_len);
      break;
  }

  const double accuracy = o.strategy_used == Strategy::BC ? p.skill_bc : p.skill_fc;
  const bool training = kind == SlotKind::Training || kind == SlotKind::EvaluationOnly;
  if (training) {
    const double lambda = b.hint_rate * (1.0 - accuracy) * o.action_count / 10.0;
    o.hints = lambda > 0.0 ? std::poisson_distribution<int>(lambda)(rng) : 0;
  }
  const double pace = std::exp(gaussian(rng, b.pace_sd));
  o.time_s = o.action_count * b.seconds_per_action * pace + o.hints * b.seconds_per_hint;

  const double raw = score_problem(accuracy, o.time_s, o.action_count, o.ref_time_s, o.ref_len,
                                   b.score_weights);
  o.score = std::clamp(raw + gaussian(rng, p.noise_sd), 0.0, 100.0);
  o.complied = encode_compliance(intervention, o) == Compliance::Agree;

  if (training) {
    if (o.strategy_used == Strategy::BC) {
      p.skill_bc = std::min(1.0, p.skill_bc + p.learning_rate);
    } else {
      p.skill_fc = std::min(1.0, p.skill_fc + p.learning_rate * b.fc_learning_scale);
    }
  }
  return o;
}

}  // namespace

ProblemOutcome step_problem(Session& session, int slot, Action intervention, Rng& rng) {
  const auto& c = session.config.curriculum;
  if (slot != std::ssize(session.training)) {
    throw Error("training slot " + std::to_string(slot) + " out of order (next is " +
                std::to_string(session.training.size()) + ")");
  }
  const SlotKind kind = c.kind_of(slot);
  if (kind != SlotKind::Training && intervention != Action::NoIntervention) {
    throw Error("intervention on a forbidden slot " + std::to_string(slot) + " (" +
                std::string(slot_kind_name(kind)) + ")");
  }
  ProblemOutcome o = kind == SlotKind::WorkedExample
                         ? worked_example(session, slot)
                         : solve(session, kind, slot, c.ref_len(slot), 1.0, intervention, rng);
  session.training.push_back(o);
  return o;
}

// ---------------------------------------------------------------------------
// Policies

DecisionFn constant_policy(Action a) {
  return [a](const StudentState&) { return PolicyChoice{a, std::nullopt}; };
}

DecisionFn uniform_random_policy(std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng](const StudentState&) {
    const int code = std::uniform_int_distribution<int>(0, kActionCount - 1)(*rng);
    return PolicyChoice{action_from_code(code), std::nullopt};
  };
}

PolicyFactory uniform_random_policy_factory() {
  return [](std::uint64_t seed) { return uniform_random_policy(seed); };
}

// ---------------------------------------------------------------------------
// Session logs

std::vector<double> SessionLog::pre_scores() const {
  std::vector<double> out;
  for (const auto& o : pretest) out.push_back(o.score);
  return out;
}

std::vector<double> SessionLog::post_scores() const {
  std::vector<double> out;
  for (const auto& o : posttest) out.push_back(o.score);
  return out;
}

const ProblemOutcome& SessionLog::training_outcome(int slot) const {
  for (const auto& o : training)
    if (o.slot == slot) return o;
  throw Error("session " + student_id + " has no outcome for slot " + std::to_string(slot));
}

std::vector<std::string> SessionLog::violations(const Curriculum& c) const {
  std::vector<std::string> v;
  if (pretest.size() != static_cast<std::size_t>(Curriculum::pretest_count)) {
    v.emplace_back("pretest count");
  }
  if (training.size() != static_cast<std::size_t>(Curriculum::training_count())) {
    v.emplace_back("training count");
  }
  if (posttest.size() != static_cast<std::size_t>(Curriculum::posttest_count)) {
    v.emplace_back("posttest count");
  }
  if (decisions.size() != static_cast<std::size_t>(kDecisionPoints)) {
    v.emplace_back("decision count " + std::to_string(decisions.size()));
  }
  const auto points = c.decision_points();
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const int p = decisions[i].problem_index;
    if (p < 0 || p >= Curriculum::training_count() || c.kind_of(p) != SlotKind::Training) {
      v.push_back("decision on non-decision slot " + std::to_string(p));
    } else if (i < points.size() && points[i] != p) {
      v.push_back("decision order at slot " + std::to_string(p));
    }
  }
  auto check_scores = [&v](const std::vector<ProblemOutcome>& os, const char* what) {
    for (const auto& o : os) {
      if (!(o.score >= 0.0 && o.score <= 100.0)) v.push_back(std::string(what) + " score range");
    }
  };
  check_scores(pretest, "pretest");
  check_scores(training, "training");
  check_scores(posttest, "posttest");
  for (const auto& o : training) {
    if (o.kind != SlotKind::Training && o.intervention != Action::NoIntervention) {
      v.push_back("intervention on forbidden slot " + std::to_string(o.slot));
    }
  }
  return v;
}

SessionLog run_curriculum(const StudentProfile& profile, const DecisionFn& policy,
                          std::uint64_t seed, const TutorConfig& config, std::string student_id,
                          std::string condition) {
  profile.validate();
  config.curriculum.validate();
  validate_delay(config.behavior.nudge_delay);

  Rng rng(seed);
  Session s{std::move(student_id), profile, config, {}, {}, {}};
  SessionLog log;
  log.student_id = s.student_id;
  log.condition = std::move(condition);
  log.profile = profile;

  const auto& c = config.curriculum;
  for (int i = 0; i < Curriculum::pretest_count; ++i) {
    s.pretest.push_back(
        solve(s, SlotKind::Pretest, i, c.pretest_ref_len, 1.0, Action::NoIntervention, rng));
  }
  for (int slot = 0; slot < Curriculum::training_count(); ++slot) {
    Action a = Action::NoIntervention;
    if (c.kind_of(slot) == SlotKind::Training) {
      StudentState state = build_state(s, slot);
      PolicyChoice choice = policy(state);
      a = choice.action;
      log.decisions.push_back({slot, a, std::move(state), choice.q_values});
    }
    step_problem(s, slot, a, rng);
  }
  for (int i = 0; i < Curriculum::posttest_count; ++i) {
    s.posttest.push_back(solve(s, SlotKind::Posttest, i, c.posttest_ref_len,
                               c.posttest_difficulty, Action::NoIntervention, rng));
  }
  log.pretest = std::move(s.pretest);
  log.training = std::move(s.training);
  log.posttest = std::move(s.posttest);
  return log;
}

// ---------------------------------------------------------------------------
// Cohorts

std::vector<MetacognitiveGroup> assign_groups(const GroupMix& mix, int n_students,
                                              std::uint64_t seed) {
  if (n_students < 1) throw Error("empty cohort");
  double total = 0.0;
  for (double p : mix) {
    if (!(p >= 0.0)) throw Error("group proportions must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error("group proportions must sum to 1");

  std::array<int, kGroupCount> counts{};
  std::array<double, kGroupCount> remainder{};
  int assigned = 0;
  for (std::size_t g = 0; g < kGroupCount; ++g) {
    const double exact = mix[g] * n_students;
    counts[g] = static_cast<int>(std::floor(exact));
    remainder[g] = exact - counts[g];
    assigned += counts[g];
  }
  std::array<std::size_t, kGroupCount> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n_students; i = (i + 1) % kGroupCount) {
    if (mix[order[i]] > 0.0) {
      ++counts[order[i]];
      ++assigned;
    }
  }

  std::vector<MetacognitiveGroup> roster;
  for (std::size_t g = 0; g < kGroupCount; ++g) roster.insert(roster.end(), counts[g], kAllGroups[g]);
  Rng rng(seed);
  std::shuffle(roster.begin(), roster.end(), rng);
  return roster;
}

StudentProfile student_profile(MetacognitiveGroup g, const CohortOptions& options, Rng& rng) {
  const auto& override_profile = options.profile_overrides[static_cast<std::size_t>(g)];
  StudentProfile p = override_profile ? *override_profile : default_profile(g);
  p.group = g;
  p.skill_fc = std::clamp(p.skill_fc + gaussian(rng, options.skill_jitter_sd), 0.0, 1.0);
  p.skill_bc = std::clamp(p.skill_bc + gaussian(rng, options.skill_jitter_sd), 0.0, 1.0);
  return p;
}

std::vector<SessionLog> simulate_roster(const std::vector<MetacognitiveGroup>& roster,
                                        const PolicyFactory& policy, std::uint64_t seed,
                                        const CohortOptions& options) {
  std::vector<SessionLog> logs;
  logs.reserve(roster.size());
  for (std::size_t i = 0; i < roster.size(); ++i) {
    const std::uint64_t student_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    Rng profile_rng(derive_seed(student_seed, "profile"));
    const StudentProfile profile = student_profile(roster[i], options, profile_rng);
    std::ostringstream id;
    id << options.id_prefix;
    id.width(4);
    id.fill('0');
    id << i + 1;
    logs.push_back(run_curriculum(profile, policy(derive_seed(student_seed, "policy")),
                                  derive_seed(student_seed, "session"), options.tutor, id.str(),
                                  options.condition));
  }
  return logs;
}

std::vector<SessionLog> simulate_cohort(const GroupMix& mix, int n_students,
                                        const PolicyFactory& policy, std::uint64_t seed,
                                        const CohortOptions& options) {
  return simulate_roster(assign_groups(mix, n_students, derive_seed(seed, "roster")), policy,
                         seed, options);
}

Dataset dataset_from_sessions(const std::vector<SessionLog>& sessions) {
  const auto& schema = default_feature_schema();
  std::vector<Transition> transitions;
  for (const auto& log : sessions) {
    for (std::size_t i = 0; i < log.decisions.size(); ++i) {
      const auto& d = log.decisions[i];
      Transition t;
      t.student_id = log.student_id;
      t.problem_index = d.problem_index;
      t.state = d.state;
      t.action = d.action;
      t.reward = log.training_outcome(d.problem_index).score;
      t.terminal = i + 1 == log.decisions.size();
      if (!t.terminal) t.next_state = log.decisions[i + 1].state;
      transitions.push_back(std::move(t));
    }
  }
  return Dataset(schema.id, schema.names, std::move(transitions));
}

Dataset generate_synthetic_dataset(const GroupMix& mix, int n_students,
                                   const PolicyFactory& behavior_policy, std::uint64_t seed,
                                   const CohortOptions& options) {
  return dataset_from_sessions(simulate_cohort(mix, n_students, behavior_policy, seed, options));
}

}  // namespace metatutor

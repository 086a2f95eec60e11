// State featurization for the logic tutor.
//
// Each solved problem is summarized by 12 base metrics; the state vector
// aggregates those metrics over history windows, adds intervention history
// and curriculum context. Layout (152 = 11 * 12 + 10 + 10):
//
//   pre1, pre2                 pretest problems
//   last1, last3, all.mean,    training history (worked examples excluded)
//   all.sd, eval, nudge,
//   present, none
//   trend                      all.mean - pretest mean
//   hist.*                     intervention counts and compliance
//   ctx.*                      level, position, streaks

#include <algorithm>
#include <cmath>

#include "metatutor/tutor_sim.hpp"

namespace metatutor {

namespace {

constexpr std::size_t kBaseMetrics = 12;
using Metrics = std::array<double, kBaseMetrics>;

struct BaseMetric {
  const char* name;
  FeatureFamily family;
};

constexpr std::array<BaseMetric, kBaseMetrics> kBase = {{
    {"time_ratio", FeatureFamily::Temporal},
    {"pace", FeatureFamily::Temporal},
    {"switch_point", FeatureFamily::Temporal},
    {"hint_time_share", FeatureFamily::Temporal},
    {"score", FeatureFamily::Accuracy},
    {"length_ratio", FeatureFamily::Accuracy},
    {"used_bc", FeatureFamily::Accuracy},
    {"early_switch", FeatureFamily::Accuracy},
    {"late_switch", FeatureFamily::Accuracy},
    {"hints", FeatureFamily::Hint},
    {"hint_density", FeatureFamily::Hint},
    {"any_hint", FeatureFamily::Hint},
}};

constexpr std::array<const char*, 11> kBlocks = {"pre1",  "pre2", "last1",   "last3",
                                                 "all.mean", "all.sd", "eval", "nudge",
                                                 "present", "none", "trend"};

constexpr std::array<const char*, 10> kHistory = {
    "hist.count_nudge",  "hist.count_present", "hist.count_none",   "hist.comply_nudge",
    "hist.comply_present", "hist.comply_none",  "hist.last_nudge",   "hist.last_present",
    "hist.last_none",    "hist.last_complied"};

constexpr std::array<const char*, 10> kContext = {
    "ctx.level1",   "ctx.level2",        "ctx.level3",        "ctx.level4",
    "ctx.level5",   "ctx.position_in_level", "ctx.progress",  "ctx.problems_seen",
    "ctx.bc_streak", "ctx.fc_streak"};

Metrics metrics_of(const ProblemOutcome& o, const BehaviorModel& b) {
  const double actions = static_cast<double>(o.action_count);
  const auto timing = classify_switch(o.switch_action_index);
  Metrics m{};
  m[0] = o.time_s / o.ref_time_s / 4.0;
  m[1] = (o.time_s / actions) / (o.ref_time_s / o.ref_len) / 2.0;
  m[2] = o.switch_action_index ? *o.switch_action_index / actions : 0.0;
  m[3] = o.hints * b.seconds_per_hint / o.time_s;
  m[4] = o.score / 100.0;
  m[5] = actions / o.ref_len / 4.0;
  m[6] = o.strategy_used == Strategy::BC ? 1.0 : 0.0;
  m[7] = timing == SwitchTiming::Early ? 1.0 : 0.0;
  m[8] = timing == SwitchTiming::Late ? 1.0 : 0.0;
  m[9] = o.hints / 10.0;
  m[10] = o.hints * 10.0 / actions / 2.0;
  m[11] = o.hints > 0 ? 1.0 : 0.0;
  return m;
}

Metrics mean_of(const std::vector<Metrics>& rows) {
  Metrics out{};
  if (rows.empty()) return out;
  for (const auto& r : rows)
    for (std::size_t k = 0; k < kBaseMetrics; ++k) out[k] += r[k];
  for (auto& v : out) v /= static_cast<double>(rows.size());
  return out;
}

Metrics sd_of(const std::vector<Metrics>& rows) {
  Metrics out{};
  if (rows.size() < 2) return out;
  const Metrics mu = mean_of(rows);
  for (const auto& r : rows)
    for (std::size_t k = 0; k < kBaseMetrics; ++k) out[k] += (r[k] - mu[k]) * (r[k] - mu[k]);
  for (auto& v : out) v = std::sqrt(v / static_cast<double>(rows.size()));
  return out;
}

}  // namespace

const FeatureSchema& default_feature_schema() {
  static const FeatureSchema schema = [] {
    FeatureSchema s;
    s.id = "metatutor.logic.v1";
    for (const char* block : kBlocks) {
      for (const auto& m : kBase) {
        s.names.push_back(std::string(block) + "." + m.name);
        s.families.push_back(m.family);
      }
    }
    for (const char* n : kHistory) {
      s.names.emplace_back(n);
      s.families.push_back(FeatureFamily::Hint);
    }
    for (std::size_t i = 0; i < kContext.size(); ++i) {
      s.names.emplace_back(kContext[i]);
      s.families.push_back(i >= 8 ? FeatureFamily::Accuracy : FeatureFamily::Temporal);
    }
    return s;
  }();
  return schema;
}

StudentState build_state(const Session& session, int slot) {
  const auto& behavior = session.config.behavior;

  std::vector<const ProblemOutcome*> history;
  for (const auto& o : session.training) {
    if (o.slot < slot && o.kind != SlotKind::WorkedExample) history.push_back(&o);
  }

  std::vector<Metrics> all;
  std::vector<Metrics> eval;
  std::array<std::vector<Metrics>, kActionCount> by_action;
  std::array<int, kActionCount> given{};
  std::array<int, kActionCount> complied{};
  const ProblemOutcome* last_decision = nullptr;
  for (const auto* o : history) {
    const Metrics m = metrics_of(*o, behavior);
    all.push_back(m);
    if (o->kind == SlotKind::EvaluationOnly) {
      eval.push_back(m);
    } else {
      const auto a = static_cast<std::size_t>(action_code(o->intervention));
      by_action[a].push_back(m);
      ++given[a];
      complied[a] += o->complied ? 1 : 0;
      last_decision = o;
    }
  }

  std::vector<double> f;
  f.reserve(kStateSize);
  auto append = [&f](const Metrics& m) { f.insert(f.end(), m.begin(), m.end()); };

  Metrics pre_mean{};
  for (int i = 0; i < 2; ++i) {
    Metrics m{};
    if (static_cast<std::size_t>(i) < session.pretest.size()) {
      m = metrics_of(session.pretest[static_cast<std::size_t>(i)], behavior);
    }
    for (std::size_t k = 0; k < kBaseMetrics; ++k) pre_mean[k] += m[k] / 2.0;
    append(m);
  }
  append(all.empty() ? Metrics{} : all.back());
  append(mean_of(std::vector<Metrics>(all.end() - std::min<std::ptrdiff_t>(3, std::ssize(all)),
                                      all.end())));
  const Metrics all_mean = mean_of(all);
  append(all_mean);
  append(sd_of(all));
  append(mean_of(eval));
  for (const auto& rows : by_action) append(mean_of(rows));
  Metrics trend{};
  if (!all.empty()) {
    for (std::size_t k = 0; k < kBaseMetrics; ++k) trend[k] = all_mean[k] - pre_mean[k];
  }
  append(trend);

  for (std::size_t a = 0; a < kActionCount; ++a) f.push_back(given[a] / double(kDecisionPoints));
  for (std::size_t a = 0; a < kActionCount; ++a)
    f.push_back(given[a] ? complied[a] / static_cast<double>(given[a]) : 0.0);
  for (auto a : kAllActions)
    f.push_back(last_decision && last_decision->intervention == a ? 1.0 : 0.0);
  f.push_back(last_decision && last_decision->complied ? 1.0 : 0.0);

  const int level = level_of_slot(slot);
  for (int l = 1; l <= kLevels; ++l) f.push_back(l == level ? 1.0 : 0.0);
  f.push_back((slot % kProblemsPerLevel) / double(kProblemsPerLevel - 1));
  f.push_back(slot / double(kTrainingProblems - 1));
  f.push_back(std::ssize(history) / double(kTrainingProblems));
  int bc_streak = 0;
  int fc_streak = 0;
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if ((*it)->strategy_used != Strategy::BC) break;
    ++bc_streak;
  }
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if ((*it)->strategy_used != Strategy::FC) break;
    ++fc_streak;
  }
  f.push_back(std::min(1.0, bc_streak / 5.0));
  f.push_back(std::min(1.0, fc_streak / 5.0));

  if (f.size() != kStateSize) throw Error("internal: state size " + std::to_string(f.size()));
  return {std::move(f), default_feature_schema().id};
}

}  // namespace metatutor

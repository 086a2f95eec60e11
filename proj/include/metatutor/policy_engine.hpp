#pragma once

#include <array>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "metatutor/domain.hpp"
#include "metatutor/learner.hpp"
#include "metatutor/tutor_sim.hpp"

namespace metatutor {

struct DecisionRecord {
  std::string student_id;
  int level = 1;
  int problem_index = 0;
  StudentState state;
  Action action = Action::NoIntervention;
  std::array<double, kActionCount> q_values{};
  std::optional<MetacognitiveGroup> group;

  friend bool operator==(const DecisionRecord&, const DecisionRecord&) = default;
};

/// Greedy action (lowest-index tie-break) and the Q-values behind it.
/// Throws Error when the state does not belong to the model's schema.
std::pair<Action, std::array<double, kActionCount>> decide(const TrainedModel& model,
                                                           const StudentState& state);

/// Policy closure over a shared model, for run_curriculum.
DecisionFn greedy_policy(const TrainedModel& model);
PolicyFactory greedy_policy_factory(const TrainedModel& model);

/// Counts with rows Nud, Prs, No and one column per key value.
struct DecisionTable {
  std::vector<std::string> columns;
  std::array<std::vector<long>, kActionCount> counts;

  long total() const;
  long cell(Action a, std::size_t column) const {
    return counts[static_cast<std::size_t>(action_code(a))][column];
  }
  std::vector<std::vector<long>> as_matrix() const;  // rows = actions
};

enum class DecisionKey { ByLevel, ByGroup };

/// ByLevel yields columns L1..L5; ByGroup yields Decl, Proc, CDL. Records
/// without a group are rejected for ByGroup.
DecisionTable decision_distribution(const std::vector<DecisionRecord>& records, DecisionKey key);

double no_intervention_rate(const std::vector<DecisionRecord>& records, MetacognitiveGroup group);

/// Decision records of one session; q-values are zero when the log did not carry them.
std::vector<DecisionRecord> decision_records(const SessionLog& log);

/// CSV: sid,level,problem,action,q0,q1,q2
void write_decisions_csv(const std::vector<DecisionRecord>& records, std::ostream& out);

}  // namespace metatutor

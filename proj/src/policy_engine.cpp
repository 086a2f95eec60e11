#include "metatutor/policy_engine.hpp"

#include <iomanip>
#include <memory>
#include <numeric>

namespace metatutor {

std::pair<Action, std::array<double, kActionCount>> decide(const TrainedModel& model,
                                                           const StudentState& state) {
  if (state.schema_id != model.schema_id) {
    throw Error("schema mismatch: state '" + state.schema_id + "', model '" + model.schema_id +
                "'");
  }
  if (model.network.output_size() != kActionCount) throw Error("model must output 3 Q-values");
  const auto q = forward(model.network, state);
  std::array<double, kActionCount> out{};
  std::copy(q.begin(), q.end(), out.begin());
  return {action_from_code(static_cast<int>(argmax(out))), out};
}

DecisionFn greedy_policy(const TrainedModel& model) {
  auto shared = std::make_shared<const TrainedModel>(model);
  return [shared](const StudentState& state) {
    auto [action, q] = decide(*shared, state);
    return PolicyChoice{action, q};
  };
}

PolicyFactory greedy_policy_factory(const TrainedModel& model) {
  auto policy = greedy_policy(model);
  return [policy](std::uint64_t) { return policy; };
}

long DecisionTable::total() const {
  long sum = 0;
  for (const auto& row : counts) sum = std::accumulate(row.begin(), row.end(), sum);
  return sum;
}

std::vector<std::vector<long>> DecisionTable::as_matrix() const {
  return {counts.begin(), counts.end()};
}

DecisionTable decision_distribution(const std::vector<DecisionRecord>& records, DecisionKey key) {
  DecisionTable table;
  if (key == DecisionKey::ByLevel) {
    for (int l = 1; l <= kLevels; ++l) table.columns.push_back("L" + std::to_string(l));
  } else {
    for (auto g : kAllGroups) table.columns.emplace_back(group_short_name(g));
  }
  for (auto& row : table.counts) row.assign(table.columns.size(), 0);

  for (const auto& r : records) {
    std::size_t col = 0;
    if (key == DecisionKey::ByLevel) {
      if (r.level < 1 || r.level > kLevels) throw Error("decision level out of range");
      col = static_cast<std::size_t>(r.level - 1);
    } else {
      if (!r.group) throw Error("decision record for '" + r.student_id + "' has no group");
      col = static_cast<std::size_t>(*r.group);
    }
    ++table.counts[static_cast<std::size_t>(action_code(r.action))][col];
  }
  return table;
}

double no_intervention_rate(const std::vector<DecisionRecord>& records, MetacognitiveGroup group) {
  long total = 0;
  long none = 0;
  for (const auto& r : records) {
    if (r.group != group) continue;
    ++total;
    none += r.action == Action::NoIntervention ? 1 : 0;
  }
  if (total == 0) {
    throw Error("no decision records for group " + std::string(group_name(group)));
  }
  return static_cast<double>(none) / static_cast<double>(total);
}

std::vector<DecisionRecord> decision_records(const SessionLog& log) {
  std::vector<DecisionRecord> out;
  for (const auto& d : log.decisions) {
    DecisionRecord r;
    r.student_id = log.student_id;
    r.level = level_of_slot(d.problem_index);
    r.problem_index = d.problem_index;
    r.state = d.state;
    r.action = d.action;
    if (d.q_values) r.q_values = *d.q_values;
    r.group = log.profile.group;
    out.push_back(std::move(r));
  }
  return out;
}

void write_decisions_csv(const std::vector<DecisionRecord>& records, std::ostream& out) {
  out << "sid,level,problem,action,q0,q1,q2\n" << std::setprecision(17);
  for (const auto& r : records) {
    out << r.student_id << ',' << r.level << ',' << r.problem_index << ','
        << action_short_name(r.action);
    for (double q : r.q_values) out << ',' << q;
    out << '\n';
  }
}

}  // namespace metatutor

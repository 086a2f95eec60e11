#include "metatutor/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace metatutor {

Action action_from_code(int code) {
  switch (code) {
    case 0: return Action::Nudge;
    case 1: return Action::PresentBC;
    case 2: return Action::NoIntervention;
    default: throw Error("invalid action code " + std::to_string(code));
  }
}

std::string_view action_short_name(Action a) {
  switch (a) {
    case Action::Nudge: return "Nud";
    case Action::PresentBC: return "Prs";
    case Action::NoIntervention: return "No";
  }
  return "?";
}

std::string_view group_name(MetacognitiveGroup g) {
  switch (g) {
    case MetacognitiveGroup::Declarative: return "declarative";
    case MetacognitiveGroup::Procedural: return "procedural";
    case MetacognitiveGroup::Conditional: return "conditional";
  }
  return "?";
}

std::string_view group_short_name(MetacognitiveGroup g) {
  switch (g) {
    case MetacognitiveGroup::Declarative: return "Decl";
    case MetacognitiveGroup::Procedural: return "Proc";
    case MetacognitiveGroup::Conditional: return "CDL";
  }
  return "?";
}

MetacognitiveGroup group_from_name(std::string_view name) {
  for (auto g : kAllGroups) {
    if (name == group_name(g) || name == group_short_name(g)) return g;
  }
  throw Error("unknown metacognitive group '" + std::string(name) + "'");
}

std::string_view family_name(FeatureFamily f) {
  switch (f) {
    case FeatureFamily::Temporal: return "temporal";
    case FeatureFamily::Accuracy: return "accuracy";
    case FeatureFamily::Hint: return "hint";
  }
  return "?";
}

const std::vector<int>& default_decision_points() {
  static const std::vector<int> points = [] {
    std::vector<int> p;
    for (int slot = 0; slot < kTrainingProblems; ++slot) {
      const bool last_of_level = slot % kProblemsPerLevel == kProblemsPerLevel - 1;
      const bool worked_example = slot == 0 || slot == 1;
      if (!last_of_level && !worked_example) p.push_back(slot);
    }
    return p;
  }();
  return points;
}

std::vector<std::string> validate_transition(const Transition& t, const FeatureSchema& schema,
                                             std::span<const int> decision_points) {
  std::vector<std::string> violations;
  auto check_state = [&](const StudentState& s, std::string_view which) {
    if (s.features.size() != schema.size()) {
      violations.push_back(std::string(which) + " feature length");
    }
    if (!std::all_of(s.features.begin(), s.features.end(),
                     [](double v) { return std::isfinite(v); })) {
      violations.push_back(std::string(which) + " non-finite feature");
    }
    if (s.schema_id != schema.id) violations.push_back(std::string(which) + " schema id");
  };

  check_state(t.state, "state");
  if (t.next_state) check_state(*t.next_state, "next_state");
  if (!(t.reward >= 0.0 && t.reward <= 100.0)) violations.emplace_back("reward range");
  if (t.terminal == t.next_state.has_value()) violations.emplace_back("terminal/next_state");
  if (std::find(decision_points.begin(), decision_points.end(), t.problem_index) ==
      decision_points.end()) {
    violations.emplace_back("problem_index not a decision point");
  }
  return violations;
}

Dataset::Dataset(std::string schema_id, std::vector<std::string> feature_names,
                 std::vector<Transition> transitions)
    : schema_id_(std::move(schema_id)),
      feature_names_(std::move(feature_names)),
      transitions_(std::move(transitions)) {
  for (std::size_t i = 0; i < transitions_.size(); ++i) {
    const auto& t = transitions_[i];
    auto [it, inserted] = student_index_.try_emplace(t.student_id);
    if (inserted) {
      students_.push_back(t.student_id);
    } else if (students_.back() != t.student_id) {
      throw Error("transitions of student '" + t.student_id + "' are not contiguous");
    }
    if (!it->second.empty() &&
        transitions_[it->second.back()].problem_index >= t.problem_index) {
      throw Error("transitions of student '" + t.student_id +
                  "' are not ordered by problem_index");
    }
    it->second.push_back(i);
  }
  if (!students_.empty()) {
    const auto expected = student_index_.at(students_.front()).size();
    for (const auto& sid : students_) {
      if (student_index_.at(sid).size() != expected) {
        throw Error("student '" + sid + "' has " +
                    std::to_string(student_index_.at(sid).size()) +
                    " decision points, expected " + std::to_string(expected));
      }
    }
  }
}

std::span<const std::size_t> Dataset::student_transitions(const std::string& sid) const {
  auto it = student_index_.find(sid);
  if (it == student_index_.end()) return {};
  return it->second;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double train_fraction,
                                          std::uint64_t seed) {
  if (d.empty()) throw Error("empty dataset");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error("train_fraction must lie in (0, 1)");
  }
  std::vector<std::string> order = d.students();
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(order.size())));
  std::unordered_map<std::string, bool> in_train;
  for (std::size_t i = 0; i < order.size(); ++i) in_train[order[i]] = i < n_train;

  std::vector<Transition> train;
  std::vector<Transition> test;
  for (const auto& t : d.transitions()) (in_train.at(t.student_id) ? train : test).push_back(t);
  return {Dataset(d.schema_id(), d.feature_names(), std::move(train)),
          Dataset(d.schema_id(), d.feature_names(), std::move(test))};
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  // FNV-1a over the name, folded into the parent seed.
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return mix_seed(seed ^ h);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix_seed(mix_seed(seed) + index);
}

}  // namespace metatutor

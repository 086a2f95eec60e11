#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace metatutor {

/// Raised for malformed inputs and violated preconditions across the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

/// Metacognitive intervention. Wire codes are the enumerator values.
enum class Action : std::uint8_t { Nudge = 0, PresentBC = 1, NoIntervention = 2 };

inline constexpr std::size_t kActionCount = 3;
inline constexpr std::array<Action, kActionCount> kAllActions = {
    Action::Nudge, Action::PresentBC, Action::NoIntervention};

constexpr int action_code(Action a) { return static_cast<int>(a); }
Action action_from_code(int code);  // throws Error outside {0,1,2}
std::string_view action_short_name(Action a);  // "Nud", "Prs", "No"

enum class MetacognitiveGroup : std::uint8_t { Declarative = 0, Procedural = 1, Conditional = 2 };

inline constexpr std::size_t kGroupCount = 3;
inline constexpr std::array<MetacognitiveGroup, kGroupCount> kAllGroups = {
    MetacognitiveGroup::Declarative, MetacognitiveGroup::Procedural,
    MetacognitiveGroup::Conditional};

std::string_view group_name(MetacognitiveGroup g);  // "declarative", ...
std::string_view group_short_name(MetacognitiveGroup g);  // "Decl", "Proc", "CDL"
MetacognitiveGroup group_from_name(std::string_view name);

// ---------------------------------------------------------------------------
// Feature schema and states
// ---------------------------------------------------------------------------

inline constexpr std::size_t kStateSize = 152;

enum class FeatureFamily : std::uint8_t { Temporal, Accuracy, Hint };
std::string_view family_name(FeatureFamily f);

/// Versioned, ordered description of the state vector.
struct FeatureSchema {
  std::string id;
  std::vector<std::string> names;
  std::vector<FeatureFamily> families;

  std::size_t size() const { return names.size(); }
};

/// The 152-feature schema emitted by the tutor simulator.
const FeatureSchema& default_feature_schema();

struct StudentState {
  std::vector<double> features;
  std::string schema_id;

  friend bool operator==(const StudentState&, const StudentState&) = default;
};

// ---------------------------------------------------------------------------
// Curriculum positions
// ---------------------------------------------------------------------------

inline constexpr int kTrainingProblems = 20;
inline constexpr int kLevels = 5;
inline constexpr int kProblemsPerLevel = 4;
inline constexpr int kDecisionPoints = 13;

/// Training-slot indices (0..19) at which the policy is consulted, under the
/// default worked-example placement.
const std::vector<int>& default_decision_points();

/// 1-based training level of a training slot.
constexpr int level_of_slot(int slot) { return slot / kProblemsPerLevel + 1; }

// ---------------------------------------------------------------------------
// Transitions and datasets
// ---------------------------------------------------------------------------

struct Transition {
  std::string student_id;
  int problem_index = 0;  // training slot, 0-based
  StudentState state;
  Action action = Action::NoIntervention;
  double reward = 0.0;
  std::optional<StudentState> next_state;
  bool terminal = true;

  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Empty result means the record satisfies every Transition invariant.
std::vector<std::string> validate_transition(const Transition& t, const FeatureSchema& schema,
                                             std::span<const int> decision_points =
                                                 default_decision_points());

/// Immutable, canonically ordered collection of transitions: grouped by
/// student (first-appearance order), each student's records ascending by
/// problem_index.
class Dataset {
 public:
  Dataset() = default;

  /// Validates ordering and per-student decision counts. Throws Error.
  Dataset(std::string schema_id, std::vector<std::string> feature_names,
          std::vector<Transition> transitions);

  const std::string& schema_id() const { return schema_id_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<Transition>& transitions() const { return transitions_; }
  std::size_t size() const { return transitions_.size(); }
  bool empty() const { return transitions_.empty(); }

  /// Student ids in first-appearance order.
  const std::vector<std::string>& students() const { return students_; }
  /// Indices into transitions() for one student, in curriculum order.
  std::span<const std::size_t> student_transitions(const std::string& sid) const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.schema_id_ == b.schema_id_ && a.feature_names_ == b.feature_names_ &&
           a.transitions_ == b.transitions_;
  }

 private:
  std::string schema_id_;
  std::vector<std::string> feature_names_;
  std::vector<Transition> transitions_;
  std::vector<std::string> students_;
  std::unordered_map<std::string, std::vector<std::size_t>> student_index_;
};

/// Student-level split: |train| = round(train_fraction * |students|).
std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double train_fraction,
                                          std::uint64_t seed);

/// JSON-lines dataset file. An optional expected schema id turns a header
/// mismatch into an error.
Dataset load_dataset(const std::filesystem::path& path,
                     std::optional<std::string> expected_schema_id = std::nullopt);
void store_dataset(const Dataset& d, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Seeds
// ---------------------------------------------------------------------------

/// splitmix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace metatutor

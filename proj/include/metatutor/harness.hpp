#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "metatutor/group_classifier.hpp"
#include "metatutor/learner.hpp"
#include "metatutor/metrics_stats.hpp"
#include "metatutor/policy_engine.hpp"
#include "metatutor/rule_miner.hpp"
#include "metatutor/tutor_sim.hpp"

namespace metatutor {

/// Students per metacognitive group.
struct CohortCounts {
  int declarative = 0;
  int procedural = 0;
  int conditional = 0;

  int total() const { return declarative + procedural + conditional; }
  /// Groups in Declarative, Procedural, Conditional blocks.
  std::vector<MetacognitiveGroup> roster() const;
  friend bool operator==(const CohortCounts&, const CohortCounts&) = default;
};

/// Output file names; relative paths resolve against the --out directory.
struct ArtifactPaths {
  std::string dataset = "dataset.jsonl";
  std::string model = "model.json";
  std::string loss_curve = "loss_curve.csv";
  std::string sessions = "sessions.jsonl";
  std::string decisions = "decisions.csv";
  std::string forest = "forest.json";
  std::string classifier = "classifier.csv";
  std::string reports = "reports";
  friend bool operator==(const ArtifactPaths&, const ArtifactPaths&) = default;
};

inline constexpr std::string_view kDrlCondition = "DRL";
inline constexpr std::string_view kControlCondition = "Ctrl";
inline constexpr std::string_view kCdlCondition = "CDL";

struct ExperimentConfig {
  std::uint64_t seed = 20240;

  // Logged training data.
  int dataset_students = 867;
  GroupMix dataset_mix = kDefaultMix;
  std::string behavior_policy = "uniform_random";  // or "nudge", "present", "none"

  // Simulator and student profiles, shared by every cohort.
  CohortOptions cohort;

  Hyperparams hyperparams;  // seed is derived from `seed`
  double train_fraction = 0.8;

  // Deployment cohorts.
  CohortCounts drl{22, 24, 0};
  CohortCounts control{22, 22, 0};
  CohortCounts cdl{0, 0, 22};

  // Group classifier, trained on a separate calibration cohort.
  int classifier_students = 500;
  int forest_trees = 50;
  int forest_depth = 8;

  ArtifactPaths paths;

  void validate() const;
};

ExperimentConfig default_config();
std::string config_to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; `seed` is mandatory; unknown keys are errors.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

std::filesystem::path resolve(const std::filesystem::path& out_dir, const std::string& p);

/// Behavior policy used when logging training data.
PolicyFactory behavior_policy_factory(std::string_view name);

// ---------------------------------------------------------------------------
// Commands. Each writes its artifacts under out_dir, prints a short summary
// to `log`, and returns what it wrote for cross-checking.
// ---------------------------------------------------------------------------

Dataset cmd_generate(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                     std::ostream& log);

struct TrainResult {
  Dataset train_set;
  Dataset test_set;
  TrainedModel model;
};
TrainResult cmd_train(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                      std::ostream& log);

struct SimulateResult {
  std::vector<SessionLog> sessions;
  std::vector<DecisionRecord> drl_decisions;
  double classifier_accuracy = 0.0;
};
/// Deployment cohorts from a trained model (no file I/O for the model).
std::vector<SessionLog> simulate_deployment(const ExperimentConfig& config,
                                            const TrainedModel& model);
SimulateResult cmd_simulate(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                            std::ostream& log);

/// Normalized pre, post and isomorphic post scores, labeled by condition.
std::vector<ScoreRecord> score_records_from_sessions(const std::vector<SessionLog>& sessions);

struct Report {
  std::vector<GroupSummary> summary;
  std::vector<DecisionRecord> policy_decisions;  // DRL condition only
  DecisionTable by_level;
  DecisionTable by_group;
  std::optional<ChiSquareResult> chi_square_group;
  std::optional<ChiSquareResult> chi_square_level;
  std::optional<AnovaResult> anova_pre;
  std::optional<double> cdl_no_intervention;
  std::vector<std::string> notices;
};
Report build_report(const std::vector<SessionLog>& sessions);
/// Writes summary.csv, summary.txt, decisions_by_level.csv, decisions_by_group.csv,
/// stats.csv under `dir` and prints the text report to `log`.
void write_report(const Report& report, const std::filesystem::path& dir, std::ostream& log);
Report cmd_report(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                  std::ostream& log);

/// Transactions from DRL sessions when any exist, otherwise from all sessions.
std::vector<ComplianceTransaction> mining_transactions(const std::vector<SessionLog>& sessions);
std::vector<MinedRule> cmd_mine(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                                std::size_t k, std::optional<long> total_override,
                                std::ostream& log);
/// One line per rule: "{No, Disagree} => No, 50.0%, 66.7%".
void print_rules(const std::vector<MinedRule>& rules, std::ostream& out);

}  // namespace metatutor

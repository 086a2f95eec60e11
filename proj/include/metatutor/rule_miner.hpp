#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "metatutor/domain.hpp"

namespace metatutor {

struct ProblemOutcome;
struct SessionLog;

enum class Compliance : std::uint8_t { Agree = 0, Disagree = 1 };
inline constexpr std::array<Compliance, 2> kAllCompliance = {Compliance::Agree,
                                                             Compliance::Disagree};
std::string_view compliance_name(Compliance c);  // "Agree", "Disagree"

/// Nudge: agree iff the switch to BC was early. PresentBC: agree iff BC was
/// used. NoIntervention: agree iff FC was used.
Compliance encode_compliance(Action action, const ProblemOutcome& outcome);

struct ComplianceTransaction {
  Action a_t = Action::NoIntervention;
  Compliance c_t = Compliance::Agree;
  Action a_next = Action::NoIntervention;

  friend bool operator==(const ComplianceTransaction&, const ComplianceTransaction&) = default;
};

/// One transaction per consecutive pair of policy decisions.
std::vector<ComplianceTransaction> build_transactions(const SessionLog& log);

struct MinedRule {
  Action antecedent_action = Action::NoIntervention;
  Compliance antecedent_compliance = Compliance::Agree;
  Action consequent = Action::NoIntervention;
  std::size_t count = 0;
  std::size_t antecedent_count = 0;
  double support = 0.0;
  std::optional<double> confidence;  // undefined when antecedent_count == 0

  friend bool operator==(const MinedRule&, const MinedRule&) = default;
};

inline constexpr std::size_t kRuleCount = 18;

/// All 18 {a_t, c_t} => a_next rules, sorted by support (desc), then
/// confidence (desc, undefined last), then enumeration order. Total defaults
/// to the number of transactions; an override must be at least that.
std::vector<MinedRule> mine_rules(const std::vector<ComplianceTransaction>& transactions,
                                  std::optional<std::size_t> total_override = std::nullopt);

std::vector<MinedRule> top_k(const std::vector<MinedRule>& rules, std::size_t k);

/// "{No, Disagree} => No"
std::string rule_label(const MinedRule& r);

/// CSV: antecedent_action, compliance, consequent, support_pct, confidence_pct, count.
void write_rules_csv(const std::vector<MinedRule>& rules, std::ostream& out);

}  // namespace metatutor

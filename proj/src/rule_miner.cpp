#include "metatutor/rule_miner.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "metatutor/tutor_sim.hpp"

namespace metatutor {

std::string_view compliance_name(Compliance c) {
  return c == Compliance::Agree ? "Agree" : "Disagree";
}

Compliance encode_compliance(Action action, const ProblemOutcome& outcome) {
  bool agree = false;
  switch (action) {
    case Action::Nudge:
      agree = classify_switch(outcome.switch_action_index) == SwitchTiming::Early;
      break;
    case Action::PresentBC:
      agree = outcome.strategy_used == Strategy::BC;
      break;
    case Action::NoIntervention:
      agree = outcome.strategy_used == Strategy::FC;
      break;
  }
  return agree ? Compliance::Agree : Compliance::Disagree;
}

std::vector<ComplianceTransaction> build_transactions(const SessionLog& log) {
  std::vector<ComplianceTransaction> out;
  for (std::size_t i = 0; i + 1 < log.decisions.size(); ++i) {
    const auto& d = log.decisions[i];
    const auto& outcome = log.training_outcome(d.problem_index);
    out.push_back({d.action, encode_compliance(d.action, outcome), log.decisions[i + 1].action});
  }
  return out;
}

namespace {

std::size_t cell(Action a, Compliance c, Action next) {
  return (static_cast<std::size_t>(a) * 2 + static_cast<std::size_t>(c)) * kActionCount +
         static_cast<std::size_t>(next);
}

}  // namespace

std::vector<MinedRule> mine_rules(const std::vector<ComplianceTransaction>& transactions,
                                  std::optional<std::size_t> total_override) {
  if (total_override) {
    if (*total_override == 0) throw Error("total override must be positive");
    if (*total_override < transactions.size()) {
      throw Error("total override " + std::to_string(*total_override) +
                  " is below the transaction count " + std::to_string(transactions.size()));
    }
  }
  std::array<std::size_t, kRuleCount> counts{};
  for (const auto& t : transactions) ++counts[cell(t.a_t, t.c_t, t.a_next)];

  const double total = static_cast<double>(total_override.value_or(transactions.size()));
  std::vector<MinedRule> rules;
  rules.reserve(kRuleCount);
  for (auto a : kAllActions) {
    for (auto c : kAllCompliance) {
      std::size_t antecedent = 0;
      for (auto n : kAllActions) antecedent += counts[cell(a, c, n)];
      for (auto n : kAllActions) {
        MinedRule r;
        r.antecedent_action = a;
        r.antecedent_compliance = c;
        r.consequent = n;
        r.count = counts[cell(a, c, n)];
        r.antecedent_count = antecedent;
        r.support = total > 0.0 ? static_cast<double>(r.count) / total : 0.0;
        if (antecedent > 0) {
          r.confidence = static_cast<double>(r.count) / static_cast<double>(antecedent);
        }
        rules.push_back(r);
      }
    }
  }
  // Enumeration order is the input order, so a stable sort settles full ties.
  std::stable_sort(rules.begin(), rules.end(), [](const MinedRule& x, const MinedRule& y) {
    if (x.count != y.count) return x.count > y.count;
    if (x.confidence.has_value() != y.confidence.has_value()) return x.confidence.has_value();
    if (x.confidence && *x.confidence != *y.confidence) return *x.confidence > *y.confidence;
    return false;
  });
  return rules;
}

std::vector<MinedRule> top_k(const std::vector<MinedRule>& rules, std::size_t k) {
  if (k < 1 || k > kRuleCount || k > rules.size()) {
    throw Error("k must lie in [1, 18], got " + std::to_string(k));
  }
  return {rules.begin(), rules.begin() + static_cast<std::ptrdiff_t>(k)};
}

std::string rule_label(const MinedRule& r) {
  std::ostringstream os;
  os << '{' << action_short_name(r.antecedent_action) << ", "
     << compliance_name(r.antecedent_compliance) << "} => " << action_short_name(r.consequent);
  return os.str();
}

void write_rules_csv(const std::vector<MinedRule>& rules, std::ostream& out) {
  out << "antecedent_action,compliance,consequent,support_pct,confidence_pct,count\n";
  for (const auto& r : rules) {
    out << action_short_name(r.antecedent_action) << ',' << compliance_name(r.antecedent_compliance)
        << ',' << action_short_name(r.consequent) << ',' << std::setprecision(10)
        << 100.0 * r.support << ',';
    if (r.confidence) {
      out << 100.0 * *r.confidence;
    } else {
      out << "NA";
    }
    out << ',' << r.count << '\n';
  }
}

}  // namespace metatutor

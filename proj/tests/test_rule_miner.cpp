#include <map>
#include <sstream>
#include <tuple>

#include "doctest.h"
#include "metatutor/rule_miner.hpp"
#include "test_support.hpp"

using namespace metatutor;

namespace {

constexpr auto Nud = Action::Nudge;
constexpr auto Prs = Action::PresentBC;
constexpr auto No = Action::NoIntervention;
constexpr auto Agr = Compliance::Agree;
constexpr auto Dis = Compliance::Disagree;

ProblemOutcome with_switch(Strategy s, std::optional<int> k) {
  ProblemOutcome o;
  o.strategy_used = s;
  o.switch_action_index = k;
  return o;
}

std::vector<ComplianceTransaction> repeat(ComplianceTransaction t, int n) {
  return std::vector<ComplianceTransaction>(static_cast<std::size_t>(n), t);
}

/// 586 transactions whose top six rules have known percentages at Total = 598.
std::vector<ComplianceTransaction> reference_rule_fixture() {
  std::vector<ComplianceTransaction> tx;
  auto add = [&](Action a, Compliance c, Action n, int k) {
    auto r = repeat({a, c, n}, k);
    tx.insert(tx.end(), r.begin(), r.end());
  };
  add(No, Dis, No, 135);
  add(No, Dis, Nud, 21);
  add(No, Dis, Prs, 21);
  add(Nud, Agr, No, 69);
  add(Nud, Agr, Nud, 22);
  add(Nud, Agr, Prs, 22);
  add(Prs, Agr, No, 59);
  add(Prs, Agr, Nud, 21);
  add(Prs, Agr, Prs, 21);
  add(No, Agr, Nud, 58);
  add(No, Agr, Prs, 19);
  add(No, Agr, No, 19);
  add(Nud, Dis, Prs, 40);
  add(Nud, Dis, Nud, 9);
  add(Nud, Dis, No, 9);
  add(Prs, Dis, Nud, 27);
  add(Prs, Dis, Prs, 7);
  add(Prs, Dis, No, 7);
  return tx;
}

const MinedRule& find(const std::vector<MinedRule>& rules, Action a, Compliance c, Action n) {
  for (const auto& r : rules)
    if (r.antecedent_action == a && r.antecedent_compliance == c && r.consequent == n) return r;
  throw std::runtime_error("rule not found");
}

}  // namespace

TEST_SUITE("rule_miner") {
  TEST_CASE("encode_compliance") {
    CHECK(encode_compliance(Nud, with_switch(Strategy::BC, 12)) == Agr);
    CHECK(encode_compliance(Nud, with_switch(Strategy::BC, 50)) == Dis);
    CHECK(encode_compliance(Nud, with_switch(Strategy::FC, std::nullopt)) == Dis);
    CHECK(encode_compliance(Prs, with_switch(Strategy::BC, std::nullopt)) == Agr);
    CHECK(encode_compliance(Prs, with_switch(Strategy::FC, std::nullopt)) == Dis);
    CHECK(encode_compliance(No, with_switch(Strategy::BC, 20)) == Dis);
    CHECK(encode_compliance(No, with_switch(Strategy::FC, std::nullopt)) == Agr);
    CHECK(compliance_name(Agr) == "Agree");
  }

  TEST_CASE("build_transactions") {
    SUBCASE("13 decisions give 12 transactions") {
      const auto log = run_curriculum(default_profile(MetacognitiveGroup::Declarative),
                                      uniform_random_policy(2), 4);
      const auto tx = build_transactions(log);
      REQUIRE(tx.size() == 12);
      for (std::size_t i = 0; i < tx.size(); ++i) {
        CHECK(tx[i].a_t == log.decisions[i].action);
        CHECK(tx[i].a_next == log.decisions[i + 1].action);
        const auto& o = log.training_outcome(log.decisions[i].problem_index);
        CHECK(tx[i].c_t == (o.complied ? Agr : Dis));
      }
    }
    SUBCASE("two decisions give one transaction") {
      const auto log = testing::fixture_session("a", "DRL", MetacognitiveGroup::Declarative,
                                                {{Prs, true}, {Nud, false}});
      const auto tx = build_transactions(log);
      REQUIRE(tx.size() == 1);
      CHECK(tx[0] == ComplianceTransaction{Prs, Agr, Nud});
    }
    SUBCASE("direct encoding") {
      const auto log = testing::fixture_session("a", "DRL", MetacognitiveGroup::Declarative,
                                                {{No, false}, {No, true}, {Nud, true}});
      const auto tx = build_transactions(log);
      REQUIRE(tx.size() == 2);
      CHECK(tx[0] == ComplianceTransaction{No, Dis, No});
      CHECK(tx[1] == ComplianceTransaction{No, Agr, Nud});
    }
    SUBCASE("fewer than two decisions") {
      CHECK(build_transactions(testing::fixture_session("a", "DRL", MetacognitiveGroup::Declarative, {{No, true}})).empty());
      CHECK(build_transactions(testing::fixture_session("a", "DRL", MetacognitiveGroup::Declarative, {})).empty());
    }
  }

  TEST_CASE("mine_rules") {
    SUBCASE("four-transaction hand example") {
      const std::vector<ComplianceTransaction> tx{{No, Dis, No}, {No, Dis, No}, {No, Dis, Nud}, {Nud, Agr, No}};
      const auto rules = mine_rules(tx);
      REQUIRE(rules.size() == kRuleCount);
      const auto& top = rules.front();
      CHECK(rule_label(top) == "{No, Disagree} => No");
      CHECK(top.support == 0.5);
      CHECK(*top.confidence == doctest::Approx(2.0 / 3.0));
      CHECK(top_k(rules, 1).front() == top);
      CHECK(*find(rules, Nud, Agr, No).confidence == 1.0);
      CHECK_FALSE(find(rules, Prs, Agr, No).confidence.has_value());
    }
    SUBCASE("empty input") {
      const auto rules = mine_rules({});
      REQUIRE(rules.size() == kRuleCount);
      for (const auto& r : rules) {
        CHECK(r.support == 0.0);
        CHECK_FALSE(r.confidence.has_value());
      }
    }
    SUBCASE("reference top six at total 598") {
      const auto rules = top_k(mine_rules(reference_rule_fixture(), 598), 6);
      const std::vector<std::tuple<std::string, int, int>> expected = {
          {"{No, Disagree} => No", 23, 76},  {"{Nud, Agree} => No", 12, 61},
          {"{Prs, Agree} => No", 10, 58},    {"{No, Agree} => Nud", 10, 60},
          {"{Nud, Disagree} => Prs", 7, 69}, {"{Prs, Disagree} => Nud", 5, 66}};
      REQUIRE(rules.size() == 6);
      for (std::size_t i = 0; i < 6; ++i) {
        CHECK(rule_label(rules[i]) == std::get<0>(expected[i]));
        CHECK(std::lround(100.0 * rules[i].support) == std::get<1>(expected[i]));
        CHECK(std::lround(100.0 * *rules[i].confidence) == std::get<2>(expected[i]));
      }
    }
    SUBCASE("total override scales supports") {
      const auto tx = reference_rule_fixture();
      const auto plain = mine_rules(tx);
      const auto scaled = mine_rules(tx, 598);
      for (std::size_t i = 0; i < plain.size(); ++i) {
        CHECK(scaled[i].support == doctest::Approx(plain[i].support * 586.0 / 598.0));
        CHECK(scaled[i].confidence == plain[i].confidence);
      }
      CHECK_THROWS_AS(mine_rules(tx, 585), Error);
      CHECK_THROWS_AS(mine_rules(tx, 0), Error);
    }
    SUBCASE("sorted by support then confidence") {
      const auto rules = mine_rules(reference_rule_fixture());
      for (std::size_t i = 1; i < rules.size(); ++i) {
        CHECK(rules[i - 1].count >= rules[i].count);
        if (rules[i - 1].count == rules[i].count && rules[i - 1].confidence && rules[i].confidence) {
          CHECK(*rules[i - 1].confidence >= *rules[i].confidence);
        }
      }
    }
  }

  TEST_CASE("mining properties on random transaction lists") {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> a(0, 2);
    std::uniform_int_distribution<int> c(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
      const auto n = static_cast<std::size_t>(std::uniform_int_distribution<int>(0, 1000)(rng));
      std::vector<ComplianceTransaction> tx;
      for (std::size_t i = 0; i < n; ++i) {
        tx.push_back({action_from_code(a(rng)), c(rng) ? Dis : Agr, action_from_code(a(rng))});
      }
      const std::optional<std::size_t> total =
          trial % 3 == 0 ? std::optional<std::size_t>(n + 17) : std::nullopt;
      const auto rules = mine_rules(tx, total);
      const double denom = static_cast<double>(total.value_or(n));
      std::map<std::tuple<int, int, int>, std::size_t> triples;
      std::map<std::pair<int, int>, std::size_t> antecedents;
      for (const auto& t : tx) {
        ++triples[{action_code(t.a_t), static_cast<int>(t.c_t), action_code(t.a_next)}];
        ++antecedents[{action_code(t.a_t), static_cast<int>(t.c_t)}];
      }
      double support_sum = 0.0;
      std::map<std::pair<int, int>, double> conf_sum;
      for (const auto& r : rules) {
        const int ai = action_code(r.antecedent_action);
        const int ci = static_cast<int>(r.antecedent_compliance);
        const std::size_t count = triples[{ai, ci, action_code(r.consequent)}];
        const std::size_t ante = antecedents[{ai, ci}];
        CHECK(r.count == count);
        CHECK(r.antecedent_count == ante);
        CHECK(r.support == static_cast<double>(count) / denom);
        if (ante == 0) {
          CHECK_FALSE(r.confidence.has_value());
        } else {
          REQUIRE(r.confidence.has_value());
          CHECK(*r.confidence == static_cast<double>(count) / static_cast<double>(ante));
          CHECK(r.support <= *r.confidence);
          CHECK(r.support * denom == doctest::Approx(*r.confidence * static_cast<double>(ante)));
          conf_sum[{ai, ci}] += *r.confidence;
        }
        support_sum += r.support;
      }
      for (const auto& [key, s] : conf_sum) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
      if (n > 0) CHECK(support_sum == doctest::Approx(static_cast<double>(n) / denom));
    }
  }

  TEST_CASE("top_k bounds") {
    const auto rules = mine_rules(reference_rule_fixture());
    CHECK(top_k(rules, 18).size() == 18);
    CHECK(top_k(rules, 18) == rules);
    CHECK_THROWS_AS(top_k(rules, 0), Error);
    CHECK_THROWS_AS(top_k(rules, 19), Error);
  }

  TEST_CASE("rules CSV") {
    const std::vector<ComplianceTransaction> tx{{No, Dis, No}, {No, Dis, No}, {No, Dis, Nud}, {Nud, Agr, No}};
    std::ostringstream out;
    write_rules_csv(mine_rules(tx), out);
    const std::string text = out.str();
    CHECK(text.rfind("antecedent_action,compliance,consequent,support_pct,confidence_pct,count\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 19);
    CHECK(text.find("No,Disagree,No,50") != std::string::npos);
    CHECK(text.find("NA") != std::string::npos);
  }
}

#include <cstdlib>
#include <sstream>

#include "doctest.h"
#include "metatutor/harness.hpp"
#include "metatutor/session_io.hpp"
#include "test_support.hpp"

using namespace metatutor;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c = default_config();
  c.seed = 31;
  c.dataset_students = 40;
  c.hyperparams.max_epochs = 5;
  c.classifier_students = 60;
  c.forest_trees = 5;
  c.drl = {3, 3, 0};
  c.control = {2, 2, 0};
  c.cdl = {0, 0, 2};
  return c;
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

/// 22 Declarative and 24 Procedural students whose 598 decisions carry the
/// reference per-group action counts (94/65/127 and 82/74/156).
std::vector<SessionLog> reference_count_sessions() {
  std::vector<SessionLog> out;
  auto cohort = [&](MetacognitiveGroup g, int students, std::vector<std::pair<Action, int>> counts,
                    const std::string& prefix) {
    std::vector<Action> pool;
    for (auto [a, n] : counts) pool.insert(pool.end(), static_cast<std::size_t>(n), a);
    REQUIRE(pool.size() == static_cast<std::size_t>(students * 13));
    for (int s = 0; s < students; ++s) {
      std::vector<std::pair<Action, bool>> d;
      for (int i = 0; i < 13; ++i) d.push_back({pool[static_cast<std::size_t>(s * 13 + i)], i % 2 == 0});
      out.push_back(testing::fixture_session(prefix + std::to_string(s), "DRL", g, d, 40.0 + s, 70.0 + s % 5));
    }
  };
  cohort(MetacognitiveGroup::Declarative, 22,
         {{Action::Nudge, 94}, {Action::PresentBC, 65}, {Action::NoIntervention, 127}}, "d");
  cohort(MetacognitiveGroup::Procedural, 24,
         {{Action::Nudge, 82}, {Action::PresentBC, 74}, {Action::NoIntervention, 156}}, "p");
  return out;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(METATUTOR_CLI_PATH) + " " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return status;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("config") {
    SUBCASE("default config round-trips through JSON") {
      const auto text = config_to_json(default_config());
      CHECK(config_to_json(parse_config(text)) == text);
    }
    SUBCASE("seed is mandatory") {
      CHECK_THROWS_WITH_AS(parse_config("{}"), doctest::Contains("seed"), Error);
    }
    SUBCASE("partial documents keep defaults") {
      const auto c = parse_config(R"({"seed": 5, "dataset": {"n_students": 12}})");
      CHECK(c.seed == 5);
      CHECK(c.dataset_students == 12);
      CHECK(c.hyperparams.gamma == 0.9);
      CHECK(c.drl == CohortCounts{22, 24, 0});
    }
    SUBCASE("profile and delay overrides") {
      const auto c = parse_config(
          R"({"seed": 1, "profiles": {"conditional": {"p_comply_nudge": 0.7}},
              "behavior": {"nudge_delay": {"type": "point", "seconds": 20}}})");
      const auto& p = c.cohort.profile_overrides[2];
      REQUIRE(p.has_value());
      CHECK(p->p_comply_nudge == 0.7);
      CHECK(p->p_early_switch_spontaneous ==
            default_profile(MetacognitiveGroup::Conditional).p_early_switch_spontaneous);
      CHECK(std::get<PointMassDelay>(c.cohort.tutor.behavior.nudge_delay).seconds == 20.0);
    }
    SUBCASE("invalid documents") {
      CHECK_THROWS_WITH_AS(parse_config(R"({"seed": 1, "sede": 2})"), doctest::Contains("unknown key"), Error);
      CHECK_THROWS_AS(parse_config(R"({"seed": 1, "hyperparams": {"gamma": 1.5}})"), Error);
      CHECK_THROWS_AS(parse_config(R"({"seed": 1, "dataset": {"behavior_policy": "eager"}})"), Error);
      CHECK_THROWS_AS(parse_config(R"({"seed": "x"})"), Error);
      CHECK_THROWS_AS(parse_config("{not json"), Error);
    }
  }

  TEST_CASE("generate") {
    const auto dir = testing::scratch_dir("cli_generate");
    std::ostringstream log;
    SUBCASE("867 students give 11271 records") {
      auto c = default_config();
      const auto d = cmd_generate(c, dir, log);
      CHECK(d.size() == 11271);
      CHECK(count_lines(testing::read_file(dir / "dataset.jsonl")) == 11272);  // header + records
      CHECK(log.str().find("transitions: 11271") != std::string::npos);
      CHECK(load_dataset(dir / "dataset.jsonl") == d);
    }
    SUBCASE("empty cohort") {
      auto c = small_config();
      c.dataset_students = 0;
      CHECK_THROWS_WITH_AS(cmd_generate(c, dir, log), doctest::Contains("empty cohort"), Error);
    }
    SUBCASE("same config twice gives byte-identical files") {
      const auto c = small_config();
      cmd_generate(c, dir / "a", log);
      cmd_generate(c, dir / "b", log);
      CHECK(testing::read_file(dir / "a" / "dataset.jsonl") == testing::read_file(dir / "b" / "dataset.jsonl"));
    }
    SUBCASE("matches the library call") {
      const auto c = small_config();
      const auto d = cmd_generate(c, dir, log);
      CHECK(d == generate_synthetic_dataset(c.dataset_mix, c.dataset_students,
                                            uniform_random_policy_factory(),
                                            derive_seed(c.seed, "dataset"), c.cohort));
    }
  }

  TEST_CASE("train") {
    const auto dir = testing::scratch_dir("cli_train");
    std::ostringstream log;
    auto c = small_config();
    cmd_generate(c, dir, log);
    SUBCASE("stored test MSE matches a recomputation") {
      const auto r = cmd_train(c, dir, log);
      const auto model = load_model(dir / "model.json");
      const Dataset d = load_dataset(dir / "dataset.jsonl");
      auto [train, test] = split_dataset(d, c.train_fraction, derive_seed(c.seed, "split"));
      CHECK(test == r.test_set);
      CHECK(model.test_mse == evaluate_mse(model, test));
      CHECK(model.network == r.model.network);
    }
    SUBCASE("one epoch gives one CSV row") {
      c.hyperparams.max_epochs = 1;
      cmd_train(c, dir, log);
      const auto csv = testing::read_file(dir / "loss_curve.csv");
      CHECK(count_lines(csv) == 2);
      CHECK(csv.rfind("epoch,train_loss,test_mse\n1,", 0) == 0);
    }
    SUBCASE("seeded rerun gives an identical model file") {
      cmd_train(c, dir, log);
      const auto first = testing::read_file(dir / "model.json");
      cmd_train(c, dir, log);
      CHECK(testing::read_file(dir / "model.json") == first);
    }
    SUBCASE("missing dataset") {
      c.paths.dataset = "absent.jsonl";
      CHECK_THROWS_WITH_AS(cmd_train(c, dir, log), doctest::Contains("not found"), Error);
    }
  }

  TEST_CASE("simulate") {
    const auto dir = testing::scratch_dir("cli_simulate");
    std::ostringstream log;
    auto c = small_config();
    c.drl = {22, 24, 0};
    c.control = {22, 22, 0};
    c.cdl = {0, 0, 0};
    cmd_generate(c, dir, log);
    cmd_train(c, dir, log);

    SUBCASE("46 experimental and 44 control students") {
      const auto r = cmd_simulate(c, dir, log);
      CHECK(r.sessions.size() == 90);
      CHECK(r.drl_decisions.size() == 598);
      CHECK(count_lines(testing::read_file(dir / "decisions.csv")) == 599);
      CHECK(load_sessions(dir / "sessions.jsonl") == r.sessions);
      for (const auto& s : r.sessions) {
        CHECK(s.decisions.size() == 13);
        CHECK(s.violations(c.cohort.tutor.curriculum).empty());
        if (s.condition != "Ctrl") continue;
        for (const auto& d : s.decisions) CHECK(d.action == Action::NoIntervention);
      }
      CHECK(r.classifier_accuracy >= 0.0);
      CHECK(fs::exists(dir / "forest.json"));
      CHECK(count_lines(testing::read_file(dir / "classifier.csv")) == 91);
      CHECK(r.sessions == simulate_deployment(c, load_model(dir / "model.json")));
    }
    SUBCASE("rerun gives identical logs") {
      cmd_simulate(c, dir, log);
      const auto first = testing::read_file(dir / "sessions.jsonl");
      const auto decisions = testing::read_file(dir / "decisions.csv");
      cmd_simulate(c, dir, log);
      CHECK(testing::read_file(dir / "sessions.jsonl") == first);
      CHECK(testing::read_file(dir / "decisions.csv") == decisions);
    }
    SUBCASE("schema mismatch") {
      auto model = load_model(dir / "model.json");
      model.schema_id = "other.schema";
      save_model(model, dir / "model.json");
      CHECK_THROWS_WITH_AS(cmd_simulate(c, dir, log), doctest::Contains("schema mismatch"), Error);
    }
  }

  TEST_CASE("report") {
    const auto dir = testing::scratch_dir("cli_report");
    std::ostringstream log;
    const auto c = small_config();
    SUBCASE("reference counts give the chi-square line") {
      store_sessions(reference_count_sessions(), dir / "sessions.jsonl");
      const auto r = cmd_report(c, dir, log);
      CHECK(log.str().find("3.25, df=2") != std::string::npos);
      REQUIRE(r.chi_square_group.has_value());
      CHECK(r.chi_square_group->n == 598);
      CHECK(r.by_group.cell(Action::Nudge, 0) == 94);
      CHECK(r.by_group.cell(Action::NoIntervention, 1) == 156);
      CHECK(log.str().find("ANOVA skipped") != std::string::npos);  // one condition only
      for (const char* f : {"summary.csv", "summary.txt", "decisions_by_level.csv", "decisions_by_group.csv", "stats.csv"}) {
        CHECK(fs::exists(dir / "reports" / f));
      }
      CHECK(testing::read_file(dir / "reports" / "summary.txt") == log.str());
    }
    SUBCASE("report values equal direct module calls") {
      auto sessions = reference_count_sessions();
      for (int i = 0; i < 6; ++i) {
        sessions.push_back(testing::fixture_session("c" + std::to_string(i), "Ctrl", MetacognitiveGroup::Procedural,
                                                    std::vector<std::pair<Action, bool>>(13, {Action::NoIntervention, true}),
                                                    30.0 + 3 * i, 60.0));
      }
      store_sessions(sessions, dir / "sessions.jsonl");
      const auto r = cmd_report(c, dir, log);
      const auto records = score_records_from_sessions(sessions);
      const auto table = summary_table(records);
      REQUIRE(r.summary.size() == table.size());
      for (std::size_t g = 0; g < table.size(); ++g) {
        CHECK(r.summary[g].group == table[g].group);
        for (auto m : kSummaryMetrics) {
          CHECK(r.summary[g].at(m).mean == table[g].at(m).mean);
          CHECK(r.summary[g].at(m).sd == table[g].at(m).sd);
        }
      }
      std::vector<DecisionRecord> drl;
      for (const auto& s : sessions) {
        if (s.condition != "DRL") continue;
        auto recs = decision_records(s);
        drl.insert(drl.end(), recs.begin(), recs.end());
      }
      CHECK(r.by_level.counts == decision_distribution(drl, DecisionKey::ByLevel).counts);
      REQUIRE(r.anova_pre.has_value());
      std::vector<std::vector<double>> pre(2);
      for (const auto& rec : records) pre[rec.group == "DRL" ? 0 : 1].push_back(rec.pre);
      CHECK(r.anova_pre->f == one_way_anova(pre).f);
      CHECK(r.chi_square_group->statistic == doctest::Approx(chi_square({{{94, 65, 127}, {82, 74, 156}}}).statistic).epsilon(1e-12));
      std::ostringstream csv;
      write_summary_csv(table, csv);
      CHECK(testing::read_file(dir / "reports" / "summary.csv") == csv.str());
    }
    SUBCASE("score records are normalized means") {
      const auto s = testing::fixture_session("a", "DRL", MetacognitiveGroup::Declarative, {}, 40.0, 80.0);
      const auto r = score_records_from_sessions({s});
      CHECK(r[0].pre == doctest::Approx(0.4));
      CHECK(r[0].post == doctest::Approx(0.8));
      CHECK(r[0].iso_post == doctest::Approx(0.8));
      CHECK(r[0].group == "DRL");
    }
    SUBCASE("empty logs") {
      testing::write_file(dir / "sessions.jsonl", "");
      CHECK_THROWS_AS(cmd_report(c, dir, log), Error);
      CHECK_THROWS_AS(build_report({}), Error);
    }
  }

  TEST_CASE("mine") {
    const auto dir = testing::scratch_dir("cli_mine");
    std::ostringstream log;
    const auto c = small_config();
    using A = Action;
    SUBCASE("four-transaction hand fixture") {
      const std::vector<SessionLog> sessions{
          testing::fixture_session("a", "DRL", MetacognitiveGroup::Declarative, {{A::NoIntervention, false}, {A::NoIntervention, true}}),
          testing::fixture_session("b", "DRL", MetacognitiveGroup::Declarative, {{A::NoIntervention, false}, {A::NoIntervention, true}}),
          testing::fixture_session("c", "DRL", MetacognitiveGroup::Declarative, {{A::NoIntervention, false}, {A::Nudge, true}}),
          testing::fixture_session("d", "DRL", MetacognitiveGroup::Declarative, {{A::Nudge, true}, {A::NoIntervention, true}}),
          testing::fixture_session("e", "Ctrl", MetacognitiveGroup::Declarative, {{A::PresentBC, true}, {A::PresentBC, true}})};
      store_sessions(sessions, dir / "sessions.jsonl");
      const auto top = cmd_mine(c, dir, 1, std::nullopt, log);
      REQUIRE(top.size() == 1);
      CHECK(log.str().find("{No, Disagree} => No, 50.0%, 66.7%") != std::string::npos);
      CHECK(mining_transactions(sessions).size() == 4);
      CHECK(count_lines(testing::read_file(dir / "reports" / "rules.csv")) == 19);
    }
    SUBCASE("k = 18 prints the full table") {
      store_sessions(reference_count_sessions(), dir / "sessions.jsonl");
      const auto all = cmd_mine(c, dir, 18, std::nullopt, log);
      CHECK(all.size() == 18);
      CHECK(count_lines(log.str()) == 2 + 18);
    }
    SUBCASE("total override rescales supports") {
      const auto sessions = reference_count_sessions();
      store_sessions(sessions, dir / "sessions.jsonl");
      const auto tx = mining_transactions(sessions);
      REQUIRE(tx.size() == 552);
      const auto plain = cmd_mine(c, dir, 18, std::nullopt, log);
      const auto scaled = cmd_mine(c, dir, 18, 598, log);
      for (std::size_t i = 0; i < 18; ++i) {
        CHECK(scaled[i].support == doctest::Approx(plain[i].support * 552.0 / 598.0));
      }
      CHECK(scaled == top_k(mine_rules(tx, 598), 18));
    }
    SUBCASE("no transactions") {
      store_sessions({testing::fixture_session("a", "DRL", MetacognitiveGroup::Declarative, {{A::Nudge, true}})},
                     dir / "sessions.jsonl");
      CHECK_THROWS_WITH_AS(cmd_mine(c, dir, 6, std::nullopt, log), doctest::Contains("no transactions"), Error);
    }
  }

  TEST_CASE("command-line exit codes") {
    const auto dir = testing::scratch_dir("cli_binary");
    CHECK(run_cli("print-default-config", dir / "default.json") == 0);
    CHECK(parse_config(testing::read_file(dir / "default.json")) .seed == default_config().seed);

    auto c = small_config();
    c.dataset_students = 0;
    testing::write_file(dir / "empty.json", config_to_json(c));
    CHECK(run_cli("generate --config " + (dir / "empty.json").string() + " --out " + dir.string(), dir / "log.txt") != 0);
    CHECK(testing::read_file(dir / "log.txt").find("empty cohort") != std::string::npos);

    CHECK(run_cli("generate", dir / "log.txt") != 0);  // --config is required
    CHECK(run_cli("train --config " + (dir / "absent.json").string(), dir / "log.txt") != 0);

    testing::write_file(dir / "small.json", config_to_json(small_config()));
    const std::string common = " --config " + (dir / "small.json").string() + " --out " + (dir / "out").string();
    CHECK(run_cli("generate" + common + " --seed 8", dir / "log.txt") == 0);
    CHECK(testing::read_file(dir / "log.txt").find("students: 40") != std::string::npos);
    auto seeded = small_config();
    seeded.seed = 8;
    std::ostringstream log;
    CHECK(cmd_generate(seeded, dir / "lib", log) == load_dataset(dir / "out" / "dataset.jsonl"));
    CHECK(run_cli("mine" + common + " --k 19", dir / "log.txt") != 0);
  }
}

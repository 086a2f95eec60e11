#include <cmath>
#include <map>
#include <sstream>

#include "doctest.h"
#include "metatutor/metrics_stats.hpp"
#include "test_support.hpp"

using namespace metatutor;

namespace {

double textbook_2x2(long a, long b, long c, long d) {
  const double n = static_cast<double>(a + b + c + d);
  const double num = static_cast<double>(a * d - b * c);
  return n * num * num / static_cast<double>((a + b) * (c + d) * (a + c) * (b + d));
}

std::mt19937_64& rng() {
  static std::mt19937_64 r(2024);
  return r;
}

std::vector<std::vector<double>> random_groups(int k) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::vector<double>> g(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const int size = std::uniform_int_distribution<int>(2, 12)(rng());
    for (int j = 0; j < size; ++j) g[static_cast<std::size_t>(i)].push_back(n(rng()) + i);
  }
  return g;
}

}  // namespace

TEST_SUITE("metrics_stats") {
  TEST_CASE("nlg") {
    CHECK(nlg(0.559, 0.877) == doctest::Approx(0.4789).epsilon(1e-3));
    CHECK(nlg(0.757, 0.949) == doctest::Approx(0.3895).epsilon(1e-3));
    for (double x : {0.0, 0.1, 0.5, 0.99}) CHECK(nlg(x, x) == 0.0);
    CHECK_THROWS_WITH_AS(nlg(1.0, 1.0), doctest::Contains("undefined at maximum pre-score"), Error);
    CHECK_THROWS_AS(nlg(0.5, 1.2), Error);
    CHECK_THROWS_AS(nlg(-0.1, 0.5), Error);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
      const double pre = u(rng()) * 0.999;
      const double a = u(rng());
      const double b = u(rng());
      CHECK((nlg(pre, a) > 0.0) == (a > pre));
      if (a < b) CHECK(nlg(pre, a) < nlg(pre, b));
    }
  }

  TEST_CASE("chi_square") {
    SUBCASE("reference counts") {
      const auto r = chi_square({{{94, 65, 127}, {82, 74, 156}}});
      CHECK(r.statistic == doctest::Approx(3.2485).epsilon(1e-4));
      CHECK(r.df == 2);
      CHECK(r.n == 598);
    }
    SUBCASE("table equal to its expectation") {
      const auto r = chi_square({{{10, 10}, {10, 10}}});
      CHECK(r.statistic == 0.0);
      CHECK(r.df == 1);
    }
    SUBCASE("random 2x2 tables match the closed form") {
      std::uniform_int_distribution<long> c(1, 200);
      for (int i = 0; i < 200; ++i) {
        const long a = c(rng()), b = c(rng()), d = c(rng()), e = c(rng());
        CHECK(chi_square({{{a, b}, {d, e}}}).statistic ==
              doctest::Approx(textbook_2x2(a, b, d, e)).epsilon(1e-10));
      }
    }
    SUBCASE("row and column swaps leave the statistic unchanged") {
      std::uniform_int_distribution<long> c(1, 100);
      for (int i = 0; i < 100; ++i) {
        std::vector<std::vector<long>> t(3, std::vector<long>(4));
        for (auto& row : t)
          for (auto& x : row) x = c(rng());
        const double base = chi_square({t}).statistic;
        auto rows = t;
        std::swap(rows[0], rows[2]);
        auto cols = t;
        for (auto& row : cols) std::swap(row[1], row[3]);
        CHECK(chi_square({rows}).statistic == doctest::Approx(base).epsilon(1e-12));
        CHECK(chi_square({cols}).statistic == doctest::Approx(base).epsilon(1e-12));
      }
    }
    SUBCASE("proportional rows give zero") {
      std::uniform_int_distribution<long> c(1, 50);
      for (int i = 0; i < 100; ++i) {
        std::vector<long> base{c(rng()), c(rng()), c(rng())};
        std::vector<std::vector<long>> t;
        for (long k : {1L, 2L, 5L}) {
          std::vector<long> row;
          for (long x : base) row.push_back(k * x);
          t.push_back(row);
        }
        CHECK(std::abs(chi_square({t}).statistic) < 1e-9);
      }
    }
    SUBCASE("errors") {
      CHECK_THROWS_WITH_AS(chi_square({{{0, 0}, {3, 4}}}), doctest::Contains("zero marginal"), Error);
      CHECK_THROWS_AS(chi_square({{{1, 0}, {3, 0}}}), Error);
      CHECK_THROWS_AS(chi_square({{{1, 2, 3}}}), Error);
      CHECK_THROWS_AS(chi_square({{{1, 2}, {3}}}), Error);
      CHECK_THROWS_AS(chi_square({{{1, -2}, {3, 4}}}), Error);
    }
  }

  TEST_CASE("one_way_anova") {
    SUBCASE("hand example") {
      const auto r = one_way_anova({{1, 2}, {3, 4}});
      CHECK(r.f == doctest::Approx(8.0));
      CHECK(r.df_between == 1);
      CHECK(r.df_within == 2);
    }
    SUBCASE("equal means") {
      CHECK(one_way_anova({{1, 2, 3}, {1, 2, 3}}).f == 0.0);
      CHECK(one_way_anova({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}).f == 0.0);
    }
    SUBCASE("shift and scale invariance") {
      for (int i = 0; i < 100; ++i) {
        const auto g = random_groups(3);
        const double f = one_way_anova(g).f;
        auto shifted = g;
        auto scaled = g;
        for (auto& v : shifted)
          for (auto& x : v) x += 17.5;
        for (auto& v : scaled)
          for (auto& x : v) x *= -3.25;
        CHECK(one_way_anova(shifted).f == doctest::Approx(f).epsilon(1e-9));
        CHECK(one_way_anova(scaled).f == doctest::Approx(f).epsilon(1e-9));
      }
    }
    SUBCASE("errors") {
      CHECK_THROWS_WITH_AS(one_way_anova({{1, 1}, {2, 2}}), doctest::Contains("degenerate"), Error);
      CHECK_THROWS_AS(one_way_anova({{1, 2}}), Error);
      CHECK_THROWS_AS(one_way_anova({{1, 2}, {3}}), Error);
    }
  }

  TEST_CASE("mean_sd") {
    const auto m = mean_sd({2, 4, 4, 4, 5, 5, 7, 9});
    CHECK(m.mean == 5.0);
    CHECK(m.sd == doctest::Approx(std::sqrt(32.0 / 7.0)));
    CHECK(mean_sd({3.0}).sd == 0.0);
    CHECK_THROWS_AS(mean_sd({}), Error);
  }

  TEST_CASE("summary_table") {
    SUBCASE("single student") {
      const auto t = summary_table({{"a", "DRL", 0.5, 0.75, 0.75}});
      REQUIRE(t.size() == 1);
      CHECK(t[0].n == 1);
      CHECK(t[0].at(SummaryMetric::Nlg).mean == doctest::Approx(0.3536).epsilon(1e-3));
      CHECK(t[0].at(SummaryMetric::Nlg).sd == 0.0);
    }
    SUBCASE("identical students have zero spread") {
      const auto t = summary_table({{"a", "g", 0.4, 0.6, 0.5}, {"b", "g", 0.4, 0.6, 0.5}});
      for (auto m : kSummaryMetrics) CHECK(t[0].at(m).sd == 0.0);
    }
    SUBCASE("matches a brute-force aggregation") {
      std::uniform_real_distribution<double> u(0.0, 0.99);
      std::vector<ScoreRecord> recs;
      const std::vector<std::string> groups{"DRL", "Ctrl", "CDL"};
      for (int i = 0; i < 90; ++i) {
        recs.push_back({"s" + std::to_string(i), groups[static_cast<std::size_t>(i * 7 % 3)], u(rng()), u(rng()), u(rng())});
      }
      const auto t = summary_table(recs, groups);
      REQUIRE(t.size() == 3);
      for (std::size_t gi = 0; gi < 3; ++gi) {
        CHECK(t[gi].group == groups[gi]);
        std::map<int, std::vector<double>> cols;
        for (const auto& r : recs) {
          if (r.group != groups[gi]) continue;
          cols[0].push_back(r.pre);
          cols[1].push_back(r.iso_post);
          cols[2].push_back((r.iso_post - r.pre) / std::sqrt(1.0 - r.pre));
          cols[3].push_back(r.post);
          cols[4].push_back((r.post - r.pre) / std::sqrt(1.0 - r.pre));
        }
        for (int m = 0; m < 5; ++m) {
          const auto& v = cols[m];
          double mean = 0.0;
          for (double x : v) mean += x;
          mean /= static_cast<double>(v.size());
          double ss = 0.0;
          for (double x : v) ss += (x - mean) * (x - mean);
          const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
          CHECK(t[gi].metrics[static_cast<std::size_t>(m)].mean == doctest::Approx(mean).epsilon(1e-12));
          CHECK(t[gi].metrics[static_cast<std::size_t>(m)].sd == doctest::Approx(sd).epsilon(1e-12));
        }
      }
    }
    SUBCASE("groups default to first-appearance order") {
      const auto t = summary_table({{"a", "B", 0.1, 0.2, 0.2}, {"b", "A", 0.1, 0.2, 0.2}});
      CHECK(t[0].group == "B");
      CHECK(t[1].group == "A");
    }
    SUBCASE("errors") {
      CHECK_THROWS_AS(summary_table({{"a", "g", 0.4, 0.6, 0.5}}, {"g", "missing"}), Error);
      CHECK_THROWS_AS(summary_table({}), Error);
    }
  }

  TEST_CASE("summary output") {
    const auto t = summary_table({{"a", "DRL", 0.5, 0.75, 0.7}, {"b", "DRL", 0.6, 0.8, 0.9}});
    std::ostringstream csv;
    write_summary_csv(t, csv);
    CHECK(csv.str().rfind("metric,group,n,mean,sd\nPre,DRL,2,0.55", 0) == 0);
    std::ostringstream text;
    write_summary_text(t, text);
    const std::string s = text.str();
    CHECK(s.find("DRL (N=2)") != std::string::npos);
    CHECK(s.find("55.0 (7)") != std::string::npos);
    const auto iso = s.find("Iso. Post");
    const auto post = s.find("\nPost");
    CHECK(s.find("Pre") < iso);
    CHECK(iso < s.find("Iso. NLG"));
    CHECK(s.find("Iso. NLG") < post);
    CHECK(post < s.find("\nNLG"));
  }
}

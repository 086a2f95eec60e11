#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "metatutor/domain.hpp"

namespace metatutor {

/// Scores normalized to [0,1].
struct ScoreRecord {
  std::string student_id;
  std::string group;
  double pre = 0.0;
  double post = 0.0;
  double iso_post = 0.0;
};

/// (post - pre) / sqrt(1 - pre) on normalized scores; throws at pre = 1.
double nlg(double pre, double post);

struct ContingencyTable {
  std::vector<std::vector<long>> counts;  // rows x columns
};

struct ChiSquareResult {
  double statistic = 0.0;
  int df = 0;
  long n = 0;
};

/// Pearson chi-square of independence with expected counts from marginals.
ChiSquareResult chi_square(const ContingencyTable& table);

struct AnovaResult {
  double f = 0.0;
  int df_between = 0;
  int df_within = 0;
};

AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single value
};
MeanSd mean_sd(const std::vector<double>& values);

/// Rows of the group comparison table, in display order.
enum class SummaryMetric { Pre, IsoPost, IsoNlg, Post, Nlg };
inline constexpr std::array<SummaryMetric, 5> kSummaryMetrics = {
    SummaryMetric::Pre, SummaryMetric::IsoPost, SummaryMetric::IsoNlg, SummaryMetric::Post,
    SummaryMetric::Nlg};
std::string_view summary_metric_name(SummaryMetric m);  // "Pre", "Iso. Post", ...

struct GroupSummary {
  std::string group;
  std::size_t n = 0;
  std::array<MeanSd, kSummaryMetrics.size()> metrics{};

  const MeanSd& at(SummaryMetric m) const { return metrics[static_cast<std::size_t>(m)]; }
};

/// Per-group statistics, groups in first-appearance order (or `group_order`
/// when given, in which case every listed group must be present). NLG
/// columns average per-student values.
std::vector<GroupSummary> summary_table(const std::vector<ScoreRecord>& records,
                                        const std::vector<std::string>& group_order = {});

/// CSV: metric,group,n,mean,sd (normalized units).
void write_summary_csv(const std::vector<GroupSummary>& table, std::ostream& out);
/// Aligned text; score rows shown on the tutors' 0-100 scale.
void write_summary_text(const std::vector<GroupSummary>& table, std::ostream& out);

}  // namespace metatutor

#include "metatutor/metrics_stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

namespace metatutor {

double nlg(double pre, double post) {
  if (!(pre >= 0.0 && pre <= 1.0) || !(post >= 0.0 && post <= 1.0)) {
    throw Error("scores must be normalized to [0,1]");
  }
  if (pre >= 1.0) throw Error("NLG undefined at maximum pre-score");
  return (post - pre) / std::sqrt(1.0 - pre);
}

ChiSquareResult chi_square(const ContingencyTable& table) {
  const auto& c = table.counts;
  if (c.size() < 2 || c.front().size() < 2) throw Error("contingency table must be at least 2x2");
  const std::size_t cols = c.front().size();
  std::vector<double> row_sum(c.size(), 0.0);
  std::vector<double> col_sum(cols, 0.0);
  double n = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i].size() != cols) throw Error("ragged contingency table");
    for (std::size_t j = 0; j < cols; ++j) {
      if (c[i][j] < 0) throw Error("negative count in contingency table");
      row_sum[i] += static_cast<double>(c[i][j]);
      col_sum[j] += static_cast<double>(c[i][j]);
      n += static_cast<double>(c[i][j]);
    }
  }
  for (double r : row_sum)
    if (r == 0.0) throw Error("zero marginal in contingency table");
  for (double s : col_sum)
    if (s == 0.0) throw Error("zero marginal in contingency table");

  double stat = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double expected = row_sum[i] * col_sum[j] / n;
      const double d = static_cast<double>(c[i][j]) - expected;
      stat += d * d / expected;
    }
  }
  return {stat, static_cast<int>((c.size() - 1) * (cols - 1)), static_cast<long>(n)};
}

AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw Error("ANOVA needs at least two groups");
  double grand = 0.0;
  std::size_t n = 0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw Error("ANOVA needs at least two values per group");
    for (double v : g) grand += v;
    n += g.size();
  }
  grand /= static_cast<double>(n);

  double ssb = 0.0;
  double ssw = 0.0;
  for (const auto& g : groups) {
    double mean = 0.0;
    for (double v : g) mean += v;
    mean /= static_cast<double>(g.size());
    ssb += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
    for (double v : g) ssw += (v - mean) * (v - mean);
  }
  const int df_between = static_cast<int>(groups.size()) - 1;
  const int df_within = static_cast<int>(n - groups.size());
  if (!(ssw > 0.0)) throw Error("degenerate within-group variance");
  return {(ssb / df_between) / (ssw / df_within), df_between, df_within};
}

MeanSd mean_sd(const std::vector<double>& values) {
  if (values.empty()) throw Error("mean of an empty sample");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

std::string_view summary_metric_name(SummaryMetric m) {
  switch (m) {
    case SummaryMetric::Pre: return "Pre";
    case SummaryMetric::IsoPost: return "Iso. Post";
    case SummaryMetric::IsoNlg: return "Iso. NLG";
    case SummaryMetric::Post: return "Post";
    case SummaryMetric::Nlg: return "NLG";
  }
  return "?";
}

std::vector<GroupSummary> summary_table(const std::vector<ScoreRecord>& records,
                                        const std::vector<std::string>& group_order) {
  std::vector<std::string> order = group_order;
  if (order.empty()) {
    for (const auto& r : records)
      if (std::find(order.begin(), order.end(), r.group) == order.end()) order.push_back(r.group);
  }
  if (order.empty()) throw Error("no score records");

  std::vector<GroupSummary> out;
  for (const auto& g : order) {
    std::array<std::vector<double>, kSummaryMetrics.size()> columns;
    for (const auto& r : records) {
      if (r.group != g) continue;
      columns[0].push_back(r.pre);
      columns[1].push_back(r.iso_post);
      columns[2].push_back(nlg(r.pre, r.iso_post));
      columns[3].push_back(r.post);
      columns[4].push_back(nlg(r.pre, r.post));
    }
    if (columns[0].empty()) throw Error("empty group '" + g + "'");
    GroupSummary s;
    s.group = g;
    s.n = columns[0].size();
    for (std::size_t m = 0; m < columns.size(); ++m) s.metrics[m] = mean_sd(columns[m]);
    out.push_back(std::move(s));
  }
  return out;
}

void write_summary_csv(const std::vector<GroupSummary>& table, std::ostream& out) {
  out << "metric,group,n,mean,sd\n" << std::setprecision(17);
  for (auto m : kSummaryMetrics) {
    for (const auto& g : table) {
      out << summary_metric_name(m) << ',' << g.group << ',' << g.n << ',' << g.at(m).mean << ','
          << g.at(m).sd << '\n';
    }
  }
}

void write_summary_text(const std::vector<GroupSummary>& table, std::ostream& out) {
  constexpr int label_width = 11;
  constexpr int cell_width = 18;
  out << std::left << std::setw(label_width) << "";
  for (const auto& g : table) {
    std::ostringstream head;
    head << g.group << " (N=" << g.n << ")";
    out << std::right << std::setw(cell_width) << head.str();
  }
  out << '\n';
  for (auto m : kSummaryMetrics) {
    const bool score_row = m == SummaryMetric::Pre || m == SummaryMetric::IsoPost ||
                           m == SummaryMetric::Post;
    out << std::left << std::setw(label_width) << summary_metric_name(m);
    for (const auto& g : table) {
      std::ostringstream cell;
      cell << std::fixed;
      if (score_row) {
        cell << std::setprecision(1) << 100.0 * g.at(m).mean << " (" << std::setprecision(0)
             << 100.0 * g.at(m).sd << ")";
      } else {
        cell << std::setprecision(2) << g.at(m).mean << " (" << g.at(m).sd << ")";
      }
      out << std::right << std::setw(cell_width) << cell.str();
    }
    out << '\n';
  }
}

}  // namespace metatutor

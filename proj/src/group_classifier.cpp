#include "metatutor/group_classifier.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"
#include "metatutor/tutor_sim.hpp"

namespace metatutor {

namespace {

constexpr std::array<const char*, 7> kPerProblem = {"score",        "time_ratio", "length_ratio",
                                                    "early_switch", "late_switch", "switched",
                                                    "switch_point"};

using Counts = std::array<int, kGroupCount>;

MetacognitiveGroup majority(const Counts& c) {
  std::size_t best = 0;
  for (std::size_t g = 1; g < kGroupCount; ++g)
    if (c[g] > c[best]) best = g;
  return kAllGroups[best];
}

double gini(const Counts& c, int n) {
  if (n == 0) return 0.0;
  double s = 1.0;
  for (int k : c) {
    const double p = static_cast<double>(k) / n;
    s -= p * p;
  }
  return s;
}

struct Builder {
  const std::vector<LabeledExample>& data;
  std::size_t n_features;
  int max_depth;
  std::size_t subset_size;
  std::mt19937_64& rng;
  DecisionTree tree;

  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
  };

  Split best_split(const std::vector<std::size_t>& idx, const std::vector<std::size_t>& features) {
    Split best;
    best.impurity = std::numeric_limits<double>::infinity();
    const int n = static_cast<int>(idx.size());
    std::vector<std::size_t> sorted = idx;
    for (std::size_t f : features) {
      std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
        const double va = data[a].x.values[f];
        const double vb = data[b].x.values[f];
        return va != vb ? va < vb : a < b;
      });
      Counts left{};
      Counts right{};
      for (auto i : sorted) ++right[static_cast<std::size_t>(data[i].y)];
      for (int k = 0; k + 1 < n; ++k) {
        const auto cls = static_cast<std::size_t>(data[sorted[k]].y);
        ++left[cls];
        --right[cls];
        const double v = data[sorted[k]].x.values[f];
        const double next = data[sorted[k + 1]].x.values[f];
        if (v == next) continue;
        const int nl = k + 1;
        const int nr = n - nl;
        const double imp = (nl * gini(left, nl) + nr * gini(right, nr)) / n;
        if (imp < best.impurity) {
          best = {static_cast<int>(f), v + (next - v) / 2.0, imp};
        }
      }
    }
    return best;
  }

  int build(const std::vector<std::size_t>& idx, int depth) {
    Counts counts{};
    for (auto i : idx) ++counts[static_cast<std::size_t>(data[i].y)];
    const int node = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({-1, 0.0, -1, -1, majority(counts)});

    const bool pure = std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) <= 1;
    if (pure || idx.size() < 2 || (max_depth > 0 && depth >= max_depth)) return node;

    std::vector<std::size_t> all(n_features);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<std::size_t> subset(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(subset_size));
    Split split = best_split(idx, subset);
    if (split.feature < 0) split = best_split(idx, all);  // sampled features were constant
    if (split.feature < 0) return node;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto i : idx) {
      (data[i].x.values[static_cast<std::size_t>(split.feature)] <= split.threshold ? left : right)
          .push_back(i);
    }
    const int l = build(left, depth + 1);
    const int r = build(right, depth + 1);
    auto& n = tree.nodes[static_cast<std::size_t>(node)];
    n.feature = split.feature;
    n.threshold = split.threshold;
    n.left = l;
    n.right = r;
    return node;
  }
};

void check_width(const PretestFeatures& x, std::size_t width) {
  if (x.values.size() != width) {
    throw Error("feature vector has " + std::to_string(x.values.size()) + " values, expected " +
                std::to_string(width));
  }
}

}  // namespace

const std::vector<std::string>& pretest_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (int p = 1; p <= Curriculum::pretest_count; ++p)
      for (const char* f : kPerProblem) n.push_back("pre" + std::to_string(p) + "." + f);
    n.emplace_back("pre.early_count");
    n.emplace_back("pre.late_count");
    return n;
  }();
  return names;
}

PretestFeatures pretest_features(const SessionLog& log) {
  if (log.pretest.size() != static_cast<std::size_t>(Curriculum::pretest_count)) {
    throw Error("session " + log.student_id + " lacks pre-test outcomes");
  }
  PretestFeatures f;
  double early = 0.0;
  double late = 0.0;
  for (const auto& o : log.pretest) {
    const auto timing = classify_switch(o.switch_action_index);
    const double e = timing == SwitchTiming::Early ? 1.0 : 0.0;
    const double l = timing == SwitchTiming::Late ? 1.0 : 0.0;
    f.values.push_back(o.score / 100.0);
    f.values.push_back(o.time_s / o.ref_time_s);
    f.values.push_back(o.action_count / o.ref_len);
    f.values.push_back(e);
    f.values.push_back(l);
    f.values.push_back(o.switch_action_index ? 1.0 : 0.0);
    f.values.push_back(o.switch_action_index ? *o.switch_action_index / double(o.action_count) : 0.0);
    early += e;
    late += l;
  }
  f.values.push_back(early);
  f.values.push_back(late);
  return f;
}

Forest train_forest(const std::vector<LabeledExample>& data, const ForestOptions& options) {
  if (options.n_trees < 1) throw Error("n_trees must be >= 1");
  if (options.max_depth < 0) throw Error("max_depth must be >= 0");
  if (data.empty()) throw Error("empty training data");
  const std::size_t d = data.front().x.values.size();
  if (d == 0) throw Error("feature vectors are empty");
  Counts classes{};
  for (const auto& e : data) {
    check_width(e.x, d);
    ++classes[static_cast<std::size_t>(e.y)];
  }
  if (std::count_if(classes.begin(), classes.end(), [](int c) { return c > 0; }) < 2) {
    throw Error("training data has a single class");
  }

  Forest forest;
  forest.n_features = d;
  forest.options = options;
  const auto subset = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
  for (int t = 0; t < options.n_trees; ++t) {
    std::mt19937_64 rng(derive_seed(options.seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> idx(data.size());
    if (options.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
      for (auto& i : idx) i = pick(rng);
    } else {
      std::iota(idx.begin(), idx.end(), 0);
    }
    Builder b{data, d, options.max_depth, subset, rng, {}};
    b.build(idx, 0);
    forest.trees.push_back(std::move(b.tree));
  }
  return forest;
}

MetacognitiveGroup predict(const DecisionTree& tree, const PretestFeatures& x) {
  if (tree.nodes.empty()) throw Error("empty tree");
  std::size_t i = 0;
  while (!tree.nodes[i].is_leaf()) {
    const auto& n = tree.nodes[i];
    if (static_cast<std::size_t>(n.feature) >= x.values.size()) {
      throw Error("feature vector too short for tree");
    }
    i = static_cast<std::size_t>(x.values[static_cast<std::size_t>(n.feature)] <= n.threshold
                                     ? n.left
                                     : n.right);
  }
  return tree.nodes[i].label;
}

MetacognitiveGroup predict(const Forest& forest, const PretestFeatures& x) {
  check_width(x, forest.n_features);
  if (forest.trees.empty()) throw Error("empty forest");
  Counts votes{};
  for (const auto& t : forest.trees) ++votes[static_cast<std::size_t>(predict(t, x))];
  return majority(votes);
}

double accuracy(const Forest& forest, const std::vector<LabeledExample>& test) {
  if (test.empty()) throw Error("empty test set");
  std::size_t hits = 0;
  for (const auto& e : test) hits += predict(forest, e.x) == e.y ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

void save_forest(const Forest& forest, const std::filesystem::path& path) {
  using nlohmann::json;
  json trees = json::array();
  for (const auto& t : forest.trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes) {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"label", group_name(n.label)}});
    }
    trees.push_back(std::move(nodes));
  }
  json doc{{"n_features", forest.n_features},
           {"n_trees", forest.options.n_trees},
           {"max_depth", forest.options.max_depth},
           {"seed", forest.options.seed},
           {"bootstrap", forest.options.bootstrap},
           {"feature_names", pretest_feature_names()},
           {"trees", trees}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write forest file " + path.string());
  out << doc.dump() << '\n';
}

Forest load_forest(const std::filesystem::path& path) {
  using nlohmann::json;
  std::ifstream in(path);
  if (!in) throw Error("cannot open forest file " + path.string());
  try {
    const json doc = json::parse(in);
    Forest f;
    f.n_features = doc.at("n_features").get<std::size_t>();
    f.options.n_trees = doc.at("n_trees").get<int>();
    f.options.max_depth = doc.at("max_depth").get<int>();
    f.options.seed = doc.at("seed").get<std::uint64_t>();
    f.options.bootstrap = doc.at("bootstrap").get<bool>();
    for (const auto& t : doc.at("trees")) {
      DecisionTree tree;
      for (const auto& n : t) {
        tree.nodes.push_back({n.at("feature").get<int>(), n.at("threshold").get<double>(),
                              n.at("left").get<int>(), n.at("right").get<int>(),
                              group_from_name(n.at("label").get<std::string>())});
      }
      f.trees.push_back(std::move(tree));
    }
    return f;
  } catch (const json::exception& e) {
    throw Error("malformed forest file " + path.string() + ": " + e.what());
  }
}

}  // namespace metatutor

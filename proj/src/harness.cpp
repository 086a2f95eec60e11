#include "metatutor/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"
#include "metatutor/session_io.hpp"

namespace metatutor {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// ----- config (de)serialization ---------------------------------------------

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw Error("config: '" + std::string(where) + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error("config: unknown key '" + key + "' in '" + std::string(where) + "'");
    }
  }
}

template <typename T>
void read(const json& j, std::string_view key, T& out, std::string_view where) {
  const auto it = j.find(std::string(key));
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw Error("config: bad value for '" + std::string(where) + "." + std::string(key) + "'");
  }
}

json profile_json(const StudentProfile& p) {
  return {{"p_early_switch", p.p_early_switch_spontaneous},
          {"p_late_switch", p.p_late_switch_spontaneous},
          {"p_comply_nudge", p.p_comply_nudge},
          {"p_comply_present", p.p_comply_present},
          {"skill_fc", p.skill_fc},
          {"skill_bc", p.skill_bc},
          {"learning_rate", p.learning_rate},
          {"noise_sd", p.noise_sd}};
}

StudentProfile profile_from(const json& j, MetacognitiveGroup g) {
  const std::string where = "profiles." + std::string(group_name(g));
  check_keys(j, where,
             {"p_early_switch", "p_late_switch", "p_comply_nudge", "p_comply_present", "skill_fc",
              "skill_bc", "learning_rate", "noise_sd"});
  StudentProfile p = default_profile(g);
  read(j, "p_early_switch", p.p_early_switch_spontaneous, where);
  read(j, "p_late_switch", p.p_late_switch_spontaneous, where);
  read(j, "p_comply_nudge", p.p_comply_nudge, where);
  read(j, "p_comply_present", p.p_comply_present, where);
  read(j, "skill_fc", p.skill_fc, where);
  read(j, "skill_bc", p.skill_bc, where);
  read(j, "learning_rate", p.learning_rate, where);
  read(j, "noise_sd", p.noise_sd, where);
  return p;
}

json delay_json(const DelayDistribution& d) {
  if (const auto* ln = std::get_if<LogNormalDelay>(&d)) {
    return {{"type", "lognormal"}, {"mu", ln->mu}, {"sigma", ln->sigma}};
  }
  if (const auto* pm = std::get_if<PointMassDelay>(&d)) {
    return {{"type", "point"}, {"seconds", pm->seconds}};
  }
  const auto& e = std::get<EmpiricalDelay>(d);
  return {{"type", "empirical"}, {"values", e.values}, {"weights", e.weights}};
}

DelayDistribution delay_from(const json& j) {
  check_keys(j, "behavior.nudge_delay", {"type", "mu", "sigma", "seconds", "values", "weights"});
  std::string type = "lognormal";
  read(j, "type", type, "behavior.nudge_delay");
  if (type == "lognormal") {
    LogNormalDelay d;
    read(j, "mu", d.mu, "behavior.nudge_delay");
    read(j, "sigma", d.sigma, "behavior.nudge_delay");
    return d;
  }
  if (type == "point") {
    PointMassDelay d;
    read(j, "seconds", d.seconds, "behavior.nudge_delay");
    return d;
  }
  if (type == "empirical") {
    EmpiricalDelay d;
    read(j, "values", d.values, "behavior.nudge_delay");
    read(j, "weights", d.weights, "behavior.nudge_delay");
    return d;
  }
  throw Error("config: unknown nudge_delay type '" + type + "'");
}

json counts_json(const CohortCounts& c) {
  return {{"declarative", c.declarative}, {"procedural", c.procedural}, {"conditional", c.conditional}};
}

CohortCounts counts_from(const json& j, std::string_view where) {
  check_keys(j, where, {"declarative", "procedural", "conditional"});
  CohortCounts c;
  read(j, "declarative", c.declarative, where);
  read(j, "procedural", c.procedural, where);
  read(j, "conditional", c.conditional, where);
  return c;
}

// ----- command helpers ------------------------------------------------------

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

CohortOptions cohort_options(const ExperimentConfig& c, std::string_view condition,
                             std::string_view prefix) {
  CohortOptions o = c.cohort;
  o.condition = std::string(condition);
  o.id_prefix = std::string(prefix);
  return o;
}

std::vector<SessionLog> run_cohort(const ExperimentConfig& c, const CohortCounts& counts,
                                   const PolicyFactory& policy, std::string_view condition,
                                   std::string_view prefix) {
  if (counts.total() == 0) return {};
  const std::uint64_t seed = derive_seed(derive_seed(c.seed, "simulate"), condition);
  return simulate_roster(counts.roster(), policy, seed, cohort_options(c, condition, prefix));
}

std::vector<LabeledExample> labeled(const std::vector<SessionLog>& sessions) {
  std::vector<LabeledExample> out;
  out.reserve(sessions.size());
  for (const auto& s : sessions) out.push_back({pretest_features(s), s.profile.group});
  return out;
}

/// Drops all-zero rows and columns; nullopt when fewer than 2x2 remain.
std::optional<ChiSquareResult> chi_square_nonzero(const std::vector<std::vector<long>>& m) {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < m.size(); ++i) {
    long s = 0;
    for (long v : m[i]) s += v;
    if (s > 0) rows.push_back(i);
  }
  for (std::size_t j = 0; !m.empty() && j < m.front().size(); ++j) {
    long s = 0;
    for (const auto& r : m) s += r[j];
    if (s > 0) cols.push_back(j);
  }
  if (rows.size() < 2 || cols.size() < 2) return std::nullopt;
  ContingencyTable t;
  for (auto i : rows) {
    std::vector<long> r;
    for (auto j : cols) r.push_back(m[i][j]);
    t.counts.push_back(std::move(r));
  }
  return chi_square(t);
}

void write_table_csv(const DecisionTable& t, std::ostream& out) {
  out << "action";
  for (const auto& c : t.columns) out << ',' << c;
  out << '\n';
  for (auto a : kAllActions) {
    out << action_short_name(a);
    for (std::size_t j = 0; j < t.columns.size(); ++j) out << ',' << t.cell(a, j);
    out << '\n';
  }
}

void write_table_text(const DecisionTable& t, std::ostream& out) {
  out << std::left << std::setw(6) << "";
  for (const auto& c : t.columns) out << std::right << std::setw(12) << c;
  out << '\n';
  std::vector<long> col_total(t.columns.size(), 0);
  for (auto a : kAllActions)
    for (std::size_t j = 0; j < t.columns.size(); ++j) col_total[j] += t.cell(a, j);
  for (auto a : kAllActions) {
    out << std::left << std::setw(6) << action_short_name(a);
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
      std::ostringstream cell;
      cell << t.cell(a, j);
      if (col_total[j] > 0) {
        cell << " (" << std::fixed << std::setprecision(0)
             << 100.0 * static_cast<double>(t.cell(a, j)) / static_cast<double>(col_total[j]) << "%)";
      }
      out << std::right << std::setw(12) << cell.str();
    }
    out << '\n';
  }
}

std::string format_chi(const ChiSquareResult& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << r.statistic << ", df=" << r.df << ", N=" << r.n;
  return os.str();
}

std::vector<SessionLog> load_nonempty_sessions(const ExperimentConfig& c, const fs::path& out_dir) {
  auto sessions = load_sessions(resolve(out_dir, c.paths.sessions));
  if (sessions.empty()) throw Error("no session logs in " + resolve(out_dir, c.paths.sessions).string());
  return sessions;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<MetacognitiveGroup> CohortCounts::roster() const {
  if (declarative < 0 || procedural < 0 || conditional < 0) {
    throw Error("cohort counts must be nonnegative");
  }
  std::vector<MetacognitiveGroup> r;
  r.insert(r.end(), static_cast<std::size_t>(declarative), MetacognitiveGroup::Declarative);
  r.insert(r.end(), static_cast<std::size_t>(procedural), MetacognitiveGroup::Procedural);
  r.insert(r.end(), static_cast<std::size_t>(conditional), MetacognitiveGroup::Conditional);
  return r;
}

void ExperimentConfig::validate() const {
  if (dataset_students < 0) throw Error("config: dataset students must be nonnegative");
  cohort.tutor.curriculum.validate();
  validate_delay(cohort.tutor.behavior.nudge_delay);
  for (const auto& p : cohort.profile_overrides)
    if (p) p->validate();
  hyperparams.validate();
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error("config: train_fraction must lie in (0, 1)");
  }
  for (const auto* c : {&drl, &control, &cdl}) c->roster();
  if (classifier_students < 0) throw Error("config: classifier students must be nonnegative");
  if (forest_trees < 1) throw Error("config: forest trees must be >= 1");
  if (forest_depth < 0) throw Error("config: forest depth must be >= 0");
  behavior_policy_factory(behavior_policy);
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  // Raw 0-100 rewards make plain SGD at lr 1e-3 diverge on this network.
  c.hyperparams.normalize_rewards = true;
  for (auto g : kAllGroups) c.cohort.profile_overrides[static_cast<std::size_t>(g)] = default_profile(g);
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  const auto& cur = c.cohort.tutor.curriculum;
  const auto& beh = c.cohort.tutor.behavior;
  const auto& hp = c.hyperparams;
  json profiles = json::object();
  for (auto g : kAllGroups) {
    const auto& o = c.cohort.profile_overrides[static_cast<std::size_t>(g)];
    profiles[std::string(group_name(g))] = profile_json(o ? *o : default_profile(g));
  }
  json j{
      {"seed", c.seed},
      {"dataset",
       {{"n_students", c.dataset_students},
        {"mix", c.dataset_mix},
        {"behavior_policy", c.behavior_policy}}},
      {"curriculum",
       {{"worked_example_slots", cur.worked_example_slots},
        {"posttest_difficulty", cur.posttest_difficulty},
        {"ref_len_by_level", cur.ref_len_by_level},
        {"pretest_ref_len", cur.pretest_ref_len},
        {"posttest_ref_len", cur.posttest_ref_len}}},
      {"behavior",
       {{"seconds_per_action", beh.seconds_per_action},
        {"fc_overhead", beh.fc_overhead},
        {"fc_learning_scale", beh.fc_learning_scale},
        {"hint_rate", beh.hint_rate},
        {"seconds_per_hint", beh.seconds_per_hint},
        {"pace_sd", beh.pace_sd},
        {"late_switch_window", beh.late_switch_window},
        {"score_weights",
         {{"accuracy", beh.score_weights.accuracy},
          {"time", beh.score_weights.time},
          {"length", beh.score_weights.length}}},
        {"nudge_delay", delay_json(beh.nudge_delay)}}},
      {"profiles", profiles},
      {"skill_jitter_sd", c.cohort.skill_jitter_sd},
      {"hyperparams",
       {{"learning_rate", hp.learning_rate},
        {"gamma", hp.gamma},
        {"batch_size", hp.batch_size},
        {"sync_every", hp.sync_every},
        {"max_epochs", hp.max_epochs},
        {"patience", hp.patience},
        {"tolerance", hp.tolerance},
        {"normalize_rewards", hp.normalize_rewards},
        {"layer_sizes", hp.layer_sizes},
        {"train_fraction", c.train_fraction}}},
      {"cohorts",
       {{"drl", counts_json(c.drl)}, {"control", counts_json(c.control)}, {"cdl", counts_json(c.cdl)}}},
      {"classifier",
       {{"n_students", c.classifier_students},
        {"n_trees", c.forest_trees},
        {"max_depth", c.forest_depth}}},
      {"paths",
       {{"dataset", c.paths.dataset},
        {"model", c.paths.model},
        {"loss_curve", c.paths.loss_curve},
        {"sessions", c.paths.sessions},
        {"decisions", c.paths.decisions},
        {"forest", c.paths.forest},
        {"classifier", c.paths.classifier},
        {"reports", c.paths.reports}}}};
  return j.dump(2) + "\n";
}

ExperimentConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("config: malformed JSON: ") + e.what());
  }
  check_keys(j, "<root>",
             {"seed", "dataset", "curriculum", "behavior", "profiles", "skill_jitter_sd",
              "hyperparams", "cohorts", "classifier", "paths"});
  if (!j.contains("seed")) throw Error("config: missing required field 'seed'");

  ExperimentConfig c = default_config();
  read(j, "seed", c.seed, "<root>");
  if (auto it = j.find("dataset"); it != j.end()) {
    check_keys(*it, "dataset", {"n_students", "mix", "behavior_policy"});
    read(*it, "n_students", c.dataset_students, "dataset");
    read(*it, "mix", c.dataset_mix, "dataset");
    read(*it, "behavior_policy", c.behavior_policy, "dataset");
  }
  if (auto it = j.find("curriculum"); it != j.end()) {
    auto& cur = c.cohort.tutor.curriculum;
    check_keys(*it, "curriculum",
               {"worked_example_slots", "posttest_difficulty", "ref_len_by_level",
                "pretest_ref_len", "posttest_ref_len"});
    read(*it, "worked_example_slots", cur.worked_example_slots, "curriculum");
    read(*it, "posttest_difficulty", cur.posttest_difficulty, "curriculum");
    read(*it, "ref_len_by_level", cur.ref_len_by_level, "curriculum");
    read(*it, "pretest_ref_len", cur.pretest_ref_len, "curriculum");
    read(*it, "posttest_ref_len", cur.posttest_ref_len, "curriculum");
  }
  if (auto it = j.find("behavior"); it != j.end()) {
    auto& b = c.cohort.tutor.behavior;
    check_keys(*it, "behavior",
               {"seconds_per_action", "fc_overhead", "fc_learning_scale", "hint_rate",
                "seconds_per_hint", "pace_sd", "late_switch_window", "score_weights",
                "nudge_delay"});
    read(*it, "seconds_per_action", b.seconds_per_action, "behavior");
    read(*it, "fc_overhead", b.fc_overhead, "behavior");
    read(*it, "fc_learning_scale", b.fc_learning_scale, "behavior");
    read(*it, "hint_rate", b.hint_rate, "behavior");
    read(*it, "seconds_per_hint", b.seconds_per_hint, "behavior");
    read(*it, "pace_sd", b.pace_sd, "behavior");
    read(*it, "late_switch_window", b.late_switch_window, "behavior");
    if (auto w = it->find("score_weights"); w != it->end()) {
      check_keys(*w, "behavior.score_weights", {"accuracy", "time", "length"});
      read(*w, "accuracy", b.score_weights.accuracy, "behavior.score_weights");
      read(*w, "time", b.score_weights.time, "behavior.score_weights");
      read(*w, "length", b.score_weights.length, "behavior.score_weights");
    }
    if (auto d = it->find("nudge_delay"); d != it->end()) b.nudge_delay = delay_from(*d);
  }
  if (auto it = j.find("profiles"); it != j.end()) {
    check_keys(*it, "profiles", {"declarative", "procedural", "conditional"});
    for (auto g : kAllGroups) {
      if (auto p = it->find(std::string(group_name(g))); p != it->end()) {
        c.cohort.profile_overrides[static_cast<std::size_t>(g)] = profile_from(*p, g);
      }
    }
  }
  read(j, "skill_jitter_sd", c.cohort.skill_jitter_sd, "<root>");
  if (auto it = j.find("hyperparams"); it != j.end()) {
    auto& hp = c.hyperparams;
    check_keys(*it, "hyperparams",
               {"learning_rate", "gamma", "batch_size", "sync_every", "max_epochs", "patience",
                "tolerance", "normalize_rewards", "layer_sizes", "train_fraction"});
    read(*it, "learning_rate", hp.learning_rate, "hyperparams");
    read(*it, "gamma", hp.gamma, "hyperparams");
    read(*it, "batch_size", hp.batch_size, "hyperparams");
    read(*it, "sync_every", hp.sync_every, "hyperparams");
    read(*it, "max_epochs", hp.max_epochs, "hyperparams");
    read(*it, "patience", hp.patience, "hyperparams");
    read(*it, "tolerance", hp.tolerance, "hyperparams");
    read(*it, "normalize_rewards", hp.normalize_rewards, "hyperparams");
    read(*it, "layer_sizes", hp.layer_sizes, "hyperparams");
    read(*it, "train_fraction", c.train_fraction, "hyperparams");
  }
  if (auto it = j.find("cohorts"); it != j.end()) {
    check_keys(*it, "cohorts", {"drl", "control", "cdl"});
    if (auto d = it->find("drl"); d != it->end()) c.drl = counts_from(*d, "cohorts.drl");
    if (auto d = it->find("control"); d != it->end()) c.control = counts_from(*d, "cohorts.control");
    if (auto d = it->find("cdl"); d != it->end()) c.cdl = counts_from(*d, "cohorts.cdl");
  }
  if (auto it = j.find("classifier"); it != j.end()) {
    check_keys(*it, "classifier", {"n_students", "n_trees", "max_depth"});
    read(*it, "n_students", c.classifier_students, "classifier");
    read(*it, "n_trees", c.forest_trees, "classifier");
    read(*it, "max_depth", c.forest_depth, "classifier");
  }
  if (auto it = j.find("paths"); it != j.end()) {
    auto& p = c.paths;
    check_keys(*it, "paths",
               {"dataset", "model", "loss_curve", "sessions", "decisions", "forest", "classifier",
                "reports"});
    read(*it, "dataset", p.dataset, "paths");
    read(*it, "model", p.model, "paths");
    read(*it, "loss_curve", p.loss_curve, "paths");
    read(*it, "sessions", p.sessions, "paths");
    read(*it, "decisions", p.decisions, "paths");
    read(*it, "forest", p.forest, "paths");
    read(*it, "classifier", p.classifier, "paths");
    read(*it, "reports", p.reports, "paths");
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

fs::path resolve(const fs::path& out_dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : out_dir / path;
}

PolicyFactory behavior_policy_factory(std::string_view name) {
  if (name == "uniform_random") return uniform_random_policy_factory();
  std::optional<Action> a;
  if (name == "nudge") a = Action::Nudge;
  if (name == "present") a = Action::PresentBC;
  if (name == "none") a = Action::NoIntervention;
  if (!a) throw Error("config: unknown behavior policy '" + std::string(name) + "'");
  auto policy = constant_policy(*a);
  return [policy](std::uint64_t) { return policy; };
}

// ----- generate / train / simulate -------------------------------------------

Dataset cmd_generate(const ExperimentConfig& c, const fs::path& out_dir, std::ostream& log) {
  c.validate();
  Dataset d = generate_synthetic_dataset(c.dataset_mix, c.dataset_students,
                                         behavior_policy_factory(c.behavior_policy),
                                         derive_seed(c.seed, "dataset"),
                                         cohort_options(c, "logged", "s"));
  const auto path = resolve(out_dir, c.paths.dataset);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  store_dataset(d, path);
  log << "students: " << d.students().size() << ", transitions: " << d.size() << "\n"
      << "wrote " << path.string() << "\n";
  return d;
}

TrainResult cmd_train(const ExperimentConfig& c, const fs::path& out_dir, std::ostream& log) {
  c.validate();
  const auto data_path = resolve(out_dir, c.paths.dataset);
  if (!fs::exists(data_path)) throw Error("dataset file not found: " + data_path.string());
  const Dataset d = load_dataset(data_path, default_feature_schema().id);
  auto [train_set, test_set] = split_dataset(d, c.train_fraction, derive_seed(c.seed, "split"));
  Hyperparams hp = c.hyperparams;
  hp.seed = derive_seed(c.seed, "train");
  TrainedModel model = train(train_set, test_set, hp);

  const auto model_path = resolve(out_dir, c.paths.model);
  if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
  save_model(model, model_path);
  {
    auto out = open_out(resolve(out_dir, c.paths.loss_curve));
    write_loss_curve_csv(model, out);
  }
  log << "train students: " << train_set.students().size()
      << ", test students: " << test_set.students().size() << "\n"
      << "epochs: " << model.test_loss_curve.size() << ", best epoch: " << model.best_epoch
      << "\n"
      << std::setprecision(6) << "initial test MSE: " << model.initial_test_mse
      << ", best test MSE: " << model.test_mse << "\n"
      << "wrote " << model_path.string() << "\n";
  return {std::move(train_set), std::move(test_set), std::move(model)};
}

std::vector<SessionLog> simulate_deployment(const ExperimentConfig& c, const TrainedModel& model) {
  if (model.schema_id != default_feature_schema().id) {
    throw Error("schema mismatch: model '" + model.schema_id + "', config '" +
                default_feature_schema().id + "'");
  }
  const auto greedy = greedy_policy_factory(model);
  const auto none = behavior_policy_factory("none");
  std::vector<SessionLog> sessions;
  for (auto&& part : {run_cohort(c, c.drl, greedy, kDrlCondition, "d"),
                      run_cohort(c, c.control, none, kControlCondition, "c"),
                      run_cohort(c, c.cdl, greedy, kCdlCondition, "x")}) {
    sessions.insert(sessions.end(), part.begin(), part.end());
  }
  return sessions;
}

SimulateResult cmd_simulate(const ExperimentConfig& c, const fs::path& out_dir, std::ostream& log) {
  c.validate();
  const TrainedModel model = load_model(resolve(out_dir, c.paths.model));
  SimulateResult r;
  r.sessions = simulate_deployment(c, model);
  if (r.sessions.empty()) throw Error("empty cohort");
  for (const auto& s : r.sessions) {
    if (s.condition != kDrlCondition) continue;
    auto recs = decision_records(s);
    r.drl_decisions.insert(r.drl_decisions.end(), recs.begin(), recs.end());
  }

  const auto sessions_path = resolve(out_dir, c.paths.sessions);
  if (sessions_path.has_parent_path()) fs::create_directories(sessions_path.parent_path());
  store_sessions(r.sessions, sessions_path);
  {
    auto out = open_out(resolve(out_dir, c.paths.decisions));
    write_decisions_csv(r.drl_decisions, out);
  }
  log << "session logs: " << r.sessions.size() << ", DRL decisions: " << r.drl_decisions.size()
      << "\n";

  if (c.classifier_students > 0) {
    const GroupMix mix = kDefaultMix;
    const auto calibration = simulate_cohort(
        mix, c.classifier_students, behavior_policy_factory("none"),
        derive_seed(c.seed, "classifier"), cohort_options(c, "calibration", "k"));
    ForestOptions fo;
    fo.n_trees = c.forest_trees;
    fo.max_depth = c.forest_depth;
    fo.seed = derive_seed(c.seed, "forest");
    const Forest forest = train_forest(labeled(calibration), fo);
    const auto forest_path = resolve(out_dir, c.paths.forest);
    save_forest(forest, forest_path);
    r.classifier_accuracy = accuracy(forest, labeled(r.sessions));
    auto out = open_out(resolve(out_dir, c.paths.classifier));
    out << "sid,condition,group,predicted\n";
    for (const auto& s : r.sessions) {
      out << s.student_id << ',' << s.condition << ',' << group_name(s.profile.group) << ','
          << group_name(predict(forest, pretest_features(s))) << '\n';
    }
    log << "group classifier accuracy on deployed students: " << std::fixed << std::setprecision(3)
        << r.classifier_accuracy << std::defaultfloat << "\n";
  }
  log << "wrote " << sessions_path.string() << "\n";
  return r;
}

// ----- report ---------------------------------------------------------------

std::vector<ScoreRecord> score_records_from_sessions(const std::vector<SessionLog>& sessions) {
  std::vector<ScoreRecord> out;
  out.reserve(sessions.size());
  for (const auto& s : sessions) {
    const auto pre = s.pre_scores();
    const auto post = s.post_scores();
    if (pre.empty() || post.size() < static_cast<std::size_t>(Curriculum::isomorphic_posttest_count)) {
      throw Error("session " + s.student_id + " lacks test scores");
    }
    const std::vector<double> iso(post.begin(), post.begin() + Curriculum::isomorphic_posttest_count);
    out.push_back({s.student_id, s.condition, mean_of(pre) / 100.0, mean_of(post) / 100.0,
                   mean_of(iso) / 100.0});
  }
  return out;
}

Report build_report(const std::vector<SessionLog>& sessions) {
  if (sessions.empty()) throw Error("no session logs");
  Report r;
  const auto records = score_records_from_sessions(sessions);
  r.summary = summary_table(records);

  std::vector<DecisionRecord> cdl;
  for (const auto& s : sessions) {
    auto recs = decision_records(s);
    auto& dst = s.condition == kDrlCondition ? r.policy_decisions : cdl;
    if (s.condition == kDrlCondition || s.condition == kCdlCondition) {
      dst.insert(dst.end(), recs.begin(), recs.end());
    }
  }
  r.by_level = decision_distribution(r.policy_decisions, DecisionKey::ByLevel);
  r.by_group = decision_distribution(r.policy_decisions, DecisionKey::ByGroup);
  if (r.policy_decisions.empty()) r.notices.emplace_back("no DRL decisions; distribution tables are empty");

  r.chi_square_group = chi_square_nonzero(r.by_group.as_matrix());
  if (!r.chi_square_group) r.notices.emplace_back("chi-square by group skipped: fewer than two groups or actions observed");
  r.chi_square_level = chi_square_nonzero(r.by_level.as_matrix());
  if (!r.chi_square_level) r.notices.emplace_back("chi-square by level skipped: fewer than two levels or actions observed");

  if (!cdl.empty()) r.cdl_no_intervention = no_intervention_rate(cdl, MetacognitiveGroup::Conditional);

  if (r.summary.size() < 2) {
    r.notices.emplace_back("ANOVA skipped: only one group present");
  } else {
    std::vector<std::vector<double>> groups;
    for (const auto& g : r.summary) {
      std::vector<double> v;
      for (const auto& rec : records)
        if (rec.group == g.group) v.push_back(rec.pre);
      groups.push_back(std::move(v));
    }
    try {
      r.anova_pre = one_way_anova(groups);
    } catch (const Error& e) {
      r.notices.push_back(std::string("ANOVA skipped: ") + e.what());
    }
  }
  return r;
}

void write_report(const Report& r, const fs::path& dir, std::ostream& log) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "summary.csv");
    write_summary_csv(r.summary, out);
  }
  std::ostringstream text;
  text << "== Group comparison ==\n";
  write_summary_text(r.summary, text);
  text << "\n== DRL decisions by level ==\n";
  write_table_text(r.by_level, text);
  text << "\n== DRL decisions by group ==\n";
  write_table_text(r.by_group, text);
  text << "\n== Statistics ==\n";
  if (r.chi_square_group) text << "chi-square (action x group): " << format_chi(*r.chi_square_group) << "\n";
  if (r.chi_square_level) text << "chi-square (action x level): " << format_chi(*r.chi_square_level) << "\n";
  if (r.anova_pre) {
    text << "one-way ANOVA on Pre by group: F=" << std::fixed << std::setprecision(3) << r.anova_pre->f
         << ", df=(" << r.anova_pre->df_between << ", " << r.anova_pre->df_within << ")\n";
  }
  if (r.cdl_no_intervention) {
    text << "CDL no-intervention rate: " << std::fixed << std::setprecision(1)
         << 100.0 * *r.cdl_no_intervention << "%\n";
  }
  for (const auto& n : r.notices) text << "notice: " << n << "\n";

  {
    auto out = open_out(dir / "summary.txt");
    out << text.str();
  }
  {
    auto out = open_out(dir / "decisions_by_level.csv");
    write_table_csv(r.by_level, out);
  }
  {
    auto out = open_out(dir / "decisions_by_group.csv");
    write_table_csv(r.by_group, out);
  }
  {
    auto out = open_out(dir / "stats.csv");
    out << "test,statistic,df1,df2,n\n" << std::setprecision(17);
    if (r.chi_square_group) {
      out << "chi_square_group," << r.chi_square_group->statistic << ',' << r.chi_square_group->df
          << ",," << r.chi_square_group->n << '\n';
    }
    if (r.chi_square_level) {
      out << "chi_square_level," << r.chi_square_level->statistic << ',' << r.chi_square_level->df
          << ",," << r.chi_square_level->n << '\n';
    }
    if (r.anova_pre) {
      out << "anova_pre," << r.anova_pre->f << ',' << r.anova_pre->df_between << ','
          << r.anova_pre->df_within << ",\n";
    }
    if (r.cdl_no_intervention) out << "cdl_no_intervention_rate," << *r.cdl_no_intervention << ",,,\n";
  }
  log << text.str();
}

Report cmd_report(const ExperimentConfig& c, const fs::path& out_dir, std::ostream& log) {
  Report r = build_report(load_nonempty_sessions(c, out_dir));
  write_report(r, resolve(out_dir, c.paths.reports), log);
  return r;
}

// ----- mine -----------------------------------------------------------------

std::vector<ComplianceTransaction> mining_transactions(const std::vector<SessionLog>& sessions) {
  const bool any_drl = std::any_of(sessions.begin(), sessions.end(),
                                   [](const SessionLog& s) { return s.condition == kDrlCondition; });
  std::vector<ComplianceTransaction> tx;
  for (const auto& s : sessions) {
    if (any_drl && s.condition != kDrlCondition) continue;
    auto t = build_transactions(s);
    tx.insert(tx.end(), t.begin(), t.end());
  }
  return tx;
}

void print_rules(const std::vector<MinedRule>& rules, std::ostream& out) {
  out << "rule, support, confidence\n";
  for (const auto& r : rules) {
    std::ostringstream line;
    line << rule_label(r) << ", " << std::fixed << std::setprecision(1) << 100.0 * r.support << "%, ";
    if (r.confidence) {
      line << 100.0 * *r.confidence << "%";
    } else {
      line << "NA";
    }
    out << line.str() << '\n';
  }
}

std::vector<MinedRule> cmd_mine(const ExperimentConfig& c, const fs::path& out_dir, std::size_t k,
                                std::optional<long> total_override, std::ostream& log) {
  const auto tx = mining_transactions(load_nonempty_sessions(c, out_dir));
  if (tx.empty()) throw Error("no transactions");
  std::optional<std::size_t> total;
  if (total_override) {
    if (*total_override < 1) throw Error("--total must be positive");
    total = static_cast<std::size_t>(*total_override);
  }
  const auto rules = mine_rules(tx, total);
  const auto top = top_k(rules, k);
  const auto dir = resolve(out_dir, c.paths.reports);
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "rules.csv");
    write_rules_csv(rules, out);
  }
  log << "transactions: " << tx.size() << ", total: " << (total ? *total : tx.size()) << "\n";
  print_rules(top, log);
  return top;
}

}  // namespace metatutor

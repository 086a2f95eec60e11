#include "metatutor/session_io.hpp"

#include <fstream>

#include "json.hpp"

namespace metatutor {

namespace {

using nlohmann::json;

constexpr std::array<SlotKind, 5> kKinds = {SlotKind::Pretest, SlotKind::Training,
                                            SlotKind::WorkedExample, SlotKind::EvaluationOnly,
                                            SlotKind::Posttest};

SlotKind kind_from_name(const std::string& name) {
  for (auto k : kKinds)
    if (slot_kind_name(k) == name) return k;
  throw Error("unknown slot kind '" + name + "'");
}

json profile_json(const StudentProfile& p) {
  return {{"group", group_name(p.group)},
          {"p_early", p.p_early_switch_spontaneous},
          {"p_late", p.p_late_switch_spontaneous},
          {"p_comply_nudge", p.p_comply_nudge},
          {"p_comply_present", p.p_comply_present},
          {"skill_fc", p.skill_fc},
          {"skill_bc", p.skill_bc},
          {"learning_rate", p.learning_rate},
          {"noise_sd", p.noise_sd}};
}

StudentProfile profile_from(const json& j) {
  StudentProfile p;
  p.group = group_from_name(j.at("group").get<std::string>());
  p.p_early_switch_spontaneous = j.at("p_early").get<double>();
  p.p_late_switch_spontaneous = j.at("p_late").get<double>();
  p.p_comply_nudge = j.at("p_comply_nudge").get<double>();
  p.p_comply_present = j.at("p_comply_present").get<double>();
  p.skill_fc = j.at("skill_fc").get<double>();
  p.skill_bc = j.at("skill_bc").get<double>();
  p.learning_rate = j.at("learning_rate").get<double>();
  p.noise_sd = j.at("noise_sd").get<double>();
  return p;
}

json outcome_json(const ProblemOutcome& o) {
  json j{{"kind", slot_kind_name(o.kind)},
         {"slot", o.slot},
         {"score", o.score},
         {"strategy", strategy_name(o.strategy_used)},
         {"switch", nullptr},
         {"actions", o.action_count},
         {"time", o.time_s},
         {"ref_time", o.ref_time_s},
         {"ref_len", o.ref_len},
         {"hints", o.hints},
         {"intervention", action_code(o.intervention)},
         {"complied", o.complied}};
  if (o.switch_action_index) j["switch"] = *o.switch_action_index;
  return j;
}

ProblemOutcome outcome_from(const json& j) {
  ProblemOutcome o;
  o.kind = kind_from_name(j.at("kind").get<std::string>());
  o.slot = j.at("slot").get<int>();
  o.score = j.at("score").get<double>();
  const auto s = j.at("strategy").get<std::string>();
  if (s == strategy_name(Strategy::FC)) {
    o.strategy_used = Strategy::FC;
  } else if (s == strategy_name(Strategy::BC)) {
    o.strategy_used = Strategy::BC;
  } else {
    throw Error("unknown strategy '" + s + "'");
  }
  if (!j.at("switch").is_null()) o.switch_action_index = j.at("switch").get<int>();
  o.action_count = j.at("actions").get<int>();
  o.time_s = j.at("time").get<double>();
  o.ref_time_s = j.at("ref_time").get<double>();
  o.ref_len = j.at("ref_len").get<double>();
  o.hints = j.at("hints").get<int>();
  o.intervention = action_from_code(j.at("intervention").get<int>());
  o.complied = j.at("complied").get<bool>();
  return o;
}

json outcomes_json(const std::vector<ProblemOutcome>& v) {
  json a = json::array();
  for (const auto& o : v) a.push_back(outcome_json(o));
  return a;
}

std::vector<ProblemOutcome> outcomes_from(const json& j) {
  std::vector<ProblemOutcome> v;
  for (const auto& o : j) v.push_back(outcome_from(o));
  return v;
}

json decision_json(const DecisionPoint& d) {
  json j{{"p", d.problem_index},
         {"a", action_code(d.action)},
         {"schema_id", d.state.schema_id},
         {"s", d.state.features},
         {"q", nullptr}};
  if (d.q_values) j["q"] = *d.q_values;
  return j;
}

DecisionPoint decision_from(const json& j) {
  DecisionPoint d;
  d.problem_index = j.at("p").get<int>();
  d.action = action_from_code(j.at("a").get<int>());
  d.state.schema_id = j.at("schema_id").get<std::string>();
  d.state.features = j.at("s").get<std::vector<double>>();
  if (!j.at("q").is_null()) d.q_values = j.at("q").get<std::array<double, kActionCount>>();
  return d;
}

}  // namespace

void store_sessions(const std::vector<SessionLog>& sessions, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write session file " + path.string());
  for (const auto& s : sessions) {
    json decisions = json::array();
    for (const auto& d : s.decisions) decisions.push_back(decision_json(d));
    const json j{{"sid", s.student_id},
                 {"condition", s.condition},
                 {"profile", profile_json(s.profile)},
                 {"pretest", outcomes_json(s.pretest)},
                 {"training", outcomes_json(s.training)},
                 {"posttest", outcomes_json(s.posttest)},
                 {"decisions", decisions}};
    out << j.dump() << '\n';
  }
  if (!out) throw Error("failed writing session file " + path.string());
}

std::vector<SessionLog> load_sessions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open session file " + path.string());
  std::vector<SessionLog> sessions;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    try {
      const json j = json::parse(text);
      SessionLog s;
      s.student_id = j.at("sid").get<std::string>();
      s.condition = j.at("condition").get<std::string>();
      s.profile = profile_from(j.at("profile"));
      s.pretest = outcomes_from(j.at("pretest"));
      s.training = outcomes_from(j.at("training"));
      s.posttest = outcomes_from(j.at("posttest"));
      for (const auto& d : j.at("decisions")) s.decisions.push_back(decision_from(d));
      sessions.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw Error("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return sessions;
}

}  // namespace metatutor

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "metatutor/domain.hpp"

namespace metatutor {

namespace {

using nlohmann::json;

[[noreturn]] void fail(std::size_t line, std::string_view field, std::string_view what) {
  std::ostringstream os;
  os << "line " << line << ": field '" << field << "': " << what;
  throw Error(os.str());
}

const json& require(const json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end()) fail(line, field, "missing");
  return *it;
}

std::vector<double> read_features(const json& v, const char* field, std::size_t line,
                                  std::size_t expected) {
  if (!v.is_array()) fail(line, field, "expected an array of numbers");
  if (v.size() != expected) {
    fail(line, field, "expected " + std::to_string(expected) + " features, got " +
                          std::to_string(v.size()));
  }
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) fail(line, field, "non-numeric feature");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path,
                     std::optional<std::string> expected_schema_id) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file " + path.string());

  std::string text;
  std::size_t line_no = 0;
  std::string schema_id;
  std::vector<std::string> names;
  bool have_header = false;
  std::vector<Transition> transitions;

  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(line_no, "<record>", std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) fail(line_no, "<record>", "expected a JSON object");

    if (!have_header) {
      const auto& id = require(obj, "schema_id", line_no);
      if (!id.is_string()) fail(line_no, "schema_id", "expected a string");
      schema_id = id.get<std::string>();
      const auto& fn = require(obj, "feature_names", line_no);
      if (!fn.is_array()) fail(line_no, "feature_names", "expected an array");
      for (const auto& n : fn) {
        if (!n.is_string()) fail(line_no, "feature_names", "expected strings");
        names.push_back(n.get<std::string>());
      }
      if (expected_schema_id && schema_id != *expected_schema_id) {
        throw Error("schema mismatch: file declares '" + schema_id + "', expected '" +
                    *expected_schema_id + "'");
      }
      have_header = true;
      continue;
    }

    Transition t;
    const auto& sid = require(obj, "sid", line_no);
    if (!sid.is_string()) fail(line_no, "sid", "expected a string");
    t.student_id = sid.get<std::string>();

    const auto& p = require(obj, "p", line_no);
    if (!p.is_number_integer()) fail(line_no, "p", "expected an integer");
    t.problem_index = p.get<int>();

    t.state = {read_features(require(obj, "s", line_no), "s", line_no, names.size()), schema_id};

    const auto& a = require(obj, "a", line_no);
    if (!a.is_number_integer()) fail(line_no, "a", "expected an integer action code");
    try {
      t.action = action_from_code(a.get<int>());
    } catch (const Error& e) {
      fail(line_no, "a", e.what());
    }

    const auto& r = require(obj, "r", line_no);
    if (!r.is_number()) fail(line_no, "r", "expected a number");
    t.reward = r.get<double>();
    if (!(t.reward >= 0.0 && t.reward <= 100.0)) fail(line_no, "r", "reward outside [0,100]");

    const auto& sp = require(obj, "sp", line_no);
    if (!sp.is_null()) {
      t.next_state = StudentState{read_features(sp, "sp", line_no, names.size()), schema_id};
    }

    const auto& done = require(obj, "done", line_no);
    if (!done.is_boolean()) fail(line_no, "done", "expected a boolean");
    t.terminal = done.get<bool>();
    if (t.terminal == t.next_state.has_value()) {
      fail(line_no, "done", "terminal flag inconsistent with sp");
    }
    transitions.push_back(std::move(t));
  }

  if (transitions.empty()) throw Error("no records in " + path.string());
  return Dataset(std::move(schema_id), std::move(names), std::move(transitions));
}

void store_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write dataset file " + path.string());

  out << json{{"schema_id", d.schema_id()}, {"feature_names", d.feature_names()}}.dump() << '\n';
  for (const auto& t : d.transitions()) {
    json rec;
    rec["sid"] = t.student_id;
    rec["p"] = t.problem_index;
    rec["s"] = t.state.features;
    rec["a"] = action_code(t.action);
    rec["r"] = t.reward;
    rec["sp"] = t.next_state ? json(t.next_state->features) : json(nullptr);
    rec["done"] = t.terminal;
    out << rec.dump() << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace metatutor

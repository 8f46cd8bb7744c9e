#include "jumpflow/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "json_codec.hpp"

namespace jumpflow {

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (!(solver.rtol > 0.0) || !(solver.atol > 0.0)) {
    throw SchemaError("solver: rtol and atol must be positive");
  }
  if (eval_grid_points < 2) throw SchemaError("train: eval_grid_points must be >= 2");
}

namespace {

const char* compensator_name(Compensator c) {
  return c == Compensator::exact ? "exact" : "quadrature";
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Drops a trailing comment, ignoring '#' inside a string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

std::optional<TomlValue> parse_number(const std::string& text) {
  std::string s;
  for (char c : text) {
    if (c != '_') s.push_back(c);
  }
  if (s.empty()) return std::nullopt;
  const bool integer = s.find_first_of(".eEn") == std::string::npos;
  double v = 0.0;
  const char* first = s.data() + (s[0] == '+' ? 1 : 0);
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return TomlValue{v, integer};
}

TomlValue parse_value(const std::string& text, std::size_t line) {
  const auto fail = [&](const std::string& what) -> TomlValue {
    throw SchemaError("config line " + std::to_string(line) + ": " + what);
  };
  if (text.empty()) return fail("missing value");
  if (text == "true") return TomlValue{true};
  if (text == "false") return TomlValue{false};
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"') return fail("unterminated string");
    return TomlValue{text.substr(1, text.size() - 2)};
  }
  if (text.front() == '[') {
    if (text.back() != ']') return fail("unterminated array");
    std::vector<double> items;
    std::stringstream ss(text.substr(1, text.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      const auto v = parse_number(item);
      if (!v) return fail("arrays may only hold numbers");
      items.push_back(std::get<double>(v->value));
    }
    return TomlValue{items};
  }
  if (auto v = parse_number(text)) return *v;
  return fail("cannot parse value '" + text + "'");
}

class Reader {
 public:
  explicit Reader(const TomlTable& table) : table_(table) {}

  void visit(const std::string& section, const std::string& key,
             const std::function<void(const TomlValue&, const std::string&)>& apply) {
    known_[section].insert(key);
    const auto s = table_.find(section);
    if (s == table_.end()) return;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return;
    apply(k->second, "[" + section + "] " + key);
  }

  void number(const std::string& section, const std::string& key, double& out) {
    visit(section, key, [&](const TomlValue& v, const std::string& where) {
      if (!std::holds_alternative<double>(v.value)) throw SchemaError(where + " must be a number");
      out = std::get<double>(v.value);
    });
  }

  template <class Int>
  void integer(const std::string& section, const std::string& key, Int& out) {
    visit(section, key, [&](const TomlValue& v, const std::string& where) {
      if (!std::holds_alternative<double>(v.value) || !v.integer ||
          std::get<double>(v.value) < 0.0) {
        throw SchemaError(where + " must be a non-negative integer");
      }
      out = static_cast<Int>(std::get<double>(v.value));
    });
  }

  void sizes(const std::string& section, const std::string& key, std::vector<std::size_t>& out) {
    visit(section, key, [&](const TomlValue& v, const std::string& where) {
      if (!std::holds_alternative<std::vector<double>>(v.value)) {
        throw SchemaError(where + " must be an array of integers");
      }
      out.clear();
      for (double x : std::get<std::vector<double>>(v.value)) {
        if (x < 1.0 || x != std::floor(x)) {
          throw SchemaError(where + " entries must be positive integers");
        }
        out.push_back(static_cast<std::size_t>(x));
      }
    });
  }

  void boolean(const std::string& section, const std::string& key, bool& out) {
    visit(section, key, [&](const TomlValue& v, const std::string& where) {
      if (!std::holds_alternative<bool>(v.value)) throw SchemaError(where + " must be true or false");
      out = std::get<bool>(v.value);
    });
  }

  void string(const std::string& section, const std::string& key, std::string& out) {
    visit(section, key, [&](const TomlValue& v, const std::string& where) {
      if (!std::holds_alternative<std::string>(v.value)) {
        throw SchemaError(where + " must be a string");
      }
      out = std::get<std::string>(v.value);
    });
  }

  void reject_unknown() const {
    for (const auto& [section, keys] : table_) {
      const auto known = known_.find(section);
      if (known == known_.end()) throw SchemaError("config: unknown section [" + section + "]");
      for (const auto& [key, value] : keys) {
        if (!known->second.count(key)) {
          throw SchemaError("config: unknown key '" + key + "' in [" + section + "]");
        }
      }
    }
  }

 private:
  const TomlTable& table_;
  std::map<std::string, std::set<std::string>> known_;
};

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string format_sizes(const std::vector<std::size_t>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(v[i]);
  }
  return s + "]";
}

}  // namespace

TomlTable parse_toml(const std::string& text) {
  TomlTable table;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) {
        throw SchemaError("config line " + std::to_string(line) + ": malformed section header");
      }
      section = trim(s.substr(1, s.size() - 2));
      table[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw SchemaError("config line " + std::to_string(line) + ": expected key = value");
    }
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw SchemaError("config line " + std::to_string(line) + ": empty key");
    auto& entries = table[section];
    if (entries.count(key)) {
      throw SchemaError("config line " + std::to_string(line) + ": duplicate key '" + key + "'");
    }
    entries[key] = parse_value(trim(s.substr(eq + 1)), line);
  }
  return table;
}

RunConfig config_from_toml(const std::string& text) {
  const TomlTable table = parse_toml(text);
  RunConfig c;
  Reader r(table);

  r.integer("model", "n1", c.model.n1);
  r.integer("model", "n2", c.model.n2);
  r.sizes("model", "flow_hidden", c.model.flow_hidden);
  r.sizes("model", "decay_hidden", c.model.decay_hidden);
  r.sizes("model", "jump_hidden", c.model.jump_hidden);
  r.sizes("model", "intensity_hidden", c.model.intensity_hidden);
  std::string marks = "auto";
  std::size_t types = 1, mark_dim = 1, components = 1;
  r.string("model", "marks", marks);
  r.integer("model", "types", types);
  r.integer("model", "mark_dim", mark_dim);
  r.integer("model", "components", components);
  if (marks == "discrete") {
    c.model.marks = MarkSpace::discrete(types);
    c.marks_explicit = true;
  } else if (marks == "continuous") {
    c.model.marks = MarkSpace::continuous(mark_dim, components);
    c.marks_explicit = true;
  } else if (marks == "auto") {
    // Kind and widths come from the corpus; the mixture size stays a model choice.
    c.model.marks.components = components;
  } else {
    throw SchemaError("[model] marks must be \"auto\", \"discrete\" or \"continuous\"");
  }

  TrainConfig& t = c.train;
  r.number("train", "learning_rate", t.learning_rate);
  r.number("train", "weight_decay", t.weight_decay);
  r.number("train", "beta1", t.beta1);
  r.number("train", "beta2", t.beta2);
  r.number("train", "epsilon", t.epsilon);
  r.integer("train", "epochs", t.epochs);
  r.integer("train", "batch_size", t.batch_size);
  r.visit("train", "split", [&](const TomlValue& v, const std::string& where) {
    const auto* items = std::get_if<std::vector<double>>(&v.value);
    if (!items || items->size() != 3) {
      throw SchemaError(where + " must be [train, validation, test]");
    }
    t.train_fraction = (*items)[0];
    t.validation_fraction = (*items)[1];
    t.test_fraction = (*items)[2];
  });
  r.integer("train", "seed", t.seed);
  r.integer("train", "grid_points", t.grid_points);
  r.integer("train", "patience", t.patience);
  r.boolean("train", "grid_jitter", t.grid_jitter);
  std::string compensator = compensator_name(t.compensator);
  r.string("train", "compensator", compensator);
  if (compensator == "exact") {
    t.compensator = Compensator::exact;
  } else if (compensator == "quadrature") {
    t.compensator = Compensator::quadrature;
  } else {
    throw SchemaError("config: [train] compensator must be \"exact\" or \"quadrature\"");
  }
  r.integer("train", "eval_grid_points", c.eval_grid_points);

  r.number("solver", "rtol", c.solver.rtol);
  r.number("solver", "atol", c.solver.atol);
  r.integer("solver", "max_steps", c.solver.max_steps);

  r.reject_unknown();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_toml(ss.str());
}

std::string config_to_toml(const RunConfig& c) {
  std::ostringstream os;
  const ModelConfig& m = c.model;
  os << "[model]\n"
     << "n1 = " << m.n1 << "\n"
     << "n2 = " << m.n2 << "\n"
     << "flow_hidden = " << format_sizes(m.flow_hidden) << "\n"
     << "decay_hidden = " << format_sizes(m.decay_hidden) << "\n"
     << "jump_hidden = " << format_sizes(m.jump_hidden) << "\n"
     << "intensity_hidden = " << format_sizes(m.intensity_hidden) << "\n";
  if (!c.marks_explicit) {
    os << "marks = \"auto\"  # taken from the corpus header\n"
       << "components = " << m.marks.components << "\n";
  } else if (m.marks.is_discrete()) {
    os << "marks = \"discrete\"\n"
       << "types = " << m.marks.types << "\n";
  } else {
    os << "marks = \"continuous\"\n"
       << "mark_dim = " << m.marks.dim << "\n"
       << "components = " << m.marks.components << "\n";
  }
  const TrainConfig& t = c.train;
  os << "\n[train]\n"
     << "learning_rate = " << format_double(t.learning_rate) << "\n"
     << "weight_decay = " << format_double(t.weight_decay) << "\n"
     << "beta1 = " << format_double(t.beta1) << "\n"
     << "beta2 = " << format_double(t.beta2) << "\n"
     << "epsilon = " << format_double(t.epsilon) << "\n"
     << "epochs = " << t.epochs << "\n"
     << "batch_size = " << t.batch_size << "\n"
     << "split = [" << format_double(t.train_fraction) << ", "
     << format_double(t.validation_fraction) << ", " << format_double(t.test_fraction) << "]\n"
     << "seed = " << t.seed << "\n"
     << "grid_points = " << t.grid_points << "\n"
     << "patience = " << t.patience << "\n"
     << "grid_jitter = " << (t.grid_jitter ? "true" : "false") << "\n"
     << "compensator = \"" << compensator_name(t.compensator) << "\"\n"
     << "eval_grid_points = " << c.eval_grid_points << "\n";
  os << "\n[solver]\n"
     << "rtol = " << format_double(c.solver.rtol) << "\n"
     << "atol = " << format_double(c.solver.atol) << "\n"
     << "max_steps = " << c.solver.max_steps << "\n";
  return os.str();
}

std::string config_to_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  detail::json model = detail::model_to_json(c.model);
  if (!c.marks_explicit) model["marks"] = "auto";
  const detail::json j = {
      {"model", model},
      {"train",
       {{"learning_rate", t.learning_rate},
        {"weight_decay", t.weight_decay},
        {"beta1", t.beta1},
        {"beta2", t.beta2},
        {"epsilon", t.epsilon},
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"split", {t.train_fraction, t.validation_fraction, t.test_fraction}},
        {"seed", t.seed},
        {"grid_points", t.grid_points},
        {"patience", t.patience},
        {"grid_jitter", t.grid_jitter},
        {"compensator", compensator_name(t.compensator)},
        {"eval_grid_points", c.eval_grid_points}}},
      {"solver",
       {{"rtol", c.solver.rtol}, {"atol", c.solver.atol}, {"max_steps", c.solver.max_steps}}}};
  return j.dump();
}

}  // namespace jumpflow

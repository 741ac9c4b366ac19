#include "trapgrad/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "trapgrad/error.hpp"

namespace trapgrad {

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::novice: return "novice";
    case ScenarioKind::oracle: return "oracle";
    case ScenarioKind::adaptive: return "adaptive";
    case ScenarioKind::advanced: return "advanced";
    case ScenarioKind::blackbox: return "blackbox";
  }
  return "novice";
}

void ScenarioConfig::validate() const {
  model.validate();
  attack.validate();
  defense.validate();
  detector.validate();
  if (data.source == DataConfig::Source::synthetic) data.synth.validate();
  require(replicates >= 1, Errc::invalid_argument, "replicates must be >= 1");
  if (kind == ScenarioKind::adaptive || kind == ScenarioKind::advanced) {
    require(queries >= 1, Errc::invalid_argument, "adaptive scenarios need queries >= 1");
  }
  if (kind == ScenarioKind::advanced) {
    require(attack.skip_top >= 1, Errc::invalid_argument,
            "advanced scenario needs attack.P >= 1");
  }
  if (data.source == DataConfig::Source::file) {
    require(!data.path.empty(), Errc::invalid_argument, "data.path required for file source");
  }
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& v) {
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &used);
  } catch (const std::exception&) {
    fail(Errc::parse, "expected an integer, got '" + v + "'");
  }
  require(used == v.size(), Errc::parse, "expected an integer, got '" + v + "'");
  return x;
}

double parse_double(const std::string& v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  require(end == v.c_str() + v.size() && !v.empty(), Errc::parse,
          "expected a number, got '" + v + "'");
  return x;
}

struct KeyEntry {
  std::string key;
  std::function<void(ScenarioConfig&, const std::string&)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

std::vector<KeyEntry> build_registry() {
  std::vector<KeyEntry> reg;

  auto add_int = [&reg](const std::string& key, std::function<int&(ScenarioConfig&)> ref,
                        long long lo, long long hi) {
    reg.push_back(
        {key,
         [ref, lo, hi, key](ScenarioConfig& c, const std::string& v) {
           const long long x = parse_int(v);
           require(x >= lo && x <= hi, Errc::invalid_argument, key + " out of range");
           ref(c) = static_cast<int>(x);
         },
         [ref](const ScenarioConfig& c) {
           return std::to_string(ref(const_cast<ScenarioConfig&>(c)));
         }});
  };
  auto add_double = [&reg](const std::string& key, std::function<double&(ScenarioConfig&)> ref,
                           double lo, double hi, bool lo_open) {
    reg.push_back({key,
                   [ref, lo, hi, lo_open, key](ScenarioConfig& c, const std::string& v) {
                     const double x = parse_double(v);
                     const bool lo_ok = lo_open ? x > lo : x >= lo;
                     require(lo_ok && x <= hi && !std::isnan(x), Errc::invalid_argument,
                             key + " out of range");
                     ref(c) = x;
                   },
                   [ref](const ScenarioConfig& c) {
                     return format_double(ref(const_cast<ScenarioConfig&>(c)));
                   }});
  };
  reg.push_back({"scenario.kind",
                 [](ScenarioConfig& c, const std::string& v) {
                   if (v == "novice") c.kind = ScenarioKind::novice;
                   else if (v == "oracle") c.kind = ScenarioKind::oracle;
                   else if (v == "adaptive") c.kind = ScenarioKind::adaptive;
                   else if (v == "advanced") c.kind = ScenarioKind::advanced;
                   else if (v == "blackbox") c.kind = ScenarioKind::blackbox;
                   else fail(Errc::parse, "unknown scenario kind '" + v + "'");
                 },
                 [](const ScenarioConfig& c) { return to_string(c.kind); }});
  add_int("scenario.replicates", [](ScenarioConfig& c) -> int& { return c.replicates; }, 1, 100000);
  add_int("scenario.Q", [](ScenarioConfig& c) -> int& { return c.queries; }, 1, 100000);

  reg.push_back({"data.source",
                 [](ScenarioConfig& c, const std::string& v) {
                   if (v == "synthetic") c.data.source = DataConfig::Source::synthetic;
                   else if (v == "file") c.data.source = DataConfig::Source::file;
                   else fail(Errc::parse, "unknown data source '" + v + "'");
                 },
                 [](const ScenarioConfig& c) {
                   return c.data.source == DataConfig::Source::synthetic ? "synthetic" : "file";
                 }});
  reg.push_back({"data.path",
                 [](ScenarioConfig& c, const std::string& v) { c.data.path = v; },
                 [](const ScenarioConfig& c) { return c.data.path; }});
  add_int("data.classes", [](ScenarioConfig& c) -> int& { return c.data.synth.num_classes; }, 2, 64);
  add_int("data.vocab", [](ScenarioConfig& c) -> int& { return c.data.synth.vocab_size; }, 2,
          1000000);
  add_int("data.lexicon", [](ScenarioConfig& c) -> int& { return c.data.synth.lexicon_size; }, 1,
          100000);
  add_int("data.docs_per_class", [](ScenarioConfig& c) -> int& { return c.data.synth.docs_per_class; },
          1, 10000000);
  add_int("data.len_min", [](ScenarioConfig& c) -> int& { return c.data.synth.len_min; }, 1, 10000);
  add_int("data.len_max", [](ScenarioConfig& c) -> int& { return c.data.synth.len_max; }, 1, 10000);
  add_double("data.noise", [](ScenarioConfig& c) -> double& { return c.data.synth.noise_fraction; },
             0.0, 0.999999, false);

  reg.push_back({"model.encoder",
                 [](ScenarioConfig& c, const std::string& v) {
                   if (v == "conv") c.model.encoder = EncoderKind::conv;
                   else if (v == "meanpool") c.model.encoder = EncoderKind::mean_pool;
                   else fail(Errc::parse, "unknown encoder '" + v + "' (conv|meanpool)");
                 },
                 [](const ScenarioConfig& c) {
                   return c.model.encoder == EncoderKind::conv ? "conv" : "meanpool";
                 }});
  add_int("model.dim", [](ScenarioConfig& c) -> int& { return c.model.embed_dim; }, 1, 4096);
  add_int("model.hidden", [](ScenarioConfig& c) -> int& { return c.model.hidden_dim; }, 1, 4096);
  add_int("model.filters", [](ScenarioConfig& c) -> int& { return c.model.conv_filters; }, 1, 4096);
  reg.push_back({"model.widths",
                 [](ScenarioConfig& c, const std::string& v) {
                   std::vector<int> widths;
                   std::istringstream parts(v);
                   std::string item;
                   while (std::getline(parts, item, ',')) {
                     const long long w = parse_int(trim(item));
                     require(w >= 1 && w <= 64, Errc::invalid_argument, "model.widths out of range");
                     widths.push_back(static_cast<int>(w));
                   }
                   require(!widths.empty(), Errc::parse, "model.widths needs at least one width");
                   c.model.filter_widths = widths;
                 },
                 [](const ScenarioConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.model.filter_widths.size(); ++i) {
                     if (i) s += ',';
                     s += std::to_string(c.model.filter_widths[i]);
                   }
                   return s;
                 }});
  add_double("model.lr", [](ScenarioConfig& c) -> double& { return c.model.learning_rate; }, 0.0,
             1000.0, true);
  add_double("model.clip", [](ScenarioConfig& c) -> double& { return c.model.clip_norm; }, 0.0,
             1e9, false);
  add_int("model.epochs", [](ScenarioConfig& c) -> int& { return c.model.epochs; }, 0, 1000000);
  add_int("model.batch", [](ScenarioConfig& c) -> int& { return c.model.batch_size; }, 1, 1000000);

  add_int("attack.K_trig", [](ScenarioConfig& c) -> int& { return c.attack.trigger_len; }, 1, 1024);
  add_int("attack.beam", [](ScenarioConfig& c) -> int& { return c.attack.beam_width; }, 1, 1024);
  add_int("attack.k_cand", [](ScenarioConfig& c) -> int& { return c.attack.cand_count; }, 1, 100000);
  add_int("attack.batch", [](ScenarioConfig& c) -> int& { return c.attack.batch_size; }, 1, 1000000);
  add_int("attack.epochs", [](ScenarioConfig& c) -> int& { return c.attack.max_epochs; }, 1, 100000);
  add_double("attack.tau", [](ScenarioConfig& c) -> double& { return c.attack.tol; }, 0.0,
             std::numeric_limits<double>::infinity(), false);
  add_int("attack.P", [](ScenarioConfig& c) -> int& { return c.attack.skip_top; }, 0, 100000);
  add_double("attack.lambda", [](ScenarioConfig& c) -> double& { return c.attack.detector_weight; },
             0.0, 1e9, false);
  reg.push_back({"attack.position",
                 [](ScenarioConfig& c, const std::string& v) {
                   if (v == "prefix") c.attack.position = TriggerPosition::prefix;
                   else if (v == "suffix") c.attack.position = TriggerPosition::suffix;
                   else fail(Errc::parse, "unknown position '" + v + "' (prefix|suffix)");
                 },
                 [](const ScenarioConfig& c) {
                   return c.attack.position == TriggerPosition::prefix ? "prefix" : "suffix";
                 }});

  add_int("defense.K", [](ScenarioConfig& c) -> int& { return c.defense.trapdoors_per_label; }, 1,
          100000);
  add_double("defense.alpha", [](ScenarioConfig& c) -> double& { return c.defense.intra_bound; },
             0.0, 2.0, false);
  add_double("defense.beta", [](ScenarioConfig& c) -> double& { return c.defense.inter_bound; },
             0.0, 2.0, false);
  add_int("defense.T", [](ScenarioConfig& c) -> int& { return c.defense.sample_size; }, 1, 1000000);
  add_double("defense.gamma", [](ScenarioConfig& c) -> double& { return c.defense.trap_weight; },
             0.0, 1e9, true);
  add_double("defense.epsilon", [](ScenarioConfig& c) -> double& { return c.defense.trap_ratio; },
             0.0, 1.0, true);
  add_double("defense.threshold", [](ScenarioConfig& c) -> double& { return c.defense.threshold; },
             0.0, 0.999999, true);
  reg.push_back({"defense.strategy",
                 [](ScenarioConfig& c, const std::string& v) {
                   if (v == "adaptive") c.defense.strategy = TrapdoorStrategy::adaptive;
                   else if (v == "random") c.defense.strategy = TrapdoorStrategy::random;
                   else fail(Errc::parse, "unknown strategy '" + v + "' (adaptive|random)");
                 },
                 [](const ScenarioConfig& c) {
                   return c.defense.strategy == TrapdoorStrategy::adaptive ? "adaptive" : "random";
                 }});

  add_int("detector.dim", [](ScenarioConfig& c) -> int& { return c.detector.embed_dim; }, 1, 4096);
  add_double("detector.lr", [](ScenarioConfig& c) -> double& { return c.detector.learning_rate; },
             0.0, 1000.0, true);
  add_int("detector.epochs", [](ScenarioConfig& c) -> int& { return c.detector.epochs; }, 1, 100000);
  add_int("detector.batch", [](ScenarioConfig& c) -> int& { return c.detector.batch_size; }, 2,
          1000000);

  return reg;
}

const std::vector<KeyEntry>& registry() {
  static const std::vector<KeyEntry> reg = build_registry();
  return reg;
}

const KeyEntry* find_key(const std::string& key) {
  for (const auto& e : registry()) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

void assign(ScenarioConfig& config, const std::string& key, const std::string& value,
            const std::string& where) {
  const KeyEntry* entry = find_key(key);
  if (!entry) fail(Errc::parse, where + ": unknown key '" + key + "'");
  try {
    entry->set(config, value);
  } catch (const Error& e) {
    throw Error(e.code(), where + ": " + e.what());
  }
}

}  // namespace

ScenarioConfig parse_config_text(const std::string& text) {
  ScenarioConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      fail(Errc::parse, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    assign(config, key, value, "line " + std::to_string(line_no));
  }
  return config;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::io, "cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void apply_override(ScenarioConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos, Errc::parse, "override '" + assignment + "': expected key=value");
  assign(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), "override");
}

std::string dump_config(const ScenarioConfig& config) {
  std::ostringstream out;
  for (const auto& entry : registry()) {
    out << entry.key << " = " << entry.get(config) << '\n';
  }
  return out.str();
}

}  // namespace trapgrad

#include "trapgrad.h"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "trapgrad/attack.hpp"
#include "trapgrad/config.hpp"
#include "trapgrad/defense.hpp"
#include "trapgrad/detector.hpp"
#include "trapgrad/error.hpp"
#include "trapgrad/model.hpp"
#include "trapgrad/report.hpp"
#include "trapgrad/scenario.hpp"
#include "trapgrad/synth.hpp"
#include "trapgrad/vocab.hpp"

using trapgrad::Errc;

struct tg_config {
  trapgrad::ScenarioConfig cfg;
};
struct tg_textdata {
  trapgrad::TextDataset data;
};
struct tg_model {
  trapgrad::TextClassifier model;
};
struct tg_trigger {
  trapgrad::Trigger trigger;
  std::vector<std::string> tokens;  // self-contained: survives without the model
};
struct tg_trapdoors {
  trapgrad::TrapdoorSet set;
  std::vector<std::vector<std::string>> tokens;  // per label
};
struct tg_detector {
  trapgrad::Detector detector;
};
struct tg_report {
  trapgrad::ScenarioReport report;
};

namespace {

thread_local std::string g_last_error;

int code_of(Errc c) {
  switch (c) {
    case Errc::invalid_argument: return TG_ERROR_INVALID_ARGUMENT;
    case Errc::empty_input: return TG_ERROR_EMPTY_INPUT;
    case Errc::io: return TG_ERROR_IO;
    case Errc::parse: return TG_ERROR_PARSE;
    case Errc::unsatisfiable: return TG_ERROR_UNSATISFIABLE;
  }
  return TG_ERROR_INTERNAL;
}

template <typename F>
int guarded(F&& fn) noexcept {
  try {
    fn();
    g_last_error.clear();
    return TG_OK;
  } catch (const trapgrad::Error& e) {
    g_last_error = e.what();
    return code_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TG_ERROR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return TG_ERROR_INTERNAL;
  }
}

int bad_argument(const char* what) {
  g_last_error = std::string("null argument: ") + what;
  return TG_ERROR_INVALID_ARGUMENT;
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Re-encode a trigger's token strings against a model's vocabulary.
trapgrad::Trigger rebind_trigger(const tg_trigger& t, const trapgrad::Vocabulary& vocab) {
  trapgrad::Trigger out = t.trigger;
  out.ids.clear();
  for (const auto& tok : t.tokens) out.ids.push_back(vocab.id_of(tok));
  return out;
}

tg_trigger* wrap_trigger(const trapgrad::Trigger& trigger, const trapgrad::Vocabulary& vocab) {
  auto* out = new tg_trigger{trigger, {}};
  for (auto id : trigger.ids) out->tokens.push_back(vocab.token_of(id));
  return out;
}

}  // namespace

extern "C" {

const char* tg_version(void) { return "1.0.0"; }

const char* tg_last_error(void) { return g_last_error.c_str(); }

void tg_string_free(char* s) { delete[] s; }

/* -------- configuration -------- */

int tg_config_create(tg_config** out) {
  if (!out) return bad_argument("out");
  *out = new tg_config{};
  return TG_OK;
}

int tg_config_load(const char* path, tg_config** out) {
  if (!path || !out) return bad_argument("path/out");
  return guarded([&] { *out = new tg_config{trapgrad::load_config(path)}; });
}

int tg_config_set(tg_config* config, const char* key, const char* value) {
  if (!config || !key) return bad_argument("config/key");
  return guarded([&] {
    const std::string assignment = value ? std::string(key) + "=" + value : std::string(key);
    trapgrad::apply_override(config->cfg, assignment);
  });
}

int tg_config_dump(const tg_config* config, char** out_text) {
  if (!config || !out_text) return bad_argument("config/out_text");
  return guarded([&] { *out_text = copy_string(trapgrad::dump_config(config->cfg)); });
}

void tg_config_free(tg_config* config) { delete config; }

/* -------- datasets -------- */

int tg_data_prepare(const tg_config* config, uint64_t seed, tg_textdata** out_train,
                    tg_textdata** out_attack, tg_textdata** out_test) {
  if (!config || !out_train || !out_attack || !out_test) return bad_argument("config/outputs");
  return guarded([&] {
    trapgrad::TextDataset raw;
    if (config->cfg.data.source == trapgrad::DataConfig::Source::synthetic) {
      trapgrad::SynthSpec spec = config->cfg.data.synth;
      spec.seed = trapgrad::derive_seed(seed, trapgrad::stream::data);
      raw = trapgrad::generate_synthetic(spec);
    } else {
      raw = trapgrad::load_text_dataset(config->cfg.data.path);
    }
    trapgrad::Rng rng(trapgrad::derive_seed(seed, trapgrad::stream::split));
    auto parts = trapgrad::split_dataset(raw, rng);
    *out_train = new tg_textdata{std::move(parts[0])};
    *out_attack = new tg_textdata{std::move(parts[1])};
    *out_test = new tg_textdata{std::move(parts[2])};
  });
}

int tg_textdata_load(const char* path, tg_textdata** out) {
  if (!path || !out) return bad_argument("path/out");
  return guarded([&] { *out = new tg_textdata{trapgrad::load_text_dataset(path)}; });
}

int tg_textdata_save(const tg_textdata* data, const char* path) {
  if (!data || !path) return bad_argument("data/path");
  return guarded([&] { trapgrad::save_text_dataset(data->data, path); });
}

int tg_textdata_size(const tg_textdata* data, size_t* out) {
  if (!data || !out) return bad_argument("data/out");
  *out = data->data.size();
  return TG_OK;
}

int tg_textdata_classes(const tg_textdata* data, int* out) {
  if (!data || !out) return bad_argument("data/out");
  *out = data->data.num_classes;
  return TG_OK;
}

void tg_textdata_free(tg_textdata* data) { delete data; }

/* -------- classifier -------- */

int tg_train(const tg_config* config, const tg_textdata* train, uint64_t seed, tg_model** out) {
  if (!config || !train || !out) return bad_argument("config/train/out");
  return guarded([&] {
    trapgrad::Vocabulary vocab = trapgrad::build_vocabulary(train->data, 1);
    trapgrad::ModelConfig mc = config->cfg.model;
    mc.seed = trapgrad::derive_seed(seed, trapgrad::stream::model);
    trapgrad::TextClassifier model =
        trapgrad::init_model(vocab, train->data.num_classes, mc);
    trapgrad::train(model, trapgrad::encode_dataset(train->data, vocab, trapgrad::Split::train),
                    mc);
    *out = new tg_model{std::move(model)};
  });
}

int tg_model_save(const tg_model* model, const char* path) {
  if (!model || !path) return bad_argument("model/path");
  return guarded([&] { trapgrad::save_model(model->model, path); });
}

int tg_model_load(const char* path, tg_model** out) {
  if (!path || !out) return bad_argument("path/out");
  return guarded([&] { *out = new tg_model{trapgrad::load_model(path)}; });
}

int tg_model_evaluate(const tg_model* model, const tg_textdata* data, double* out_accuracy,
                      double* out_macro_f1) {
  if (!model || !data) return bad_argument("model/data");
  return guarded([&] {
    const trapgrad::Dataset encoded =
        trapgrad::encode_dataset(data->data, model->model.vocab, trapgrad::Split::test);
    const trapgrad::EvalMetrics m = trapgrad::evaluate(model->model, encoded);
    if (out_accuracy) *out_accuracy = m.accuracy;
    if (out_macro_f1) *out_macro_f1 = m.macro_f1;
  });
}

int tg_model_predict(const tg_model* model, const char* text, int* out_label) {
  if (!model || !text || !out_label) return bad_argument("model/text/out_label");
  return guarded([&] {
    *out_label = trapgrad::predict(model->model, trapgrad::encode(text, model->model.vocab));
  });
}

void tg_model_free(tg_model* model) { delete model; }

/* -------- attack -------- */

int tg_attack(const tg_model* model, const tg_textdata* attack_data, int target_label,
              const tg_config* config, uint64_t seed, tg_trigger** out) {
  if (!model || !attack_data || !config || !out) return bad_argument("model/data/config/out");
  return guarded([&] {
    trapgrad::AttackConfig ac = config->cfg.attack;
    ac.seed = trapgrad::derive_seed(seed, trapgrad::stream::attack);
    const trapgrad::Dataset encoded = trapgrad::encode_dataset(
        attack_data->data, model->model.vocab, trapgrad::Split::attack);
    const trapgrad::Trigger t =
        trapgrad::learn_trigger(model->model, encoded, target_label, ac);
    *out = wrap_trigger(t, model->model.vocab);
  });
}

int tg_trigger_save(const tg_trigger* trigger, const char* path) {
  if (!trigger || !path) return bad_argument("trigger/path");
  return guarded([&] {
    trapgrad::Vocabulary vocab;  // token strings carried by the handle
    vocab.tokens = {"<pad>", "<unk>"};
    trapgrad::Trigger t = trigger->trigger;
    t.ids.clear();
    for (const auto& tok : trigger->tokens) {
      t.ids.push_back(vocab.size());
      vocab.tokens.push_back(tok);
    }
    trapgrad::save_trigger(t, vocab, path);
  });
}

int tg_trigger_load(const char* path, tg_trigger** out) {
  if (!path || !out) return bad_argument("path/out");
  return guarded([&] {
    std::ifstream in(path);
    trapgrad::require(in.good(), Errc::io, std::string("cannot open trigger file: ") + path);
    std::string line;
    trapgrad::require(static_cast<bool>(std::getline(in, line)), Errc::parse,
                      "empty trigger file");
    // Parse against a throwaway vocabulary built from the line's own tokens.
    const auto tab1 = line.find('\t');
    const auto tab2 = line.find('\t', tab1 == std::string::npos ? tab1 : tab1 + 1);
    const auto tab3 = line.find('\t', tab2 == std::string::npos ? tab2 : tab2 + 1);
    trapgrad::require(tab3 != std::string::npos, Errc::parse, "trigger line needs 4 fields");
    trapgrad::Vocabulary vocab;
    vocab.tokens = {"<pad>", "<unk>"};
    std::istringstream toks(line.substr(tab2 + 1, tab3 - tab2 - 1));
    std::string tok;
    while (std::getline(toks, tok, ',')) {
      if (vocab.index.find(tok) == vocab.index.end()) {
        vocab.index[tok] = vocab.size();
        vocab.tokens.push_back(tok);
      }
    }
    const trapgrad::Trigger t = trapgrad::trigger_from_line(line, vocab);
    *out = wrap_trigger(t, vocab);
  });
}

int tg_trigger_tokens(const tg_trigger* trigger, char** out_space_joined) {
  if (!trigger || !out_space_joined) return bad_argument("trigger/out");
  std::string joined;
  for (std::size_t i = 0; i < trigger->tokens.size(); ++i) {
    if (i) joined += ' ';
    joined += trigger->tokens[i];
  }
  *out_space_joined = copy_string(joined);
  return TG_OK;
}

int tg_trigger_target(const tg_trigger* trigger, int* out_label) {
  if (!trigger || !out_label) return bad_argument("trigger/out");
  *out_label = trigger->trigger.target_label;
  return TG_OK;
}

int tg_attack_accuracy(const tg_model* model, const tg_trigger* trigger, const tg_textdata* data,
                       double* out_accuracy) {
  if (!model || !trigger || !data || !out_accuracy) return bad_argument("model/trigger/data/out");
  return guarded([&] {
    const trapgrad::Trigger bound = rebind_trigger(*trigger, model->model.vocab);
    const trapgrad::Dataset encoded =
        trapgrad::encode_dataset(data->data, model->model.vocab, trapgrad::Split::test);
    *out_accuracy = trapgrad::attack_accuracy(model->model, bound, encoded,
                                              trigger->trigger.target_label);
  });
}

void tg_trigger_free(tg_trigger* trigger) { delete trigger; }

/* -------- defense -------- */

int tg_defend(const tg_config* config, const tg_textdata* train, uint64_t seed,
              tg_model** out_model, tg_detector** out_detector, tg_trapdoors** out_trapdoors) {
  if (!config || !train) return bad_argument("config/train");
  return guarded([&] {
    const trapgrad::Vocabulary vocab = trapgrad::build_vocabulary(train->data, 1);
    const trapgrad::Dataset encoded =
        trapgrad::encode_dataset(train->data, vocab, trapgrad::Split::train);

    trapgrad::ModelConfig mc = config->cfg.model;
    mc.seed = trapgrad::derive_seed(seed, trapgrad::stream::model);
    trapgrad::TextClassifier model = trapgrad::init_model(vocab, encoded.num_classes, mc);

    trapgrad::Rng search_rng(trapgrad::derive_seed(seed, trapgrad::stream::trapdoor));
    trapgrad::TrapdoorSet set = trapgrad::search_trapdoors(
        model, encoded, config->cfg.defense, config->cfg.defense.strategy, search_rng);

    trapgrad::Rng pop_rng(trapgrad::derive_seed(seed, trapgrad::stream::populate));
    const trapgrad::Dataset trap_data = trapgrad::populate_trapdoor_examples(
        encoded, set, config->cfg.defense.trap_ratio, pop_rng);

    trapgrad::ModelConfig inject_cfg = mc;
    inject_cfg.seed = trapgrad::derive_seed(seed, trapgrad::stream::inject);
    trapgrad::inject_train(model, encoded, trap_data, config->cfg.defense.trap_weight, inject_cfg);

    trapgrad::DetectorConfig dc = config->cfg.detector;
    dc.seed = trapgrad::derive_seed(seed, trapgrad::stream::detector);
    trapgrad::Detector detector = trapgrad::train_detector(encoded, trap_data, vocab, dc);

    if (out_trapdoors) {
      auto* td = new tg_trapdoors{set, {}};
      for (const auto& label_tokens : set.tokens_per_label) {
        std::vector<std::string> strs;
        for (auto id : label_tokens) strs.push_back(vocab.token_of(id));
        td->tokens.push_back(std::move(strs));
      }
      *out_trapdoors = td;
    }
    if (out_detector) *out_detector = new tg_detector{std::move(detector)};
    if (out_model) *out_model = new tg_model{std::move(model)};
  });
}

int tg_trapdoors_save(const tg_trapdoors* set, const char* path) {
  if (!set || !path) return bad_argument("set/path");
  return guarded([&] {
    std::ofstream out(path);
    trapgrad::require(out.good(), Errc::io, std::string("cannot write trapdoor file: ") + path);
    for (std::size_t label = 0; label < set->tokens.size(); ++label) {
      out << label << '\t';
      for (std::size_t i = 0; i < set->tokens[label].size(); ++i) {
        if (i) out << ',';
        out << set->tokens[label][i];
      }
      out << '\n';
    }
    trapgrad::require(out.good(), Errc::io, std::string("write failed: ") + path);
  });
}

int tg_trapdoors_tokens(const tg_trapdoors* set, int label, char** out_space_joined) {
  if (!set || !out_space_joined) return bad_argument("set/out");
  if (label < 0 || label >= static_cast<int>(set->tokens.size())) {
    return bad_argument("label out of range");
  }
  std::string joined;
  for (std::size_t i = 0; i < set->tokens[static_cast<std::size_t>(label)].size(); ++i) {
    if (i) joined += ' ';
    joined += set->tokens[static_cast<std::size_t>(label)][i];
  }
  *out_space_joined = copy_string(joined);
  return TG_OK;
}

void tg_trapdoors_free(tg_trapdoors* set) { delete set; }

int tg_detector_save(const tg_detector* detector, const char* path) {
  if (!detector || !path) return bad_argument("detector/path");
  return guarded([&] { trapgrad::save_detector(detector->detector, path); });
}

int tg_detector_load(const char* path, tg_detector** out) {
  if (!path || !out) return bad_argument("path/out");
  return guarded([&] { *out = new tg_detector{trapgrad::load_detector(path)}; });
}

int tg_detector_score(const tg_detector* detector, const char* text, double* out_score) {
  if (!detector || !text || !out_score) return bad_argument("detector/text/out");
  return guarded([&] { *out_score = detector->detector.score_text(text); });
}

void tg_detector_free(tg_detector* detector) { delete detector; }

/* -------- scenarios and reports -------- */

int tg_scenario_run(const tg_config* config, uint64_t seed, tg_report** out) {
  if (!config || !out) return bad_argument("config/out");
  return guarded([&] { *out = new tg_report{trapgrad::run_scenario(config->cfg, seed)}; });
}

int tg_report_jsonl(const tg_report* report, char** out_text) {
  if (!report || !out_text) return bad_argument("report/out");
  return guarded([&] { *out_text = copy_string(trapgrad::report_to_jsonl(report->report)); });
}

int tg_report_table(const tg_report* report, char** out_text) {
  if (!report || !out_text) return bad_argument("report/out");
  return guarded([&] { *out_text = copy_string(trapgrad::report_to_table(report->report)); });
}

int tg_report_save(const tg_report* report, const char* path) {
  if (!report || !path) return bad_argument("report/path");
  return guarded([&] { trapgrad::save_report_jsonl(report->report, path); });
}

int tg_report_load(const char* path, tg_report** out) {
  if (!path || !out) return bad_argument("path/out");
  return guarded([&] { *out = new tg_report{trapgrad::load_report_jsonl(path)}; });
}

void tg_report_free(tg_report* report) { delete report; }

}  // extern "C"

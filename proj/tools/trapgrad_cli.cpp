// Command-line front end. Talks to the core exclusively through the C API in
// trapgrad.h.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "trapgrad.h"

namespace {

struct ConfigDeleter {
  void operator()(tg_config* p) const { tg_config_free(p); }
};
struct DataDeleter {
  void operator()(tg_textdata* p) const { tg_textdata_free(p); }
};
struct ModelDeleter {
  void operator()(tg_model* p) const { tg_model_free(p); }
};
struct TriggerDeleter {
  void operator()(tg_trigger* p) const { tg_trigger_free(p); }
};
struct DetectorDeleter {
  void operator()(tg_detector* p) const { tg_detector_free(p); }
};
struct TrapdoorsDeleter {
  void operator()(tg_trapdoors* p) const { tg_trapdoors_free(p); }
};
struct ReportDeleter {
  void operator()(tg_report* p) const { tg_report_free(p); }
};

using ConfigPtr = std::unique_ptr<tg_config, ConfigDeleter>;
using DataPtr = std::unique_ptr<tg_textdata, DataDeleter>;
using ModelPtr = std::unique_ptr<tg_model, ModelDeleter>;
using TriggerPtr = std::unique_ptr<tg_trigger, TriggerDeleter>;
using DetectorPtr = std::unique_ptr<tg_detector, DetectorDeleter>;
using TrapdoorsPtr = std::unique_ptr<tg_trapdoors, TrapdoorsDeleter>;
using ReportPtr = std::unique_ptr<tg_report, ReportDeleter>;

// One-line machine-parsable failure; exit code mirrors the API error code.
[[noreturn]] void die(int code) {
  std::cerr << "error: " << code << ": " << tg_last_error() << "\n";
  std::exit(code);
}

void check(int code) {
  if (code != TG_OK) die(code);
}

std::string take_string(char* owned) {
  std::string s = owned ? owned : "";
  tg_string_free(owned);
  return s;
}

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool seed_required) {
  cmd->add_option("--config", args.config_path, "config file (section.key = value lines)");
  cmd->add_option("--set", args.overrides, "override, key=value (applied after the file)")
      ->take_all();
  cmd->add_option("--out", args.out_dir, "output directory");
  auto* seed = cmd->add_option("--seed", args.seed, "master seed");
  if (seed_required) seed->required();
}

ConfigPtr build_config(const CommonArgs& args) {
  tg_config* cfg = nullptr;
  if (args.config_path.empty()) {
    check(tg_config_create(&cfg));
  } else {
    check(tg_config_load(args.config_path.c_str(), &cfg));
  }
  ConfigPtr out(cfg);
  for (const auto& kv : args.overrides) {
    check(tg_config_set(out.get(), kv.c_str(), nullptr));
  }
  return out;
}

// Config and master seed land in the output directory before any computation.
void write_provenance(const CommonArgs& args, const tg_config* cfg, const std::string& command) {
  std::filesystem::create_directories(args.out_dir);
  char* text = nullptr;
  check(tg_config_dump(cfg, &text));
  std::ofstream out(args.out_dir + "/config.txt");
  if (!out.good()) {
    std::cerr << "error: " << TG_ERROR_IO << ": cannot write " << args.out_dir << "/config.txt\n";
    std::exit(TG_ERROR_IO);
  }
  out << "# trapgrad " << command << "\n# seed = " << args.seed << "\n" << take_string(text);
}

int cmd_train(const CommonArgs& args) {
  ConfigPtr cfg = build_config(args);
  write_provenance(args, cfg.get(), "train");

  tg_textdata *train = nullptr, *attack = nullptr, *test = nullptr;
  check(tg_data_prepare(cfg.get(), args.seed, &train, &attack, &test));
  DataPtr train_p(train), attack_p(attack), test_p(test);

  tg_model* model = nullptr;
  check(tg_train(cfg.get(), train, args.seed, &model));
  ModelPtr model_p(model);

  double acc = 0, f1 = 0;
  check(tg_model_evaluate(model, test, &acc, &f1));
  const std::string ckpt = args.out_dir + "/model.ckpt";
  check(tg_model_save(model, ckpt.c_str()));
  std::printf("saved %s  test_accuracy=%.4f  test_macro_f1=%.4f\n", ckpt.c_str(), acc, f1);
  return 0;
}

int cmd_attack(const CommonArgs& args, const std::string& model_path, int target) {
  ConfigPtr cfg = build_config(args);
  write_provenance(args, cfg.get(), "attack");

  tg_model* model = nullptr;
  check(tg_model_load(model_path.c_str(), &model));
  ModelPtr model_p(model);

  tg_textdata *train = nullptr, *attack = nullptr, *test = nullptr;
  check(tg_data_prepare(cfg.get(), args.seed, &train, &attack, &test));
  DataPtr train_p(train), attack_p(attack), test_p(test);

  tg_trigger* trigger = nullptr;
  check(tg_attack(model, attack, target, cfg.get(), args.seed, &trigger));
  TriggerPtr trigger_p(trigger);

  const std::string path = args.out_dir + "/trigger.tsv";
  check(tg_trigger_save(trigger, path.c_str()));

  char* tokens = nullptr;
  check(tg_trigger_tokens(trigger, &tokens));
  double acc = 0;
  check(tg_attack_accuracy(model, trigger, test, &acc));
  std::printf("saved %s  trigger=\"%s\"  target=%d  attack_accuracy=%.4f\n", path.c_str(),
              take_string(tokens).c_str(), target, acc);
  return 0;
}

int cmd_defend(const CommonArgs& args) {
  ConfigPtr cfg = build_config(args);
  write_provenance(args, cfg.get(), "defend");

  tg_textdata *train = nullptr, *attack = nullptr, *test = nullptr;
  check(tg_data_prepare(cfg.get(), args.seed, &train, &attack, &test));
  DataPtr train_p(train), attack_p(attack), test_p(test);

  tg_model* model = nullptr;
  tg_detector* detector = nullptr;
  tg_trapdoors* trapdoors = nullptr;
  check(tg_defend(cfg.get(), train, args.seed, &model, &detector, &trapdoors));
  ModelPtr model_p(model);
  DetectorPtr detector_p(detector);
  TrapdoorsPtr trapdoors_p(trapdoors);

  check(tg_model_save(model, (args.out_dir + "/model.ckpt").c_str()));
  check(tg_detector_save(detector, (args.out_dir + "/detector.ckpt").c_str()));
  check(tg_trapdoors_save(trapdoors, (args.out_dir + "/trapdoors.tsv").c_str()));

  double acc = 0, f1 = 0;
  check(tg_model_evaluate(model, test, &acc, &f1));
  std::printf("saved %s/{model.ckpt,detector.ckpt,trapdoors.tsv}  clean_accuracy=%.4f  clean_macro_f1=%.4f\n",
              args.out_dir.c_str(), acc, f1);
  return 0;
}

int cmd_scenario(const CommonArgs& args) {
  ConfigPtr cfg = build_config(args);
  write_provenance(args, cfg.get(), "scenario");

  tg_report* report = nullptr;
  check(tg_scenario_run(cfg.get(), args.seed, &report));
  ReportPtr report_p(report);

  const std::string path = args.out_dir + "/report.jsonl";
  check(tg_report_save(report, path.c_str()));

  char* table = nullptr;
  check(tg_report_table(report, &table));
  std::printf("%s", take_string(table).c_str());
  std::printf("saved %s\n", path.c_str());
  return 0;
}

int cmd_report(const std::string& in_path, const std::string& format) {
  tg_report* report = nullptr;
  check(tg_report_load(in_path.c_str(), &report));
  ReportPtr report_p(report);

  char* text = nullptr;
  if (format == "jsonl") {
    check(tg_report_jsonl(report, &text));
  } else {
    check(tg_report_table(report, &text));
  }
  std::printf("%s", take_string(text).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trapgrad: universal-trigger attacks and trapdoor honeypot defenses for small text "
               "classifiers (v" +
               std::string(tg_version()) + ")"};
  app.require_subcommand(1);

  CommonArgs train_args, attack_args, defend_args, scenario_args;
  std::string model_path, report_in, report_format = "table";
  int target = 0;

  auto* train = app.add_subcommand("train", "train a clean classifier, save a checkpoint");
  add_common(train, train_args, false);

  auto* attack = app.add_subcommand("attack", "learn a universal trigger against a checkpoint");
  add_common(attack, attack_args, false);
  attack->add_option("--model", model_path, "model checkpoint")->required();
  attack->add_option("--target", target, "target label");

  auto* defend = app.add_subcommand("defend", "trapdoor search + injection + detector training");
  add_common(defend, defend_args, false);

  auto* scenario = app.add_subcommand("scenario", "run a full threat-model experiment");
  add_common(scenario, scenario_args, true);

  auto* report = app.add_subcommand("report", "re-render a report.jsonl");
  report->add_option("--in", report_in, "report.jsonl path")->required();
  report->add_option("--format", report_format, "table | jsonl")
      ->check(CLI::IsMember({"table", "jsonl"}));

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) return cmd_train(train_args);
  if (attack->parsed()) return cmd_attack(attack_args, model_path, target);
  if (defend->parsed()) return cmd_defend(defend_args);
  if (scenario->parsed()) return cmd_scenario(scenario_args);
  if (report->parsed()) return cmd_report(report_in, report_format);
  return 1;
}

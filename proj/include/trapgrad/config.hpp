#pragma once

#include <cstdint>
#include <string>

#include "trapgrad/attack.hpp"
#include "trapgrad/defense.hpp"
#include "trapgrad/detector.hpp"
#include "trapgrad/model.hpp"
#include "trapgrad/synth.hpp"

namespace trapgrad {

enum class ScenarioKind { novice, oracle, adaptive, advanced, blackbox };

std::string to_string(ScenarioKind kind);

struct DataConfig {
  enum class Source { synthetic, file };
  Source source = Source::synthetic;
  std::string path;  // TSV, for Source::file
  SynthSpec synth;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::novice;
  DataConfig data;
  ModelConfig model;
  AttackConfig attack;
  DefenseConfig defense;
  DetectorConfig detector;
  int replicates = 15;
  int queries = 10;  // Q, attack queries available to adaptive attackers

  void validate() const;
};

// Line-oriented `section.key = value` config. Unknown keys and out-of-range
// values are rejected with the line number; omitted keys keep their defaults.
ScenarioConfig load_config(const std::string& path);
ScenarioConfig parse_config_text(const std::string& text);

// `key=value`, applied after file values.
void apply_override(ScenarioConfig& config, const std::string& assignment);

// Canonical dump: every key, registry order, shortest round-trip number
// formatting. dump(parse(dump(x))) == dump(x).
std::string dump_config(const ScenarioConfig& config);

}  // namespace trapgrad

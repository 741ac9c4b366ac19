#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trapgrad/attack.hpp"
#include "trapgrad/config.hpp"
#include "trapgrad/defense.hpp"
#include "trapgrad/detector.hpp"
#include "trapgrad/model.hpp"

namespace trapgrad {

struct ReplicateResult {
  int replicate = 0;
  std::uint64_t seed = 0;
  double clean_f1 = 0;     // trapdoored model, clean test inputs
  double baseline_f1 = 0;  // trapdoor-free twin, same seed
  double detect_auc = 0;
  double tpr = 0;
  double fpr = 0;
  double attack_acc = 0;
  double ue_auc = 0;  // uncertainty-estimation baseline
  std::optional<double> revealed_ratio;
  double wall_seconds = 0;  // never serialized: reports must be reproducible
};

struct ScenarioReport {
  std::string scenario;
  std::uint64_t master_seed = 0;
  std::string config_text;  // canonical dump, echoed for provenance
  std::vector<ReplicateResult> replicates;
  ReplicateResult aggregate;  // arithmetic means over replicates
};

// Replicate r uses derive_seed(master_seed, r); replicates run in parallel up
// to TRAPGRAD_THREADS (default: hardware concurrency). Every label is attacked
// in turn and the metrics averaged. The true detector G is always the one
// scored; surrogates only steer the attacker.
ScenarioReport run_scenario(const ScenarioConfig& config, std::uint64_t master_seed);

ScenarioReport run_novice(const ScenarioConfig& config, std::uint64_t master_seed);
ScenarioReport run_oracle(const ScenarioConfig& config, std::uint64_t master_seed);
ScenarioReport run_adaptive(const ScenarioConfig& config, std::uint64_t master_seed);
ScenarioReport run_advanced(const ScenarioConfig& config, std::uint64_t master_seed);
ScenarioReport run_blackbox(const ScenarioConfig& config, std::uint64_t master_seed);

// Runs `queries` trigger searches against the trapdoored model (targets cycle
// over the labels), treats the union of learned trigger tokens per target as
// pseudo-trapdoors, and trains a surrogate detector on attack-set examples
// populated with them. Outputs the query triggers and pseudo set when asked.
Detector steal_detector(const TextClassifier& model, const Dataset& attack_data, int queries,
                        const ScenarioConfig& config, std::uint64_t seed,
                        TrapdoorSet* pseudo_trapdoors = nullptr,
                        std::vector<Trigger>* query_triggers = nullptr);

// Labels the attack set with the target's predictions and trains a fresh
// classifier on them (surrogate_config picks the architecture).
TextClassifier steal_model(const TextClassifier& target, const TextDataset& attack_raw,
                           const ModelConfig& surrogate_config, std::uint64_t seed);

// Fraction of true trapdoor tokens appearing in any of the query triggers.
double revealed_ratio(const std::vector<Trigger>& query_triggers, const TrapdoorSet& trapdoors);

}  // namespace trapgrad

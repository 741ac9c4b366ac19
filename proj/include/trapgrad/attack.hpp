#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trapgrad/dataset.hpp"
#include "trapgrad/detector.hpp"
#include "trapgrad/model.hpp"
#include "trapgrad/rng.hpp"

namespace trapgrad {

enum class TriggerPosition { prefix, suffix };

struct Trigger {
  TokenSeq ids;
  int target_label = 0;
  TriggerPosition position = TriggerPosition::prefix;
  double loss = 0;  // objective on the full attack set at return time
};

struct AttackConfig {
  int trigger_len = 2;
  int beam_width = 3;
  int cand_count = 10;  // candidates ranked per expansion
  int batch_size = 32;
  int max_epochs = 5;
  double tol = 1e-3;             // relative-improvement convergence test
  int skip_top = 0;              // advanced attacker drops this many best candidates
  double detector_weight = 1.0;  // detector term weight in the combined objective
  TriggerPosition position = TriggerPosition::prefix;
  std::uint64_t seed = 1;

  void validate() const;
};

// One uniformly sampled non-special token, repeated trigger_len times.
Trigger init_trigger(const Vocabulary& vocab, int trigger_len, Rng& rng);

TokenSeq apply_trigger(const Trigger& trigger, const TokenSeq& seq);

struct ScoredToken {
  std::int32_t id;
  double score;
};

// First-order replacement scores for the trigger token at `position`:
// (e_w - e_current) . mean-over-batch input-embedding gradient of the
// target-class loss. Most negative (loss-reducing) first, ties by id.
// PAD and UNK never appear. Returns the k best.
std::vector<ScoredToken> rank_candidates(const TextClassifier& model, const Trigger& trigger,
                                         const std::vector<const Example*>& batch, int position,
                                         int k);

std::vector<std::int32_t> candidate_tokens(const TextClassifier& model, const Trigger& trigger,
                                           const std::vector<const Example*>& batch, int position,
                                           int k);

// Mean of -log p(target | trigger + x) over the examples with label != target;
// the per-example term of the trigger-search objective.
double trigger_loss(const TextClassifier& model, const TokenSeq& trigger_ids,
                    TriggerPosition position, const Dataset& data, int target_label);

// Gradient-guided beam search for a universal trigger toward target_label.
Trigger learn_trigger(const TextClassifier& model, const Dataset& attack_data, int target_label,
                      const AttackConfig& config);

// Beam ranking uses loss + detector_weight * mean detector score, so the
// search also evades the given detector.
Trigger learn_trigger_oracle(const TextClassifier& model, const Detector& detector,
                             const Dataset& attack_data, int target_label,
                             const AttackConfig& config);

// As the oracle variant, but each candidate ranking drops its first skip_top
// entries before beam expansion.
Trigger learn_trigger_advanced(const TextClassifier& model, const Detector& surrogate,
                               const Dataset& attack_data, int target_label,
                               const AttackConfig& config);

// Accuracy of the model on triggered inputs whose true label != target
// (lower = stronger attack).
double attack_accuracy(const TextClassifier& model, const Trigger& trigger, const Dataset& data,
                       int target_label);

// One line: `target<TAB>position<TAB>token,token,...<TAB>loss`.
std::string trigger_to_line(const Trigger& trigger, const Vocabulary& vocab);
Trigger trigger_from_line(const std::string& line, const Vocabulary& vocab);
void save_trigger(const Trigger& trigger, const Vocabulary& vocab, const std::string& path);

}  // namespace trapgrad

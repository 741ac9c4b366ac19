#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trapgrad/dataset.hpp"
#include "trapgrad/detector.hpp"
#include "trapgrad/model.hpp"
#include "trapgrad/rng.hpp"

namespace trapgrad {

enum class TrapdoorStrategy { adaptive, random };

struct DefenseConfig {
  int trapdoors_per_label = 5;  // K
  double intra_bound = 0.5;     // alpha: same-label trapdoors stay within this distance
  double inter_bound = 0.7;     // beta: cross-label trapdoors stay at least this far apart
  int sample_size = 20;         // T: candidates sampled per selection
  double trap_weight = 1.0;     // gamma: loss multiplier for trapdoor examples
  double trap_ratio = 0.1;      // epsilon: fraction of eligible examples per trapdoor copy
  double threshold = 0.5;       // detection operating point
  TrapdoorStrategy strategy = TrapdoorStrategy::adaptive;

  void validate() const;
};

struct TrapdoorSet {
  std::vector<std::vector<std::int32_t>> tokens_per_label;
  int per_label = 0;  // K used by the search (0 for ad-hoc sets)
  TrapdoorStrategy strategy = TrapdoorStrategy::adaptive;
  // Bounds actually enforced at selection time. intra_bound can exceed the
  // configured value when the pool was exhausted and the search relaxed it.
  double intra_bound = 0;
  double inter_bound = 0;

  int num_labels() const { return static_cast<int>(tokens_per_label.size()); }
  int total_tokens() const;
  bool contains(int label, std::int32_t id) const;
};

// Exactly one training epoch; leaves the decision boundary loose enough to
// absorb trapdoor examples later.
TrainReport warm_up(TextClassifier& model, const Dataset& train_data);

// Cosine distance 1 - cos(a, b); pairs involving a zero vector get 1.
double embedding_distance(const Eigen::Ref<const Vec>& a, const Eigen::Ref<const Vec>& b);

// Candidate trapdoor tokens for `label`: within alpha of any existing trapdoor
// of the label (every non-special token when none exist yet), excluding tokens
// within beta of any other label's trapdoor and the label's own picks. Returns
// min(sample_size, |pool|) tokens sampled uniformly without replacement.
std::vector<std::int32_t> candidate_pool(const TextClassifier& model, const TrapdoorSet& partial,
                                         int label, double alpha, double beta, int sample_size,
                                         Rng& rng);

// Sum over contrasting labels of the cosine distance between that label's
// centroid and the mean penultimate response to `token` prepended to the
// contrasting-class examples. Larger = safer trapdoor for the label.
double fidelity_score(const TextClassifier& model, std::int32_t token,
                      const Dataset& other_class_data, const std::vector<Vec>& other_centroids);

// Warm-up, per-class centroids, then K greedy selections per label:
// candidate_pool -> argmax fidelity_score, ties broken by token id. The
// random strategy draws K distinct non-special tokens per label instead.
// On pool exhaustion alpha is relaxed upward in 0.1 steps; the effective
// bound is recorded in the returned set.
TrapdoorSet search_trapdoors(TextClassifier& model, const Dataset& train_data,
                             const DefenseConfig& config, TrapdoorStrategy strategy, Rng& rng);

// For each label L and each trapdoor w of L: floor(ratio * |D_{y != L}|)
// examples sampled from D_{y != L}, with w prepended, labeled L and marked
// adversarial.
Dataset populate_trapdoor_examples(const Dataset& train_data, const TrapdoorSet& trapdoors,
                                   double ratio, Rng& rng);

// Joint training on train_data plus trap_data with trapdoor examples weighted
// by trap_weight, interleaved under seeded shuffling.
TrainReport inject_train(TextClassifier& model, const Dataset& train_data,
                         const Dataset& trap_data, double trap_weight, const ModelConfig& config);

// One line per label: `label<TAB>token,token,...`.
void save_trapdoors(const TrapdoorSet& set, const Vocabulary& vocab, const std::string& path);
TrapdoorSet load_trapdoors(const std::string& path, const Vocabulary& vocab);

}  // namespace trapgrad

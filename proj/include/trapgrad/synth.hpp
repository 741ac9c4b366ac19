#pragma once

#include <cstdint>

#include "trapgrad/dataset.hpp"

namespace trapgrad {

// Planted-lexicon generator: each class owns a disjoint lexicon, documents mix
// lexicon tokens with shared noise tokens, and every document keeps at least
// one lexicon token, so a bag-of-words rule is 100% accurate by construction.
struct SynthSpec {
  int num_classes = 2;
  int vocab_size = 1000;  // token universe (class lexicons + shared noise pool)
  int lexicon_size = 40;  // per class
  int docs_per_class = 1000;
  int len_min = 8;
  int len_max = 16;
  double noise_fraction = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

TextDataset generate_synthetic(const SynthSpec& spec);

}  // namespace trapgrad

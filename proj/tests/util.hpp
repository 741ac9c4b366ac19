#pragma once

// Shared fixtures for the unit suites: small planted-lexicon corpora and the
// model/attack settings they train well under.

#include <cstdint>

#include "trapgrad/attack.hpp"
#include "trapgrad/dataset.hpp"
#include "trapgrad/defense.hpp"
#include "trapgrad/detector.hpp"
#include "trapgrad/model.hpp"
#include "trapgrad/synth.hpp"
#include "trapgrad/vocab.hpp"

namespace testutil {

inline trapgrad::SynthSpec tiny_synth(std::uint64_t seed = 7) {
  trapgrad::SynthSpec s;
  s.num_classes = 2;
  s.vocab_size = 200;
  s.lexicon_size = 20;
  s.docs_per_class = 150;
  s.len_min = 6;
  s.len_max = 10;
  s.noise_fraction = 0.4;
  s.seed = seed;
  return s;
}

inline trapgrad::ModelConfig tiny_model(trapgrad::EncoderKind kind = trapgrad::EncoderKind::conv,
                                        std::uint64_t seed = 11) {
  trapgrad::ModelConfig m;
  m.encoder = kind;
  m.embed_dim = 12;
  m.hidden_dim = 12;
  m.conv_filters = 6;
  m.learning_rate = 2.0;
  m.epochs = 8;
  m.batch_size = 32;
  m.seed = seed;
  return m;
}

struct Pipeline {
  trapgrad::Vocabulary vocab;
  trapgrad::Dataset train, attack, test;
  trapgrad::TextClassifier model;
};

inline Pipeline trained_pipeline(const trapgrad::SynthSpec& spec, const trapgrad::ModelConfig& mc,
                                 std::uint64_t split_seed = 5) {
  using namespace trapgrad;
  Pipeline p;
  TextDataset raw = generate_synthetic(spec);
  Rng split_rng(split_seed);
  auto parts = split_dataset(raw, split_rng);
  p.vocab = build_vocabulary(parts[0], 1);
  p.train = encode_dataset(parts[0], p.vocab, Split::train);
  p.attack = encode_dataset(parts[1], p.vocab, Split::attack);
  p.test = encode_dataset(parts[2], p.vocab, Split::test);
  p.model = init_model(p.vocab, spec.num_classes, mc);
  train(p.model, p.train, mc);
  return p;
}

}  // namespace testutil

#include "trapgrad/synth.hpp"

#include <string>
#include <vector>

#include "trapgrad/error.hpp"
#include "trapgrad/rng.hpp"

namespace trapgrad {

void SynthSpec::validate() const {
  require(num_classes >= 2, Errc::invalid_argument, "need at least 2 classes");
  require(lexicon_size >= 1, Errc::invalid_argument, "lexicon size must be >= 1");
  require(docs_per_class >= 1, Errc::invalid_argument, "docs per class must be >= 1");
  require(len_min >= 1 && len_max >= len_min, Errc::invalid_argument, "bad document length range");
  require(noise_fraction >= 0 && noise_fraction < 1, Errc::invalid_argument,
          "noise fraction must be in [0,1)");
  // Disjoint class lexicons must fit inside the token universe.
  require(num_classes * lexicon_size <= vocab_size, Errc::invalid_argument, "lexicon overlap");
  require(noise_fraction == 0 || vocab_size > num_classes * lexicon_size, Errc::invalid_argument,
          "no tokens left for the noise pool");
}

TextDataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  // Token universe: w0..w{V-1}. Class L owns [L*lexicon, (L+1)*lexicon).
  // Noise draws come from the whole shared universe, so documents pick up
  // occasional other-class lexicon tokens the way real text does; a cap keeps
  // the own-lexicon count strictly above every other class's count, so the
  // majority-vote bag-of-words rule stays 100% accurate by construction.
  const int lex_total = spec.num_classes * spec.lexicon_size;
  const int plain_noise = spec.vocab_size - lex_total;

  TextDataset data;
  data.num_classes = spec.num_classes;
  data.examples.reserve(static_cast<std::size_t>(spec.num_classes) *
                        static_cast<std::size_t>(spec.docs_per_class));

  std::vector<int> class_counts(static_cast<std::size_t>(spec.num_classes));
  for (int label = 0; label < spec.num_classes; ++label) {
    const int lex_base = label * spec.lexicon_size;
    for (int doc = 0; doc < spec.docs_per_class; ++doc) {
      const int len = rng.uniform_int(spec.len_min, spec.len_max);
      const int forced = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(len)));
      std::fill(class_counts.begin(), class_counts.end(), 0);
      class_counts[static_cast<std::size_t>(label)] = 1;  // the forced token

      std::string text;
      for (int i = 0; i < len; ++i) {
        int tok_index;
        const bool lexical =
            i == forced || plain_noise == 0 || rng.next_double() >= spec.noise_fraction;
        if (lexical) {
          tok_index = lex_base + static_cast<int>(rng.next_below(
                                     static_cast<std::uint64_t>(spec.lexicon_size)));
          if (i != forced) ++class_counts[static_cast<std::size_t>(label)];
        } else {
          tok_index = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(spec.vocab_size)));
          const int owner = tok_index < lex_total ? tok_index / spec.lexicon_size : -1;
          if (owner == label) {
            ++class_counts[static_cast<std::size_t>(label)];
          } else if (owner >= 0) {
            if (class_counts[static_cast<std::size_t>(owner)] + 1 <
                class_counts[static_cast<std::size_t>(label)]) {
              ++class_counts[static_cast<std::size_t>(owner)];
            } else {
              // Majority would be at risk; fall back to the plain noise range.
              tok_index = lex_total + static_cast<int>(rng.next_below(
                                          static_cast<std::uint64_t>(plain_noise)));
            }
          }
        }
        if (i) text.push_back(' ');
        text += "w" + std::to_string(tok_index);
      }
      data.examples.push_back(TextExample{label, std::move(text)});
    }
  }
  return data;
}

}  // namespace trapgrad

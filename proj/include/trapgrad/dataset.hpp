#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "trapgrad/rng.hpp"

namespace trapgrad {

using TokenSeq = std::vector<std::int32_t>;

enum class Split { train, attack, test };

// Raw labeled text, before any vocabulary exists.
struct TextExample {
  int label = 0;
  std::string text;
};

struct TextDataset {
  std::vector<TextExample> examples;
  int num_classes = 0;

  std::size_t size() const { return examples.size(); }
};

// Encoded example. `adversarial` marks trapdoor-embedded records.
struct Example {
  TokenSeq seq;
  int label = 0;
  bool adversarial = false;
};

struct Dataset {
  std::vector<Example> examples;
  int num_classes = 0;
  Split split = Split::train;

  std::size_t size() const { return examples.size(); }
};

// TSV loader: one record per line, `label<TAB>text`; '#' lines and blank
// lines are skipped. Labels are non-negative integers.
TextDataset load_text_dataset(const std::string& path);
void save_text_dataset(const TextDataset& data, const std::string& path);

// Stratified 8:1:1 split (train/attack/test). Per class with n examples the
// attack and test parts each get floor(n/10), the rest goes to train.
// Fails if any class has fewer than 10 examples.
std::array<TextDataset, 3> split_dataset(const TextDataset& data, Rng& rng);

}  // namespace trapgrad

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "trapgrad/dataset.hpp"

namespace trapgrad {

struct Vocabulary {
  static constexpr std::int32_t pad_id = 0;
  static constexpr std::int32_t unk_id = 1;

  std::vector<std::string> tokens;  // id -> token; [0] = "<pad>", [1] = "<unk>"
  std::unordered_map<std::string, std::int32_t> index;

  std::int32_t size() const { return static_cast<std::int32_t>(tokens.size()); }

  std::int32_t id_of(const std::string& token) const {
    auto it = index.find(token);
    return it == index.end() ? unk_id : it->second;
  }

  const std::string& token_of(std::int32_t id) const { return tokens[static_cast<std::size_t>(id)]; }
};

// Lowercase + whitespace split.
std::vector<std::string> tokenize(const std::string& text);

// Tokens with corpus frequency >= min_count get ids (frequency descending,
// then lexicographic). Everything else maps to <unk>.
Vocabulary build_vocabulary(const TextDataset& corpus, int min_count);

TokenSeq encode(const std::string& text, const Vocabulary& vocab);

Dataset encode_dataset(const TextDataset& data, const Vocabulary& vocab, Split split);

}  // namespace trapgrad

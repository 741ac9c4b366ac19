#include "trapgrad/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "trapgrad/error.hpp"

namespace trapgrad {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!cur.empty()) {
        out.push_back(std::move(cur));
        cur.clear();
      }
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocabulary build_vocabulary(const TextDataset& corpus, int min_count) {
  require(!corpus.examples.empty(), Errc::empty_input, "empty corpus");
  require(min_count >= 1, Errc::invalid_argument, "min_count must be >= 1");

  std::map<std::string, long long> counts;  // ordered map: lexicographic tie-break for free
  for (const auto& ex : corpus.examples) {
    for (auto& tok : tokenize(ex.text)) {
      if (tok == "<pad>" || tok == "<unk>") continue;
      ++counts[tok];
    }
  }

  std::vector<std::pair<const std::string*, long long>> kept;
  kept.reserve(counts.size());
  for (const auto& [tok, n] : counts) {
    if (n >= min_count) kept.emplace_back(&tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary vocab;
  vocab.tokens = {"<pad>", "<unk>"};
  vocab.tokens.reserve(kept.size() + 2);
  for (const auto& [tok, n] : kept) vocab.tokens.push_back(*tok);
  for (std::int32_t i = 0; i < vocab.size(); ++i) vocab.index[vocab.tokens[static_cast<std::size_t>(i)]] = i;
  return vocab;
}

TokenSeq encode(const std::string& text, const Vocabulary& vocab) {
  TokenSeq ids;
  for (const auto& tok : tokenize(text)) ids.push_back(vocab.id_of(tok));
  return ids;
}

Dataset encode_dataset(const TextDataset& data, const Vocabulary& vocab, Split split) {
  Dataset out;
  out.num_classes = data.num_classes;
  out.split = split;
  out.examples.reserve(data.examples.size());
  for (const auto& ex : data.examples) {
    out.examples.push_back(Example{encode(ex.text, vocab), ex.label, false});
  }
  return out;
}

}  // namespace trapgrad

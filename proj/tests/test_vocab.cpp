#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "trapgrad/dataset.hpp"
#include "trapgrad/error.hpp"
#include "trapgrad/synth.hpp"
#include "trapgrad/vocab.hpp"

using namespace trapgrad;

namespace {

TextDataset corpus_of(std::initializer_list<const char*> docs) {
  TextDataset d;
  d.num_classes = 2;
  int label = 0;
  for (const char* doc : docs) {
    d.examples.push_back(TextExample{label, doc});
    label = 1 - label;
  }
  return d;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits on whitespace") {
  auto toks = tokenize("  Hello\tWORLD  again ");
  REQUIRE(toks.size() == 3);
  CHECK(toks[0] == "hello");
  CHECK(toks[1] == "world");
  CHECK(toks[2] == "again");
  CHECK(tokenize("").empty());
}

TEST_CASE("build_vocabulary keeps tokens above min_count") {
  Vocabulary v = build_vocabulary(corpus_of({"a b", "a c"}), 2);
  REQUIRE(v.size() == 3);  // <pad>, <unk>, "a"
  CHECK(v.tokens[2] == "a");
  CHECK(v.id_of("b") == Vocabulary::unk_id);

  Vocabulary v1 = build_vocabulary(corpus_of({"a b"}), 1);
  CHECK(v1.size() == 4);
  CHECK(v1.id_of("a") != Vocabulary::unk_id);
  CHECK(v1.id_of("b") != Vocabulary::unk_id);
}

TEST_CASE("build_vocabulary orders by frequency then lexicographic") {
  Vocabulary v = build_vocabulary(corpus_of({"b b c a", "c b z"}), 1);
  // b:3, c:2, then a:1 and z:1 tie alphabetically
  CHECK(v.tokens[2] == "b");
  CHECK(v.tokens[3] == "c");
  CHECK(v.tokens[4] == "a");
  CHECK(v.tokens[5] == "z");
  CHECK(v.index.at("b") == 2);
}

TEST_CASE("build_vocabulary matches a brute-force distinct count on a synthetic corpus") {
  SynthSpec spec;
  spec.docs_per_class = 1000;
  spec.vocab_size = 1000;
  spec.lexicon_size = 40;
  spec.seed = 123;
  TextDataset corpus = generate_synthetic(spec);
  REQUIRE(corpus.size() == 2000);

  std::set<std::string> distinct;
  for (const auto& ex : corpus.examples) {
    for (const auto& tok : tokenize(ex.text)) distinct.insert(tok);
  }
  Vocabulary v = build_vocabulary(corpus, 1);
  CHECK(v.size() == static_cast<std::int32_t>(distinct.size()) + 2);
}

TEST_CASE("build_vocabulary rejects an empty corpus") {
  TextDataset empty;
  CHECK_THROWS_WITH_AS(build_vocabulary(empty, 1), "empty corpus", Error);
}

TEST_CASE("encode maps tokens and falls back to <unk>") {
  Vocabulary v = build_vocabulary(corpus_of({"a a b"}), 1);
  TokenSeq seq = encode("a B", v);
  REQUIRE(seq.size() == 2);
  CHECK(seq[0] == 2);
  CHECK(seq[1] == 3);

  CHECK(encode("zzz", v) == TokenSeq{Vocabulary::unk_id});
  CHECK(encode("", v).empty());

  Vocabulary movie = build_vocabulary(corpus_of({"this movie is awesome"}), 1);
  TokenSeq s = encode("this movie is awesome", movie);
  CHECK(s.size() == 4);
  for (auto id : s) CHECK(id != Vocabulary::pad_id);
}

TEST_CASE("dataset TSV round trip, comments and malformed lines") {
  const std::string path = (std::filesystem::temp_directory_path() / "tg_data.tsv").string();
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("# comment line\n1\tgood movie\n0\tbad movie\n\n1\tanother one\n", f);
    std::fclose(f);
  }
  TextDataset d = load_text_dataset(path);
  REQUIRE(d.size() == 3);
  CHECK(d.num_classes == 2);
  CHECK(d.examples[0].label == 1);
  CHECK(d.examples[0].text == "good movie");

  save_text_dataset(d, path);
  TextDataset d2 = load_text_dataset(path);
  REQUIRE(d2.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(d2.examples[i].label == d.examples[i].label);
    CHECK(d2.examples[i].text == d.examples[i].text);
  }

  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("1 no tab here\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_text_dataset(path), Error);

  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("x\tbad label\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_text_dataset(path), Error);
  std::filesystem::remove(path);
}

TEST_CASE("split_dataset is a stratified 8:1:1 partition") {
  SynthSpec spec;
  spec.docs_per_class = 1000;
  spec.vocab_size = 500;
  spec.lexicon_size = 30;
  spec.seed = 9;
  TextDataset data = generate_synthetic(spec);

  Rng rng(17);
  auto parts = split_dataset(data, rng);
  CHECK(parts[0].size() == 1600);
  CHECK(parts[1].size() == 200);
  CHECK(parts[2].size() == 200);

  // Union of the splits is the input multiset.
  std::map<std::pair<int, std::string>, int> before, after;
  for (const auto& ex : data.examples) ++before[{ex.label, ex.text}];
  for (const auto& part : parts) {
    for (const auto& ex : part.examples) ++after[{ex.label, ex.text}];
  }
  CHECK(before == after);

  // Per-class proportions preserved within one example.
  for (const auto& part : parts) {
    int count0 = 0;
    for (const auto& ex : part.examples) count0 += ex.label == 0 ? 1 : 0;
    CHECK(std::abs(2 * count0 - static_cast<int>(part.size())) <= 2);
  }
}

TEST_CASE("split_dataset rejects classes below 10 examples") {
  TextDataset d;
  d.num_classes = 2;
  for (int i = 0; i < 40; ++i) d.examples.push_back({0, "a b"});
  for (int i = 0; i < 9; ++i) d.examples.push_back({1, "c d"});
  Rng rng(1);
  CHECK_THROWS_AS(split_dataset(d, rng), Error);
}

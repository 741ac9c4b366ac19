#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "trapgrad/error.hpp"
#include "trapgrad/model.hpp"
#include "trapgrad/synth.hpp"
#include "util.hpp"

using namespace trapgrad;

namespace {

Vocabulary toy_vocab(int extra_tokens) {
  TextDataset corpus;
  corpus.num_classes = 2;
  std::string doc;
  for (int i = 0; i < extra_tokens; ++i) doc += "t" + std::to_string(100 + i) + " ";
  corpus.examples.push_back({0, doc});
  return build_vocabulary(corpus, 1);
}

void zero_parameters(TextClassifier& m) {
  m.embed.setZero();
  for (auto& w : m.conv_w) w.setZero();
  for (auto& b : m.conv_b) b.setZero();
  m.hidden_w.setZero();
  m.hidden_b.setZero();
  m.out_w.setZero();
  m.out_b.setZero();
}

TokenSeq random_seq(const Vocabulary& vocab, int len, Rng& rng) {
  TokenSeq seq;
  for (int i = 0; i < len; ++i) {
    seq.push_back(2 + static_cast<std::int32_t>(rng.next_below(
                          static_cast<std::uint64_t>(vocab.size() - 2))));
  }
  return seq;
}

}  // namespace

TEST_CASE("forward yields a normalized probability vector") {
  Vocabulary vocab = toy_vocab(20);
  for (auto kind : {EncoderKind::mean_pool, EncoderKind::conv}) {
    TextClassifier m = init_model(vocab, 3, testutil::tiny_model(kind));
    Rng rng(99);
    for (int i = 0; i < 20; ++i) {
      Vec p = forward(m, random_seq(vocab, 1 + static_cast<int>(rng.next_below(12)), rng));
      CHECK(std::abs(p.sum() - 1.0) < 1e-6);
      for (Eigen::Index j = 0; j < p.size(); ++j) {
        CHECK(p[j] >= 0.0);
        CHECK(p[j] <= 1.0);
      }
    }
  }
}

TEST_CASE("zero parameters give a uniform prediction") {
  Vocabulary vocab = toy_vocab(8);
  TextClassifier m = init_model(vocab, 4, testutil::tiny_model(EncoderKind::mean_pool));
  zero_parameters(m);
  Vec p = forward(m, {2, 3, 4});
  for (Eigen::Index j = 0; j < 4; ++j) CHECK(p[j] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("forward rejects empty input") {
  Vocabulary vocab = toy_vocab(4);
  TextClassifier m = init_model(vocab, 2, testutil::tiny_model());
  CHECK_THROWS_WITH_AS(forward(m, {}), "empty input", Error);
  CHECK_THROWS_WITH_AS(forward(m, {Vocabulary::pad_id, Vocabulary::pad_id}), "empty input", Error);
}

TEST_CASE("conv forward pads short inputs up to the widest filter") {
  Vocabulary vocab = toy_vocab(6);
  TextClassifier m = init_model(vocab, 2, testutil::tiny_model(EncoderKind::conv));
  ForwardTrace trace;
  forward(m, {2}, &trace);  // widest filter is 3
  CHECK(trace.ids.size() == 3);
  CHECK(trace.ids[1] == Vocabulary::pad_id);
}

TEST_CASE("loss_cce values") {
  Vec p(2);
  p << 1.0, 0.0;
  CHECK(loss_cce(p, 0) == doctest::Approx(0.0).epsilon(1e-12));
  p << 0.5, 0.5;
  CHECK(loss_cce(p, 1) == doctest::Approx(std::log(2.0)));
  p << 0.1, 0.9;
  CHECK(loss_cce(p, 0) == doctest::Approx(2.302585092994046));
  CHECK_THROWS_AS(loss_cce(p, 2), Error);
}

TEST_CASE("backward tensors are shape-congruent with the parameters") {
  Vocabulary vocab = toy_vocab(10);
  TextClassifier m = init_model(vocab, 3, testutil::tiny_model(EncoderKind::conv));
  ForwardTrace trace;
  forward(m, {2, 3, 4, 5}, &trace);
  Gradients g = backward(m, trace, 1);
  CHECK(g.embed.rows() == m.embed.rows());
  CHECK(g.embed.cols() == m.embed.cols());
  REQUIRE(g.conv_w.size() == m.conv_w.size());
  for (std::size_t i = 0; i < g.conv_w.size(); ++i) {
    CHECK(g.conv_w[i].rows() == m.conv_w[i].rows());
    CHECK(g.conv_w[i].cols() == m.conv_w[i].cols());
  }
  CHECK(g.hidden_w.rows() == m.hidden_w.rows());
  CHECK(g.out_w.cols() == m.out_w.cols());
  CHECK(g.input_embed.rows() == static_cast<Eigen::Index>(trace.ids.size()));
}

TEST_CASE("backward matches central finite differences on random configurations") {
  Rng seeds(2024);
  for (auto kind : {EncoderKind::mean_pool, EncoderKind::conv}) {
    for (int rep = 0; rep < 10; ++rep) {
      const std::uint64_t s = seeds.next_u64();
      Vocabulary vocab = toy_vocab(6 + rep);
      ModelConfig mc = testutil::tiny_model(kind, s);
      mc.embed_dim = 5 + rep % 3;
      mc.hidden_dim = 4 + rep % 4;
      mc.conv_filters = 3 + rep % 2;
      TextClassifier m = init_model(vocab, 2 + rep % 3, mc);
      Rng rng(s ^ 0xabc);
      TokenSeq seq = random_seq(vocab, 4 + rep % 5, rng);
      const int label = rep % m.num_classes;
      FdCheckResult r = finite_difference_check(m, seq, label, 1e-4, s ^ 0xdef, 50);
      CAPTURE(rep);
      CHECK(r.checked > 0);
      CHECK(r.max_rel_error <= 1e-4);
    }
  }
}

TEST_CASE("finite difference check passes at steps 1e-4 and 1e-5") {
  Vocabulary vocab = toy_vocab(12);
  TextClassifier m = init_model(vocab, 2, testutil::tiny_model(EncoderKind::conv, 5));
  TokenSeq seq = {2, 5, 7, 3, 9};
  CHECK(finite_difference_check(m, seq, 1, 1e-4).max_rel_error <= 1e-4);
  CHECK(finite_difference_check(m, seq, 1, 1e-5).max_rel_error <= 1e-4);
}

TEST_CASE("the checker flags a deliberately corrupted gradient") {
  Vocabulary vocab = toy_vocab(12);
  TextClassifier m = init_model(vocab, 2, testutil::tiny_model(EncoderKind::mean_pool, 6));
  TokenSeq seq = {2, 5, 7, 3};
  ForwardTrace trace;
  forward(m, seq, &trace);
  Gradients g = backward(m, trace, 0);
  g.hidden_w *= 2.0;
  FdCheckResult r = fd_compare(m, seq, 0, 1e-4, g, 77, 50);
  CHECK(r.max_rel_error > 0.5);
}

TEST_CASE("mean-pool PAD positions receive zero input gradient") {
  Vocabulary vocab = toy_vocab(8);
  TextClassifier m = init_model(vocab, 2, testutil::tiny_model(EncoderKind::mean_pool));
  ForwardTrace trace;
  forward(m, {2, 3, Vocabulary::pad_id, Vocabulary::pad_id}, &trace);
  Gradients g = backward(m, trace, 1);
  CHECK(g.input_embed.row(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.input_embed.row(3).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.input_embed.row(0).cwiseAbs().maxCoeff() > 0.0);
  CHECK(g.embed.row(Vocabulary::pad_id).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mean-pool forward is invariant to token order") {
  Vocabulary vocab = toy_vocab(10);
  TextClassifier m = init_model(vocab, 3, testutil::tiny_model(EncoderKind::mean_pool));
  Vec a = forward(m, {2, 3, 4, 5, 6});
  Vec b = forward(m, {6, 4, 2, 5, 3});
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("train: zero epochs leave the model unchanged") {
  Vocabulary vocab = toy_vocab(10);
  ModelConfig mc = testutil::tiny_model();
  mc.epochs = 0;
  TextClassifier m = init_model(vocab, 2, mc);
  const RowMat before = m.embed;
  Dataset data;
  data.num_classes = 2;
  data.examples.push_back({{2, 3}, 0, false});
  data.examples.push_back({{4, 5}, 1, false});
  TrainReport rep = train(m, data, mc);
  CHECK(rep.epoch_mean_loss.empty());
  CHECK(m.embed == before);
}

TEST_CASE("train rejects an empty dataset") {
  Vocabulary vocab = toy_vocab(4);
  ModelConfig mc = testutil::tiny_model();
  TextClassifier m = init_model(vocab, 2, mc);
  Dataset data;
  data.num_classes = 2;
  CHECK_THROWS_WITH_AS(train(m, data, mc), "empty dataset", Error);
}

TEST_CASE("training separable data reaches high accuracy and lowers the loss") {
  for (auto kind : {EncoderKind::mean_pool, EncoderKind::conv}) {
    auto p = testutil::trained_pipeline(testutil::tiny_synth(3), testutil::tiny_model(kind, 21));
    EvalMetrics train_m = evaluate(p.model, p.train);
    CAPTURE(kind == EncoderKind::conv);
    CHECK(train_m.accuracy >= 0.95);

    // Planted-lexicon input goes to the planted class.
    EvalMetrics test_m = evaluate(p.model, p.test);
    CHECK(test_m.accuracy >= 0.9);
  }
}

TEST_CASE("training is bit-deterministic under a fixed seed") {
  SynthSpec spec = testutil::tiny_synth(4);
  ModelConfig mc = testutil::tiny_model(EncoderKind::conv, 33);
  auto a = testutil::trained_pipeline(spec, mc);
  auto b = testutil::trained_pipeline(spec, mc);
  CHECK(a.model.embed == b.model.embed);
  CHECK(a.model.hidden_w == b.model.hidden_w);
  CHECK(a.model.out_w == b.model.out_w);
  for (std::size_t i = 0; i < a.model.conv_w.size(); ++i) {
    CHECK(a.model.conv_w[i] == b.model.conv_w[i]);
  }
}

TEST_CASE("evaluate: perfect and constant predictors") {
  Vocabulary vocab = toy_vocab(6);
  TextClassifier m = init_model(vocab, 2, testutil::tiny_model(EncoderKind::mean_pool));
  zero_parameters(m);  // uniform probabilities, argmax picks class 0

  Dataset balanced;
  balanced.num_classes = 2;
  for (int i = 0; i < 10; ++i) balanced.examples.push_back({{2, 3}, i % 2, false});
  EvalMetrics constant = evaluate(m, balanced);
  CHECK(constant.accuracy == doctest::Approx(0.5));

  // Rig a perfect predictor: token 2 -> class 0, token 3 -> class 1.
  m.embed.row(2) << 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0;
  m.embed.row(3) << 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0;
  m.hidden_w.setZero();
  m.hidden_w(0, 0) = 1;
  m.hidden_w(1, 1) = 1;
  m.out_w.setZero();
  m.out_w(0, 0) = 5;
  m.out_w(1, 1) = 5;
  Dataset aligned;
  aligned.num_classes = 2;
  for (int i = 0; i < 6; ++i) aligned.examples.push_back({{i % 2 == 0 ? 2 : 3}, i % 2, false});
  EvalMetrics perfect = evaluate(m, aligned);
  CHECK(perfect.accuracy == doctest::Approx(1.0));
  CHECK(perfect.macro_f1 == doctest::Approx(1.0));
}

TEST_CASE("evaluate macro-F1 matches a hand-computed confusion matrix") {
  // Predictions come from the rigged model: token 2 -> 0, token 3 -> 1.
  Vocabulary vocab = toy_vocab(6);
  TextClassifier m = init_model(vocab, 2, testutil::tiny_model(EncoderKind::mean_pool));
  zero_parameters(m);
  m.embed.row(2) << 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0;
  m.embed.row(3) << 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0;
  m.hidden_w(0, 0) = 1;
  m.hidden_w(1, 1) = 1;
  m.out_w(0, 0) = 5;
  m.out_w(1, 1) = 5;

  // True labels 0,0,0,1,1,1; predictions 0,1,0,0,1,1.
  Dataset d;
  d.num_classes = 2;
  d.examples.push_back({{2}, 0, false});
  d.examples.push_back({{3}, 0, false});
  d.examples.push_back({{2}, 0, false});
  d.examples.push_back({{2}, 1, false});
  d.examples.push_back({{3}, 1, false});
  d.examples.push_back({{3}, 1, false});
  EvalMetrics metrics = evaluate(m, d);
  // Both classes: precision 2/3, recall 2/3, F1 2/3.
  CHECK(metrics.accuracy == doctest::Approx(4.0 / 6.0));
  CHECK(metrics.macro_f1 == doctest::Approx(2.0 / 3.0));
  CHECK(metrics.per_class_accuracy[0] == doctest::Approx(2.0 / 3.0));
  CHECK(metrics.per_class_accuracy[1] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("class_centroid equals the brute-force feature mean") {
  Vocabulary vocab = toy_vocab(12);
  TextClassifier m = init_model(vocab, 2, testutil::tiny_model(EncoderKind::conv, 13));
  Rng rng(55);
  Dataset d;
  d.num_classes = 2;
  for (int i = 0; i < 10; ++i) {
    d.examples.push_back({random_seq(vocab, 5, rng), i < 6 ? 0 : 1, false});
  }

  // Single example: centroid is its own penultimate vector.
  Dataset single;
  single.num_classes = 2;
  single.examples.push_back(d.examples[9]);
  CHECK((class_centroid(m, single, 1) - penultimate(m, single.examples[0].seq)).norm() == 0.0);

  // Duplication leaves the centroid unchanged.
  Dataset doubled = d;
  doubled.examples.insert(doubled.examples.end(), d.examples.begin(), d.examples.end());
  CHECK((class_centroid(m, d, 0) - class_centroid(m, doubled, 0)).norm() < 1e-12);

  // Brute-force elementwise mean oracle.
  Vec sum = Vec::Zero(m.config.hidden_dim);
  int n = 0;
  for (const auto& ex : d.examples) {
    if (ex.label != 0) continue;
    sum += penultimate(m, ex.seq);
    ++n;
  }
  CHECK((class_centroid(m, d, 0) - sum / n).cwiseAbs().maxCoeff() < 1e-12);

  Dataset only_zero = single;
  only_zero.examples[0].label = 0;
  CHECK_THROWS_WITH_AS(class_centroid(m, only_zero, 1), "empty class", Error);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  auto p = testutil::trained_pipeline(testutil::tiny_synth(8), testutil::tiny_model(EncoderKind::conv, 44));
  const std::string path = (std::filesystem::temp_directory_path() / "tg_model.ckpt").string();
  save_model(p.model, path);
  TextClassifier loaded = load_model(path);
  CHECK(loaded.embed == p.model.embed);
  CHECK(loaded.hidden_w == p.model.hidden_w);
  CHECK(loaded.hidden_b == p.model.hidden_b);
  CHECK(loaded.out_w == p.model.out_w);
  CHECK(loaded.out_b == p.model.out_b);
  for (std::size_t i = 0; i < p.model.conv_w.size(); ++i) {
    CHECK(loaded.conv_w[i] == p.model.conv_w[i]);
    CHECK(loaded.conv_b[i] == p.model.conv_b[i]);
  }
  CHECK(loaded.vocab.tokens == p.model.vocab.tokens);
  CHECK(loaded.num_classes == p.model.num_classes);

  // Identical predictions after reload.
  for (int i = 0; i < 20; ++i) {
    const auto& ex = p.test.examples[static_cast<std::size_t>(i)];
    CHECK(predict(loaded, ex.seq) == predict(p.model, ex.seq));
  }
  std::filesystem::remove(path);
}

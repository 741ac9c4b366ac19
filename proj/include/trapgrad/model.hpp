#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "trapgrad/dataset.hpp"
#include "trapgrad/rng.hpp"
#include "trapgrad/vocab.hpp"

namespace trapgrad {

// Row-major so that one token's embedding row, and a conv window of
// consecutive rows, are contiguous in memory.
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

enum class EncoderKind { mean_pool, conv };

struct ModelConfig {
  EncoderKind encoder = EncoderKind::conv;
  int embed_dim = 16;
  int hidden_dim = 16;
  int conv_filters = 8;  // per filter width
  std::vector<int> filter_widths = {2, 3};
  double learning_rate = 0.1;
  int epochs = 5;
  int batch_size = 32;
  double clip_norm = 1.0;  // global-norm bound per batch update; 0 disables
  std::uint64_t seed = 1;

  void validate() const;
  int feature_dim() const;  // encoder output size
};

// Classifier with an embedding table, a mean-pool or conv encoder, one tanh
// hidden layer (its activations are the penultimate features used for
// centroids), and a softmax output.
struct TextClassifier {
  Vocabulary vocab;
  ModelConfig config;
  int num_classes = 0;

  RowMat embed;                   // V x d
  std::vector<RowMat> conv_w;     // per width: (width*d) x filters
  std::vector<Vec> conv_b;        // per width: filters
  RowMat hidden_w;                // feat x h
  Vec hidden_b;                   // h
  RowMat out_w;                   // h x C
  Vec out_b;                      // C
};

TextClassifier init_model(const Vocabulary& vocab, int num_classes, const ModelConfig& config);

struct ForwardTrace {
  TokenSeq ids;      // as evaluated (right-padded for the conv encoder)
  int orig_len = 0;  // length before padding
  RowMat embedded;   // |ids| x d
  std::vector<char> is_pad;
  int nonpad_count = 0;
  std::vector<RowMat> conv_pre;            // per width: (L-w+1) x filters, pre-ReLU
  std::vector<std::vector<int>> conv_best; // per width, per filter: pooled time index
  Vec features;
  Vec hidden_pre;
  Vec hidden_act;  // penultimate features F*(x)
  Vec logits;
  Vec probs;
};

// Probability vector over classes; fills `trace` when given.
Vec forward(const TextClassifier& model, const TokenSeq& seq, ForwardTrace* trace = nullptr);

int predict(const TextClassifier& model, const TokenSeq& seq);

// -log(probs[label]), log argument clamped at 1e-12.
double loss_cce(const Vec& probs, int label);

struct Gradients {
  RowMat embed;
  std::vector<RowMat> conv_w;
  std::vector<Vec> conv_b;
  RowMat hidden_w;
  Vec hidden_b;
  RowMat out_w;
  Vec out_b;
  RowMat input_embed;  // per input position: d(loss)/d(embedding row)

  void set_zero();
};

Gradients make_gradients(const TextClassifier& model);

// Exact gradients of the cross-entropy loss at `label` for every parameter
// tensor and for each input-position embedding row.
Gradients backward(const TextClassifier& model, const ForwardTrace& trace, int label);

// Adds weight * parameter gradients into `acc` (skips input_embed).
void backward_accumulate(const TextClassifier& model, const ForwardTrace& trace, int label,
                         double weight, Gradients& acc);

struct TrainReport {
  std::vector<double> epoch_mean_loss;
};

// Mini-batch SGD, shuffled per epoch by an rng seeded from config.seed.
TrainReport train(TextClassifier& model, const Dataset& data, const ModelConfig& config);

// Shared loop for weighted corpora (trapdoor injection); `weights` pairs with
// `examples` one to one.
TrainReport train_weighted(TextClassifier& model, const std::vector<const Example*>& examples,
                           const std::vector<double>& weights, int epochs,
                           const ModelConfig& config, Rng& rng);

struct EvalMetrics {
  double accuracy = 0;
  double macro_f1 = 0;
  std::vector<double> per_class_accuracy;
};

EvalMetrics evaluate(const TextClassifier& model, const Dataset& data);

// Penultimate features F*(x).
Vec penultimate(const TextClassifier& model, const TokenSeq& seq);

// Mean of F*(x) over the examples of a class.
Vec class_centroid(const TextClassifier& model, const Dataset& data, int label);

struct FdCheckResult {
  double max_rel_error = 0;
  int checked = 0;
  int skipped = 0;  // coordinates where +/-step crossed a ReLU/max kink
};

// Compares `given` against central finite differences on a random subsample
// (>= coords_per_tensor) of every parameter tensor and the input-embedding
// gradient. Coordinates where the perturbed activation pattern changes are
// skipped: the difference quotient is not a derivative estimate across a
// kink. Relative error is |a-b| / max(1e-12, (|a|+|b|)/2), zero when the
// absolute gap is below 1e-10.
FdCheckResult fd_compare(const TextClassifier& model, const TokenSeq& seq, int label, double step,
                         const Gradients& given, std::uint64_t seed, int coords_per_tensor);

FdCheckResult finite_difference_check(const TextClassifier& model, const TokenSeq& seq, int label,
                                      double step, std::uint64_t seed = 1234,
                                      int coords_per_tensor = 50);

// Text checkpoint with shape headers; values are hexfloats so a round trip is
// bit-exact. Includes the vocabulary.
void save_model(const TextClassifier& model, const std::string& path);
TextClassifier load_model(const std::string& path);

}  // namespace trapgrad

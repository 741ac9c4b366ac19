#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "trapgrad/dataset.hpp"
#include "trapgrad/model.hpp"
#include "trapgrad/vocab.hpp"

namespace trapgrad {

struct DetectorConfig {
  int embed_dim = 16;
  double learning_rate = 0.5;
  int epochs = 5;
  int batch_size = 32;
  std::uint64_t seed = 1;

  void validate() const;
};

// Binary detector: own embedding table, mean-pool encoder, logistic output.
// score() is the probability that the input carries a trigger (adversarial
// examples score high).
struct Detector {
  Vocabulary vocab;
  DetectorConfig config;
  RowMat embed;  // V x d
  Vec weight;    // d
  double bias = 0;

  double score(const TokenSeq& seq) const;
  double score_text(const std::string& text) const;
};

// Benign examples are trained toward 0, adversarial (trapdoor-embedded)
// toward 1, with batches drawn half and half from the two pools.
Detector train_detector(const Dataset& benign, const Dataset& adversarial, const Vocabulary& vocab,
                        const DetectorConfig& config);

// verdict = adversarial iff score > threshold (strict).
std::pair<double, bool> detect(const Detector& detector, const TokenSeq& seq, double threshold);

struct DetectionMetrics {
  double auc = 0;
  double tpr = 0;
  double fpr = 0;
};

// AUC by midrank statistic (ties count 1/2); TPR/FPR at the given threshold
// with strict inequality.
DetectionMetrics detection_metrics(const std::vector<double>& benign_scores,
                                   const std::vector<double>& adversarial_scores, double threshold);

// Shannon entropy (natural log) of the model's prediction vector; the
// uncertainty-estimation detection baseline.
double ue_score(const TextClassifier& model, const TokenSeq& seq);

void save_detector(const Detector& detector, const std::string& path);
Detector load_detector(const std::string& path);

}  // namespace trapgrad

#include "trapgrad/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "trapgrad/error.hpp"

namespace trapgrad {

void DetectorConfig::validate() const {
  require(embed_dim >= 1, Errc::invalid_argument, "detector embed dim must be >= 1");
  require(learning_rate > 0, Errc::invalid_argument, "detector learning rate must be positive");
  require(epochs >= 1, Errc::invalid_argument, "detector epochs must be >= 1");
  require(batch_size >= 2, Errc::invalid_argument, "detector batch size must be >= 2");
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Mean-pooled embedding of the non-PAD tokens; zero vector for all-PAD input.
Vec pool_sequence(const RowMat& embed, const TokenSeq& seq) {
  Vec pooled = Vec::Zero(embed.cols());
  int n = 0;
  for (std::int32_t id : seq) {
    if (id == Vocabulary::pad_id) continue;
    pooled += embed.row(id).transpose();
    ++n;
  }
  if (n > 0) pooled /= static_cast<double>(n);
  return pooled;
}

}  // namespace

double Detector::score(const TokenSeq& seq) const {
  return sigmoid(weight.dot(pool_sequence(embed, seq)) + bias);
}

double Detector::score_text(const std::string& text) const { return score(encode(text, vocab)); }

Detector train_detector(const Dataset& benign, const Dataset& adversarial, const Vocabulary& vocab,
                        const DetectorConfig& config) {
  config.validate();
  require(!benign.examples.empty() && !adversarial.examples.empty(), Errc::empty_input,
          "empty pool");

  Detector det;
  det.vocab = vocab;
  det.config = config;
  det.embed.resize(vocab.size(), config.embed_dim);
  det.weight = Vec::Zero(config.embed_dim);
  det.bias = 0;

  Rng rng(config.seed);
  for (Eigen::Index i = 0; i < det.embed.size(); ++i) {
    det.embed.data()[i] = rng.next_double() * 0.2 - 0.1;
  }

  // Balanced sampling: each step takes half a batch from each pool, cycling
  // independently shuffled orders.
  struct PoolCursor {
    const Dataset* data;
    std::vector<int> order;
    std::size_t at = 0;
    Rng* rng;
    const Example& next() {
      if (at == order.size()) {
        rng->shuffle(order);
        at = 0;
      }
      return data->examples[static_cast<std::size_t>(order[at++])];
    }
  };
  auto make_cursor = [&rng](const Dataset& d) {
    PoolCursor c;
    c.data = &d;
    c.order.resize(d.size());
    std::iota(c.order.begin(), c.order.end(), 0);
    c.rng = &rng;
    c.rng->shuffle(c.order);
    return c;
  };
  PoolCursor ben = make_cursor(benign);
  PoolCursor adv = make_cursor(adversarial);

  const int half = std::max(1, config.batch_size / 2);
  const std::size_t larger = std::max(benign.size(), adversarial.size());
  const int steps = static_cast<int>((larger + static_cast<std::size_t>(half) - 1) /
                                     static_cast<std::size_t>(half));

  RowMat embed_grad = RowMat::Zero(det.embed.rows(), det.embed.cols());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int step = 0; step < steps; ++step) {
      embed_grad.setZero();
      Vec w_grad = Vec::Zero(config.embed_dim);
      double b_grad = 0;
      for (int i = 0; i < 2 * half; ++i) {
        const bool is_adv = i >= half;
        const Example& ex = is_adv ? adv.next() : ben.next();
        const Vec pooled = pool_sequence(det.embed, ex.seq);
        const double g = sigmoid(det.weight.dot(pooled) + det.bias);
        const double delta = g - (is_adv ? 1.0 : 0.0);
        w_grad += delta * pooled;
        b_grad += delta;
        int nonpad = 0;
        for (std::int32_t id : ex.seq) {
          if (id != Vocabulary::pad_id) ++nonpad;
        }
        if (nonpad == 0) continue;
        const Vec row_grad = (delta / nonpad) * det.weight;
        for (std::int32_t id : ex.seq) {
          if (id != Vocabulary::pad_id) embed_grad.row(id) += row_grad.transpose();
        }
      }
      const double scale = config.learning_rate / (2.0 * half);
      det.weight -= scale * w_grad;
      det.bias -= scale * b_grad;
      det.embed -= scale * embed_grad;
    }
  }
  return det;
}

std::pair<double, bool> detect(const Detector& detector, const TokenSeq& seq, double threshold) {
  require(threshold > 0 && threshold < 1, Errc::invalid_argument, "threshold must be in (0,1)");
  const double s = detector.score(seq);
  return {s, s > threshold};
}

DetectionMetrics detection_metrics(const std::vector<double>& benign_scores,
                                   const std::vector<double>& adversarial_scores,
                                   double threshold) {
  require(!benign_scores.empty() && !adversarial_scores.empty(), Errc::empty_input,
          "empty score list");

  // Midrank AUC: (sum of adversarial ranks - m(m+1)/2) / (n*m), ties getting
  // the average rank. Equal to pairwise counting with ties worth 1/2.
  struct Entry {
    double score;
    bool adv;
  };
  std::vector<Entry> all;
  all.reserve(benign_scores.size() + adversarial_scores.size());
  for (double s : benign_scores) all.push_back({s, false});
  for (double s : adversarial_scores) all.push_back({s, true});
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

  double adv_rank_sum = 0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double mid_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].adv) adv_rank_sum += mid_rank;
    }
    i = j;
  }

  const double n = static_cast<double>(benign_scores.size());
  const double m = static_cast<double>(adversarial_scores.size());

  DetectionMetrics metrics;
  metrics.auc = (adv_rank_sum - m * (m + 1) / 2.0) / (n * m);
  long long tp = 0, fp = 0;
  for (double s : adversarial_scores) {
    if (s > threshold) ++tp;
  }
  for (double s : benign_scores) {
    if (s > threshold) ++fp;
  }
  metrics.tpr = static_cast<double>(tp) / m;
  metrics.fpr = static_cast<double>(fp) / n;
  return metrics;
}

double ue_score(const TextClassifier& model, const TokenSeq& seq) {
  const Vec probs = forward(model, seq);
  double entropy = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (p > 1e-12) entropy -= p * std::log(p);
  }
  return entropy;
}

namespace {

void write_double(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%a", v);
  out << buf;
}

double read_double(std::istream& in) {
  std::string tok;
  require(static_cast<bool>(in >> tok), Errc::parse, "truncated checkpoint");
  return std::strtod(tok.c_str(), nullptr);
}

}  // namespace

void save_detector(const Detector& detector, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Errc::io, "cannot write detector checkpoint: " + path);
  out << "trapgrad-detector 1\n";
  out << "embed_dim " << detector.config.embed_dim << '\n';
  out << "vocab " << detector.vocab.size() << '\n';
  for (const auto& tok : detector.vocab.tokens) out << tok << '\n';
  out << "tensor embed " << detector.embed.rows() << ' ' << detector.embed.cols() << '\n';
  for (Eigen::Index r = 0; r < detector.embed.rows(); ++r) {
    for (Eigen::Index c = 0; c < detector.embed.cols(); ++c) {
      if (c) out << ' ';
      write_double(out, detector.embed(r, c));
    }
    out << '\n';
  }
  out << "tensor weight " << detector.weight.size() << " 1\n";
  for (Eigen::Index i = 0; i < detector.weight.size(); ++i) {
    if (i) out << ' ';
    write_double(out, detector.weight[i]);
  }
  out << "\ntensor bias 1 1\n";
  write_double(out, detector.bias);
  out << "\nend\n";
  require(out.good(), Errc::io, "write failed: " + path);
}

Detector load_detector(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::io, "cannot open detector checkpoint: " + path);
  std::string magic;
  int version = 0;
  require(static_cast<bool>(in >> magic >> version) && magic == "trapgrad-detector" && version == 1,
          Errc::parse, "not a trapgrad detector checkpoint");

  Detector det;
  std::string key;
  std::int32_t vocab_size = 0;
  require(static_cast<bool>(in >> key >> det.config.embed_dim) && key == "embed_dim", Errc::parse,
          "bad detector header");
  require(static_cast<bool>(in >> key >> vocab_size) && key == "vocab" && vocab_size >= 3,
          Errc::parse, "bad detector header");
  in.ignore();
  det.vocab.tokens.resize(static_cast<std::size_t>(vocab_size));
  for (auto& tok : det.vocab.tokens) {
    require(static_cast<bool>(std::getline(in, tok)), Errc::parse, "truncated vocab");
  }
  for (std::int32_t i = 0; i < vocab_size; ++i) {
    det.vocab.index[det.vocab.tokens[static_cast<std::size_t>(i)]] = i;
  }

  std::string kw, name;
  Eigen::Index r = 0, c = 0;
  require(static_cast<bool>(in >> kw >> name >> r >> c) && kw == "tensor" && name == "embed",
          Errc::parse, "bad detector tensor");
  det.embed.resize(r, c);
  for (Eigen::Index i = 0; i < r * c; ++i) det.embed.data()[i] = read_double(in);
  require(static_cast<bool>(in >> kw >> name >> r >> c) && name == "weight", Errc::parse,
          "bad detector tensor");
  det.weight.resize(r);
  for (Eigen::Index i = 0; i < r; ++i) det.weight[i] = read_double(in);
  require(static_cast<bool>(in >> kw >> name >> r >> c) && name == "bias", Errc::parse,
          "bad detector tensor");
  det.bias = read_double(in);
  std::string tail;
  require(static_cast<bool>(in >> tail) && tail == "end", Errc::parse, "missing detector trailer");
  return det;
}

}  // namespace trapgrad

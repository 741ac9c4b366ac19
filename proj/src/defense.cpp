#include "trapgrad/defense.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "trapgrad/error.hpp"

namespace trapgrad {

void DefenseConfig::validate() const {
  require(trapdoors_per_label >= 1, Errc::invalid_argument, "trapdoors per label must be >= 1");
  require(sample_size >= 1, Errc::invalid_argument, "candidate sample size must be >= 1");
  require(trap_weight > 0, Errc::invalid_argument, "trapdoor weight must be positive");
  require(trap_ratio > 0 && trap_ratio <= 1, Errc::invalid_argument,
          "trapdoor ratio must be in (0,1]");
  require(threshold > 0 && threshold < 1, Errc::invalid_argument, "threshold must be in (0,1)");
  require(intra_bound >= 0 && inter_bound >= 0, Errc::invalid_argument,
          "distance bounds must be >= 0");
}

int TrapdoorSet::total_tokens() const {
  int n = 0;
  for (const auto& toks : tokens_per_label) n += static_cast<int>(toks.size());
  return n;
}

bool TrapdoorSet::contains(int label, std::int32_t id) const {
  const auto& toks = tokens_per_label[static_cast<std::size_t>(label)];
  return std::find(toks.begin(), toks.end(), id) != toks.end();
}

TrainReport warm_up(TextClassifier& model, const Dataset& train_data) {
  ModelConfig cfg = model.config;
  cfg.epochs = 1;
  return train(model, train_data, cfg);
}

double embedding_distance(const Eigen::Ref<const Vec>& a, const Eigen::Ref<const Vec>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0 || nb == 0) return 1.0;
  return 1.0 - a.dot(b) / (na * nb);
}

namespace {

double token_distance(const TextClassifier& model, std::int32_t a, std::int32_t b) {
  return embedding_distance(model.embed.row(a).transpose(), model.embed.row(b).transpose());
}

}  // namespace

std::vector<std::int32_t> candidate_pool(const TextClassifier& model, const TrapdoorSet& partial,
                                         int label, double alpha, double beta, int sample_size,
                                         Rng& rng) {
  require(sample_size >= 1, Errc::invalid_argument, "sample size must be >= 1");
  require(label >= 0 && label < partial.num_labels(), Errc::invalid_argument,
          "label out of range");

  const auto& own = partial.tokens_per_label[static_cast<std::size_t>(label)];
  std::vector<std::int32_t> pool;
  for (std::int32_t id = 2; id < model.vocab.size(); ++id) {
    if (std::find(own.begin(), own.end(), id) != own.end()) continue;  // already picked

    if (!own.empty()) {
      bool near_own = false;
      for (std::int32_t t : own) {
        if (token_distance(model, id, t) <= alpha) {
          near_own = true;
          break;
        }
      }
      if (!near_own) continue;
    }

    bool near_other = false;
    for (int other = 0; other < partial.num_labels() && !near_other; ++other) {
      if (other == label) continue;
      for (std::int32_t t : partial.tokens_per_label[static_cast<std::size_t>(other)]) {
        if (token_distance(model, id, t) <= beta) {
          near_other = true;
          break;
        }
      }
    }
    if (near_other) continue;
    pool.push_back(id);
  }

  require(!pool.empty(), Errc::unsatisfiable, "constraints unsatisfiable");

  const int take = std::min(sample_size, static_cast<int>(pool.size()));
  std::vector<std::int32_t> out;
  out.reserve(static_cast<std::size_t>(take));
  for (int idx : rng.sample_without_replacement(static_cast<int>(pool.size()), take)) {
    out.push_back(pool[static_cast<std::size_t>(idx)]);
  }
  return out;
}

double fidelity_score(const TextClassifier& model, std::int32_t token,
                      const Dataset& other_class_data, const std::vector<Vec>& other_centroids) {
  require(!other_class_data.examples.empty(), Errc::empty_input, "no contrasting examples");

  Vec mean_response = Vec::Zero(model.config.hidden_dim);
  TokenSeq seq;
  for (const auto& ex : other_class_data.examples) {
    seq.clear();
    seq.push_back(token);
    seq.insert(seq.end(), ex.seq.begin(), ex.seq.end());
    mean_response += penultimate(model, seq);
  }
  mean_response /= static_cast<double>(other_class_data.size());

  double score = 0;
  for (const auto& centroid : other_centroids) {
    score += embedding_distance(mean_response, centroid);
  }
  return score;
}

TrapdoorSet search_trapdoors(TextClassifier& model, const Dataset& train_data,
                             const DefenseConfig& config, TrapdoorStrategy strategy, Rng& rng) {
  config.validate();
  require(train_data.num_classes >= 2, Errc::invalid_argument, "need at least 2 classes");

  const int num_labels = train_data.num_classes;
  TrapdoorSet set;
  set.tokens_per_label.resize(static_cast<std::size_t>(num_labels));
  set.per_label = config.trapdoors_per_label;
  set.strategy = strategy;
  set.intra_bound = config.intra_bound;
  set.inter_bound = config.inter_bound;

  warm_up(model, train_data);

  if (strategy == TrapdoorStrategy::random) {
    for (int label = 0; label < num_labels; ++label) {
      const std::int32_t usable = model.vocab.size() - 2;
      require(usable >= config.trapdoors_per_label, Errc::unsatisfiable,
              "vocabulary smaller than trapdoor count");
      for (int idx :
           rng.sample_without_replacement(usable, config.trapdoors_per_label)) {
        set.tokens_per_label[static_cast<std::size_t>(label)].push_back(2 + idx);
      }
    }
    return set;
  }

  // Per-class centroids on the warmed model, then K greedy rounds per label.
  std::vector<Vec> centroids;
  std::vector<Dataset> complement(static_cast<std::size_t>(num_labels));
  for (int label = 0; label < num_labels; ++label) {
    centroids.push_back(class_centroid(model, train_data, label));
    Dataset& rest = complement[static_cast<std::size_t>(label)];
    rest.num_classes = num_labels;
    rest.split = train_data.split;
    for (const auto& ex : train_data.examples) {
      if (ex.label != label) rest.examples.push_back(ex);
    }
  }

  for (int round = 0; round < config.trapdoors_per_label; ++round) {
    for (int label = 0; label < num_labels; ++label) {
      auto& own = set.tokens_per_label[static_cast<std::size_t>(label)];
      std::vector<Vec> contrasting;
      for (int other = 0; other < num_labels; ++other) {
        if (other != label) contrasting.push_back(centroids[static_cast<std::size_t>(other)]);
      }

      // The pool keeps tokens near *any* existing trapdoor; the pairwise
      // intra-class bound is enforced here at selection time. When nothing
      // survives, the intra bound relaxes upward by 0.1 (cosine distance
      // tops out at 2) and the effective bound is recorded.
      double alpha = set.intra_bound;
      std::int32_t picked = -1;
      while (picked < 0) {
        std::vector<std::int32_t> sampled;
        try {
          sampled = candidate_pool(model, set, label, alpha, config.inter_bound,
                                   config.sample_size, rng);
        } catch (const Error& e) {
          if (e.code() != Errc::unsatisfiable || alpha >= 2.0) throw;
          alpha += 0.1;
          continue;
        }

        std::vector<std::int32_t> feasible;
        for (std::int32_t id : sampled) {
          bool ok = true;
          for (std::int32_t t : own) {
            if (token_distance(model, id, t) > alpha) {
              ok = false;
              break;
            }
          }
          if (ok) feasible.push_back(id);
        }
        if (feasible.empty()) {
          require(alpha < 2.0, Errc::unsatisfiable, "constraints unsatisfiable");
          alpha += 0.1;
          continue;
        }

        double best_score = -1;
        for (std::int32_t id : feasible) {
          const double s = fidelity_score(model, id, complement[static_cast<std::size_t>(label)],
                                          contrasting);
          if (s > best_score || (s == best_score && picked >= 0 && id < picked)) {
            best_score = s;
            picked = id;
          }
        }
      }
      if (alpha > set.intra_bound) set.intra_bound = alpha;
      own.push_back(picked);
    }
  }
  return set;
}

Dataset populate_trapdoor_examples(const Dataset& train_data, const TrapdoorSet& trapdoors,
                                   double ratio, Rng& rng) {
  require(ratio > 0 && ratio <= 1, Errc::invalid_argument, "trapdoor ratio must be in (0,1]");

  Dataset out;
  out.num_classes = train_data.num_classes;
  out.split = train_data.split;

  for (int label = 0; label < trapdoors.num_labels(); ++label) {
    const auto& toks = trapdoors.tokens_per_label[static_cast<std::size_t>(label)];
    if (toks.empty()) continue;

    std::vector<int> eligible;
    for (int i = 0; i < static_cast<int>(train_data.size()); ++i) {
      if (train_data.examples[static_cast<std::size_t>(i)].label != label) eligible.push_back(i);
    }
    require(!eligible.empty(), Errc::empty_input,
            "no examples outside class " + std::to_string(label));

    const int per_trapdoor =
        static_cast<int>(std::floor(ratio * static_cast<double>(eligible.size())));
    for (std::int32_t tok : toks) {
      for (int idx : rng.sample_without_replacement(static_cast<int>(eligible.size()),
                                                    per_trapdoor)) {
        const Example& src = train_data.examples[static_cast<std::size_t>(
            eligible[static_cast<std::size_t>(idx)])];
        Example ex;
        ex.seq.reserve(src.seq.size() + 1);
        ex.seq.push_back(tok);
        ex.seq.insert(ex.seq.end(), src.seq.begin(), src.seq.end());
        ex.label = label;
        ex.adversarial = true;
        out.examples.push_back(std::move(ex));
      }
    }
  }
  return out;
}

TrainReport inject_train(TextClassifier& model, const Dataset& train_data,
                         const Dataset& trap_data, double trap_weight, const ModelConfig& config) {
  require(trap_weight > 0, Errc::invalid_argument, "trapdoor weight must be positive");
  require(!train_data.examples.empty(), Errc::empty_input, "empty dataset");
  require(!trap_data.examples.empty(), Errc::empty_input, "empty trapdoor dataset");

  std::vector<const Example*> examples;
  std::vector<double> weights;
  examples.reserve(train_data.size() + trap_data.size());
  for (const auto& ex : train_data.examples) {
    examples.push_back(&ex);
    weights.push_back(1.0);
  }
  for (const auto& ex : trap_data.examples) {
    examples.push_back(&ex);
    weights.push_back(trap_weight);
  }
  Rng rng(derive_seed(config.seed, stream::inject));
  return train_weighted(model, examples, weights, config.epochs, config, rng);
}

void save_trapdoors(const TrapdoorSet& set, const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Errc::io, "cannot write trapdoor file: " + path);
  for (int label = 0; label < set.num_labels(); ++label) {
    out << label << '\t';
    const auto& toks = set.tokens_per_label[static_cast<std::size_t>(label)];
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (i) out << ',';
      out << vocab.token_of(toks[i]);
    }
    out << '\n';
  }
  require(out.good(), Errc::io, "write failed: " + path);
}

TrapdoorSet load_trapdoors(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  require(in.good(), Errc::io, "cannot open trapdoor file: " + path);

  TrapdoorSet set;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    require(tab != std::string::npos, Errc::parse,
            "line " + std::to_string(line_no) + ": expected label<TAB>tokens");
    int label = 0;
    try {
      label = std::stoi(line.substr(0, tab));
    } catch (const std::exception&) {
      fail(Errc::parse, "line " + std::to_string(line_no) + ": bad label");
    }
    require(label >= 0, Errc::parse, "line " + std::to_string(line_no) + ": bad label");
    if (label >= set.num_labels()) set.tokens_per_label.resize(static_cast<std::size_t>(label) + 1);

    std::istringstream toks(line.substr(tab + 1));
    std::string tok;
    while (std::getline(toks, tok, ',')) {
      if (!tok.empty()) {
        set.tokens_per_label[static_cast<std::size_t>(label)].push_back(vocab.id_of(tok));
      }
    }
  }
  require(set.num_labels() > 0, Errc::empty_input, "empty trapdoor file");
  if (!set.tokens_per_label.empty()) {
    set.per_label = static_cast<int>(set.tokens_per_label[0].size());
  }
  return set;
}

}  // namespace trapgrad

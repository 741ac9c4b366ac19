#include "trapgrad/attack.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "trapgrad/error.hpp"

namespace trapgrad {

void AttackConfig::validate() const {
  require(trigger_len >= 1, Errc::invalid_argument, "trigger length must be >= 1");
  require(beam_width >= 1, Errc::invalid_argument, "beam width must be >= 1");
  require(cand_count >= beam_width, Errc::invalid_argument, "candidate count must be >= beam width");
  require(batch_size >= 1, Errc::invalid_argument, "batch size must be >= 1");
  require(max_epochs >= 1, Errc::invalid_argument, "max epochs must be >= 1");
  require(skip_top >= 0, Errc::invalid_argument, "skip count must be >= 0");
  require(skip_top < cand_count, Errc::invalid_argument,
          "skip count must be smaller than candidate count");
  require(detector_weight >= 0, Errc::invalid_argument, "detector weight must be >= 0");
}

Trigger init_trigger(const Vocabulary& vocab, int trigger_len, Rng& rng) {
  require(trigger_len >= 1, Errc::invalid_argument, "trigger length must be >= 1");
  require(vocab.size() > 2, Errc::invalid_argument, "vocabulary has no usable tokens");
  const std::int32_t id = 2 + static_cast<std::int32_t>(rng.next_below(
                                  static_cast<std::uint64_t>(vocab.size() - 2)));
  Trigger t;
  t.ids.assign(static_cast<std::size_t>(trigger_len), id);
  return t;
}

TokenSeq apply_trigger(const Trigger& trigger, const TokenSeq& seq) {
  TokenSeq out;
  out.reserve(trigger.ids.size() + seq.size());
  if (trigger.position == TriggerPosition::prefix) {
    out.insert(out.end(), trigger.ids.begin(), trigger.ids.end());
    out.insert(out.end(), seq.begin(), seq.end());
  } else {
    out.insert(out.end(), seq.begin(), seq.end());
    out.insert(out.end(), trigger.ids.begin(), trigger.ids.end());
  }
  return out;
}

std::vector<ScoredToken> rank_candidates(const TextClassifier& model, const Trigger& trigger,
                                         const std::vector<const Example*>& batch, int position,
                                         int k) {
  require(!batch.empty(), Errc::empty_input, "empty batch");
  require(position >= 0 && position < static_cast<int>(trigger.ids.size()), Errc::invalid_argument,
          "trigger position out of range");

  // Mean gradient of the target-class loss w.r.t. the embedding used at the
  // trigger position.
  Vec grad = Vec::Zero(model.config.embed_dim);
  for (const Example* ex : batch) {
    const TokenSeq seq = apply_trigger(trigger, ex->seq);
    ForwardTrace trace;
    forward(model, seq, &trace);
    Gradients g = backward(model, trace, trigger.target_label);
    const int row = trigger.position == TriggerPosition::prefix
                        ? position
                        : static_cast<int>(ex->seq.size()) + position;
    grad += g.input_embed.row(row).transpose();
  }
  grad /= static_cast<double>(batch.size());

  // First-order loss change of swapping in token w: (e_w - e_cur) . grad.
  const Vec all = model.embed * grad;
  const double cur = all[trigger.ids[static_cast<std::size_t>(position)]];

  std::vector<ScoredToken> scored;
  scored.reserve(static_cast<std::size_t>(model.vocab.size() - 2));
  for (std::int32_t id = 2; id < model.vocab.size(); ++id) {
    scored.push_back({id, all[id] - cur});
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredToken& a, const ScoredToken& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.id < b.id;
  });
  if (static_cast<int>(scored.size()) > k) scored.resize(static_cast<std::size_t>(k));
  return scored;
}

std::vector<std::int32_t> candidate_tokens(const TextClassifier& model, const Trigger& trigger,
                                           const std::vector<const Example*>& batch, int position,
                                           int k) {
  std::vector<std::int32_t> ids;
  for (const auto& s : rank_candidates(model, trigger, batch, position, k)) ids.push_back(s.id);
  return ids;
}

namespace {

std::vector<const Example*> eligible_examples(const Dataset& data, int target_label) {
  std::vector<const Example*> out;
  for (const auto& ex : data.examples) {
    if (ex.label != target_label) out.push_back(&ex);
  }
  return out;
}

double objective(const TextClassifier& model, const Detector* detector, double detector_weight,
                 const TokenSeq& trigger_ids, TriggerPosition position, int target_label,
                 const std::vector<const Example*>& examples) {
  Trigger t;
  t.ids = trigger_ids;
  t.target_label = target_label;
  t.position = position;
  double loss = 0, det_score = 0;
  for (const Example* ex : examples) {
    const TokenSeq seq = apply_trigger(t, ex->seq);
    loss += loss_cce(forward(model, seq), target_label);
    if (detector) det_score += detector->score(seq);
  }
  const double n = static_cast<double>(examples.size());
  loss /= n;
  if (detector) loss += detector_weight * (det_score / n);
  return loss;
}

// Shared beam search. `detector` steers the objective when present (oracle and
// adaptive attackers); skip_top implements the advanced attacker's candidate
// skipping.
Trigger search_trigger(const TextClassifier& model, const Detector* detector,
                       const Dataset& attack_data, int target_label, const AttackConfig& config) {
  config.validate();
  require(target_label >= 0 && target_label < model.num_classes, Errc::invalid_argument,
          "target label out of range");

  const std::vector<const Example*> eligible = eligible_examples(attack_data, target_label);
  require(!eligible.empty(), Errc::empty_input, "no eligible examples");

  Rng rng(config.seed);
  Trigger incumbent = init_trigger(model.vocab, config.trigger_len, rng);
  incumbent.target_label = target_label;
  incumbent.position = config.position;

  auto full_objective = [&](const TokenSeq& ids) {
    return objective(model, detector, config.detector_weight, ids, config.position, target_label,
                     eligible);
  };

  double best_obj = full_objective(incumbent.ids);
  double prev_obj = best_obj;
  std::vector<TokenSeq> beams = {incumbent.ids};

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::vector<const Example*> batch;
    for (int idx : rng.sample_without_replacement(
             static_cast<int>(eligible.size()),
             std::min(config.batch_size, static_cast<int>(eligible.size())))) {
      batch.push_back(eligible[static_cast<std::size_t>(idx)]);
    }

    for (int pos = 0; pos < config.trigger_len; ++pos) {
      std::set<TokenSeq> expanded(beams.begin(), beams.end());
      for (const TokenSeq& beam : beams) {
        Trigger probe;
        probe.ids = beam;
        probe.target_label = target_label;
        probe.position = config.position;
        const auto ranked = rank_candidates(model, probe, batch, pos, config.cand_count);
        for (std::size_t i = static_cast<std::size_t>(config.skip_top); i < ranked.size(); ++i) {
          TokenSeq next = beam;
          next[static_cast<std::size_t>(pos)] = ranked[i].id;
          expanded.insert(std::move(next));
        }
      }

      std::vector<std::pair<double, TokenSeq>> scored;
      scored.reserve(expanded.size());
      for (const TokenSeq& ids : expanded) {
        scored.emplace_back(objective(model, detector, config.detector_weight, ids,
                                      config.position, target_label, batch),
                            ids);
      }
      std::sort(scored.begin(), scored.end());
      beams.clear();
      for (std::size_t i = 0; i < scored.size() && i < static_cast<std::size_t>(config.beam_width);
           ++i) {
        beams.push_back(scored[i].second);
      }
    }

    const double cur = full_objective(beams.front());
    if (cur < best_obj) {
      best_obj = cur;
      incumbent.ids = beams.front();
    }
    const double improvement = (prev_obj - cur) / std::max(std::abs(prev_obj), 1e-12);
    prev_obj = cur;
    if (improvement < config.tol) break;
  }

  incumbent.loss = best_obj;
  return incumbent;
}

}  // namespace

Trigger learn_trigger(const TextClassifier& model, const Dataset& attack_data, int target_label,
                      const AttackConfig& config) {
  return search_trigger(model, nullptr, attack_data, target_label, config);
}

Trigger learn_trigger_oracle(const TextClassifier& model, const Detector& detector,
                             const Dataset& attack_data, int target_label,
                             const AttackConfig& config) {
  return search_trigger(model, &detector, attack_data, target_label, config);
}

Trigger learn_trigger_advanced(const TextClassifier& model, const Detector& surrogate,
                               const Dataset& attack_data, int target_label,
                               const AttackConfig& config) {
  return search_trigger(model, &surrogate, attack_data, target_label, config);
}

double trigger_loss(const TextClassifier& model, const TokenSeq& trigger_ids,
                    TriggerPosition position, const Dataset& data, int target_label) {
  const std::vector<const Example*> eligible = eligible_examples(data, target_label);
  require(!eligible.empty(), Errc::empty_input, "no eligible examples");
  return objective(model, nullptr, 0, trigger_ids, position, target_label, eligible);
}

double attack_accuracy(const TextClassifier& model, const Trigger& trigger, const Dataset& data,
                       int target_label) {
  long long correct = 0, total = 0;
  for (const auto& ex : data.examples) {
    if (ex.label == target_label) continue;
    ++total;
    if (predict(model, apply_trigger(trigger, ex.seq)) == ex.label) ++correct;
  }
  if (total == 0) return 0.0;
  return static_cast<double>(correct) / static_cast<double>(total);
}

std::string trigger_to_line(const Trigger& trigger, const Vocabulary& vocab) {
  std::ostringstream out;
  out << trigger.target_label << '\t'
      << (trigger.position == TriggerPosition::prefix ? "prefix" : "suffix") << '\t';
  for (std::size_t i = 0; i < trigger.ids.size(); ++i) {
    if (i) out << ',';
    out << vocab.token_of(trigger.ids[i]);
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", trigger.loss);
  out << '\t' << buf;
  return out.str();
}

Trigger trigger_from_line(const std::string& line, const Vocabulary& vocab) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  require(fields.size() == 4, Errc::parse, "trigger line needs 4 tab-separated fields");

  Trigger t;
  try {
    t.target_label = std::stoi(fields[0]);
  } catch (const std::exception&) {
    fail(Errc::parse, "bad trigger target label");
  }
  require(fields[1] == "prefix" || fields[1] == "suffix", Errc::parse, "bad trigger position");
  t.position = fields[1] == "prefix" ? TriggerPosition::prefix : TriggerPosition::suffix;

  std::istringstream toks(fields[2]);
  std::string tok;
  while (std::getline(toks, tok, ',')) {
    require(!tok.empty(), Errc::parse, "empty trigger token");
    t.ids.push_back(vocab.id_of(tok));
  }
  require(!t.ids.empty(), Errc::parse, "trigger has no tokens");
  t.loss = std::strtod(fields[3].c_str(), nullptr);
  return t;
}

void save_trigger(const Trigger& trigger, const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Errc::io, "cannot write trigger file: " + path);
  out << trigger_to_line(trigger, vocab) << '\n';
  require(out.good(), Errc::io, "write failed: " + path);
}

}  // namespace trapgrad

#include "trapgrad/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "trapgrad/error.hpp"
#include "trapgrad/report.hpp"
#include "trapgrad/synth.hpp"

namespace trapgrad {

namespace {

struct PreparedData {
  Vocabulary vocab;
  TextDataset train_raw, attack_raw, test_raw;
  Dataset train, attack, test;
};

PreparedData prepare_data(const ScenarioConfig& config, std::uint64_t rep_seed) {
  TextDataset raw;
  if (config.data.source == DataConfig::Source::synthetic) {
    SynthSpec spec = config.data.synth;
    spec.seed = derive_seed(rep_seed, stream::data);
    raw = generate_synthetic(spec);
  } else {
    raw = load_text_dataset(config.data.path);
  }

  Rng split_rng(derive_seed(rep_seed, stream::split));
  auto parts = split_dataset(raw, split_rng);

  PreparedData out;
  out.train_raw = std::move(parts[0]);
  out.attack_raw = std::move(parts[1]);
  out.test_raw = std::move(parts[2]);
  out.vocab = build_vocabulary(out.train_raw, 1);
  out.train = encode_dataset(out.train_raw, out.vocab, Split::train);
  out.attack = encode_dataset(out.attack_raw, out.vocab, Split::attack);
  out.test = encode_dataset(out.test_raw, out.vocab, Split::test);
  return out;
}

struct Defended {
  TextClassifier model;
  TrapdoorSet trapdoors;
  Detector detector;
};

Defended build_defense(const ScenarioConfig& config, const PreparedData& data,
                       std::uint64_t rep_seed) {
  Defended d;
  ModelConfig mc = config.model;
  mc.seed = derive_seed(rep_seed, stream::model);
  d.model = init_model(data.vocab, data.train.num_classes, mc);

  Rng search_rng(derive_seed(rep_seed, stream::trapdoor));
  d.trapdoors =
      search_trapdoors(d.model, data.train, config.defense, config.defense.strategy, search_rng);

  Rng pop_rng(derive_seed(rep_seed, stream::populate));
  const Dataset trap_data =
      populate_trapdoor_examples(data.train, d.trapdoors, config.defense.trap_ratio, pop_rng);

  ModelConfig inject_cfg = mc;
  inject_cfg.seed = derive_seed(rep_seed, stream::inject);
  inject_train(d.model, data.train, trap_data, config.defense.trap_weight, inject_cfg);

  DetectorConfig dc = config.detector;
  dc.seed = derive_seed(rep_seed, stream::detector);
  d.detector = train_detector(data.train, trap_data, data.vocab, dc);
  return d;
}

// Re-encode a trigger learned on one model so it can be applied through
// another model's vocabulary (black-box transfer goes through token strings).
Trigger transfer_trigger(const Trigger& trigger, const Vocabulary& from, const Vocabulary& to) {
  Trigger out = trigger;
  out.ids.clear();
  for (std::int32_t id : trigger.ids) out.ids.push_back(to.id_of(from.token_of(id)));
  return out;
}

ReplicateResult run_replicate(const ScenarioConfig& config, int replicate,
                              std::uint64_t master_seed) {
  const auto started = std::chrono::steady_clock::now();
  const std::uint64_t rep_seed = derive_seed(master_seed, static_cast<std::uint64_t>(replicate));

  ReplicateResult result;
  result.replicate = replicate;
  result.seed = rep_seed;

  const PreparedData data = prepare_data(config, rep_seed);
  const int num_classes = data.train.num_classes;

  // Trapdoor-free twin: same init seed, plain training. Fidelity reference.
  {
    ModelConfig tc = config.model;
    tc.seed = derive_seed(rep_seed, stream::model);
    TextClassifier twin = init_model(data.vocab, num_classes, tc);
    train(twin, data.train, tc);
    result.baseline_f1 = evaluate(twin, data.test).macro_f1;
  }

  Defended defended = build_defense(config, data, rep_seed);
  result.clean_f1 = evaluate(defended.model, data.test).macro_f1;

  std::vector<double> benign_scores, benign_ue;
  benign_scores.reserve(data.test.size());
  benign_ue.reserve(data.test.size());
  for (const auto& ex : data.test.examples) {
    benign_scores.push_back(defended.detector.score(ex.seq));
    benign_ue.push_back(ue_score(defended.model, ex.seq));
  }

  // Attacker-side surrogates, built once per replicate.
  Detector surrogate_detector;
  std::vector<Trigger> query_triggers;
  const bool adaptive_like =
      config.kind == ScenarioKind::adaptive || config.kind == ScenarioKind::advanced;
  if (adaptive_like) {
    surrogate_detector =
        steal_detector(defended.model, data.attack, config.queries, config,
                       derive_seed(rep_seed, stream::steal), nullptr, &query_triggers);
  }
  TextClassifier surrogate_model;
  if (config.kind == ScenarioKind::blackbox) {
    // Transfer across architectures: the surrogate uses the other encoder.
    ModelConfig sc = config.model;
    sc.encoder = config.model.encoder == EncoderKind::conv ? EncoderKind::mean_pool
                                                           : EncoderKind::conv;
    surrogate_model = steal_model(defended.model, data.attack_raw, sc,
                                  derive_seed(rep_seed, stream::surrogate));
  }

  double auc_sum = 0, tpr_sum = 0, fpr_sum = 0, acc_sum = 0, ue_sum = 0;
  for (int target = 0; target < num_classes; ++target) {
    AttackConfig ac = config.attack;
    ac.seed = derive_seed(derive_seed(rep_seed, stream::attack), static_cast<std::uint64_t>(target));

    Trigger trigger;
    switch (config.kind) {
      case ScenarioKind::novice:
        trigger = learn_trigger(defended.model, data.attack, target, ac);
        break;
      case ScenarioKind::oracle:
        trigger = learn_trigger_oracle(defended.model, defended.detector, data.attack, target, ac);
        break;
      case ScenarioKind::adaptive:
        ac.skip_top = 0;
        trigger = learn_trigger_oracle(defended.model, surrogate_detector, data.attack, target, ac);
        break;
      case ScenarioKind::advanced:
        trigger =
            learn_trigger_advanced(defended.model, surrogate_detector, data.attack, target, ac);
        break;
      case ScenarioKind::blackbox: {
        Trigger learned = learn_trigger(surrogate_model, encode_dataset(data.attack_raw,
                                                                        surrogate_model.vocab,
                                                                        Split::attack),
                                        target, ac);
        trigger = transfer_trigger(learned, surrogate_model.vocab, data.vocab);
        break;
      }
    }

    std::vector<double> adv_scores, adv_ue;
    for (const auto& ex : data.test.examples) {
      if (ex.label == target) continue;
      const TokenSeq seq = apply_trigger(trigger, ex.seq);
      adv_scores.push_back(defended.detector.score(seq));
      adv_ue.push_back(ue_score(defended.model, seq));
    }

    const DetectionMetrics dm =
        detection_metrics(benign_scores, adv_scores, config.defense.threshold);
    auc_sum += dm.auc;
    tpr_sum += dm.tpr;
    fpr_sum += dm.fpr;
    ue_sum += detection_metrics(benign_ue, adv_ue, config.defense.threshold).auc;
    acc_sum += attack_accuracy(defended.model, trigger, data.test, target);
  }

  const double labels = static_cast<double>(num_classes);
  result.detect_auc = auc_sum / labels;
  result.tpr = tpr_sum / labels;
  result.fpr = fpr_sum / labels;
  result.attack_acc = acc_sum / labels;
  result.ue_auc = ue_sum / labels;
  if (adaptive_like) {
    result.revealed_ratio = revealed_ratio(query_triggers, defended.trapdoors);
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

int thread_budget(int replicates) {
  int budget = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("TRAPGRAD_THREADS")) {
    const int parsed = std::atoi(env);
    if (parsed > 0) budget = parsed;
  }
  if (budget < 1) budget = 1;
  return std::min(budget, replicates);
}

}  // namespace

ScenarioReport run_scenario(const ScenarioConfig& config, std::uint64_t master_seed) {
  config.validate();

  ScenarioReport report;
  report.scenario = to_string(config.kind);
  report.master_seed = master_seed;
  report.config_text = dump_config(config);
  report.replicates.resize(static_cast<std::size_t>(config.replicates));

  const int workers = thread_budget(config.replicates);
  if (workers <= 1) {
    for (int r = 0; r < config.replicates; ++r) {
      report.replicates[static_cast<std::size_t>(r)] = run_replicate(config, r, master_seed);
    }
  } else {
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
      while (true) {
        const int r = next.fetch_add(1);
        if (r >= config.replicates) return;
        try {
          report.replicates[static_cast<std::size_t>(r)] = run_replicate(config, r, master_seed);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  ReplicateResult& agg = report.aggregate;
  agg.seed = master_seed;
  double revealed_sum = 0;
  bool revealed_all = true;
  for (const auto& r : report.replicates) {
    agg.clean_f1 += r.clean_f1;
    agg.baseline_f1 += r.baseline_f1;
    agg.detect_auc += r.detect_auc;
    agg.tpr += r.tpr;
    agg.fpr += r.fpr;
    agg.attack_acc += r.attack_acc;
    agg.ue_auc += r.ue_auc;
    agg.wall_seconds += r.wall_seconds;
    if (r.revealed_ratio.has_value()) {
      revealed_sum += *r.revealed_ratio;
    } else {
      revealed_all = false;
    }
  }
  const double n = static_cast<double>(config.replicates);
  agg.clean_f1 /= n;
  agg.baseline_f1 /= n;
  agg.detect_auc /= n;
  agg.tpr /= n;
  agg.fpr /= n;
  agg.attack_acc /= n;
  agg.ue_auc /= n;
  agg.wall_seconds /= n;
  if (revealed_all) agg.revealed_ratio = revealed_sum / n;
  return report;
}

namespace {

ScenarioReport run_as(const ScenarioConfig& config, ScenarioKind kind, std::uint64_t master_seed) {
  ScenarioConfig c = config;
  c.kind = kind;
  return run_scenario(c, master_seed);
}

}  // namespace

ScenarioReport run_novice(const ScenarioConfig& c, std::uint64_t seed) {
  return run_as(c, ScenarioKind::novice, seed);
}
ScenarioReport run_oracle(const ScenarioConfig& c, std::uint64_t seed) {
  return run_as(c, ScenarioKind::oracle, seed);
}
ScenarioReport run_adaptive(const ScenarioConfig& c, std::uint64_t seed) {
  return run_as(c, ScenarioKind::adaptive, seed);
}
ScenarioReport run_advanced(const ScenarioConfig& c, std::uint64_t seed) {
  return run_as(c, ScenarioKind::advanced, seed);
}
ScenarioReport run_blackbox(const ScenarioConfig& c, std::uint64_t seed) {
  return run_as(c, ScenarioKind::blackbox, seed);
}

Detector steal_detector(const TextClassifier& model, const Dataset& attack_data, int queries,
                        const ScenarioConfig& config, std::uint64_t seed,
                        TrapdoorSet* pseudo_trapdoors, std::vector<Trigger>* query_triggers) {
  require(queries >= 1, Errc::invalid_argument, "queries must be >= 1");

  TrapdoorSet pseudo;
  pseudo.tokens_per_label.resize(static_cast<std::size_t>(model.num_classes));
  pseudo.strategy = TrapdoorStrategy::random;

  std::vector<Trigger> triggers;
  for (int q = 0; q < queries; ++q) {
    const int target = q % model.num_classes;
    AttackConfig ac = config.attack;
    ac.skip_top = 0;
    ac.seed = derive_seed(seed, static_cast<std::uint64_t>(q));
    Trigger t = learn_trigger(model, attack_data, target, ac);
    for (std::int32_t id : t.ids) {
      if (id == Vocabulary::pad_id || id == Vocabulary::unk_id) continue;
      if (!pseudo.contains(target, id)) {
        pseudo.tokens_per_label[static_cast<std::size_t>(target)].push_back(id);
      }
    }
    triggers.push_back(std::move(t));
  }

  // The attacker has no reason to ration their own data: every eligible
  // attack-set example gets a pseudo-trapdoor copy.
  Rng pop_rng(derive_seed(seed, stream::populate));
  const Dataset pseudo_trap = populate_trapdoor_examples(attack_data, pseudo, 1.0, pop_rng);

  // The attack split is an eighth of the training split under the 8:1:1
  // protocol; the surrogate gets proportionally more epochs so it sees about
  // as many optimization steps as the defender's detector.
  DetectorConfig dc = config.detector;
  dc.epochs = config.detector.epochs * 8;
  dc.seed = derive_seed(seed, stream::detector);
  Detector surrogate = train_detector(attack_data, pseudo_trap, model.vocab, dc);

  if (pseudo_trapdoors) *pseudo_trapdoors = std::move(pseudo);
  if (query_triggers) *query_triggers = std::move(triggers);
  return surrogate;
}

TextClassifier steal_model(const TextClassifier& target, const TextDataset& attack_raw,
                           const ModelConfig& surrogate_config, std::uint64_t seed) {
  require(!attack_raw.examples.empty(), Errc::empty_input, "empty dataset");

  TextDataset relabeled = attack_raw;
  relabeled.num_classes = target.num_classes;
  for (auto& ex : relabeled.examples) {
    ex.label = predict(target, encode(ex.text, target.vocab));
  }

  const Vocabulary vocab = build_vocabulary(relabeled, 1);
  ModelConfig sc = surrogate_config;
  sc.seed = derive_seed(seed, stream::surrogate);
  TextClassifier surrogate = init_model(vocab, target.num_classes, sc);
  train(surrogate, encode_dataset(relabeled, vocab, Split::attack), sc);
  return surrogate;
}

double revealed_ratio(const std::vector<Trigger>& query_triggers, const TrapdoorSet& trapdoors) {
  const int total = trapdoors.total_tokens();
  require(total > 0, Errc::empty_input, "empty trapdoor set");

  int revealed = 0;
  for (int label = 0; label < trapdoors.num_labels(); ++label) {
    for (std::int32_t tok : trapdoors.tokens_per_label[static_cast<std::size_t>(label)]) {
      bool found = false;
      for (const Trigger& t : query_triggers) {
        if (std::find(t.ids.begin(), t.ids.end(), tok) != t.ids.end()) {
          found = true;
          break;
        }
      }
      if (found) ++revealed;
    }
  }
  return static_cast<double>(revealed) / static_cast<double>(total);
}

}  // namespace trapgrad

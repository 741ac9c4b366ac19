#include "trapgrad/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "trapgrad/error.hpp"

namespace trapgrad {

void ModelConfig::validate() const {
  require(embed_dim >= 1 && hidden_dim >= 1, Errc::invalid_argument, "dims must be >= 1");
  require(epochs >= 0, Errc::invalid_argument, "epochs must be >= 0");
  require(batch_size >= 1, Errc::invalid_argument, "batch size must be >= 1");
  require(learning_rate > 0, Errc::invalid_argument, "learning rate must be positive");
  if (encoder == EncoderKind::conv) {
    require(conv_filters >= 1, Errc::invalid_argument, "conv filters must be >= 1");
    require(!filter_widths.empty(), Errc::invalid_argument, "conv encoder needs filter widths");
    for (int w : filter_widths) {
      require(w >= 1, Errc::invalid_argument, "filter widths must be >= 1");
    }
  }
}

int ModelConfig::feature_dim() const {
  if (encoder == EncoderKind::mean_pool) return embed_dim;
  return conv_filters * static_cast<int>(filter_widths.size());
}

namespace {

struct TensorView {
  std::string name;
  double* data;
  Eigen::Index size;
};

template <typename M>
void collect_views(M& model, std::vector<TensorView>& out) {
  out.push_back({"embed", model.embed.data(), model.embed.size()});
  for (std::size_t i = 0; i < model.conv_w.size(); ++i) {
    out.push_back({"conv_w" + std::to_string(i), model.conv_w[i].data(), model.conv_w[i].size()});
    out.push_back({"conv_b" + std::to_string(i), model.conv_b[i].data(), model.conv_b[i].size()});
  }
  out.push_back({"hidden_w", model.hidden_w.data(), model.hidden_w.size()});
  out.push_back({"hidden_b", model.hidden_b.data(), model.hidden_b.size()});
  out.push_back({"out_w", model.out_w.data(), model.out_w.size()});
  out.push_back({"out_b", model.out_b.data(), model.out_b.size()});
}

std::vector<TensorView> tensor_views(TextClassifier& model) {
  std::vector<TensorView> v;
  collect_views(model, v);
  return v;
}

std::vector<TensorView> tensor_views(Gradients& grads) {
  std::vector<TensorView> v;
  collect_views(grads, v);
  return v;
}

int widest_filter(const ModelConfig& config) {
  return *std::max_element(config.filter_widths.begin(), config.filter_widths.end());
}

Vec softmax(const Vec& logits) {
  Vec shifted = logits.array() - logits.maxCoeff();
  Vec e = shifted.array().exp();
  return e / e.sum();
}

// Kink signature for the conv encoder: per filter, which time step is pooled
// and whether its pre-activation is positive. Forward is piecewise linear in
// any single perturbed scalar, so equal signatures at the two probe points
// rule out a ReLU/max crossing between them.
std::vector<int> activation_signature(const ForwardTrace& trace) {
  std::vector<int> sig;
  for (std::size_t wi = 0; wi < trace.conv_best.size(); ++wi) {
    for (std::size_t f = 0; f < trace.conv_best[wi].size(); ++f) {
      int best = trace.conv_best[wi][f];
      bool positive = trace.conv_pre[wi](best, static_cast<Eigen::Index>(f)) > 0;
      sig.push_back(best * 2 + (positive ? 1 : 0));
    }
  }
  return sig;
}

// Encoder + head on already-gathered embedding rows.
void forward_embedded(const TextClassifier& model, const RowMat& X, const std::vector<char>& is_pad,
                      int nonpad, ForwardTrace& trace) {
  const ModelConfig& cfg = model.config;
  const int d = cfg.embed_dim;

  if (cfg.encoder == EncoderKind::mean_pool) {
    Vec pooled = Vec::Zero(d);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      if (!is_pad[static_cast<std::size_t>(i)]) pooled += X.row(i).transpose();
    }
    trace.features = pooled / static_cast<double>(nonpad);
  } else {
    const int n_widths = static_cast<int>(cfg.filter_widths.size());
    trace.conv_pre.resize(static_cast<std::size_t>(n_widths));
    trace.conv_best.resize(static_cast<std::size_t>(n_widths));
    trace.features = Vec(cfg.feature_dim());
    for (int wi = 0; wi < n_widths; ++wi) {
      const int w = cfg.filter_widths[static_cast<std::size_t>(wi)];
      const Eigen::Index windows = X.rows() - w + 1;
      // Overlapping windows of w consecutive rows, viewed as one matrix.
      Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> patches(
          X.data(), windows, static_cast<Eigen::Index>(w) * d, Eigen::OuterStride<>(d));
      RowMat& pre = trace.conv_pre[static_cast<std::size_t>(wi)];
      pre.noalias() = patches * model.conv_w[static_cast<std::size_t>(wi)];
      pre.rowwise() += model.conv_b[static_cast<std::size_t>(wi)].transpose();

      auto& best = trace.conv_best[static_cast<std::size_t>(wi)];
      best.assign(static_cast<std::size_t>(cfg.conv_filters), 0);
      for (int f = 0; f < cfg.conv_filters; ++f) {
        Eigen::Index arg = 0;
        pre.col(f).maxCoeff(&arg);
        best[static_cast<std::size_t>(f)] = static_cast<int>(arg);
        double v = pre(arg, f);
        trace.features[static_cast<Eigen::Index>(wi) * cfg.conv_filters + f] = v > 0 ? v : 0.0;
      }
    }
  }

  trace.hidden_pre.noalias() = model.hidden_w.transpose() * trace.features;
  trace.hidden_pre += model.hidden_b;
  trace.hidden_act = trace.hidden_pre;
  trace.logits.noalias() = model.out_w.transpose() * trace.hidden_act;
  trace.logits += model.out_b;
  trace.probs = softmax(trace.logits);
}

void prepare_input(const TextClassifier& model, const TokenSeq& seq, ForwardTrace& trace) {
  const ModelConfig& cfg = model.config;
  trace.orig_len = static_cast<int>(seq.size());
  trace.ids = seq;
  if (cfg.encoder == EncoderKind::conv) {
    const int min_len = widest_filter(cfg);
    while (static_cast<int>(trace.ids.size()) < min_len) trace.ids.push_back(Vocabulary::pad_id);
  }

  const Eigen::Index n = static_cast<Eigen::Index>(trace.ids.size());
  trace.is_pad.assign(static_cast<std::size_t>(n), 0);
  trace.nonpad_count = 0;
  trace.embedded.resize(n, cfg.embed_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::int32_t id = trace.ids[static_cast<std::size_t>(i)];
    require(id >= 0 && id < model.vocab.size(), Errc::invalid_argument, "token id out of range");
    trace.embedded.row(i) = model.embed.row(id);
    if (id == Vocabulary::pad_id) {
      trace.is_pad[static_cast<std::size_t>(i)] = 1;
    } else {
      ++trace.nonpad_count;
    }
  }
  require(trace.nonpad_count > 0, Errc::empty_input, "empty input");
}

}  // namespace

TextClassifier init_model(const Vocabulary& vocab, int num_classes, const ModelConfig& config) {
  config.validate();
  require(num_classes >= 2, Errc::invalid_argument, "need at least 2 classes");
  require(vocab.size() >= 3, Errc::invalid_argument, "vocabulary too small");

  TextClassifier m;
  m.vocab = vocab;
  m.config = config;
  m.num_classes = num_classes;
  m.embed.resize(vocab.size(), config.embed_dim);
  if (config.encoder == EncoderKind::conv) {
    for (int w : config.filter_widths) {
      m.conv_w.emplace_back(static_cast<Eigen::Index>(w) * config.embed_dim, config.conv_filters);
      m.conv_b.emplace_back(Vec::Zero(config.conv_filters));
    }
  }
  m.hidden_w.resize(config.feature_dim(), config.hidden_dim);
  m.hidden_b = Vec::Zero(config.hidden_dim);
  m.out_w.resize(config.hidden_dim, num_classes);
  m.out_b = Vec::Zero(num_classes);

  Rng rng(config.seed);
  for (auto& view : tensor_views(m)) {
    for (Eigen::Index i = 0; i < view.size; ++i) {
      view.data[i] = rng.next_double() * 0.2 - 0.1;
    }
  }
  return m;
}

Vec forward(const TextClassifier& model, const TokenSeq& seq, ForwardTrace* trace) {
  ForwardTrace local;
  ForwardTrace& t = trace ? *trace : local;
  prepare_input(model, seq, t);
  forward_embedded(model, t.embedded, t.is_pad, t.nonpad_count, t);
  return t.probs;
}

int predict(const TextClassifier& model, const TokenSeq& seq) {
  Eigen::Index arg = 0;
  forward(model, seq).maxCoeff(&arg);
  return static_cast<int>(arg);
}

double loss_cce(const Vec& probs, int label) {
  require(label >= 0 && label < probs.size(), Errc::invalid_argument, "label out of range");
  return -std::log(std::max(probs[label], 1e-12));
}

void Gradients::set_zero() {
  embed.setZero();
  for (auto& g : conv_w) g.setZero();
  for (auto& g : conv_b) g.setZero();
  hidden_w.setZero();
  hidden_b.setZero();
  out_w.setZero();
  out_b.setZero();
  input_embed.setZero();
}

Gradients make_gradients(const TextClassifier& model) {
  Gradients g;
  g.embed = RowMat::Zero(model.embed.rows(), model.embed.cols());
  for (std::size_t i = 0; i < model.conv_w.size(); ++i) {
    g.conv_w.push_back(RowMat::Zero(model.conv_w[i].rows(), model.conv_w[i].cols()));
    g.conv_b.push_back(Vec::Zero(model.conv_b[i].size()));
  }
  g.hidden_w = RowMat::Zero(model.hidden_w.rows(), model.hidden_w.cols());
  g.hidden_b = Vec::Zero(model.hidden_b.size());
  g.out_w = RowMat::Zero(model.out_w.rows(), model.out_w.cols());
  g.out_b = Vec::Zero(model.out_b.size());
  return g;
}

namespace {

// Core reverse pass. Writes input-position gradients into `input_embed` when
// non-null; accumulates weighted parameter gradients into `acc`.
void backward_impl(const TextClassifier& model, const ForwardTrace& trace, int label, double weight,
                   Gradients& acc, RowMat* input_embed) {
  const ModelConfig& cfg = model.config;
  require(label >= 0 && label < model.num_classes, Errc::invalid_argument, "label out of range");
  require(trace.probs.size() == model.num_classes, Errc::invalid_argument,
          "trace does not match model");

  Vec dlogits = trace.probs;
  dlogits[label] -= 1.0;
  dlogits *= weight;

  acc.out_w.noalias() += trace.hidden_act * dlogits.transpose();
  acc.out_b += dlogits;

  Vec dh = model.out_w * dlogits;
  Vec dhpre = dh;
  acc.hidden_w.noalias() += trace.features * dhpre.transpose();
  acc.hidden_b += dhpre;

  Vec dfeat = model.hidden_w * dhpre;

  RowMat dX = RowMat::Zero(trace.embedded.rows(), trace.embedded.cols());
  if (cfg.encoder == EncoderKind::mean_pool) {
    const double scale = 1.0 / static_cast<double>(trace.nonpad_count);
    for (Eigen::Index i = 0; i < dX.rows(); ++i) {
      if (!trace.is_pad[static_cast<std::size_t>(i)]) dX.row(i) = dfeat.transpose() * scale;
    }
  } else {
    for (std::size_t wi = 0; wi < cfg.filter_widths.size(); ++wi) {
      const int w = cfg.filter_widths[wi];
      for (int f = 0; f < cfg.conv_filters; ++f) {
        const int best = trace.conv_best[wi][static_cast<std::size_t>(f)];
        if (trace.conv_pre[wi](best, f) <= 0) continue;
        const double dp = dfeat[static_cast<Eigen::Index>(wi) * cfg.conv_filters + f];
        acc.conv_b[wi][f] += dp;
        // The pooled window spans rows best..best+w-1, contiguous in memory.
        Eigen::Map<const Vec> window(trace.embedded.data() + best * cfg.embed_dim,
                                     static_cast<Eigen::Index>(w) * cfg.embed_dim);
        acc.conv_w[wi].col(f) += dp * window;
        Eigen::Map<Vec> dwindow(dX.data() + best * cfg.embed_dim,
                                static_cast<Eigen::Index>(w) * cfg.embed_dim);
        dwindow += dp * model.conv_w[wi].col(f);
      }
    }
  }

  for (Eigen::Index i = 0; i < dX.rows(); ++i) {
    acc.embed.row(trace.ids[static_cast<std::size_t>(i)]) += dX.row(i);
  }
  if (input_embed) *input_embed = std::move(dX);
}

}  // namespace

Gradients backward(const TextClassifier& model, const ForwardTrace& trace, int label) {
  Gradients g = make_gradients(model);
  RowMat input;
  backward_impl(model, trace, label, 1.0, g, &input);
  g.input_embed = std::move(input);
  return g;
}

void backward_accumulate(const TextClassifier& model, const ForwardTrace& trace, int label,
                         double weight, Gradients& acc) {
  backward_impl(model, trace, label, weight, acc, nullptr);
}

namespace {

// Mean-gradient step with a global-norm clip. The clip is inactive near
// convergence; it only bounds the explosive steps high learning rates can
// produce once weight norms have grown.
void sgd_step(TextClassifier& model, Gradients& grads, double lr, double batch_n,
              double clip_norm) {
  auto params = tensor_views(model);
  auto gs = tensor_views(grads);
  double scale = 1.0 / batch_n;
  if (clip_norm > 0) {
    double sq = 0;
    for (const auto& g : gs) {
      Eigen::Map<const Eigen::ArrayXd> view(g.data, g.size);
      sq += view.square().sum();
    }
    const double norm = std::sqrt(sq) / batch_n;
    if (norm > clip_norm) scale *= clip_norm / norm;
  }
  const double step = lr * scale;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::Map<Eigen::ArrayXd> p(params[i].data, params[i].size);
    Eigen::Map<const Eigen::ArrayXd> g(gs[i].data, gs[i].size);
    p -= step * g;
  }
}

}  // namespace

TrainReport train_weighted(TextClassifier& model, const std::vector<const Example*>& examples,
                           const std::vector<double>& weights, int epochs,
                           const ModelConfig& config, Rng& rng) {
  require(!examples.empty(), Errc::empty_input, "empty dataset");
  require(examples.size() == weights.size(), Errc::invalid_argument, "weights mismatch");

  TrainReport report;
  Gradients acc = make_gradients(model);
  std::vector<int> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  ForwardTrace trace;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0;
    std::size_t pos = 0;
    while (pos < order.size()) {
      const std::size_t end = std::min(pos + static_cast<std::size_t>(config.batch_size), order.size());
      acc.set_zero();
      for (std::size_t i = pos; i < end; ++i) {
        const Example& ex = *examples[static_cast<std::size_t>(order[i])];
        forward(model, ex.seq, &trace);
        loss_sum += weights[static_cast<std::size_t>(order[i])] * loss_cce(trace.probs, ex.label);
        backward_accumulate(model, trace, ex.label, weights[static_cast<std::size_t>(order[i])], acc);
      }
      sgd_step(model, acc, config.learning_rate, static_cast<double>(end - pos), config.clip_norm);
      pos = end;
    }
    report.epoch_mean_loss.push_back(loss_sum / static_cast<double>(examples.size()));
  }
  return report;
}

TrainReport train(TextClassifier& model, const Dataset& data, const ModelConfig& config) {
  config.validate();
  require(!data.examples.empty(), Errc::empty_input, "empty dataset");
  std::vector<const Example*> ptrs;
  ptrs.reserve(data.size());
  for (const auto& ex : data.examples) ptrs.push_back(&ex);
  std::vector<double> weights(ptrs.size(), 1.0);
  Rng rng(derive_seed(config.seed, 0x7261696eull));  // "rain": training shuffle stream
  return train_weighted(model, ptrs, weights, config.epochs, config, rng);
}

EvalMetrics evaluate(const TextClassifier& model, const Dataset& data) {
  require(!data.examples.empty(), Errc::empty_input, "empty dataset");
  const int C = model.num_classes;
  std::vector<std::vector<long long>> confusion(static_cast<std::size_t>(C),
                                                std::vector<long long>(static_cast<std::size_t>(C), 0));
  long long correct = 0;
  for (const auto& ex : data.examples) {
    require(ex.label < C, Errc::invalid_argument, "label out of range");
    const int p = predict(model, ex.seq);
    ++confusion[static_cast<std::size_t>(ex.label)][static_cast<std::size_t>(p)];
    if (p == ex.label) ++correct;
  }

  EvalMetrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  m.per_class_accuracy.assign(static_cast<std::size_t>(C), 0.0);
  double f1_sum = 0;
  for (int c = 0; c < C; ++c) {
    long long tp = confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
    long long actual = 0, predicted = 0;
    for (int j = 0; j < C; ++j) {
      actual += confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
      predicted += confusion[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
    }
    if (actual > 0) {
      m.per_class_accuracy[static_cast<std::size_t>(c)] =
          static_cast<double>(tp) / static_cast<double>(actual);
    }
    const double precision = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0;
    const double recall = actual > 0 ? static_cast<double>(tp) / static_cast<double>(actual) : 0;
    f1_sum += (precision + recall) > 0 ? 2 * precision * recall / (precision + recall) : 0;
  }
  m.macro_f1 = f1_sum / static_cast<double>(C);
  return m;
}

Vec penultimate(const TextClassifier& model, const TokenSeq& seq) {
  ForwardTrace trace;
  forward(model, seq, &trace);
  return trace.hidden_act;
}

Vec class_centroid(const TextClassifier& model, const Dataset& data, int label) {
  Vec sum = Vec::Zero(model.config.hidden_dim);
  long long n = 0;
  for (const auto& ex : data.examples) {
    if (ex.label != label) continue;
    sum += penultimate(model, ex.seq);
    ++n;
  }
  require(n > 0, Errc::empty_input, "empty class");
  return sum / static_cast<double>(n);
}

namespace {

double rel_error(double a, double b) {
  const double diff = std::abs(a - b);
  if (diff <= 1e-10) return 0.0;
  return diff / std::max(1e-12, 0.5 * (std::abs(a) + std::abs(b)));
}

}  // namespace

FdCheckResult fd_compare(const TextClassifier& model, const TokenSeq& seq, int label, double step,
                         const Gradients& given, std::uint64_t seed, int coords_per_tensor) {
  require(step > 0, Errc::invalid_argument, "step must be positive");

  TextClassifier probe = model;  // perturbed in place, restored after each probe
  Gradients given_copy = given;
  auto params = tensor_views(probe);
  auto grads = tensor_views(given_copy);

  FdCheckResult result;
  Rng rng(seed);

  auto probe_loss = [&](std::vector<int>* sig) {
    ForwardTrace trace;
    forward(probe, seq, &trace);
    if (sig) *sig = activation_signature(trace);
    return loss_cce(trace.probs, label);
  };

  for (std::size_t t = 0; t < params.size(); ++t) {
    const int n = static_cast<int>(params[t].size);
    for (int c : rng.sample_without_replacement(n, std::min(coords_per_tensor, n))) {
      double* slot = params[t].data + c;
      const double saved = *slot;
      std::vector<int> sig_plus, sig_minus;
      *slot = saved + step;
      const double f_plus = probe_loss(&sig_plus);
      *slot = saved - step;
      const double f_minus = probe_loss(&sig_minus);
      *slot = saved;
      if (sig_plus != sig_minus) {
        ++result.skipped;
        continue;
      }
      const double fd = (f_plus - f_minus) / (2 * step);
      result.max_rel_error = std::max(result.max_rel_error, rel_error(grads[t].data[c], fd));
      ++result.checked;
    }
  }

  // Input-embedding gradient: perturb the gathered rows directly.
  ForwardTrace base;
  forward(model, seq, &base);
  RowMat X = base.embedded;
  const int nx = static_cast<int>(X.size());
  auto input_loss = [&](std::vector<int>* sig) {
    ForwardTrace trace;
    forward_embedded(model, X, base.is_pad, base.nonpad_count, trace);
    if (sig) *sig = activation_signature(trace);
    return loss_cce(trace.probs, label);
  };
  for (int c : rng.sample_without_replacement(nx, std::min(coords_per_tensor, nx))) {
    double* slot = X.data() + c;
    const double saved = *slot;
    std::vector<int> sig_plus, sig_minus;
    *slot = saved + step;
    const double f_plus = input_loss(&sig_plus);
    *slot = saved - step;
    const double f_minus = input_loss(&sig_minus);
    *slot = saved;
    if (sig_plus != sig_minus) {
      ++result.skipped;
      continue;
    }
    const double fd = (f_plus - f_minus) / (2 * step);
    result.max_rel_error = std::max(result.max_rel_error, rel_error(given.input_embed.data()[c], fd));
    ++result.checked;
  }
  return result;
}

FdCheckResult finite_difference_check(const TextClassifier& model, const TokenSeq& seq, int label,
                                      double step, std::uint64_t seed, int coords_per_tensor) {
  ForwardTrace trace;
  forward(model, seq, &trace);
  Gradients g = backward(model, trace, label);
  return fd_compare(model, seq, label, step, g, seed, coords_per_tensor);
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

void write_tensor(std::ostream& out, const std::string& name, const double* data, Eigen::Index rows,
                  Eigen::Index cols) {
  out << "tensor " << name << ' ' << rows << ' ' << cols << '\n';
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (c) out << ' ';
      write_double(out, data[r * cols + c]);
    }
    out << '\n';
  }
}

void read_tensor(std::istream& in, const std::string& expect_name, double* data, Eigen::Index rows,
                 Eigen::Index cols) {
  std::string kw, name;
  Eigen::Index r = 0, c = 0;
  require(static_cast<bool>(in >> kw >> name >> r >> c), Errc::parse, "truncated checkpoint");
  require(kw == "tensor" && name == expect_name && r == rows && c == cols, Errc::parse,
          "checkpoint shape mismatch at " + expect_name);
  for (Eigen::Index i = 0; i < rows * cols; ++i) data[i] = read_double(in);
}

}  // namespace

void save_model(const TextClassifier& model, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Errc::io, "cannot write checkpoint: " + path);
  const ModelConfig& cfg = model.config;
  out << "trapgrad-model 1\n";
  out << "encoder " << (cfg.encoder == EncoderKind::conv ? "conv" : "mean_pool") << '\n';
  out << "classes " << model.num_classes << '\n';
  out << "embed_dim " << cfg.embed_dim << '\n';
  out << "hidden_dim " << cfg.hidden_dim << '\n';
  out << "conv_filters " << cfg.conv_filters << '\n';
  out << "widths " << cfg.filter_widths.size();
  for (int w : cfg.filter_widths) out << ' ' << w;
  out << '\n';
  out << "lr ";
  write_double(out, cfg.learning_rate);
  out << '\n';
  out << "clip ";
  write_double(out, cfg.clip_norm);
  out << '\n';
  out << "epochs " << cfg.epochs << '\n';
  out << "batch " << cfg.batch_size << '\n';
  out << "seed " << cfg.seed << '\n';
  out << "vocab " << model.vocab.size() << '\n';
  for (const auto& tok : model.vocab.tokens) out << tok << '\n';

  auto views = tensor_views(const_cast<TextClassifier&>(model));
  for (const auto& v : views) {
    Eigen::Index cols = 1;
    if (v.name == "embed") cols = cfg.embed_dim;
    if (v.name.rfind("conv_w", 0) == 0) cols = cfg.conv_filters;
    if (v.name == "hidden_w") cols = cfg.hidden_dim;
    if (v.name == "out_w") cols = model.num_classes;
    write_tensor(out, v.name, v.data, v.size / cols, cols);
  }
  out << "end\n";
  require(out.good(), Errc::io, "write failed: " + path);
}

TextClassifier load_model(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::io, "cannot open checkpoint: " + path);

  std::string magic;
  int version = 0;
  require(static_cast<bool>(in >> magic >> version) && magic == "trapgrad-model" && version == 1,
          Errc::parse, "not a trapgrad model checkpoint");

  auto expect_key = [&](const std::string& key) {
    std::string k;
    require(static_cast<bool>(in >> k) && k == key, Errc::parse, "expected key " + key);
  };

  ModelConfig cfg;
  std::string enc;
  int classes = 0;
  expect_key("encoder");
  in >> enc;
  require(enc == "conv" || enc == "mean_pool", Errc::parse, "unknown encoder kind");
  cfg.encoder = enc == "conv" ? EncoderKind::conv : EncoderKind::mean_pool;
  expect_key("classes");
  in >> classes;
  expect_key("embed_dim");
  in >> cfg.embed_dim;
  expect_key("hidden_dim");
  in >> cfg.hidden_dim;
  expect_key("conv_filters");
  in >> cfg.conv_filters;
  expect_key("widths");
  std::size_t n_widths = 0;
  in >> n_widths;
  cfg.filter_widths.resize(n_widths);
  for (auto& w : cfg.filter_widths) in >> w;
  expect_key("lr");
  cfg.learning_rate = read_double(in);
  expect_key("clip");
  cfg.clip_norm = read_double(in);
  expect_key("epochs");
  in >> cfg.epochs;
  expect_key("batch");
  in >> cfg.batch_size;
  expect_key("seed");
  in >> cfg.seed;
  expect_key("vocab");
  std::int32_t vocab_size = 0;
  in >> vocab_size;
  require(static_cast<bool>(in) && vocab_size >= 3, Errc::parse, "bad checkpoint header");
  in.ignore();  // newline before token lines

  Vocabulary vocab;
  vocab.tokens.resize(static_cast<std::size_t>(vocab_size));
  for (auto& tok : vocab.tokens) {
    require(static_cast<bool>(std::getline(in, tok)), Errc::parse, "truncated vocab");
  }
  for (std::int32_t i = 0; i < vocab_size; ++i) vocab.index[vocab.tokens[static_cast<std::size_t>(i)]] = i;

  TextClassifier m = init_model(vocab, classes, cfg);
  auto views = tensor_views(m);
  for (const auto& v : views) {
    Eigen::Index cols = 1;
    if (v.name == "embed") cols = cfg.embed_dim;
    if (v.name.rfind("conv_w", 0) == 0) cols = cfg.conv_filters;
    if (v.name == "hidden_w") cols = cfg.hidden_dim;
    if (v.name == "out_w") cols = m.num_classes;
    read_tensor(in, v.name, v.data, v.size / cols, cols);
  }
  std::string tail;
  require(static_cast<bool>(in >> tail) && tail == "end", Errc::parse, "missing checkpoint trailer");
  return m;
}

}  // namespace trapgrad

#include "seql/neural.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "seql/chain.hpp"
#include "seql/error.hpp"

namespace seql::neural {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::MatrixXd reversed_rows(const Eigen::MatrixXd& m) { return m.colwise().reverse(); }

}  // namespace

// ---------------------------------------------------------------------------
// LSTM

LstmParams LstmParams::zeros(int input_dim, int hidden_size) {
  LstmParams p;
  p.W = Eigen::MatrixXd::Zero(4 * hidden_size, input_dim);
  p.U = Eigen::MatrixXd::Zero(4 * hidden_size, hidden_size);
  p.b = Eigen::VectorXd::Zero(4 * hidden_size);
  return p;
}

LstmParams LstmParams::random(int input_dim, int hidden_size, Rng& rng) {
  LstmParams p = zeros(input_dim, hidden_size);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  for (Eigen::Index c = 0; c < p.W.cols(); ++c)
    for (Eigen::Index r = 0; r < p.W.rows(); ++r) p.W(r, c) = uniform(rng, -bound, bound);
  for (Eigen::Index c = 0; c < p.U.cols(); ++c)
    for (Eigen::Index r = 0; r < p.U.rows(); ++r) p.U(r, c) = uniform(rng, -bound, bound);
  p.b.segment(hidden_size, hidden_size).setOnes();
  return p;
}

void LstmParams::check() const {
  const Eigen::Index H = U.cols();
  if (H < 1 || U.rows() != 4 * H || W.rows() != 4 * H || b.size() != 4 * H)
    throw ShapeError("LSTM parameter shapes are inconsistent");
}

CellOutput lstm_cell(const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
                     const Eigen::VectorXd& c_prev, const LstmParams& p) {
  p.check();
  const Eigen::Index H = p.U.cols();
  if (x.size() != p.W.cols() || h_prev.size() != H || c_prev.size() != H)
    throw ShapeError("lstm_cell: input or state size does not match parameters");
  const Eigen::VectorXd a = p.W * x + p.U * h_prev + p.b;
  CellOutput out;
  out.c.resize(H);
  out.h.resize(H);
  for (Eigen::Index k = 0; k < H; ++k) {
    const double i = sigmoid(a[k]);
    const double f = sigmoid(a[H + k]);
    const double o = sigmoid(a[2 * H + k]);
    const double g = std::tanh(a[3 * H + k]);
    out.c[k] = f * c_prev[k] + i * g;
    out.h[k] = o * std::tanh(out.c[k]);
  }
  return out;
}

LstmTrace lstm_forward(const Eigen::MatrixXd& x, const LstmParams& p) {
  p.check();
  if (x.cols() != p.W.cols()) throw ShapeError("lstm_forward: input dim does not match parameters");
  const Eigen::Index T = x.rows();
  const Eigen::Index H = p.U.cols();
  Eigen::MatrixXd pre = x * p.W.transpose();
  pre.rowwise() += p.b.transpose();

  LstmTrace trace;
  trace.gates.resize(T, 4 * H);
  trace.cells.resize(T, H);
  trace.hidden.resize(T, H);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd a(4 * H);
  for (Eigen::Index t = 0; t < T; ++t) {
    a.noalias() = p.U * h;
    a += pre.row(t).transpose();
    for (Eigen::Index k = 0; k < H; ++k) {
      const double i = sigmoid(a[k]);
      const double f = sigmoid(a[H + k]);
      const double o = sigmoid(a[2 * H + k]);
      const double g = std::tanh(a[3 * H + k]);
      c[k] = f * c[k] + i * g;
      h[k] = o * std::tanh(c[k]);
      trace.gates(t, k) = i;
      trace.gates(t, H + k) = f;
      trace.gates(t, 2 * H + k) = o;
      trace.gates(t, 3 * H + k) = g;
    }
    trace.cells.row(t) = c.transpose();
    trace.hidden.row(t) = h.transpose();
  }
  return trace;
}

Eigen::MatrixXd lstm_backward(const Eigen::MatrixXd& x, const LstmParams& p, const LstmTrace& trace,
                              const Eigen::MatrixXd& d_hidden, LstmParams& grad) {
  const Eigen::Index T = x.rows();
  const Eigen::Index H = p.U.cols();
  Eigen::MatrixXd dA(T, 4 * H);
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd da(4 * H);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    for (Eigen::Index k = 0; k < H; ++k) {
      const double i = trace.gates(t, k);
      const double f = trace.gates(t, H + k);
      const double o = trace.gates(t, 2 * H + k);
      const double g = trace.gates(t, 3 * H + k);
      const double c_prev = t > 0 ? trace.cells(t - 1, k) : 0.0;
      const double tc = std::tanh(trace.cells(t, k));
      const double dh = d_hidden(t, k) + dh_next[k];
      const double d_o = dh * tc;
      const double dc = dc_next[k] + dh * o * (1.0 - tc * tc);
      da[k] = dc * g * i * (1.0 - i);
      da[H + k] = dc * c_prev * f * (1.0 - f);
      da[2 * H + k] = d_o * o * (1.0 - o);
      da[3 * H + k] = dc * i * (1.0 - g * g);
      dc_next[k] = dc * f;
    }
    dA.row(t) = da.transpose();
    dh_next.noalias() = p.U.transpose() * da;
  }
  Eigen::MatrixXd h_prev = Eigen::MatrixXd::Zero(T, H);
  if (T > 1) h_prev.bottomRows(T - 1) = trace.hidden.topRows(T - 1);
  grad.W.noalias() += dA.transpose() * x;
  grad.U.noalias() += dA.transpose() * h_prev;
  grad.b += dA.colwise().sum().transpose();
  return dA * p.W;
}

Eigen::MatrixXd bilstm_encode(const Eigen::MatrixXd& x, const LstmParams& fwd, const LstmParams& bwd) {
  if (x.rows() < 1) throw Error("bilstm_encode: empty sequence");
  if (fwd.hidden_size() != bwd.hidden_size())
    throw ShapeError("forward and backward LSTMs must share a hidden size");
  const Eigen::Index H = fwd.U.cols();
  Eigen::MatrixXd out(x.rows(), 2 * H);
  out.leftCols(H) = lstm_forward(x, fwd).hidden;
  out.rightCols(H) = reversed_rows(lstm_forward(reversed_rows(x), bwd).hidden);
  return out;
}

// ---------------------------------------------------------------------------
// Dropout and losses

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw Error("dropout rate must be in [0, 1)");
  const double keep = 1.0 / (1.0 - rate);
  Eigen::MatrixXd mask(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) mask(r, c) = uniform01(rng) < rate ? 0.0 : keep;
  return mask;
}

Eigen::MatrixXd apply_dropout(const Eigen::MatrixXd& x, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw Error("dropout rate must be in [0, 1)");
  if (!training || rate == 0.0) return x;
  return x.cwiseProduct(dropout_mask(x.rows(), x.cols(), rate, rng));
}

SoftmaxLoss softmax_head_loss(const Eigen::MatrixXd& scores, std::span<const std::size_t> gold) {
  const Eigen::Index T = scores.rows();
  const Eigen::Index K = scores.cols();
  if (static_cast<std::size_t>(T) != gold.size() || T == 0)
    throw ShapeError("softmax_head_loss: gold length must match a non-empty score matrix");
  SoftmaxLoss out;
  out.probabilities.resize(T, K);
  double total = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    if (gold[static_cast<std::size_t>(t)] >= static_cast<std::size_t>(K))
      throw Error("gold label index out of range");
    const double m = scores.row(t).maxCoeff();
    const double lse = m + std::log((scores.row(t).array() - m).exp().sum());
    out.probabilities.row(t) = (scores.row(t).array() - lse).exp();
    total += lse - scores(t, static_cast<Eigen::Index>(gold[static_cast<std::size_t>(t)]));
  }
  out.loss = total / static_cast<double>(T);
  return out;
}

double crf_head_loss(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& transitions,
                     std::span<const std::size_t> gold) {
  return chain::log_partition(scores, transitions) - chain::path_score(scores, transitions, gold);
}

double joint_loss(double ner_loss, double pos_loss, double weight) {
  if (weight < 0.0) throw Error("joint loss weight must be >= 0");
  return ner_loss + weight * pos_loss;
}

// ---------------------------------------------------------------------------
// Tagger

std::string_view to_string(Inference kind) { return kind == Inference::kSoftmax ? "softmax" : "crf"; }

Head Head::zeros(Inference kind, int input_dim, int labels) {
  Head h;
  h.kind = kind;
  h.projection = Eigen::MatrixXd::Zero(input_dim, labels);
  h.bias = Eigen::VectorXd::Zero(labels);
  if (kind == Inference::kCrf) h.transitions = Eigen::MatrixXd::Zero(labels, labels);
  return h;
}

Example make_example(const NeuralTagger& model, const Sentence& sentence) {
  Example ex;
  for (const auto& t : sentence.tokens) {
    ex.tokens.push_back(model.embeddings.compose(t.surface));
    ex.ner_gold.push_back(t.ner.index());
    if (model.pos) ex.pos_gold.push_back(index_of(t.pos));
  }
  return ex;
}

Gradients Gradients::zeros_like(const NeuralTagger& model) {
  Gradients g;
  g.forward = LstmParams::zeros(model.forward.input_dim(), model.forward.hidden_size());
  g.backward = LstmParams::zeros(model.backward.input_dim(), model.backward.hidden_size());
  const int in = static_cast<int>(model.ner.projection.rows());
  g.ner = Head::zeros(model.ner.kind, in, model.ner.label_count());
  if (model.pos) g.pos = Head::zeros(model.pos->kind, in, model.pos->label_count());
  return g;
}

namespace {

Eigen::MatrixXd lookup_rows(const EmbeddingTable& table, std::span<const Composition> tokens) {
  Eigen::MatrixXd e(static_cast<Eigen::Index>(tokens.size()), table.dim());
  for (std::size_t t = 0; t < tokens.size(); ++t)
    e.row(static_cast<Eigen::Index>(t)) = table.embed(tokens[t]).transpose();
  return e;
}

// Loss of one head on encoder output z; with `grad`, adds weight * dLoss to
// the head gradient and to dz.
double head_forward_backward(const Head& head, const Eigen::MatrixXd& z,
                             std::span<const std::size_t> gold, double weight, Head* grad,
                             Eigen::MatrixXd* dz) {
  Eigen::MatrixXd scores = z * head.projection;
  scores.rowwise() += head.bias.transpose();
  const Eigen::Index T = scores.rows();
  double loss;
  Eigen::MatrixXd d_scores;
  if (head.kind == Inference::kSoftmax) {
    SoftmaxLoss sl = softmax_head_loss(scores, gold);
    loss = sl.loss;
    if (!grad) return loss;
    d_scores = std::move(sl.probabilities);
    for (Eigen::Index t = 0; t < T; ++t) d_scores(t, static_cast<Eigen::Index>(gold[static_cast<std::size_t>(t)])) -= 1.0;
    d_scores /= static_cast<double>(T);
  } else {
    for (std::size_t y : gold)
      if (y >= static_cast<std::size_t>(scores.cols())) throw Error("gold label index out of range");
    if (!grad) return crf_head_loss(scores, head.transitions, gold);
    chain::Marginals m = chain::marginals(scores, head.transitions);
    loss = m.log_partition - chain::path_score(scores, head.transitions, gold);
    d_scores = std::move(m.node);
    for (Eigen::Index t = 0; t < T; ++t) {
      const auto y = static_cast<Eigen::Index>(gold[static_cast<std::size_t>(t)]);
      d_scores(t, y) -= 1.0;
      if (t > 0) {
        grad->transitions += weight * m.edge[static_cast<std::size_t>(t - 1)];
        grad->transitions(static_cast<Eigen::Index>(gold[static_cast<std::size_t>(t - 1)]), y) -= weight;
      }
    }
  }
  grad->projection.noalias() += weight * (z.transpose() * d_scores);
  grad->bias += weight * d_scores.colwise().sum().transpose();
  dz->noalias() += weight * (d_scores * head.projection.transpose());
  return loss;
}

LossParts run(const NeuralTagger& model, const Example& ex, double joint_weight, Rng* dropout_rng,
              double scale, Gradients* grads) {
  const std::size_t T = ex.tokens.size();
  if (T == 0) throw Error("empty sentence");
  if (ex.ner_gold.size() != T) throw ShapeError("NER gold length does not match sentence");
  if (model.pos && ex.pos_gold.size() != T) throw ShapeError("joint model needs POS gold labels");

  const Eigen::Index H = model.forward.U.cols();
  const bool drop = dropout_rng && model.dropout > 0.0;
  const Eigen::MatrixXd e = lookup_rows(model.embeddings, ex.tokens);
  Eigen::MatrixXd mask_in, mask_out;
  Eigen::MatrixXd x = e;
  if (drop) {
    mask_in = dropout_mask(e.rows(), e.cols(), model.dropout, *dropout_rng);
    x = x.cwiseProduct(mask_in);
  }
  const Eigen::MatrixXd x_rev = reversed_rows(x);
  const LstmTrace tf = lstm_forward(x, model.forward);
  const LstmTrace tb = lstm_forward(x_rev, model.backward);
  Eigen::MatrixXd z(x.rows(), 2 * H);
  z.leftCols(H) = tf.hidden;
  z.rightCols(H) = reversed_rows(tb.hidden);
  if (drop) {
    mask_out = dropout_mask(z.rows(), z.cols(), model.dropout, *dropout_rng);
    z = z.cwiseProduct(mask_out);
  }

  LossParts loss;
  Eigen::MatrixXd dz;
  if (grads) dz = Eigen::MatrixXd::Zero(z.rows(), z.cols());
  loss.ner = head_forward_backward(model.ner, z, ex.ner_gold, scale, grads ? &grads->ner : nullptr,
                                   grads ? &dz : nullptr);
  if (model.pos)
    loss.pos = head_forward_backward(*model.pos, z, ex.pos_gold, scale * joint_weight,
                                     grads ? &*grads->pos : nullptr, grads ? &dz : nullptr);
  loss.total = model.pos ? joint_loss(loss.ner, loss.pos, joint_weight) : loss.ner;
  if (!grads) return loss;

  if (drop) dz = dz.cwiseProduct(mask_out);
  Eigen::MatrixXd dx = lstm_backward(x, model.forward, tf, dz.leftCols(H), grads->forward);
  dx += reversed_rows(lstm_backward(x_rev, model.backward, tb, reversed_rows(dz.rightCols(H)),
                                    grads->backward));
  if (!model.embeddings.trainable()) return loss;
  if (drop) dx = dx.cwiseProduct(mask_in);
  for (std::size_t t = 0; t < T; ++t) {
    const Composition& comp = ex.tokens[t];
    if (comp.is_unk()) continue;
    const Eigen::VectorXd share =
        dx.row(static_cast<Eigen::Index>(t)).transpose() / static_cast<double>(comp.rows.size());
    for (const auto& r : comp.rows) {
      auto& target = r.source == Composition::Source::kWord ? grads->word_rows : grads->bucket_rows;
      auto [it, inserted] = target.try_emplace(r.index, share);
      if (!inserted) it->second += share;
    }
  }
  return loss;
}

}  // namespace

LossParts sentence_loss(const NeuralTagger& model, const Example& example, double joint_weight) {
  return run(model, example, joint_weight, nullptr, 1.0, nullptr);
}

LossParts accumulate_gradient(const NeuralTagger& model, const Example& example, double joint_weight,
                              Rng* dropout_rng, double scale, Gradients& grads) {
  return run(model, example, joint_weight, dropout_rng, scale, &grads);
}

BatchGradient backward(const NeuralTagger& model, std::span<const Example* const> batch,
                       double joint_weight, Rng* dropout_rng) {
  if (batch.empty()) throw Error("backward: empty batch");
  BatchGradient out{0.0, Gradients::zeros_like(model)};
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const Example* ex : batch)
    out.loss += accumulate_gradient(model, *ex, joint_weight, dropout_rng, scale, out.grads).total;
  out.loss *= scale;
  return out;
}

// ---------------------------------------------------------------------------
// Adam

void adam_step(std::span<const ParamView> params, AdamState& state, const AdamConfig& config) {
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto& p : params) {
      state.m.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.size)));
      state.v.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.size)));
    }
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const ParamView& p = params[k];
    if (static_cast<std::size_t>(state.m[k].size()) != p.size)
      throw ShapeError("Adam state does not match parameter shapes");
    Eigen::Map<Eigen::ArrayXd> value(p.value, static_cast<Eigen::Index>(p.size));
    Eigen::Map<const Eigen::ArrayXd> g(p.grad, static_cast<Eigen::Index>(p.size));
    auto m = state.m[k].array();
    auto v = state.v[k].array();
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.square();
    value -= config.learning_rate * (m / bc1) / ((v / bc2).sqrt() + config.epsilon);
  }
}

void adam_step_rows(RowMatrix& table, const std::map<std::size_t, Eigen::VectorXd>& rows,
                    RowMatrix& m, RowMatrix& v, std::int64_t t, const AdamConfig& config) {
  if (m.rows() != table.rows() || m.cols() != table.cols()) m = RowMatrix::Zero(table.rows(), table.cols());
  if (v.rows() != table.rows() || v.cols() != table.cols()) v = RowMatrix::Zero(table.rows(), table.cols());
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (const auto& [row, g] : rows) {
    const auto r = static_cast<Eigen::Index>(row);
    auto mr = m.row(r).array();
    auto vr = v.row(r).array();
    mr = config.beta1 * mr + (1.0 - config.beta1) * g.transpose().array();
    vr = config.beta2 * vr + (1.0 - config.beta2) * g.transpose().array().square();
    table.row(r).array() -= config.learning_rate * (mr / bc1) / ((vr / bc2).sqrt() + config.epsilon);
  }
}

std::vector<ParamView> parameter_views(NeuralTagger& model, const Gradients& grads) {
  std::vector<ParamView> out;
  auto add = [&](auto& value, const auto& grad) {
    if (value.size() != grad.size()) throw ShapeError("gradient shape does not match parameter");
    if (value.size() == 0) return;
    out.push_back({value.data(), grad.data(), static_cast<std::size_t>(value.size())});
  };
  auto add_lstm = [&](LstmParams& p, const LstmParams& g) {
    add(p.W, g.W);
    add(p.U, g.U);
    add(p.b, g.b);
  };
  auto add_head = [&](Head& h, const Head& g) {
    add(h.projection, g.projection);
    add(h.bias, g.bias);
    add(h.transitions, g.transitions);
  };
  add_lstm(model.forward, grads.forward);
  add_lstm(model.backward, grads.backward);
  add_head(model.ner, grads.ner);
  if (model.pos) {
    if (!grads.pos) throw ShapeError("missing POS head gradient");
    add_head(*model.pos, *grads.pos);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training and tagging

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("beta1 and beta2 must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (batch_size < 0 || hidden_size < 0) throw ConfigError("batch_size and hidden_size must be >= 0");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (joint_loss_weight < 0.0) throw ConfigError("joint_loss_weight must be >= 0");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
}

int default_batch_size(EmbeddingMode mode) { return mode == EmbeddingMode::kRandom ? 32 : 64; }
int default_hidden_size(EmbeddingMode mode) { return mode == EmbeddingMode::kRandom ? 128 : 256; }

TrainResult train(const Corpus& train_corpus, const Corpus& valid, const Architecture& arch,
                  EmbeddingTable embeddings, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_corpus.sentences.empty()) throw Error("cannot train on an empty corpus");

  TrainResult result;
  const EmbeddingMode mode = embeddings.mode();
  const int hidden = config.hidden_size > 0 ? config.hidden_size : default_hidden_size(mode);
  const int batch_size = config.batch_size > 0 ? config.batch_size : default_batch_size(mode);
  if (hidden != default_hidden_size(mode))
    result.warnings.push_back("hidden_size " + std::to_string(hidden) + " overrides the default " +
                              std::to_string(default_hidden_size(mode)) + " for " +
                              std::string(to_string(mode)) + " embeddings");
  if (batch_size != default_batch_size(mode))
    result.warnings.push_back("batch_size " + std::to_string(batch_size) + " overrides the default " +
                              std::to_string(default_batch_size(mode)) + " for " +
                              std::string(to_string(mode)) + " embeddings");

  Rng init_rng(config.seed);
  Rng shuffle_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  Rng dropout_rng(config.seed ^ 0xD1B54A32D192ED03ULL);

  NeuralTagger& model = result.model;
  model.embeddings = std::move(embeddings);
  const int dim = model.embeddings.dim();
  model.forward = LstmParams::random(dim, hidden, init_rng);
  model.backward = LstmParams::random(dim, hidden, init_rng);
  model.ner = Head::zeros(arch.inference, 2 * hidden, static_cast<int>(NerLabel::kCount));
  if (arch.task == Task::kJoint)
    model.pos = Head::zeros(arch.inference, 2 * hidden, static_cast<int>(kNumPosTags));
  model.dropout = config.dropout;

  std::vector<Example> train_set;
  for (const auto& s : train_corpus.sentences) train_set.push_back(make_example(model, s));
  std::vector<Example> valid_set;
  for (const auto& s : valid.sentences) valid_set.push_back(make_example(model, s));
  const std::vector<Example>& monitor = valid_set.empty() ? train_set : valid_set;

  const AdamConfig adam{config.learning_rate, config.beta1, config.beta2, config.epsilon};
  AdamState state;
  const std::size_t N = train_set.size();
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);

  NeuralTagger best = model;
  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<const Example*> batch;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    shuffle(std::span<std::size_t>(order), shuffle_rng);
    double train_loss = 0.0;
    for (std::size_t begin = 0; begin < N; begin += static_cast<std::size_t>(batch_size)) {
      const std::size_t end = std::min(N, begin + static_cast<std::size_t>(batch_size));
      batch.clear();
      for (std::size_t k = begin; k < end; ++k) batch.push_back(&train_set[order[k]]);
      const BatchGradient bg = backward(model, batch, config.joint_loss_weight, &dropout_rng);
      train_loss += bg.loss * static_cast<double>(batch.size());
      const auto views = parameter_views(model, bg.grads);
      adam_step(views, state, adam);
      if (model.embeddings.trainable()) {
        adam_step_rows(model.embeddings.word_vectors(), bg.grads.word_rows, state.word_m,
                       state.word_v, state.t, adam);
        if (model.embeddings.subword_enabled())
          adam_step_rows(model.embeddings.buckets(), bg.grads.bucket_rows, state.bucket_m,
                         state.bucket_v, state.t, adam);
      }
    }
    train_loss /= static_cast<double>(N);

    double valid_loss = 0.0;
    for (const auto& ex : monitor) valid_loss += sentence_loss(model, ex, config.joint_loss_weight).total;
    valid_loss /= static_cast<double>(monitor.size());

    EpochRecord rec{epoch, train_loss, valid_loss,
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()};
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (valid_loss < best_loss) {
      best_loss = valid_loss;
      best = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  model = std::move(best);
  return result;
}

Eigen::MatrixXd encode(const NeuralTagger& model, std::span<const std::string> surfaces) {
  std::vector<Composition> tokens;
  tokens.reserve(surfaces.size());
  for (const auto& s : surfaces) tokens.push_back(model.embeddings.compose(s));
  return bilstm_encode(lookup_rows(model.embeddings, tokens), model.forward, model.backward);
}

Eigen::MatrixXd head_scores(const NeuralTagger&, const Head& head, const Eigen::MatrixXd& encoded) {
  Eigen::MatrixXd scores = encoded * head.projection;
  scores.rowwise() += head.bias.transpose();
  return scores;
}

std::vector<std::size_t> decode_head(const Head& head, const Eigen::MatrixXd& scores) {
  if (head.kind == Inference::kCrf) return chain::viterbi(scores, head.transitions).path;
  std::vector<std::size_t> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index t = 0; t < scores.rows(); ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < scores.cols(); ++k)
      if (scores(t, k) > scores(t, best)) best = k;
    out[static_cast<std::size_t>(t)] = static_cast<std::size_t>(best);
  }
  return out;
}

Prediction tag(const NeuralTagger& model, std::span<const std::string> surfaces) {
  Prediction out;
  if (surfaces.empty()) {
    if (model.pos) out.pos.emplace();
    return out;
  }
  const Eigen::MatrixXd z = encode(model, surfaces);
  for (std::size_t idx : decode_head(model.ner, head_scores(model, model.ner, z)))
    out.ner.push_back(NerLabel::from_index(idx));
  if (model.pos) {
    out.pos.emplace();
    for (std::size_t idx : decode_head(*model.pos, head_scores(model, *model.pos, z)))
      out.pos->push_back(pos_from_index(idx));
  }
  return out;
}

}  // namespace seql::neural

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seql/corpus.hpp"
#include "seql/crf.hpp"
#include "seql/embeddings.hpp"
#include "seql/random.hpp"

namespace seql::neural {

// ---------------------------------------------------------------------------
// LSTM

// The four gate blocks are stacked row-wise in the order input, forget,
// output, candidate: rows [0,H) belong to the input gate, [H,2H) to the
// forget gate, and so on.
struct LstmParams {
  Eigen::MatrixXd W;  // 4H x D
  Eigen::MatrixXd U;  // 4H x H
  Eigen::VectorXd b;  // 4H

  int input_dim() const { return static_cast<int>(W.cols()); }
  int hidden_size() const { return static_cast<int>(U.cols()); }

  static LstmParams zeros(int input_dim, int hidden_size);
  // Weights uniform in [-1/sqrt(H), 1/sqrt(H)], forget-gate bias 1, others 0.
  static LstmParams random(int input_dim, int hidden_size, Rng& rng);
  void check() const;
};

struct CellOutput {
  Eigen::VectorXd h;
  Eigen::VectorXd c;
};

CellOutput lstm_cell(const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
                     const Eigen::VectorXd& c_prev, const LstmParams& p);

// Activations recorded by a forward scan, kept for backpropagation.
struct LstmTrace {
  Eigen::MatrixXd gates;  // T x 4H, post-activation
  Eigen::MatrixXd cells;  // T x H
  Eigen::MatrixXd hidden; // T x H
};

// Scans the rows of x (T x D) from a zero state.
LstmTrace lstm_forward(const Eigen::MatrixXd& x, const LstmParams& p);

// Backpropagates d_hidden (T x H) through a recorded scan. Parameter
// gradients are added to `grad`; returns the gradient w.r.t. x.
Eigen::MatrixXd lstm_backward(const Eigen::MatrixXd& x, const LstmParams& p, const LstmTrace& trace,
                              const Eigen::MatrixXd& d_hidden, LstmParams& grad);

// T x 2H: row t is [forward h_t, backward h_t], the backward half coming from
// a scan over the reversed sequence.
Eigen::MatrixXd bilstm_encode(const Eigen::MatrixXd& x, const LstmParams& fwd, const LstmParams& bwd);

// ---------------------------------------------------------------------------
// Dropout and losses

// Inverted dropout mask: entries are 0 with probability `rate`, otherwise
// 1/(1-rate).
Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng);
Eigen::MatrixXd apply_dropout(const Eigen::MatrixXd& x, double rate, bool training, Rng& rng);

struct SoftmaxLoss {
  double loss = 0.0;
  Eigen::MatrixXd probabilities;  // T x K
};

// Mean over tokens of -log softmax(scores[t])[gold[t]].
SoftmaxLoss softmax_head_loss(const Eigen::MatrixXd& scores, std::span<const std::size_t> gold);

// log Z - gold path score over dense emissions.
double crf_head_loss(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& transitions,
                     std::span<const std::size_t> gold);

double joint_loss(double ner_loss, double pos_loss, double weight);

// ---------------------------------------------------------------------------
// Tagger

enum class Inference { kSoftmax, kCrf };
std::string_view to_string(Inference kind);

struct Head {
  Inference kind = Inference::kSoftmax;
  Eigen::MatrixXd projection;   // 2H x K
  Eigen::VectorXd bias;         // K
  Eigen::MatrixXd transitions;  // K x K for CRF heads, empty otherwise

  int label_count() const { return static_cast<int>(bias.size()); }
  static Head zeros(Inference kind, int input_dim, int labels);
};

struct NeuralTagger {
  EmbeddingTable embeddings;
  LstmParams forward;
  LstmParams backward;
  Head ner;
  std::optional<Head> pos;  // joint models only
  double dropout = 0.5;

  Task task() const { return pos ? Task::kJoint : Task::kSingle; }
  Inference inference() const { return ner.kind; }
  int hidden_size() const { return forward.hidden_size(); }
};

// One training sentence with word compositions resolved against the table.
struct Example {
  std::vector<Composition> tokens;
  std::vector<std::size_t> ner_gold;
  std::vector<std::size_t> pos_gold;  // empty for single-task training
};

Example make_example(const NeuralTagger& model, const Sentence& sentence);

struct Gradients {
  LstmParams forward;
  LstmParams backward;
  Head ner;
  std::optional<Head> pos;
  std::map<std::size_t, Eigen::VectorXd> word_rows;
  std::map<std::size_t, Eigen::VectorXd> bucket_rows;

  static Gradients zeros_like(const NeuralTagger& model);
};

struct LossParts {
  double ner = 0.0;
  double pos = 0.0;
  double total = 0.0;
};

// Loss of one sentence with dropout off.
LossParts sentence_loss(const NeuralTagger& model, const Example& example, double joint_weight);

// Forward and backward pass for one sentence. Gradients of scale * loss are
// added to `grads`; dropout masks are drawn from `dropout_rng` when it is
// non-null and the model's rate is positive. Embedding rows get gradients
// only when the table is trainable.
LossParts accumulate_gradient(const NeuralTagger& model, const Example& example,
                              double joint_weight, Rng* dropout_rng, double scale,
                              Gradients& grads);

// Gradient of the mean sentence loss over a batch.
struct BatchGradient {
  double loss = 0.0;
  Gradients grads;
};
BatchGradient backward(const NeuralTagger& model, std::span<const Example* const> batch,
                       double joint_weight, Rng* dropout_rng);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct ParamView {
  double* value;
  const double* grad;
  std::size_t size;
};

struct AdamState {
  std::int64_t t = 0;
  std::vector<Eigen::VectorXd> m;
  std::vector<Eigen::VectorXd> v;
  // Row-wise moments for embedding tables, allocated on first use.
  RowMatrix word_m, word_v, bucket_m, bucket_v;
};

// Increments t and applies one bias-corrected Adam update to every view.
// Moment slots are matched to views by position.
void adam_step(std::span<const ParamView> params, AdamState& state, const AdamConfig& config);

// Adam restricted to the listed rows of a table, using the step count already
// advanced by adam_step. Untouched rows and their moments are left alone.
void adam_step_rows(RowMatrix& table, const std::map<std::size_t, Eigen::VectorXd>& rows,
                    RowMatrix& m, RowMatrix& v, std::int64_t t, const AdamConfig& config);

// Dense parameters in a fixed order, paired with their gradients.
std::vector<ParamView> parameter_views(NeuralTagger& model, const Gradients& grads);

// ---------------------------------------------------------------------------
// Training and tagging

struct TrainConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 0;   // 0: 32 for random embeddings, 64 for pretrained
  int hidden_size = 0;  // 0: 128 for random embeddings, 256 for pretrained
  int max_epochs = 50;
  int patience = 5;
  double joint_loss_weight = 1.0;
  double dropout = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

int default_batch_size(EmbeddingMode mode);
int default_hidden_size(EmbeddingMode mode);

struct Architecture {
  Inference inference = Inference::kCrf;
  Task task = Task::kSingle;
};

using EpochRecord = crf::EpochRecord;
using EpochCallback = crf::EpochCallback;

struct TrainResult {
  NeuralTagger model;
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  std::vector<std::string> warnings;
};

// Builds a tagger around `embeddings` (whose mode decides whether it is
// trained) and fits it with Adam, restoring the best validation epoch.
TrainResult train(const Corpus& train, const Corpus& valid, const Architecture& arch,
                  EmbeddingTable embeddings, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

struct Prediction {
  std::vector<NerLabel> ner;
  std::optional<std::vector<PosTag>> pos;
};

// Head scores for a sentence with dropout off: per head, T x K.
Eigen::MatrixXd head_scores(const NeuralTagger& model, const Head& head,
                            const Eigen::MatrixXd& encoded);
Eigen::MatrixXd encode(const NeuralTagger& model, std::span<const std::string> surfaces);

// Label indices chosen by a head: argmax (lowest index on ties) or Viterbi.
std::vector<std::size_t> decode_head(const Head& head, const Eigen::MatrixXd& scores);

Prediction tag(const NeuralTagger& model, std::span<const std::string> surfaces);

}  // namespace seql::neural

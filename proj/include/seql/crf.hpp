#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "seql/corpus.hpp"
#include "seql/embeddings.hpp"

namespace seql {

enum class Task { kSingle, kJoint };
std::string_view to_string(Task task);

namespace crf {

struct Feature {
  std::string key;
  double value;

  friend bool operator==(const Feature&, const Feature&) = default;
};

// Sorted by key, keys unique, no zero values.
using FeatureVector = std::vector<Feature>;

// Handcrafted features for token i: the word and its neighbours (BOS/EOS at
// the edges), first/last-word flags, 1-3 character prefixes and suffixes,
// hyphen and digit indicators, and a decile position bucket. With a table,
// adds dense features emb<k> holding the components of embed(surface).
FeatureVector extract_features(std::span<const std::string> surfaces, std::size_t i,
                               const EmbeddingTable* embeddings);
FeatureVector extract_features(const Sentence& sentence, std::size_t i, bool use_embeddings,
                               const EmbeddingTable* embeddings);

// A label of the CRF chain: an NER label, paired with a POS tag for joint models.
struct ChainLabel {
  NerLabel ner;
  std::optional<PosTag> pos;

  // "B-ORG" or "B-ORG|n".
  std::string str() const;
  static ChainLabel parse(std::string_view text);

  friend bool operator==(const ChainLabel&, const ChainLabel&) = default;
};

struct IndexedFeature {
  std::uint32_t id;
  double value;
};
using IndexedFeatures = std::vector<std::vector<IndexedFeature>>;  // per position

struct CrfModel {
  Task task = Task::kSingle;
  std::vector<ChainLabel> labels;
  std::vector<std::string> feature_names;
  std::unordered_map<std::string, std::uint32_t> feature_index;
  RowMatrix state_weights;          // features x labels
  Eigen::MatrixXd transitions;      // labels x labels, (from, to)
  std::optional<EmbeddingTable> embeddings;  // present iff embedding features are used

  std::size_t label_count() const { return labels.size(); }
  bool uses_embeddings() const { return embeddings.has_value(); }

  // Maps features to ids; keys the model has never seen are dropped.
  IndexedFeatures index(std::span<const FeatureVector> features) const;
  IndexedFeatures featurize(std::span<const std::string> surfaces) const;

  // Index into `labels`, if the label is part of the model.
  std::optional<std::size_t> label_index(const ChainLabel& label) const;
  // Gold chain labels for a sentence; throws if any is outside the label set.
  std::vector<std::size_t> gold_path(const Sentence& sentence) const;
};

// T x L emission scores: sum over features at t of weight(f, y) * value(f).
Eigen::MatrixXd emissions(const CrfModel& model, const IndexedFeatures& features);

struct Gradient {
  double nll = 0.0;
  std::map<std::uint32_t, Eigen::VectorXd> state;  // only features present in the sentence
  Eigen::MatrixXd transitions;
};

// Negative log-likelihood of the gold path and its gradient. The L2 term
// (l2/2)*||w||^2 covers the parameters the sentence touches: the weight rows
// of its features and the transition matrix. Training applies L2 separately,
// once per batch, and calls this with l2 = 0.
Gradient nll_and_gradient(const CrfModel& model, const IndexedFeatures& features,
                          std::span<const std::size_t> gold, double l2);
Gradient nll_and_gradient(const CrfModel& model, const Sentence& sentence, double l2);

struct TrainConfig {
  double l2 = 0.1;
  double learning_rate = 0.05;
  int epochs = 50;
  int patience = 5;
  int batch_size = 8;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainResult {
  CrfModel model;
  std::vector<EpochRecord> log;
  int best_epoch = 0;
};

// Mini-batch gradient descent with early stopping on validation NLL. The
// label set is all 25 NER labels (single) or the NER x POS pairs observed in
// training (joint). The returned model holds the best validation epoch.
TrainResult train(const Corpus& train, const Corpus& valid, const TrainConfig& config, Task task,
                  std::optional<EmbeddingTable> embeddings, const EpochCallback& on_epoch = {});

// Viterbi chain label indices.
std::vector<std::size_t> decode(const CrfModel& model, std::span<const std::string> surfaces);

// NER labels; joint labels are projected onto their NER component.
std::vector<NerLabel> tag(const CrfModel& model, std::span<const std::string> surfaces);
std::vector<NerLabel> tag(const CrfModel& model, const Sentence& sentence);

}  // namespace crf
}  // namespace seql

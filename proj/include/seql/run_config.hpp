#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "seql/crf.hpp"
#include "seql/embeddings.hpp"
#include "seql/model_io.hpp"
#include "seql/neural.hpp"

namespace seql {

enum class ModelType { kCrf, kBilstmSoftmax, kBilstmCrf };
enum class EmbeddingChoice { kNone, kRandom, kPretrainedFrozen, kPretrainedFinetuned };

std::string_view to_string(ModelType type);
std::string_view to_string(EmbeddingChoice choice);

// One training run, read from `key = value` lines. '#' starts a comment.
// Unset optional hyperparameters take model-dependent defaults.
struct RunConfig {
  Task task = Task::kSingle;
  ModelType model = ModelType::kCrf;
  EmbeddingChoice embedding = EmbeddingChoice::kNone;

  std::string train;
  std::string valid;
  std::string test;
  std::string vectors;
  std::string buckets;  // optional n-gram bucket sidecar for pretrained vectors
  std::string model_out;
  std::string log;  // default: model_out + ".log"

  std::uint64_t seed = 0;

  // shared
  std::optional<double> learning_rate;  // crf 0.05, neural 0.001
  std::optional<int> batch_size;        // crf 8, neural 32 random / 64 pretrained
  int patience = 5;

  // crf
  double l2 = 0.1;
  int epochs = 50;
  bool shuffle = true;

  // neural
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::optional<int> hidden_size;  // 128 random / 256 pretrained
  int max_epochs = 50;
  double joint_loss_weight = 1.0;
  double dropout = 0.5;

  // embeddings
  int dim = 300;
  int min_n = 3;
  int max_n = 6;
  std::size_t bucket_count = 50'000;

  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::string& path);

  // Throws ConfigError on any invariant violation.
  void validate() const;

  bool is_neural() const { return model != ModelType::kCrf; }
  bool is_pretrained() const {
    return embedding == EmbeddingChoice::kPretrainedFrozen ||
           embedding == EmbeddingChoice::kPretrainedFinetuned;
  }
  io::ModelKind model_kind() const;

  double resolved_learning_rate() const;
  int resolved_batch_size() const;
  int resolved_hidden_size() const;
  std::string resolved_log() const;

  crf::TrainConfig crf_config() const;
  neural::TrainConfig neural_config() const;
  EmbeddingConfig embedding_config() const;

  // Every key with defaults resolved; parse(echo()) reproduces this run.
  std::string echo() const;
};

}  // namespace seql

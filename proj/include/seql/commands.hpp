#pragma once

// Subcommand bodies. Each returns the process exit code: 0 on success, 1 for
// data or validation failures, 2 for usage and configuration errors. Data goes
// to `out`, diagnostics to `err`.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include "seql/corpus.hpp"
#include "seql/model_io.hpp"
#include "seql/neural.hpp"
#include "seql/run_config.hpp"

namespace seql {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

std::string read_text(const std::string& path);

// NER (and POS for joint neural models) predictions of any loaded model.
neural::Prediction predict(const io::Model& model, std::span<const std::string> surfaces);

// Builds the embedding table a run asks for, or nullopt for embedding = none.
// Random tables cover the training vocabulary in first-seen order.
std::optional<EmbeddingTable> make_embeddings(const RunConfig& config, const Corpus& train);

// Trains the configured model. Epoch lines go to `log_sink`, which also gets
// the config echo first.
io::LoadedModel run_training(const RunConfig& config, std::ostream& log_sink, std::ostream& err);

int cmd_stats(const std::string& corpus_path, bool csv, std::ostream& out, std::ostream& err);
int cmd_validate(const std::string& corpus_path, std::ostream& out, std::ostream& err);
int cmd_train(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_tag(const std::string& model_path, const std::string& input_path, std::ostream& out,
            std::ostream& err);
int cmd_eval(const std::string& model_path, const std::string& gold_path, bool csv, std::ostream& out,
             std::ostream& err);
int cmd_dump_features(const std::string& corpus_path, std::size_t sentence, std::size_t position,
                      const std::string& model_path, std::ostream& out, std::ostream& err);

}  // namespace seql

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "seql/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"seql: sequence labeling for word-level NER"};
  app.require_subcommand(1);

  std::string corpus;
  std::string model;
  std::string input;
  std::string config;
  bool csv = false;
  std::size_t sentence = 0;
  std::size_t position = 0;

  auto* stats = app.add_subcommand("stats", "tag counts per entity and position");
  stats->add_option("corpus", corpus, "CoNLL file")->required();
  stats->add_flag("--csv", csv, "emit CSV instead of an aligned table");

  auto* validate = app.add_subcommand("validate", "list BIOES violations; exit 1 if any");
  validate->add_option("corpus", corpus, "CoNLL file")->required();

  auto* train = app.add_subcommand("train", "train a model from a run config");
  train->add_option("config", config, "key = value run config")->required();

  auto* tag = app.add_subcommand("tag", "tag tokens with a trained model");
  tag->add_option("model", model, "model file")->required();
  tag->add_option("input", input, "CoNLL or one-token-per-line input")->required();

  auto* eval = app.add_subcommand("eval", "score a model against gold data");
  eval->add_option("model", model, "model file")->required();
  eval->add_option("gold", corpus, "gold CoNLL file")->required();
  eval->add_flag("--csv", csv, "emit CSV");

  auto* dump = app.add_subcommand("dump-features", "print CRF features of one token, sorted by key");
  dump->add_option("corpus", corpus, "CoNLL file")->required();
  dump->add_option("--sentence", sentence, "sentence index")->default_val(0);
  dump->add_option("--position", position, "token index")->default_val(0);
  dump->add_option("--model", model, "crf model supplying embedding features");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : seql::kExitUsage;
  }

  if (*stats) return seql::cmd_stats(corpus, csv, std::cout, std::cerr);
  if (*validate) return seql::cmd_validate(corpus, std::cout, std::cerr);
  if (*train) return seql::cmd_train(config, std::cout, std::cerr);
  if (*tag) return seql::cmd_tag(model, input, std::cout, std::cerr);
  if (*eval) return seql::cmd_eval(model, corpus, csv, std::cout, std::cerr);
  return seql::cmd_dump_features(corpus, sentence, position, model, std::cout, std::cerr);
}

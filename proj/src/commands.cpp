#include "seql/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <streambuf>
#include <unordered_set>

#include "seql/crf.hpp"
#include "seql/error.hpp"
#include "seql/metrics.hpp"

namespace seql {

namespace {

class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int c) override {
    if (c == traits_type::eof()) return traits_type::not_eof(c);
    const auto ch = traits_type::to_char_type(c);
    if (a_->sputc(ch) == traits_type::eof() || b_->sputc(ch) == traits_type::eof()) return traits_type::eof();
    return c;
  }
  std::streamsize xsputn(const char* s, std::streamsize n) override {
    a_->sputn(s, n);
    b_->sputn(s, n);
    return n;
  }
  int sync() override { return (a_->pubsync() == 0 && b_->pubsync() == 0) ? 0 : -1; }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

std::string epoch_line(const crf::EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "epoch=%d train_loss=%.9g valid_loss=%.9g seconds=%.3f", r.epoch,
                r.train_loss, r.valid_loss, r.seconds);
  return buf;
}

Corpus read_corpus(const std::string& path, bool strict) {
  return parse_conll(read_text(path), strict, path);
}

}  // namespace

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

neural::Prediction predict(const io::Model& model, std::span<const std::string> surfaces) {
  if (const auto* crf_model = std::get_if<crf::CrfModel>(&model)) {
    neural::Prediction p;
    p.ner = crf::tag(*crf_model, surfaces);
    return p;
  }
  return neural::tag(std::get<neural::NeuralTagger>(model), surfaces);
}

std::optional<EmbeddingTable> make_embeddings(const RunConfig& config, const Corpus& train) {
  switch (config.embedding) {
    case EmbeddingChoice::kNone:
      return std::nullopt;
    case EmbeddingChoice::kRandom: {
      std::vector<std::string> vocab;
      std::unordered_set<std::string> seen;
      for (const auto& s : train.sentences)
        for (const auto& t : s.tokens)
          if (seen.insert(t.surface).second) vocab.push_back(t.surface);
      return init_random(vocab, config.embedding_config());
    }
    case EmbeddingChoice::kPretrainedFrozen:
    case EmbeddingChoice::kPretrainedFinetuned: {
      std::ifstream in(config.vectors, std::ios::binary);
      if (!in) throw Error("cannot read vectors '" + config.vectors + "'");
      EmbeddingTable table = load_text_vectors(in, config.embedding_config());
      if (!config.buckets.empty()) io::load_buckets(config.buckets, table);
      table.set_mode(config.embedding == EmbeddingChoice::kPretrainedFrozen ? EmbeddingMode::kFrozen
                                                                             : EmbeddingMode::kFinetuned);
      return table;
    }
  }
  return std::nullopt;
}

io::LoadedModel run_training(const RunConfig& config, std::ostream& log_sink, std::ostream& err) {
  config.validate();
  const std::string echo = config.echo();
  log_sink << echo << std::flush;

  const Corpus train = read_corpus(config.train, true);
  const Corpus valid = config.valid.empty() ? Corpus{} : read_corpus(config.valid, true);
  auto embeddings = make_embeddings(config, train);

  const auto on_epoch = [&](const crf::EpochRecord& r) { log_sink << epoch_line(r) << '\n' << std::flush; };

  io::LoadedModel out;
  out.kind = config.model_kind();
  out.config = echo;
  if (!config.is_neural()) {
    out.model = crf::train(train, valid, config.crf_config(), config.task, std::move(embeddings), on_epoch).model;
    return out;
  }
  neural::Architecture arch;
  arch.task = config.task;
  arch.inference = config.model == ModelType::kBilstmCrf ? neural::Inference::kCrf : neural::Inference::kSoftmax;
  neural::TrainConfig nc = config.neural_config();
  auto result = neural::train(train, valid, arch, std::move(*embeddings), nc, on_epoch);
  for (const auto& w : result.warnings) {
    err << "warning: " << w << '\n';
    log_sink << "# warning: " << w << '\n';
  }
  out.model = std::move(result.model);
  return out;
}

int cmd_stats(const std::string& corpus_path, bool csv, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const TagStats stats = tag_statistics(read_corpus(corpus_path, false));
    out << (csv ? format_stats_csv(stats) : format_stats_table(stats));
    return kExitOk;
  });
}

int cmd_validate(const std::string& corpus_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Corpus corpus = read_corpus(corpus_path, false);
    bool clean = true;
    for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
      const auto labels = corpus.sentences[s].ner_labels();
      for (const auto& v : validate_bioes(labels)) {
        out << "sentence=" << s << " pos=" << v.position << " rule=" << to_string(v.rule) << '\n';
        clean = false;
      }
    }
    return clean ? kExitOk : kExitData;
  });
}

int cmd_train(const std::string& config_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = RunConfig::load(config_path);
    config.validate();
    std::ofstream log_file(config.resolved_log(), std::ios::binary | std::ios::trunc);
    if (!log_file) throw ConfigError("cannot write log '" + config.resolved_log() + "'");
    TeeBuf tee(log_file.rdbuf(), err.rdbuf());
    std::ostream log_sink(&tee);

    const io::LoadedModel model = run_training(config, log_sink, err);
    io::save_model(config.model_out, model);

    if (!config.test.empty()) {
      const Corpus test = read_corpus(config.test, true);
      std::vector<std::vector<NerLabel>> gold;
      std::vector<std::vector<NerLabel>> pred;
      for (const auto& s : test.sentences) {
        gold.push_back(s.ner_labels());
        pred.push_back(predict(model.model, s.surfaces()).ner);
      }
      out << metrics::format_report_text(metrics::evaluate(gold, pred));
    }
    return kExitOk;
  });
}

int cmd_tag(const std::string& model_path, const std::string& input_path, std::ostream& out,
            std::ostream& err) {
  return guarded(err, [&] {
    const io::LoadedModel model = io::load_model(model_path);
    for (const auto& surfaces : read_surfaces(read_text(input_path))) {
      const neural::Prediction p = predict(model.model, surfaces);
      for (std::size_t i = 0; i < surfaces.size(); ++i) {
        out << surfaces[i] << '\t' << p.ner[i].str();
        if (p.pos) out << '\t' << to_string((*p.pos)[i]);
        out << '\n';
      }
      out << '\n';
    }
    return kExitOk;
  });
}

int cmd_eval(const std::string& model_path, const std::string& gold_path, bool csv, std::ostream& out,
             std::ostream& err) {
  return guarded(err, [&] {
    const io::LoadedModel model = io::load_model(model_path);
    const Corpus corpus = read_corpus(gold_path, true);
    std::vector<std::vector<NerLabel>> gold;
    std::vector<std::vector<NerLabel>> pred;
    for (const auto& s : corpus.sentences) {
      gold.push_back(s.ner_labels());
      pred.push_back(predict(model.model, s.surfaces()).ner);
    }
    const auto report = metrics::evaluate(gold, pred);
    out << (csv ? metrics::format_report_csv(report) : metrics::format_report_text(report));
    return kExitOk;
  });
}

int cmd_dump_features(const std::string& corpus_path, std::size_t sentence, std::size_t position,
                      const std::string& model_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Corpus corpus = read_corpus(corpus_path, false);
    if (sentence >= corpus.sentences.size())
      throw ConfigError("sentence " + std::to_string(sentence) + " out of range (corpus has " +
                        std::to_string(corpus.sentences.size()) + ")");
    const Sentence& s = corpus.sentences[sentence];
    if (position >= s.tokens.size())
      throw ConfigError("position " + std::to_string(position) + " out of range (sentence has " +
                        std::to_string(s.tokens.size()) + " tokens)");
    std::optional<io::LoadedModel> model;
    const EmbeddingTable* table = nullptr;
    if (!model_path.empty()) {
      model = io::load_model(model_path);
      const auto* crf_model = std::get_if<crf::CrfModel>(&model->model);
      if (!crf_model) throw ConfigError("dump-features needs a crf model");
      if (crf_model->embeddings) table = &*crf_model->embeddings;
    }
    const auto surfaces = s.surfaces();
    char buf[40];
    for (const auto& f : crf::extract_features(surfaces, position, table)) {
      std::snprintf(buf, sizeof buf, "%.17g", f.value);
      out << f.key << '\t' << buf << '\n';
    }
    return kExitOk;
  });
}

}  // namespace seql

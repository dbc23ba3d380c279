#include "seql/crf.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "seql/chain.hpp"
#include "seql/error.hpp"
#include "seql/random.hpp"
#include "seql/utf8.hpp"

namespace seql {

std::string_view to_string(Task task) { return task == Task::kSingle ? "single" : "joint"; }

namespace crf {

namespace {

bool is_digit(char32_t c) { return (c >= U'0' && c <= U'9') || (c >= 0x1040 && c <= 0x1049); }

}  // namespace

FeatureVector extract_features(std::span<const std::string> surfaces, std::size_t i,
                               const EmbeddingTable* embeddings) {
  const std::size_t n = surfaces.size();
  if (i >= n) throw Error("extract_features: position out of range");
  const std::string& word = surfaces[i];
  const std::u32string chars = utf8::decode(word);

  FeatureVector out;
  auto add = [&](std::string key) { out.push_back({std::move(key), 1.0}); };
  add("w0=" + word);
  add(i == 0 ? std::string("BOS") : "w-1=" + surfaces[i - 1]);
  add(i + 1 == n ? std::string("EOS") : "w+1=" + surfaces[i + 1]);
  if (i == 0) add("first_word");
  if (i + 1 == n) add("last_word");
  for (std::size_t k = 1; k <= 3; ++k) {
    if (chars.size() < k) break;
    add("pre" + std::to_string(k) + "=" + utf8::encode(std::u32string_view(chars).substr(0, k)));
    add("suf" + std::to_string(k) + "=" +
        utf8::encode(std::u32string_view(chars).substr(chars.size() - k)));
  }
  if (word.find('-') != std::string::npos) add("has_hyphen");
  if (std::any_of(chars.begin(), chars.end(), is_digit)) add("has_digit");
  add("pos_bucket=" + std::to_string(10 * i / n));
  if (embeddings) {
    const Eigen::VectorXd v = embeddings->embed(word);
    for (Eigen::Index k = 0; k < v.size(); ++k)
      if (v[k] != 0.0) out.push_back({"emb" + std::to_string(k), v[k]});
  }
  std::sort(out.begin(), out.end(), [](const Feature& a, const Feature& b) { return a.key < b.key; });
  return out;
}

FeatureVector extract_features(const Sentence& sentence, std::size_t i, bool use_embeddings,
                               const EmbeddingTable* embeddings) {
  if (use_embeddings && !embeddings) throw Error("embedding features requested without a table");
  const auto surfaces = sentence.surfaces();
  return extract_features(surfaces, i, use_embeddings ? embeddings : nullptr);
}

std::string ChainLabel::str() const {
  std::string out = ner.str();
  if (pos) {
    out += '|';
    out += to_string(*pos);
  }
  return out;
}

ChainLabel ChainLabel::parse(std::string_view text) {
  ChainLabel out;
  const auto bar = text.find('|');
  const auto ner = NerLabel::parse(text.substr(0, bar));
  if (!ner) throw Error("bad chain label '" + std::string(text) + "'");
  out.ner = *ner;
  if (bar != std::string_view::npos) {
    const auto pos = parse_pos(text.substr(bar + 1));
    if (!pos) throw Error("bad chain label '" + std::string(text) + "'");
    out.pos = *pos;
  }
  return out;
}

IndexedFeatures CrfModel::index(std::span<const FeatureVector> features) const {
  IndexedFeatures out(features.size());
  for (std::size_t t = 0; t < features.size(); ++t) {
    for (const auto& f : features[t]) {
      const auto it = feature_index.find(f.key);
      if (it != feature_index.end()) out[t].push_back({it->second, f.value});
    }
  }
  return out;
}

IndexedFeatures CrfModel::featurize(std::span<const std::string> surfaces) const {
  std::vector<FeatureVector> fv;
  fv.reserve(surfaces.size());
  const EmbeddingTable* table = embeddings ? &*embeddings : nullptr;
  for (std::size_t i = 0; i < surfaces.size(); ++i) fv.push_back(extract_features(surfaces, i, table));
  return index(fv);
}

std::optional<std::size_t> CrfModel::label_index(const ChainLabel& label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels.begin());
}

std::vector<std::size_t> CrfModel::gold_path(const Sentence& sentence) const {
  std::vector<std::size_t> path;
  path.reserve(sentence.size());
  for (const auto& t : sentence.tokens) {
    ChainLabel l{t.ner, task == Task::kJoint ? std::optional<PosTag>(t.pos) : std::nullopt};
    const auto idx = label_index(l);
    if (!idx) throw Error("label " + l.str() + " is not in the model's label set");
    path.push_back(*idx);
  }
  return path;
}

Eigen::MatrixXd emissions(const CrfModel& model, const IndexedFeatures& features) {
  const auto T = static_cast<Eigen::Index>(features.size());
  const auto L = static_cast<Eigen::Index>(model.label_count());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(T, L);
  for (Eigen::Index t = 0; t < T; ++t)
    for (const auto& f : features[static_cast<std::size_t>(t)])
      out.row(t) += f.value * model.state_weights.row(f.id);
  return out;
}

Gradient nll_and_gradient(const CrfModel& model, const IndexedFeatures& features,
                          std::span<const std::size_t> gold, double l2) {
  if (gold.size() != features.size()) throw ShapeError("gold length does not match sentence");
  const std::size_t L = model.label_count();
  for (std::size_t y : gold)
    if (y >= L) throw Error("gold label index outside the label set");

  const Eigen::MatrixXd scores = emissions(model, features);
  const chain::Marginals m = chain::marginals(scores, model.transitions);

  Gradient g;
  g.nll = m.log_partition - chain::path_score(scores, model.transitions, gold);
  g.transitions = Eigen::MatrixXd::Zero(model.transitions.rows(), model.transitions.cols());
  for (std::size_t t = 0; t < features.size(); ++t) {
    Eigen::VectorXd residual = m.node.row(static_cast<Eigen::Index>(t)).transpose();
    residual[static_cast<Eigen::Index>(gold[t])] -= 1.0;
    for (const auto& f : features[t]) {
      auto [it, inserted] = g.state.try_emplace(f.id, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(L)));
      it->second += f.value * residual;
    }
    if (t > 0) {
      g.transitions += m.edge[t - 1];
      g.transitions(static_cast<Eigen::Index>(gold[t - 1]), static_cast<Eigen::Index>(gold[t])) -= 1.0;
    }
  }
  if (l2 > 0.0) {
    for (auto& [id, row] : g.state) {
      const auto w = model.state_weights.row(id).transpose();
      g.nll += 0.5 * l2 * w.squaredNorm();
      row += l2 * w;
    }
    g.nll += 0.5 * l2 * model.transitions.squaredNorm();
    g.transitions += l2 * model.transitions;
  }
  return g;
}

Gradient nll_and_gradient(const CrfModel& model, const Sentence& sentence, double l2) {
  return nll_and_gradient(model, model.featurize(sentence.surfaces()), model.gold_path(sentence), l2);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (l2 < 0.0) throw ConfigError("l2 must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
}

namespace {

struct Example {
  IndexedFeatures features;
  std::vector<std::size_t> gold;
};

double chain_nll(const CrfModel& model, const Example& ex) {
  const Eigen::MatrixXd scores = emissions(model, ex.features);
  return chain::log_partition(scores, model.transitions) -
         chain::path_score(scores, model.transitions, ex.gold);
}

std::vector<ChainLabel> build_labels(const Corpus& corpus, Task task) {
  std::vector<ChainLabel> labels;
  if (task == Task::kSingle) {
    for (std::size_t i = 0; i < NerLabel::kCount; ++i) labels.push_back({NerLabel::from_index(i), {}});
    return labels;
  }
  std::vector<bool> seen(NerLabel::kCount * kNumPosTags, false);
  for (const auto& s : corpus.sentences)
    for (const auto& t : s.tokens) seen[t.ner.index() * kNumPosTags + index_of(t.pos)] = true;
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (seen[i])
      labels.push_back({NerLabel::from_index(i / kNumPosTags), pos_from_index(i % kNumPosTags)});
  return labels;
}

}  // namespace

TrainResult train(const Corpus& train_corpus, const Corpus& valid, const TrainConfig& config,
                  Task task, std::optional<EmbeddingTable> embeddings, const EpochCallback& on_epoch) {
  config.validate();
  if (train_corpus.sentences.empty()) throw Error("cannot train on an empty corpus");

  TrainResult result;
  CrfModel& model = result.model;
  model.task = task;
  model.labels = build_labels(train_corpus, task);
  if (embeddings) {
    embeddings->set_mode(EmbeddingMode::kFrozen);
    model.embeddings = std::move(embeddings);
  }
  const EmbeddingTable* table = model.embeddings ? &*model.embeddings : nullptr;

  std::vector<Example> train_set;
  train_set.reserve(train_corpus.sentences.size());
  for (const auto& sentence : train_corpus.sentences) {
    const auto surfaces = sentence.surfaces();
    Example ex;
    ex.features.resize(surfaces.size());
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
      for (const auto& f : extract_features(surfaces, i, table)) {
        auto [it, inserted] = model.feature_index.try_emplace(
            f.key, static_cast<std::uint32_t>(model.feature_names.size()));
        if (inserted) model.feature_names.push_back(f.key);
        ex.features[i].push_back({it->second, f.value});
      }
    }
    ex.gold = model.gold_path(sentence);
    train_set.push_back(std::move(ex));
  }
  const auto L = static_cast<Eigen::Index>(model.label_count());
  model.state_weights = RowMatrix::Zero(static_cast<Eigen::Index>(model.feature_names.size()), L);
  model.transitions = Eigen::MatrixXd::Zero(L, L);

  // Joint validation sentences carrying a (NER, POS) pair never seen in
  // training have zero probability under the model and are left out.
  std::vector<Example> valid_set;
  for (const auto& sentence : valid.sentences) {
    Example ex;
    bool usable = true;
    for (const auto& t : sentence.tokens) {
      const auto idx = model.label_index(
          {t.ner, task == Task::kJoint ? std::optional<PosTag>(t.pos) : std::nullopt});
      if (!idx) {
        usable = false;
        break;
      }
      ex.gold.push_back(*idx);
    }
    if (!usable) continue;
    ex.features = model.featurize(sentence.surfaces());
    valid_set.push_back(std::move(ex));
  }

  const std::size_t N = train_set.size();
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.seed);

  RowMatrix best_state = model.state_weights;
  Eigen::MatrixXd best_trans = model.transitions;
  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    if (config.shuffle) shuffle(std::span<std::size_t>(order), rng);
    double train_loss = 0.0;
    for (std::size_t begin = 0; begin < N; begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(N, begin + static_cast<std::size_t>(config.batch_size));
      std::map<std::uint32_t, Eigen::VectorXd> state;
      Eigen::MatrixXd trans = Eigen::MatrixXd::Zero(L, L);
      for (std::size_t k = begin; k < end; ++k) {
        const Example& ex = train_set[order[k]];
        Gradient g = nll_and_gradient(model, ex.features, ex.gold, 0.0);
        train_loss += g.nll;
        for (auto& [id, row] : g.state) {
          auto [it, inserted] = state.try_emplace(id, std::move(row));
          if (!inserted) it->second += row;
        }
        trans += g.transitions;
      }
      const double decay =
          config.learning_rate * config.l2 * static_cast<double>(end - begin) / static_cast<double>(N);
      if (decay > 0.0) {
        model.state_weights *= (1.0 - decay);
        model.transitions *= (1.0 - decay);
      }
      for (const auto& [id, row] : state)
        model.state_weights.row(id) -= config.learning_rate * row.transpose();
      model.transitions -= config.learning_rate * trans;
    }
    train_loss /= static_cast<double>(N);

    const std::vector<Example>& monitor = valid_set.empty() ? train_set : valid_set;
    double valid_loss = 0.0;
    for (const auto& ex : monitor) valid_loss += chain_nll(model, ex);
    valid_loss /= static_cast<double>(monitor.size());

    EpochRecord rec{epoch, train_loss, valid_loss,
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()};
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (valid_loss < best_loss) {
      best_loss = valid_loss;
      best_state = model.state_weights;
      best_trans = model.transitions;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  model.state_weights = std::move(best_state);
  model.transitions = std::move(best_trans);
  return result;
}

std::vector<std::size_t> decode(const CrfModel& model, std::span<const std::string> surfaces) {
  if (surfaces.empty()) return {};
  return chain::viterbi(emissions(model, model.featurize(surfaces)), model.transitions).path;
}

std::vector<NerLabel> tag(const CrfModel& model, std::span<const std::string> surfaces) {
  std::vector<NerLabel> out;
  for (std::size_t idx : decode(model, surfaces)) out.push_back(model.labels[idx].ner);
  return out;
}

std::vector<NerLabel> tag(const CrfModel& model, const Sentence& sentence) {
  const auto surfaces = sentence.surfaces();
  return tag(model, surfaces);
}

}  // namespace crf
}  // namespace seql

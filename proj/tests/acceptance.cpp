// Acceptance runner: one PASS/FAIL line per criterion, exit 1 if any fails.
// Criterion 9 needs SEQL_MYNER_DIR pointing at train/valid/test CoNLL files
// and is skipped without it.

#include <unistd.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "seql/chain.hpp"
#include "seql/commands.hpp"
#include "seql/crf.hpp"
#include "seql/error.hpp"
#include "seql/metrics.hpp"
#include "seql/model_io.hpp"
#include "seql/neural.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace seql;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;
using Seqs = std::vector<std::vector<NerLabel>>;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

struct Outcome {
  bool pass = true;
  bool skipped = false;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, lo, hi);
  return m;
}

Seqs gold_of(const Corpus& c) {
  Seqs out;
  for (const auto& s : c.sentences) out.push_back(s.ner_labels());
  return out;
}

std::vector<std::string> vocabulary(const Corpus& c) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& s : c.sentences)
    for (const auto& t : s.tokens)
      if (seen.insert(t.surface).second) out.push_back(t.surface);
  return out;
}

// ---------------------------------------------------------------------------

Outcome exact_inference() {
  Outcome o;
  Rng rng(2024);
  double z_err = 0, v_err = 0, m_err = 0;
  int path_mismatch = 0;
  for (int k = 0; k < 200; ++k) {
    const auto T = static_cast<Eigen::Index>(1 + uniform_index(rng, 5));
    const auto L = static_cast<Eigen::Index>(2 + uniform_index(rng, 3));
    const Eigen::MatrixXd e = random_matrix(rng, T, L, -2, 2);
    const Eigen::MatrixXd tr = random_matrix(rng, L, L, -2, 2);

    z_err = std::max(z_err, std::abs(chain::log_partition(e, tr) - oracle::log_partition(e, tr)));
    const auto best = oracle::best_path(e, tr);
    const auto vit = chain::viterbi(e, tr);
    v_err = std::max(v_err, std::abs(vit.score - best.score));
    if (best.unique && vit.path != best.path) ++path_mismatch;

    const auto fast = chain::marginals(e, tr);
    const auto slow = oracle::marginals(e, tr);
    m_err = std::max(m_err, (fast.node - slow.node).cwiseAbs().maxCoeff());
    for (std::size_t t = 0; t < slow.edge.size(); ++t)
      m_err = std::max(m_err, (fast.edge[t] - slow.edge[t]).cwiseAbs().maxCoeff());
  }
  o.require(z_err <= 1e-10, fmt("log Z error %.3g > 1e-10", z_err));
  o.require(v_err <= 1e-12, fmt("Viterbi score error %.3g > 1e-12", v_err));
  o.require(m_err <= 1e-9, fmt("marginal error %.3g > 1e-9", m_err));
  o.require(path_mismatch == 0, fmt("%d Viterbi paths differ from a unique optimum", path_mismatch));
  o.note(fmt("max errors logZ %.2g viterbi %.2g marginals %.2g", z_err, v_err, m_err));
  return o;
}

// ---------------------------------------------------------------------------

crf::CrfModel random_crf(Rng& rng, std::size_t L, std::size_t F) {
  crf::CrfModel m;
  for (std::size_t y = 0; y < L; ++y) m.labels.push_back({NerLabel::from_index(y), std::nullopt});
  for (std::size_t f = 0; f < F; ++f) {
    m.feature_names.push_back("f" + std::to_string(f));
    m.feature_index.emplace(m.feature_names.back(), static_cast<std::uint32_t>(f));
  }
  m.state_weights = random_matrix(rng, static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(L), -1, 1);
  m.transitions = random_matrix(rng, static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(L), -1, 1);
  return m;
}

double crf_gradient_error() {
  Rng rng(31);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t T = 1 + uniform_index(rng, 5);
    const std::size_t L = 2 + uniform_index(rng, 3);
    const std::size_t F = 12;
    crf::CrfModel m = random_crf(rng, L, F);
    crf::IndexedFeatures feats(T);
    for (std::uint32_t id = 0; id < F; ++id) feats[uniform_index(rng, T)].push_back({id, uniform(rng, -1.5, 1.5)});
    std::vector<std::size_t> gold(T);
    for (auto& g : gold) g = uniform_index(rng, L);
    const double l2 = trial % 2 ? 0.2 : 0.0;
    const auto g = crf::nll_and_gradient(m, feats, gold, l2);
    auto f = [&] { return crf::nll_and_gradient(m, feats, gold, l2).nll; };
    for (std::uint32_t id = 0; id < F; ++id) {
      const auto it = g.state.find(id);
      for (Eigen::Index y = 0; y < static_cast<Eigen::Index>(L); ++y) {
        const double a = it == g.state.end() ? 0.0 : it->second(y);
        worst = std::max(worst, std::abs(a - oracle::central_difference(f, m.state_weights(id, y), 1e-5)));
      }
    }
    for (Eigen::Index i = 0; i < m.transitions.size(); ++i)
      worst = std::max(worst, std::abs(g.transitions.data()[i] -
                                       oracle::central_difference(f, m.transitions.data()[i], 1e-5)));
  }
  return worst;
}

neural::Head random_head(Rng& rng, neural::Inference kind, int in, int K) {
  neural::Head h = neural::Head::zeros(kind, in, K);
  h.projection = random_matrix(rng, in, K, -1, 1);
  h.bias = random_matrix(rng, K, 1, -1, 1);
  if (kind == neural::Inference::kCrf) h.transitions = random_matrix(rng, K, K, -1, 1);
  return h;
}

// Worst relative error over every parameter of D=3, H=2, K=3 taggers.
double neural_gradient_error(int& checked) {
  using namespace neural;
  double worst = 0;
  checked = 0;
  auto check = [&](double a, double fd) {
    worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-5}));
    ++checked;
  };
  Rng rng(8);
  for (auto kind : {Inference::kSoftmax, Inference::kCrf})
    for (bool joint : {false, true})
      for (auto mode : {EmbeddingMode::kFrozen, EmbeddingMode::kFinetuned}) {
        EmbeddingConfig ec;
        ec.dim = 3;
        ec.bucket_count = 13;
        ec.seed = 3;
        NeuralTagger m;
        m.embeddings = init_random({"ab", "cd", "efg"}, ec);
        m.embeddings.word_vectors() *= 100.0;
        m.embeddings.buckets() *= 100.0;
        m.embeddings.set_mode(mode);
        m.forward = LstmParams::random(3, 2, rng);
        m.backward = LstmParams::random(3, 2, rng);
        m.forward.b = random_matrix(rng, 8, 1, -0.5, 0.5);
        m.backward.b = random_matrix(rng, 8, 1, -0.5, 0.5);
        m.ner = random_head(rng, kind, 4, 3);
        if (joint) m.pos = random_head(rng, kind, 4, 3);
        m.dropout = 0.0;

        Example ex;
        for (const char* w : {"ab", "zz", "efg"}) ex.tokens.push_back(m.embeddings.compose(w));
        ex.ner_gold = {2, 0, 1};
        if (joint) ex.pos_gold = {1, 2, 0};

        Gradients g = Gradients::zeros_like(m);
        accumulate_gradient(m, ex, 0.7, nullptr, 1.0, g);
        auto f = [&] { return sentence_loss(m, ex, 0.7).total; };
        auto sweep = [&](double* v, const double* a, Eigen::Index n) {
          for (Eigen::Index i = 0; i < n; ++i) check(a[i], oracle::central_difference(f, v[i], 1e-5));
        };
        for (auto [p, gp] : {std::pair{&m.forward, &g.forward}, {&m.backward, &g.backward}}) {
          sweep(p->W.data(), gp->W.data(), p->W.size());
          sweep(p->U.data(), gp->U.data(), p->U.size());
          sweep(p->b.data(), gp->b.data(), p->b.size());
        }
        auto head = [&](Head& h, const Head& gh) {
          sweep(h.projection.data(), gh.projection.data(), h.projection.size());
          sweep(h.bias.data(), gh.bias.data(), h.bias.size());
          if (h.kind == Inference::kCrf) sweep(h.transitions.data(), gh.transitions.data(), h.transitions.size());
        };
        head(m.ner, g.ner);
        if (m.pos) head(*m.pos, *g.pos);
        if (m.embeddings.trainable()) {
          auto rows = [&](RowMatrix& table, const std::map<std::size_t, Eigen::VectorXd>& grads) {
            for (Eigen::Index r = 0; r < table.rows(); ++r)
              for (Eigen::Index k = 0; k < table.cols(); ++k) {
                const auto it = grads.find(static_cast<std::size_t>(r));
                check(it == grads.end() ? 0.0 : it->second(k), oracle::central_difference(f, table(r, k), 1e-5));
              }
          };
          rows(m.embeddings.word_vectors(), g.word_rows);
          rows(m.embeddings.buckets(), g.bucket_rows);
        }
      }
  return worst;
}

Outcome gradient_checks() {
  Outcome o;
  const double crf_err = crf_gradient_error();
  int checked = 0;
  const double nn_err = neural_gradient_error(checked);
  o.require(crf_err <= 1e-6, fmt("CRF absolute error %.3g > 1e-6", crf_err));
  o.require(nn_err <= 1e-4, fmt("neural relative error %.3g > 1e-4", nn_err));
  o.note(fmt("CRF max abs %.2g, neural max rel %.2g over %d parameters", crf_err, nn_err, checked));
  return o;
}

// ---------------------------------------------------------------------------

Outcome initial_losses() {
  using namespace neural;
  Outcome o;
  const Corpus corpus = testing::synthetic_corpus(30, 77);
  Rng rng(5);
  EmbeddingConfig ec;
  ec.dim = 8;
  ec.bucket_count = 100;
  NeuralTagger m;
  m.embeddings = init_random(vocabulary(corpus), ec);
  m.forward = LstmParams::random(8, 6, rng);
  m.backward = LstmParams::random(8, 6, rng);
  double soft_err = 0, crf_err = 0;
  for (auto kind : {Inference::kSoftmax, Inference::kCrf}) {
    m.ner = Head::zeros(kind, 12, 25);
    for (const auto& s : corpus.sentences) {
      const double loss = sentence_loss(m, make_example(m, s), 1.0).ner;
      if (kind == Inference::kSoftmax)
        soft_err = std::max(soft_err, std::abs(loss - std::log(25.0)));
      else
        crf_err = std::max(crf_err, std::abs(loss - static_cast<double>(s.size()) * std::log(25.0)));
    }
  }
  o.require(soft_err <= 1e-6, fmt("softmax loss off ln 25 by %.3g", soft_err));
  o.require(crf_err <= 1e-6, fmt("CRF head loss off T ln 25 by %.3g", crf_err));

  double classical_err = 0;
  for (Task task : {Task::kSingle, Task::kJoint}) {
    crf::TrainConfig cc;
    cc.epochs = 1;
    auto model = crf::train(corpus, Corpus{}, cc, task, std::nullopt).model;
    model.state_weights.setZero();
    model.transitions.setZero();
    const double L = static_cast<double>(model.label_count());
    for (const auto& s : corpus.sentences)
      classical_err = std::max(classical_err, std::abs(crf::nll_and_gradient(model, s, 0.0).nll -
                                                       static_cast<double>(s.size()) * std::log(L)));
  }
  o.require(classical_err <= 1e-9, fmt("zero-weight CRF NLL off T ln L by %.3g", classical_err));
  o.note(fmt("max deviations %.2g / %.2g / %.2g", soft_err, crf_err, classical_err));
  return o;
}

// ---------------------------------------------------------------------------

double training_accuracy(const Corpus& c, const std::function<std::vector<NerLabel>(const Sentence&)>& tag) {
  Seqs pred;
  for (const auto& s : c.sentences) pred.push_back(tag(s));
  const Seqs gold = gold_of(c);
  return metrics::token_accuracy(gold, pred);
}

Outcome memorization() {
  Outcome o;
  const Corpus corpus = testing::synthetic_corpus(50, 1000);
  std::vector<std::string> summary;

  for (Task task : {Task::kSingle, Task::kJoint}) {
    crf::TrainConfig cc;
    cc.learning_rate = 0.5;
    cc.batch_size = 1;
    cc.l2 = 1e-4;
    cc.epochs = 50;
    cc.patience = 50;
    const auto r = crf::train(corpus, Corpus{}, cc, task, std::nullopt);
    const double acc = training_accuracy(corpus, [&](const Sentence& s) { return crf::tag(r.model, s); });
    summary.push_back(fmt("crf/%s %.4f", std::string(to_string(task)).c_str(), acc));
    o.require(acc >= 0.99, summary.back());
  }

  EmbeddingConfig ec;
  ec.dim = 32;
  ec.bucket_count = 5000;
  ec.seed = 11;
  const EmbeddingTable table = init_random(vocabulary(corpus), ec);
  for (auto inf : {neural::Inference::kSoftmax, neural::Inference::kCrf})
    for (Task task : {Task::kSingle, Task::kJoint}) {
      neural::TrainConfig nc;
      nc.hidden_size = 32;
      nc.batch_size = 4;
      nc.learning_rate = 0.01;
      nc.dropout = 0.0;
      nc.max_epochs = 50;
      nc.patience = 50;
      nc.seed = 11;
      const auto r = neural::train(corpus, Corpus{}, {inf, task}, table, nc);
      const double acc = training_accuracy(
          corpus, [&](const Sentence& s) { return neural::tag(r.model, s.surfaces()).ner; });
      summary.push_back(fmt("bilstm-%s/%s %.4f", std::string(to_string(inf)).c_str(),
                            std::string(to_string(task)).c_str(), acc));
      o.require(acc >= 0.99, summary.back());
    }
  if (o.pass)
    for (const auto& s : summary) o.note(s);
  return o;
}

// ---------------------------------------------------------------------------

struct SyntheticScores {
  double crf_weighted = 0, softmax_macro = 0, crf_macro = 0, joint_macro = 0;
};

SyntheticScores synthetic_run(std::uint64_t seed) {
  const Corpus train = testing::synthetic_corpus(2000, seed * 3 + 1);
  const Corpus valid = testing::synthetic_corpus(250, seed * 3 + 2);
  const Corpus test = testing::synthetic_corpus(250, seed * 3 + 3);
  const Seqs gold = gold_of(test);
  SyntheticScores s;

  crf::TrainConfig cc;
  cc.seed = seed;
  cc.patience = 3;
  const auto cr = crf::train(train, valid, cc, Task::kSingle, std::nullopt);
  Seqs pred;
  for (const auto& sent : test.sentences) pred.push_back(crf::tag(cr.model, sent));
  s.crf_weighted = metrics::evaluate(gold, pred).weighted_f1;

  EmbeddingConfig ec;
  ec.dim = 32;
  ec.bucket_count = 20000;
  ec.seed = seed;
  const EmbeddingTable table = init_random(vocabulary(train), ec);
  auto neural_macro = [&](neural::Inference inf, Task task) {
    neural::TrainConfig nc;
    nc.hidden_size = 32;
    nc.batch_size = 16;
    nc.learning_rate = 0.005;
    nc.dropout = 0.5;
    nc.patience = 3;
    nc.seed = seed;
    const auto r = neural::train(train, valid, {inf, task}, table, nc);
    Seqs p;
    for (const auto& sent : test.sentences) p.push_back(neural::tag(r.model, sent.surfaces()).ner);
    return metrics::evaluate(gold, p).macro_f1;
  };
  s.softmax_macro = neural_macro(neural::Inference::kSoftmax, Task::kSingle);
  s.crf_macro = neural_macro(neural::Inference::kCrf, Task::kSingle);
  s.joint_macro = neural_macro(neural::Inference::kCrf, Task::kJoint);
  return s;
}

Outcome synthetic_experiment() {
  Outcome o;
  SyntheticScores mean;
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  for (auto seed : seeds) {
    const auto s = synthetic_run(seed);
    std::printf("  seed %llu: crf weighted F1 %.4f, macro F1 softmax %.4f crf %.4f joint %.4f\n",
                static_cast<unsigned long long>(seed), s.crf_weighted, s.softmax_macro, s.crf_macro,
                s.joint_macro);
    std::fflush(stdout);
    mean.crf_weighted += s.crf_weighted / 3;
    mean.softmax_macro += s.softmax_macro / 3;
    mean.crf_macro += s.crf_macro / 3;
    mean.joint_macro += s.joint_macro / 3;
  }
  o.require(mean.crf_weighted >= 0.95, fmt("CRF weighted F1 %.4f < 0.95", mean.crf_weighted));
  o.require(mean.crf_macro >= mean.softmax_macro,
            fmt("bilstm-crf macro %.4f < bilstm-softmax %.4f", mean.crf_macro, mean.softmax_macro));
  o.require(mean.joint_macro >= mean.crf_macro - 0.02,
            fmt("joint macro %.4f < single %.4f - 0.02", mean.joint_macro, mean.crf_macro));
  o.note(fmt("means: crf weighted %.4f, macro softmax %.4f crf %.4f joint %.4f", mean.crf_weighted,
             mean.softmax_macro, mean.crf_macro, mean.joint_macro));
  return o;
}

// ---------------------------------------------------------------------------

Outcome metrics_oracles() {
  Outcome o;
  Rng rng(99);
  double err = 0;
  for (int k = 0; k < 100; ++k) {
    Seqs gold, pred;
    std::vector<std::vector<int>> gi, pi;
    const std::size_t n = 1 + uniform_index(rng, 6);
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t len = 1 + uniform_index(rng, 12);
      gold.push_back(testing::random_labels(rng, len));
      pred.push_back(testing::random_labels(rng, len));
      // Mostly correct predictions, so that tp counts are not negligible.
      for (std::size_t i = 0; i < len; ++i)
        if (uniform01(rng) < 0.6) pred.back()[i] = gold.back()[i];
      gi.emplace_back();
      pi.emplace_back();
      for (std::size_t i = 0; i < len; ++i) {
        gi.back().push_back(static_cast<int>(gold.back()[i].index()));
        pi.back().push_back(static_cast<int>(pred.back()[i].index()));
      }
    }
    const auto r = metrics::evaluate(gold, pred);
    const auto ref = oracle::per_label(gi, pi);
    err = std::max(err, std::abs(r.accuracy - oracle::accuracy(gi, pi)));
    err = std::max(err, std::abs(r.macro_f1 - oracle::macro_f1(ref)));
    err = std::max(err, std::abs(r.weighted_f1 - oracle::weighted_f1(ref)));
    if (r.per_label.size() != ref.size()) err = 1;
    for (const auto& [label, prf] : r.per_label) {
      const auto it = ref.find(static_cast<int>(label.index()));
      if (it == ref.end() || it->second.support != prf.support) {
        err = 1;
        continue;
      }
      err = std::max({err, std::abs(prf.precision - it->second.precision),
                      std::abs(prf.recall - it->second.recall), std::abs(prf.f1 - it->second.f1)});
    }
  }
  o.require(err <= 1e-12, fmt("oracle deviation %.3g > 1e-12", err));

  const NerLabel a(Position::kS, Entity::kLoc), b(Position::kS, Entity::kPer);
  const Seqs gold{{a, a, b}}, pred{{a, b, b}};
  const double macro = metrics::evaluate(gold, pred).macro_f1;
  o.require(macro == 2.0 / 3.0, fmt("hand example macro F1 %.17g != 2/3", macro));
  o.note(fmt("max deviation %.2g, hand example %.17g", err, macro));
  return o;
}

// ---------------------------------------------------------------------------

Outcome corpus_properties() {
  Outcome o;
  Rng rng(7);
  int round_trip_failures = 0;
  for (int k = 0; k < 100; ++k) {
    const Corpus c = testing::random_corpus(rng, 1 + uniform_index(rng, 8), 12);
    if (!(parse_conll(write_conll(c), true) == c)) ++round_trip_failures;
  }
  o.require(round_trip_failures == 0, fmt("%d CoNLL round-trips differ", round_trip_failures));

  const auto L = [](const char* s) { return *NerLabel::parse(s); };
  struct Fixture {
    std::vector<NerLabel> labels;
    ViolationRule rule;
    std::size_t position;
  };
  const std::vector<Fixture> catalogue{
      {{L("I-PER"), L("E-PER")}, ViolationRule::kContinuationAtStart, 0},
      {{L("E-LOC")}, ViolationRule::kContinuationAtStart, 0},
      {{L("O"), L("I-ORG"), L("E-ORG")}, ViolationRule::kOrphanContinuation, 1},
      {{L("S-LOC"), L("E-LOC")}, ViolationRule::kOrphanContinuation, 1},
      {{L("B-PER"), L("O")}, ViolationRule::kUnclosedEntity, 0},
      {{L("B-PER"), L("I-PER"), L("S-PER")}, ViolationRule::kUnclosedEntity, 1},
      {{L("B-DATE"), L("E-NUM")}, ViolationRule::kUnclosedEntity, 0},
      {{L("O"), L("B-TIME")}, ViolationRule::kOpenAtEnd, 1},
      {{L("B-ORG"), L("I-ORG")}, ViolationRule::kOpenAtEnd, 1},
  };
  std::set<ViolationRule> rules_seen;
  int missed = 0;
  for (const auto& f : catalogue) {
    const auto v = validate_bioes(f.labels);
    const bool hit = std::find(v.begin(), v.end(), Violation{f.position, f.rule}) != v.end();
    if (hit) rules_seen.insert(f.rule);
    else ++missed;
  }
  o.require(missed == 0 && rules_seen.size() == 4, fmt("validator missed %d catalogue fixtures", missed));

  int identity_failures = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto labels = testing::random_valid_labels(rng, 1 + uniform_index(rng, 20));
    if (!validate_bioes(labels).empty() ||
        encode_entities(extract_entities(labels), labels.size()) != labels)
      ++identity_failures;
  }
  o.require(identity_failures == 0, fmt("%d entity round-trips differ", identity_failures));

  const Corpus sample = parse_conll(testing::sample_conll(), true);
  const std::vector<EntitySpan> expected{{Entity::kLoc, 0, 0}, {Entity::kOrg, 2, 3}, {Entity::kOrg, 5, 6}};
  o.require(extract_entities(sample.sentences.at(0).ner_labels()) == expected, "sample sentence spans differ");
  o.note(fmt("100 round-trips, %zu catalogue fixtures, 1000 entity round-trips", catalogue.size()));
  return o;
}

// ---------------------------------------------------------------------------

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / fmt("seql_acceptance_%d", static_cast<int>(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name, std::ios::binary) << text;
    return (path / name).string();
  }
};

std::string strip_seconds(const std::string& log) {
  std::string out;
  std::istringstream in(log);
  for (std::string line; std::getline(in, line);) out += line.substr(0, line.find(" seconds=")) + "\n";
  return out;
}

std::string vectors_text(const std::vector<std::string>& words, int dim, std::uint64_t seed) {
  Rng rng(seed);
  std::ostringstream os;
  os.precision(17);
  os << words.size() << ' ' << dim << '\n';
  for (const auto& w : words) {
    os << w;
    for (int k = 0; k < dim; ++k) os << ' ' << uniform(rng, -0.5, 0.5);
    os << '\n';
  }
  return os.str();
}

bool same_predictions(const io::Model& a, const io::Model& b, const Corpus& probe) {
  for (const auto& s : probe.sentences) {
    const auto pa = predict(a, s.surfaces());
    const auto pb = predict(b, s.surfaces());
    if (pa.ner != pb.ner || pa.pos != pb.pos) return false;
    // Scores must agree bit for bit, not just their argmax.
    if (std::holds_alternative<neural::NeuralTagger>(a)) {
      const auto& na = std::get<neural::NeuralTagger>(a);
      const auto& nb = std::get<neural::NeuralTagger>(b);
      const auto ea = neural::encode(na, s.surfaces());
      const auto eb = neural::encode(nb, s.surfaces());
      if (neural::head_scores(na, na.ner, ea) != neural::head_scores(nb, nb.ner, eb)) return false;
    } else {
      const auto& ca = std::get<crf::CrfModel>(a);
      const auto& cb = std::get<crf::CrfModel>(b);
      if (crf::emissions(ca, ca.featurize(s.surfaces())) != crf::emissions(cb, cb.featurize(s.surfaces())))
        return false;
    }
  }
  return true;
}

Outcome determinism() {
  Outcome o;
  TempDir dir;
  const Corpus train = testing::synthetic_corpus(40, 501);
  const Corpus valid = testing::synthetic_corpus(10, 502);
  const Corpus probe = testing::synthetic_corpus(15, 503);
  const std::string train_path = dir.write("train.conll", write_conll(train));
  const std::string valid_path = dir.write("valid.conll", write_conll(valid));
  const std::string vectors_path = dir.write("vectors.txt", vectors_text(vocabulary(train), 8, 4));

  const std::vector<std::string> setups{
      "model = crf\nepochs = 5\n",
      "model = crf\ntask = joint\nepochs = 5\n",
      "model = crf\nembedding = pretrained-frozen\ndim = 8\nvectors = " + vectors_path + "\nepochs = 5\n",
      "model = bilstm-softmax\nembedding = random\ndim = 8\nbucket_count = 200\nhidden_size = 6\nbatch_size = 8\nmax_epochs = 3\n",
      "model = bilstm-crf\ntask = joint\nembedding = random\ndim = 8\nbucket_count = 200\nhidden_size = 6\nbatch_size = 8\nmax_epochs = 3\n",
      "model = bilstm-crf\nembedding = pretrained-frozen\nvectors = " + vectors_path +
          "\ndim = 8\nhidden_size = 6\nbatch_size = 8\nmax_epochs = 3\n",
      "model = bilstm-softmax\ntask = joint\nembedding = pretrained-finetuned\nvectors = " + vectors_path +
          "\ndim = 8\nhidden_size = 6\nbatch_size = 8\nmax_epochs = 3\n",
  };

  // Identical config and seed, trained twice through the train command.
  int byte_mismatch = 0, log_mismatch = 0, command_failures = 0;
  std::size_t fixtures = 0, round_trip_failures = 0;
  for (std::size_t k = 0; k < setups.size(); ++k) {
    const std::string model_path = (dir.path / fmt("m%zu.seql", k)).string();
    const std::string config = setups[k] + "train = " + train_path + "\nvalid = " + valid_path +
                               "\nmodel_out = " + model_path + "\nseed = " + std::to_string(40 + k) + "\n";
    const std::string config_path = dir.write(fmt("run%zu.cfg", k), config);
    std::string bytes[2], logs[2];
    for (int run = 0; run < 2; ++run) {
      std::ostringstream out, err;
      if (cmd_train(config_path, out, err) != kExitOk) {
        ++command_failures;
        o.note(fmt("setup %zu: %s", k, err.str().c_str()));
      }
      if (fs::exists(model_path)) bytes[run] = io::read_file(model_path);
      if (fs::exists(model_path + ".log")) logs[run] = strip_seconds(io::read_file(model_path + ".log"));
    }
    byte_mismatch += bytes[0] != bytes[1];
    log_mismatch += logs[0] != logs[1];
  }
  o.require(command_failures == 0, fmt("%d training commands failed", command_failures));
  o.require(byte_mismatch == 0, fmt("%d model files differ between identical runs", byte_mismatch));
  o.require(log_mismatch == 0, fmt("%d logs differ between identical runs", log_mismatch));

  // Save/load round-trips: every saved model above plus seed variations, 20 in all.
  for (std::uint64_t seed = 0; fixtures < 20; ++seed) {
    const std::size_t k = seed % setups.size();
    const std::string model_path = (dir.path / fmt("f%llu.seql", static_cast<unsigned long long>(seed))).string();
    const std::string config = setups[k] + "train = " + train_path + "\nmodel_out = " + model_path +
                               "\nseed = " + std::to_string(100 + seed) + "\n";
    std::ostringstream sink, err;
    const auto trained = run_training(RunConfig::parse(config), sink, err);
    io::save_model(model_path, trained);
    const auto loaded = io::load_model(model_path);
    io::save_model(model_path + ".again", loaded);
    const bool ok = same_predictions(trained.model, loaded.model, probe) &&
                    io::read_file(model_path) == io::read_file(model_path + ".again");
    round_trip_failures += !ok;
    ++fixtures;
  }
  o.require(round_trip_failures == 0, fmt("%zu of %zu save/load round-trips changed predictions or bytes",
                                          round_trip_failures, fixtures));
  o.note(fmt("%zu configs trained twice, %zu save/load fixtures", setups.size(), fixtures));
  return o;
}

// ---------------------------------------------------------------------------

// Published tag counts of the real corpus, per split: rows LOC DATE NUM PER
// ORG TIME with columns B I E S, then O.
struct SplitCounts {
  const char* name;
  std::array<std::array<std::size_t, 4>, 6> counts;
  std::size_t outside;
};

const SplitCounts kPublished[] = {
    {"train",
     {{{9395, 4015, 9395, 991}, {599, 388, 599, 699}, {151, 32, 151, 3882}, {281, 16, 281, 1911},
       {308, 208, 308, 184}, {143, 92, 143, 118}}},
     167547},
    {"valid",
     {{{1182, 503, 1182, 124}, {66, 38, 66, 88}, {15, 0, 15, 475}, {34, 0, 34, 223}, {48, 39, 48, 21},
       {9, 0, 9, 0}}},
     21324},
    {"test",
     {{{1151, 517, 1151, 155}, {72, 40, 72, 75}, {20, 0, 20, 456}, {27, 0, 27, 231}, {44, 40, 44, 22},
       {13, 0, 13, 0}}},
     20967},
};

std::optional<fs::path> find_split(const fs::path& dir, const std::string& name) {
  for (const char* ext : {".conll", ".txt", ""}) {
    const fs::path p = dir / (name + ext);
    if (fs::is_regular_file(p)) return p;
  }
  return std::nullopt;
}

Outcome real_corpus() {
  Outcome o;
  const char* env = std::getenv("SEQL_MYNER_DIR");
  if (env == nullptr || !fs::is_directory(env)) {
    o.skipped = true;
    o.note("SEQL_MYNER_DIR not set");
    return o;
  }
  for (const auto& split : kPublished) {
    const auto path = find_split(env, split.name);
    if (!path) {
      o.require(false, std::string("missing split ") + split.name);
      continue;
    }
    TagStats expected;
    for (std::size_t e = 0; e < 6; ++e)
      for (std::size_t p = 0; p < 4; ++p) expected.counts[e][p] = split.counts[e][p];
    expected.outside = split.outside;

    // The stats command's CSV must match the published grid row for row.
    std::ostringstream out, err;
    const int code = cmd_stats(path->string(), true, out, err);
    o.require(code == kExitOk, std::string(split.name) + ": stats failed: " + err.str());
    std::istringstream got(out.str()), want(format_stats_csv(expected));
    int rows = 0;
    for (std::string g, w; std::getline(want, w);) {
      if (!std::getline(got, g) || g != w) {
        o.require(false, std::string(split.name) + ": expected '" + w + "', got '" + g + "'");
        break;
      }
      ++rows;
    }
    o.note(fmt("%s: %d rows compared", split.name, rows));
  }
  return o;
}

}  // namespace

// With arguments, runs only the listed criterion numbers.
int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "exact inference matches brute force", 10, exact_inference},
      {2, "gradients match central differences", 30, gradient_checks},
      {3, "closed-form initial losses", 0, initial_losses},
      {4, "memorization of a 50-sentence corpus", 300, memorization},
      {5, "synthetic-language experiment", 1200, synthetic_experiment},
      {6, "metrics match naive oracles", 0, metrics_oracles},
      {7, "corpus properties", 0, corpus_properties},
      {8, "determinism and persistence", 0, determinism},
      {9, "real corpus tag counts", 0, real_corpus},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = seconds_since(t0);
    if (c.budget_seconds > 0) o.require(secs < c.budget_seconds, fmt("took %.1f s, budget %.0f s", secs, c.budget_seconds));
    const char* verdict = o.skipped ? "SKIP" : o.pass ? "PASS" : "FAIL";
    failures += !o.skipped && !o.pass;
    std::printf("criterion %d %s: %s (%.1f s) %s\n", c.id, verdict, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

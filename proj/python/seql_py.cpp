#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <tuple>

#include "seql/chain.hpp"
#include "seql/commands.hpp"
#include "seql/corpus.hpp"
#include "seql/error.hpp"
#include "seql/metrics.hpp"
#include "seql/model_io.hpp"
#include "seql/run_config.hpp"

namespace py = pybind11;
using namespace seql;

namespace {

using PyToken = std::tuple<std::string, std::string, std::string>;
using PySentence = std::vector<PyToken>;

std::vector<PySentence> to_python(const Corpus& corpus) {
  std::vector<PySentence> out;
  for (const auto& s : corpus.sentences) {
    PySentence sent;
    for (const auto& t : s.tokens) sent.emplace_back(t.surface, std::string(to_string(t.pos)), t.ner.str());
    out.push_back(std::move(sent));
  }
  return out;
}

NerLabel label_of(const std::string& text) {
  const auto label = NerLabel::parse(text);
  if (!label) throw py::value_error("unknown NER label '" + text + "'");
  return *label;
}

std::vector<NerLabel> labels_of(const std::vector<std::string>& texts) {
  std::vector<NerLabel> out;
  for (const auto& t : texts) out.push_back(label_of(t));
  return out;
}

std::vector<std::vector<NerLabel>> sequences_of(const std::vector<std::vector<std::string>>& texts) {
  std::vector<std::vector<NerLabel>> out;
  for (const auto& s : texts) out.push_back(labels_of(s));
  return out;
}

Corpus from_python(const std::vector<PySentence>& sentences) {
  Corpus c;
  for (const auto& s : sentences) {
    Sentence sent;
    for (const auto& [surface, pos, ner] : s) {
      const auto tag = parse_pos(pos);
      if (!tag) throw py::value_error("unknown POS tag '" + pos + "'");
      sent.tokens.push_back({surface, *tag, label_of(ner)});
    }
    c.sentences.push_back(std::move(sent));
  }
  return c;
}

py::dict report_dict(const metrics::EvalReport& r) {
  py::dict per_label;
  for (const auto& [label, prf] : r.per_label) {
    py::dict d;
    d["precision"] = prf.precision;
    d["recall"] = prf.recall;
    d["f1"] = prf.f1;
    d["support"] = prf.support;
    per_label[py::str(label.str())] = d;
  }
  py::dict out;
  out["accuracy"] = r.accuracy;
  out["macro_f1"] = r.macro_f1;
  out["weighted_f1"] = r.weighted_f1;
  out["per_label"] = per_label;
  return out;
}

class PyModel {
 public:
  explicit PyModel(io::LoadedModel model) : model_(std::move(model)) {}

  static PyModel load(const std::string& path) { return PyModel(io::load_model(path)); }
  void save(const std::string& path) const { io::save_model(path, model_); }

  std::string kind() const { return std::string(io::to_string(model_.kind)); }
  const std::string& config() const { return model_.config; }

  py::tuple tag(const std::vector<std::string>& surfaces) const {
    const auto p = predict(model_.model, surfaces);
    std::vector<std::string> ner;
    for (auto l : p.ner) ner.push_back(l.str());
    if (!p.pos) return py::make_tuple(ner, py::none());
    std::vector<std::string> pos;
    for (auto t : *p.pos) pos.emplace_back(to_string(t));
    return py::make_tuple(ner, pos);
  }

 private:
  io::LoadedModel model_;
};

}  // namespace

PYBIND11_MODULE(_seql, m) {
  m.doc() = "Sequence labelling for Myanmar NER: corpora, CRF and BiLSTM taggers, metrics.";

  // Translators run newest first, so the base class goes first.
  auto base = py::register_exception<Error>(m, "SeqlError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  m.def(
      "parse_conll",
      [](const std::string& text, bool strict) { return to_python(parse_conll(text, strict)); },
      py::arg("text"), py::arg("strict") = true,
      "Sentences as lists of (surface, pos, ner) tuples.");
  m.def(
      "write_conll", [](const std::vector<PySentence>& s) { return write_conll(from_python(s)); },
      py::arg("sentences"));
  m.def(
      "validate_bioes",
      [](const std::vector<std::string>& labels) {
        std::vector<std::pair<std::size_t, std::string>> out;
        for (const auto& v : validate_bioes(labels_of(labels)))
          out.emplace_back(v.position, std::string(to_string(v.rule)));
        return out;
      },
      py::arg("labels"));
  m.def(
      "extract_entities",
      [](const std::vector<std::string>& labels) {
        std::vector<std::tuple<std::string, std::size_t, std::size_t>> out;
        for (const auto& s : extract_entities(labels_of(labels)))
          out.emplace_back(std::string(to_string(s.entity)), s.start, s.end);
        return out;
      },
      py::arg("labels"), "(entity, start, end) spans, end inclusive.");
  m.def(
      "tag_statistics",
      [](const std::string& text) {
        const TagStats st = tag_statistics(parse_conll(text, false));
        py::dict out;
        for (std::size_t e = 0; e < kNumEntities; ++e) {
          py::dict row;
          for (std::size_t p = 0; p < kNumPositions; ++p)
            row[py::str(std::string(1, to_char(static_cast<Position>(p))))] = st.counts[e][p];
          out[py::str(std::string(to_string(static_cast<Entity>(e))))] = row;
        }
        out["O"] = st.outside;
        out["tokens"] = st.tokens;
        out["sentences"] = st.sentences;
        return out;
      },
      py::arg("text"));

  m.def("log_partition", &chain::log_partition, py::arg("emissions"), py::arg("transitions"));
  m.def(
      "viterbi",
      [](const Eigen::MatrixXd& e, const Eigen::MatrixXd& t) {
        auto r = chain::viterbi(e, t);
        return py::make_tuple(r.path, r.score);
      },
      py::arg("emissions"), py::arg("transitions"), "(path, score)");
  m.def(
      "marginals",
      [](const Eigen::MatrixXd& e, const Eigen::MatrixXd& t) {
        auto r = chain::marginals(e, t);
        return py::make_tuple(r.node, r.edge, r.log_partition);
      },
      py::arg("emissions"), py::arg("transitions"), "(node, edge list, log Z)");

  m.def(
      "evaluate",
      [](const std::vector<std::vector<std::string>>& gold, const std::vector<std::vector<std::string>>& pred) {
        const auto g = sequences_of(gold);
        const auto p = sequences_of(pred);
        return report_dict(metrics::evaluate(g, p));
      },
      py::arg("gold"), py::arg("pred"));

  py::class_<PyModel>(m, "Model")
      .def_static("load", &PyModel::load, py::arg("path"))
      .def("save", &PyModel::save, py::arg("path"))
      .def_property_readonly("kind", &PyModel::kind)
      .def_property_readonly("config", &PyModel::config)
      .def("tag", &PyModel::tag, py::arg("surfaces"), "(ner labels, pos tags or None)");

  m.def(
      "train",
      [](const std::string& config_text) {
        const RunConfig config = RunConfig::parse(config_text);
        config.validate();
        std::ostringstream log, err;
        io::LoadedModel model;
        {
          py::gil_scoped_release release;
          model = run_training(config, log, err);
        }
        return py::make_tuple(PyModel(std::move(model)), log.str());
      },
      py::arg("config"), "Trains from config text; returns (model, training log).");
}

#include "seql/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "seql/error.hpp"

namespace seql::metrics {

namespace {

void check_shapes(Sequences gold, Sequences pred) {
  if (gold.size() != pred.size())
    throw Error("gold has " + std::to_string(gold.size()) + " sentences, predictions have " +
                std::to_string(pred.size()));
  for (std::size_t s = 0; s < gold.size(); ++s)
    if (gold[s].size() != pred[s].size())
      throw Error("length mismatch in sentence " + std::to_string(s) + ": gold " +
                  std::to_string(gold[s].size()) + ", predicted " + std::to_string(pred[s].size()));
}

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

double token_accuracy(Sequences gold, Sequences pred) {
  check_shapes(gold, pred);
  std::size_t total = 0;
  std::size_t correct = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    for (std::size_t i = 0; i < gold[s].size(); ++i) correct += gold[s][i] == pred[s][i];
    total += gold[s].size();
  }
  if (total == 0) throw Error("token_accuracy: no tokens");
  return static_cast<double>(correct) / static_cast<double>(total);
}

std::map<NerLabel, Counts> label_counts(Sequences gold, Sequences pred) {
  check_shapes(gold, pred);
  std::map<NerLabel, Counts> out;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    for (std::size_t i = 0; i < gold[s].size(); ++i) {
      const NerLabel g = gold[s][i];
      const NerLabel p = pred[s][i];
      if (g == p) {
        ++out[g].tp;
      } else {
        ++out[g].fn;
        ++out[p].fp;
      }
    }
  }
  return out;
}

Prf prf_from_counts(const Counts& c) {
  Prf out;
  out.precision = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
  out.recall = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
  out.f1 = ratio(2.0 * out.precision * out.recall, out.precision + out.recall);
  out.support = c.support();
  return out;
}

std::map<NerLabel, Prf> prf_from_counts(const std::map<NerLabel, Counts>& counts) {
  std::map<NerLabel, Prf> out;
  for (const auto& [label, c] : counts) out.emplace(label, prf_from_counts(c));
  return out;
}

std::map<NerLabel, Prf> per_label_prf(Sequences gold, Sequences pred) {
  return prf_from_counts(label_counts(gold, pred));
}

double macro_f1(const std::map<NerLabel, Prf>& per_label) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [label, prf] : per_label) {
    if (prf.support == 0) continue;
    sum += prf.f1;
    ++n;
  }
  if (n == 0) throw Error("macro_f1: no label has gold support");
  return sum / static_cast<double>(n);
}

double weighted_f1(const std::map<NerLabel, Prf>& per_label) {
  double sum = 0.0;
  std::size_t support = 0;
  for (const auto& [label, prf] : per_label) {
    sum += static_cast<double>(prf.support) * prf.f1;
    support += prf.support;
  }
  if (support == 0) throw Error("weighted_f1: no label has gold support");
  return sum / static_cast<double>(support);
}

Tagwise tagwise_from(const std::map<NerLabel, Prf>& per_label) {
  Tagwise out;
  for (const auto& [label, prf] : per_label) {
    if (prf.support == 0) continue;
    if (label.is_outside()) {
      out.outside = prf.f1;
    } else {
      out.cells[static_cast<std::size_t>(label.entity())][static_cast<std::size_t>(label.position())] =
          prf.f1;
    }
  }
  return out;
}

Tagwise tagwise_report(Sequences gold, Sequences pred) { return tagwise_from(per_label_prf(gold, pred)); }

EvalReport evaluate(Sequences gold, Sequences pred) {
  EvalReport r;
  r.accuracy = token_accuracy(gold, pred);
  r.per_label = per_label_prf(gold, pred);
  r.macro_f1 = macro_f1(r.per_label);
  r.weighted_f1 = weighted_f1(r.per_label);
  r.tagwise = tagwise_from(r.per_label);
  return r;
}

std::string format_report_text(const EvalReport& report) {
  std::ostringstream os;
  os << "# " << kMacroConvention << '\n';
  os << "Acc.      " << fmt(report.accuracy) << '\n';
  os << "F1-Wt.    " << fmt(report.weighted_f1) << '\n';
  os << "F1-Macro. " << fmt(report.macro_f1) << '\n';
  os << '\n';
  char buf[96];
  std::snprintf(buf, sizeof buf, "%-6s %8s %8s %8s %8s\n", "Tags", "B", "I", "E", "S");
  os << buf;
  auto cell = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("-"); };
  for (std::size_t e = 0; e < kNumEntities; ++e) {
    const auto& row = report.tagwise.cells[e];
    std::snprintf(buf, sizeof buf, "%-6s %8s %8s %8s %8s\n",
                  std::string(to_string(static_cast<Entity>(e))).c_str(), cell(row[0]).c_str(),
                  cell(row[1]).c_str(), cell(row[2]).c_str(), cell(row[3]).c_str());
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-6s %8s %8s %8s %8s\n", "O", cell(report.tagwise.outside).c_str(), "-",
                "-", "-");
  os << buf;
  return os.str();
}

std::string format_report_csv(const EvalReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "label,precision,recall,f1,support\n";
  for (const auto& [label, prf] : report.per_label)
    os << label.str() << ',' << prf.precision << ',' << prf.recall << ',' << prf.f1 << ','
       << prf.support << '\n';
  os << "accuracy,macro_f1,weighted_f1\n";
  os << report.accuracy << ',' << report.macro_f1 << ',' << report.weighted_f1 << '\n';
  return os.str();
}

}  // namespace seql::metrics

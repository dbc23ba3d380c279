#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seql/corpus.hpp"

namespace seql::metrics {

// Token-level evaluation. Gold and predicted label sequences are paired
// sentence by sentence; a length mismatch throws an Error naming the
// sentence index.

using Sequences = std::span<const std::vector<NerLabel>>;

double token_accuracy(Sequences gold, Sequences pred);

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  std::size_t support() const { return tp + fn; }
  Counts& operator+=(const Counts& o) {
    tp += o.tp, fp += o.fp, fn += o.fn;
    return *this;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

// Per label, over every label that occurs in gold or predictions.
std::map<NerLabel, Counts> label_counts(Sequences gold, Sequences pred);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

// Any 0/0 ratio is taken as 0.
Prf prf_from_counts(const Counts& counts);
std::map<NerLabel, Prf> prf_from_counts(const std::map<NerLabel, Counts>& counts);

std::map<NerLabel, Prf> per_label_prf(Sequences gold, Sequences pred);

// Unweighted mean of F1 over labels with gold support > 0. Throws if there is none.
double macro_f1(const std::map<NerLabel, Prf>& per_label);

// Support-weighted mean of F1. Throws if total support is zero.
double weighted_f1(const std::map<NerLabel, Prf>& per_label);

// F1 per (entity, position) and for O; cells with zero gold support are empty.
struct Tagwise {
  std::array<std::array<std::optional<double>, kNumPositions>, kNumEntities> cells{};
  std::optional<double> outside;
};

Tagwise tagwise_report(Sequences gold, Sequences pred);
Tagwise tagwise_from(const std::map<NerLabel, Prf>& per_label);

struct EvalReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::map<NerLabel, Prf> per_label;
  Tagwise tagwise;
};

EvalReport evaluate(Sequences gold, Sequences pred);

// Describes how zero-support labels and 0/0 ratios are handled.
inline constexpr const char* kMacroConvention =
    "macro F1 averages labels with gold support > 0; 0/0 precision, recall, or F1 counts as 0";

// Accuracy, weighted F1, and macro F1 (in that order), then the tag-wise grid.
std::string format_report_text(const EvalReport& report);

// "label,precision,recall,f1,support" rows, then "accuracy,macro_f1,weighted_f1"
// with its values.
std::string format_report_csv(const EvalReport& report);

}  // namespace seql::metrics

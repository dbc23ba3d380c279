#include "seql/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "seql/error.hpp"
#include "seql/utf8.hpp"

namespace seql {

namespace {

constexpr std::array<std::string_view, kNumPosTags> kPosNames = {
    "abb", "adj", "adv", "conj", "fw", "int", "n", "num",
    "part", "ppm", "pron", "punc", "sb", "tn", "v"};

constexpr std::array<std::string_view, kNumEntities> kEntityNames = {
    "LOC", "DATE", "NUM", "PER", "ORG", "TIME"};

constexpr std::array<char, kNumPositions> kPositionChars = {'B', 'I', 'E', 'S'};

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  if (line.find('\t') != std::string_view::npos) {
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    return fields;
  }
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    if (i == line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ') ++i;
    fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

// Calls fn(line_number, line) for each line, with any trailing '\r' removed.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(++line_no, line);
    start = end + 1;
  }
}

bool surface_ok(std::string_view s) {
  return !s.empty() && s.find_first_of(" \t\n\r") == std::string_view::npos;
}

}  // namespace

std::optional<PosTag> parse_pos(std::string_view text) {
  for (std::size_t i = 0; i < kPosNames.size(); ++i)
    if (kPosNames[i] == text) return static_cast<PosTag>(i);
  return std::nullopt;
}

std::string_view to_string(PosTag tag) { return kPosNames[index_of(tag)]; }
std::string_view to_string(Entity entity) { return kEntityNames[static_cast<std::size_t>(entity)]; }
char to_char(Position position) { return kPositionChars[static_cast<std::size_t>(position)]; }

NerLabel NerLabel::from_index(std::size_t index) {
  if (index >= kCount) throw Error("NER label index out of range: " + std::to_string(index));
  if (index == 0) return outside();
  return NerLabel(static_cast<Position>((index - 1) % 4), static_cast<Entity>((index - 1) / 4));
}

std::optional<NerLabel> NerLabel::parse(std::string_view text) {
  if (text == "O") return outside();
  if (text.size() < 3 || text[1] != '-') return std::nullopt;
  const auto pos_it = std::find(kPositionChars.begin(), kPositionChars.end(), text[0]);
  if (pos_it == kPositionChars.end()) return std::nullopt;
  const auto ent_it = std::find(kEntityNames.begin(), kEntityNames.end(), text.substr(2));
  if (ent_it == kEntityNames.end()) return std::nullopt;
  return NerLabel(static_cast<Position>(pos_it - kPositionChars.begin()),
                  static_cast<Entity>(ent_it - kEntityNames.begin()));
}

std::string NerLabel::str() const {
  if (is_outside()) return "O";
  std::string out(1, to_char(position()));
  out += '-';
  out += to_string(entity());
  return out;
}

std::vector<NerLabel> Sentence::ner_labels() const {
  std::vector<NerLabel> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.ner);
  return out;
}

std::vector<PosTag> Sentence::pos_tags() const {
  std::vector<PosTag> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.pos);
  return out;
}

std::vector<std::string> Sentence::surfaces() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.surface);
  return out;
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

Corpus parse_conll(std::string_view text, bool strict, std::string name) {
  Corpus corpus;
  corpus.name = std::move(name);
  Sentence current;

  auto flush = [&] {
    if (current.tokens.empty()) return;
    if (strict) {
      const auto violations = validate_bioes(current.ner_labels());
      if (!violations.empty()) {
        const auto& v = violations.front();
        throw ValidationError(corpus.sentences.size(), v.position,
                              std::string("BIOES violation: ") + std::string(to_string(v.rule)));
      }
    }
    corpus.sentences.push_back(std::move(current));
    current = Sentence{};
  };

  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (is_blank(line)) {
      flush();
      return;
    }
    const auto fields = split_fields(line);
    if (fields.size() != 3)
      throw ParseError(line_no, "expected 3 fields, found " + std::to_string(fields.size()));
    if (!surface_ok(fields[0])) throw ParseError(line_no, "empty or malformed surface");
    if (!utf8::is_valid(fields[0])) throw ParseError(line_no, "surface is not valid UTF-8");
    const auto pos = parse_pos(fields[1]);
    if (!pos) throw TagError(line_no, "unknown POS tag '" + std::string(fields[1]) + "'");
    const auto ner = NerLabel::parse(fields[2]);
    if (!ner) throw TagError(line_no, "unknown NER label '" + std::string(fields[2]) + "'");
    current.tokens.push_back(Token{std::string(fields[0]), *pos, *ner});
  });
  flush();
  return corpus;
}

std::string write_conll(const Corpus& corpus) {
  std::string out;
  for (const auto& sentence : corpus.sentences) {
    for (const auto& t : sentence.tokens) {
      out += t.surface;
      out += '\t';
      out += to_string(t.pos);
      out += '\t';
      out += t.ner.str();
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

std::vector<std::vector<std::string>> read_surfaces(std::string_view text) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> current;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (is_blank(line)) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
      return;
    }
    const auto fields = split_fields(line);
    if (fields.empty() || !surface_ok(fields[0])) throw ParseError(line_no, "malformed token line");
    if (!utf8::is_valid(fields[0])) throw ParseError(line_no, "surface is not valid UTF-8");
    current.emplace_back(fields[0]);
  });
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::string_view to_string(ViolationRule rule) {
  switch (rule) {
    case ViolationRule::kContinuationAtStart: return "continuation_at_start";
    case ViolationRule::kOrphanContinuation: return "orphan_continuation";
    case ViolationRule::kUnclosedEntity: return "unclosed_entity";
    case ViolationRule::kOpenAtEnd: return "open_at_end";
  }
  return "unknown";
}

std::vector<Violation> validate_bioes(std::span<const NerLabel> labels) {
  std::vector<Violation> out;
  const auto opens = [](NerLabel l) {
    return !l.is_outside() && (l.position() == Position::kB || l.position() == Position::kI);
  };
  const auto continues = [](NerLabel l) {
    return !l.is_outside() && (l.position() == Position::kI || l.position() == Position::kE);
  };
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const NerLabel cur = labels[i];
    if (continues(cur)) {
      if (i == 0) {
        out.push_back({i, ViolationRule::kContinuationAtStart});
        continue;
      }
      const NerLabel prev = labels[i - 1];
      if (!opens(prev) || prev.entity() != cur.entity()) {
        out.push_back({i, ViolationRule::kOrphanContinuation});
        continue;
      }
    }
    if (opens(cur)) {
      if (i + 1 == labels.size()) {
        out.push_back({i, ViolationRule::kOpenAtEnd});
        continue;
      }
      const NerLabel next = labels[i + 1];
      if (!continues(next) || next.entity() != cur.entity())
        out.push_back({i, ViolationRule::kUnclosedEntity});
    }
  }
  return out;
}

std::vector<EntitySpan> extract_entities(std::span<const NerLabel> labels) {
  if (const auto v = validate_bioes(labels); !v.empty())
    throw ValidationError(0, v.front().position,
                          "label sequence is not BIOES well-formed; run validate_bioes first");
  std::vector<EntitySpan> spans;
  std::size_t start = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const NerLabel l = labels[i];
    if (l.is_outside()) continue;
    switch (l.position()) {
      case Position::kS: spans.push_back({l.entity(), i, i}); break;
      case Position::kB: start = i; break;
      case Position::kE: spans.push_back({l.entity(), start, i}); break;
      case Position::kI: break;
    }
  }
  return spans;
}

std::vector<NerLabel> encode_entities(std::span<const EntitySpan> spans, std::size_t length) {
  std::vector<NerLabel> labels(length, NerLabel::outside());
  for (const auto& s : spans) {
    if (s.start > s.end || s.end >= length) throw Error("entity span out of range");
    for (std::size_t i = s.start; i <= s.end; ++i)
      if (!labels[i].is_outside()) throw Error("overlapping entity spans");
    if (s.start == s.end) {
      labels[s.start] = NerLabel(Position::kS, s.entity);
      continue;
    }
    labels[s.start] = NerLabel(Position::kB, s.entity);
    for (std::size_t i = s.start + 1; i < s.end; ++i) labels[i] = NerLabel(Position::kI, s.entity);
    labels[s.end] = NerLabel(Position::kE, s.entity);
  }
  return labels;
}

TagStats tag_statistics(const Corpus& corpus) {
  TagStats stats;
  stats.sentences = corpus.sentences.size();
  for (const auto& sentence : corpus.sentences) {
    for (const auto& t : sentence.tokens) {
      ++stats.tokens;
      if (t.ner.is_outside()) {
        ++stats.outside;
      } else {
        ++stats.counts[static_cast<std::size_t>(t.ner.entity())]
                      [static_cast<std::size_t>(t.ner.position())];
      }
    }
  }
  return stats;
}

std::string format_stats_table(const TagStats& stats) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-6s %9s %9s %9s %9s\n", "Tags", "B", "I", "E", "S");
  os << buf;
  for (std::size_t e = 0; e < kNumEntities; ++e) {
    std::snprintf(buf, sizeof buf, "%-6s %9zu %9zu %9zu %9zu\n", kEntityNames[e].data(),
                  stats.counts[e][0], stats.counts[e][1], stats.counts[e][2], stats.counts[e][3]);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-6s %9zu %9s %9s %9s\n", "O", stats.outside, "-", "-", "-");
  os << buf;
  os << "tokens=" << stats.tokens << " sentences=" << stats.sentences << '\n';
  return os.str();
}

std::string format_stats_csv(const TagStats& stats) {
  std::ostringstream os;
  os << "entity,B,I,E,S\n";
  for (std::size_t e = 0; e < kNumEntities; ++e) {
    os << kEntityNames[e];
    for (std::size_t p = 0; p < kNumPositions; ++p) os << ',' << stats.counts[e][p];
    os << '\n';
  }
  os << "O," << stats.outside << ",,,\n";
  return os.str();
}

}  // namespace seql

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace seql {

// The 15-tag myPOS inventory, in alphabetical order.
enum class PosTag : std::uint8_t {
  kAbb, kAdj, kAdv, kConj, kFw, kInt, kN, kNum, kPart, kPpm, kPron, kPunc, kSb, kTn, kV
};

inline constexpr std::size_t kNumPosTags = 15;

std::optional<PosTag> parse_pos(std::string_view text);
std::string_view to_string(PosTag tag);
inline std::size_t index_of(PosTag tag) { return static_cast<std::size_t>(tag); }
inline PosTag pos_from_index(std::size_t i) { return static_cast<PosTag>(i); }

// Entity types in the row order used by the tag-count and tag-wise tables.
enum class Entity : std::uint8_t { kLoc, kDate, kNum, kPer, kOrg, kTime };
inline constexpr std::size_t kNumEntities = 6;

enum class Position : std::uint8_t { kB, kI, kE, kS };
inline constexpr std::size_t kNumPositions = 4;

std::string_view to_string(Entity entity);
char to_char(Position position);

// A BIOES label: either the outside marker "O" or "<position>-<entity>".
// Dense index 0 is O; entity labels follow as 1 + 4*entity + position.
class NerLabel {
 public:
  static constexpr std::size_t kCount = kNumEntities * kNumPositions + 1;

  constexpr NerLabel() = default;
  constexpr NerLabel(Position position, Entity entity)
      : index_(static_cast<std::uint8_t>(1 + static_cast<int>(entity) * 4 +
                                         static_cast<int>(position))) {}

  static constexpr NerLabel outside() { return NerLabel(); }
  static NerLabel from_index(std::size_t index);
  static std::optional<NerLabel> parse(std::string_view text);

  constexpr bool is_outside() const { return index_ == 0; }
  // Precondition: !is_outside().
  constexpr Position position() const { return static_cast<Position>((index_ - 1) % 4); }
  constexpr Entity entity() const { return static_cast<Entity>((index_ - 1) / 4); }
  constexpr std::size_t index() const { return index_; }

  std::string str() const;

  friend constexpr bool operator==(NerLabel, NerLabel) = default;
  friend constexpr auto operator<=>(NerLabel a, NerLabel b) { return a.index_ <=> b.index_; }

 private:
  std::uint8_t index_ = 0;
};

struct Token {
  std::string surface;
  PosTag pos = PosTag::kN;
  NerLabel ner;

  friend bool operator==(const Token&, const Token&) = default;
};

struct Sentence {
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  std::vector<NerLabel> ner_labels() const;
  std::vector<PosTag> pos_tags() const;
  std::vector<std::string> surfaces() const;

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct Corpus {
  std::string name;
  std::vector<Sentence> sentences;

  std::size_t token_count() const;

  // Equality compares sentences only; the name is a label for reports.
  friend bool operator==(const Corpus& a, const Corpus& b) { return a.sentences == b.sentences; }
};

// ---------------------------------------------------------------------------
// Reading and writing

// Lines are "surface<sep>pos<sep>ner" where sep is a single tab (when the
// line contains a tab) or a run of ASCII spaces. Blank lines end sentences.
// Throws ParseError / TagError with 1-based line numbers; in strict mode also
// ValidationError for the first BIOES violation.
Corpus parse_conll(std::string_view text, bool strict, std::string name = {});

// Tab separated, one blank line after each sentence.
std::string write_conll(const Corpus& corpus);

// Surface-only reader used for raw tagging input: the first column of each
// non-blank line is the token; extra columns are ignored.
std::vector<std::vector<std::string>> read_surfaces(std::string_view text);

// ---------------------------------------------------------------------------
// BIOES

enum class ViolationRule {
  kContinuationAtStart,   // I-X or E-X as the first label
  kOrphanContinuation,    // I-X or E-X not preceded by B-X or I-X
  kUnclosedEntity,        // B-X or I-X followed by something other than I-X/E-X
  kOpenAtEnd,             // B-X or I-X as the last label
};

std::string_view to_string(ViolationRule rule);

struct Violation {
  std::size_t position;
  ViolationRule rule;

  friend bool operator==(const Violation&, const Violation&) = default;
};

// At most one violation is reported per position; the check against the
// predecessor takes precedence over the check against the successor.
std::vector<Violation> validate_bioes(std::span<const NerLabel> labels);

struct EntitySpan {
  Entity entity;
  std::size_t start;
  std::size_t end;  // inclusive

  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
};

// Throws ValidationError if the sequence is not BIOES well-formed.
std::vector<EntitySpan> extract_entities(std::span<const NerLabel> labels);

// Inverse of extract_entities. Spans must be disjoint and inside [0, length).
std::vector<NerLabel> encode_entities(std::span<const EntitySpan> spans, std::size_t length);

// ---------------------------------------------------------------------------
// Statistics

struct TagStats {
  std::array<std::array<std::size_t, kNumPositions>, kNumEntities> counts{};
  std::size_t outside = 0;
  std::size_t tokens = 0;
  std::size_t sentences = 0;

  std::size_t count(Entity e, Position p) const {
    return counts[static_cast<std::size_t>(e)][static_cast<std::size_t>(p)];
  }
};

TagStats tag_statistics(const Corpus& corpus);
std::string format_stats_table(const TagStats& stats);
// Header "entity,B,I,E,S"; the O row leaves the positional columns empty.
std::string format_stats_csv(const TagStats& stats);

}  // namespace seql

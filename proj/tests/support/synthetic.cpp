#include "synthetic.hpp"

#include <array>
#include <string_view>

#include "seql/utf8.hpp"

namespace seql::testing {

namespace {

struct Word {
  std::string_view surface;
  PosTag pos;
};

constexpr std::array<Word, 30> kFunctionWords{{
    {"သည်", PosTag::kPpm},     {"ကို", PosTag::kPpm},      {"မှာ", PosTag::kPpm},
    {"တွင်", PosTag::kPpm},     {"၏", PosTag::kPpm},        {"သို့", PosTag::kPpm},
    {"မှ", PosTag::kPpm},       {"နှင့်", PosTag::kConj},    {"ပြီးတော့", PosTag::kConj},
    {"သွား", PosTag::kV},       {"လာ", PosTag::kV},         {"ရောက်", PosTag::kV},
    {"ဖွင့်", PosTag::kV},      {"ပြော", PosTag::kV},       {"တွေ့", PosTag::kV},
    {"ဝယ်", PosTag::kV},        {"ခဲ့", PosTag::kPart},     {"မည်", PosTag::kPart},
    {"ပြီ", PosTag::kPart},     {"သူ", PosTag::kPron},      {"ကျွန်တော်", PosTag::kPron},
    {"အလွန်", PosTag::kAdv},    {"ကောင်း", PosTag::kAdj},   {"လှ", PosTag::kAdj},
    {"အင်း", PosTag::kInt},     {"ကျောင်း", PosTag::kN},    {"စာအုပ်", PosTag::kN},
    {"တစ်", PosTag::kTn},       {"ok", PosTag::kFw},        {"ဒု", PosTag::kAbb},
}};

constexpr std::array<std::string_view, 4> kLocHeads{"မြို့", "ရွာ", "ပြည်နယ်", "တိုင်း"};
constexpr std::array<std::string_view, 4> kOrgHeads{"ကုမ္ပဏီ", "ဘဏ်", "တက္ကသိုလ်", "ဆေးရုံ"};
constexpr std::array<std::string_view, 4> kHonorifics{"ဦး", "ဒေါ်", "မောင်", "ဒေါက်တာ"};
constexpr std::array<std::string_view, 4> kMonths{"ဇန်နဝါရီ", "ဖေဖော်ဝါရီ", "မတ်", "ဧပြီ"};
constexpr std::array<std::string_view, 2> kDayParts{"မနက်", "ညနေ"};
constexpr std::array<std::string_view, 2> kMagnitudes{"သိန်း", "ထောင်"};

template <typename C>
auto pick(Rng& rng, const C& c) {
  return c[uniform_index(rng, c.size())];
}

std::string stem(Rng& rng) {
  // consonants U+1000..U+1020, optional vowel sign or asat ending
  static constexpr std::array<std::string_view, 6> kTails{"", "ာ", "ိ", "ု", "င်", "န်"};
  std::string out;
  const std::size_t syllables = 1 + uniform_index(rng, 3);
  for (std::size_t s = 0; s < syllables; ++s) {
    utf8::append(out, static_cast<char32_t>(0x1000 + uniform_index(rng, 0x21)));
    out += pick(rng, kTails);
  }
  return out;
}

std::string digits(Rng& rng, std::size_t max_len) {
  std::string out;
  const std::size_t n = 1 + uniform_index(rng, max_len);
  for (std::size_t i = 0; i < n; ++i) utf8::append(out, static_cast<char32_t>(0x1040 + uniform_index(rng, 10)));
  return out;
}

struct Piece {
  std::string surface;
  PosTag pos;
};

void emit(Sentence& s, const std::vector<Piece>& pieces, Entity e) {
  const std::size_t n = pieces.size();
  for (std::size_t i = 0; i < n; ++i) {
    Position p = Position::kI;
    if (n == 1) p = Position::kS;
    else if (i == 0) p = Position::kB;
    else if (i + 1 == n) p = Position::kE;
    s.tokens.push_back({pieces[i].surface, pieces[i].pos, NerLabel(p, e)});
  }
}

void entity(Rng& rng, Sentence& s) {
  const auto e = static_cast<Entity>(uniform_index(rng, kNumEntities));
  const bool single = uniform01(rng) < 0.35;
  std::vector<Piece> p;
  switch (e) {
    case Entity::kLoc:
      if (single) {
        p.push_back({stem(rng) + std::string(kLocHeads[0]), PosTag::kN});
      } else {
        for (std::size_t k = 1 + uniform_index(rng, 2); k > 0; --k) p.push_back({stem(rng), PosTag::kN});
        p.push_back({std::string(pick(rng, kLocHeads)), PosTag::kN});
      }
      break;
    case Entity::kOrg:
      if (single) {
        p.push_back({stem(rng) + std::string(kOrgHeads[1]), PosTag::kN});
      } else {
        for (std::size_t k = 1 + uniform_index(rng, 2); k > 0; --k) p.push_back({stem(rng), PosTag::kN});
        p.push_back({std::string(pick(rng, kOrgHeads)), PosTag::kN});
      }
      break;
    case Entity::kPer:
      if (single) {
        p.push_back({std::string(kHonorifics[0]) + stem(rng), PosTag::kN});
      } else {
        p.push_back({std::string(pick(rng, kHonorifics)), PosTag::kN});
        for (std::size_t k = 1 + uniform_index(rng, 2); k > 0; --k) p.push_back({stem(rng), PosTag::kN});
      }
      break;
    case Entity::kNum:
      p.push_back({digits(rng, 4), PosTag::kNum});
      if (!single) p.push_back({std::string(pick(rng, kMagnitudes)), PosTag::kNum});
      break;
    case Entity::kDate:
      if (single) {
        p.push_back({digits(rng, 4) + "ခုနှစ်", PosTag::kN});
      } else if (uniform01(rng) < 0.5) {
        p.push_back({digits(rng, 2), PosTag::kNum});
        p.push_back({"ရက်", PosTag::kN});
        p.push_back({std::string(pick(rng, kMonths)), PosTag::kN});
        p.push_back({digits(rng, 4), PosTag::kNum});
      } else {
        p.push_back({digits(rng, 4), PosTag::kNum});
        p.push_back({"ခုနှစ်", PosTag::kN});
      }
      break;
    case Entity::kTime:
      if (single) {
        p.push_back({digits(rng, 2) + "နာရီ", PosTag::kN});
      } else {
        if (uniform01(rng) < 0.5) p.push_back({std::string(pick(rng, kDayParts)), PosTag::kN});
        p.push_back({digits(rng, 2), PosTag::kNum});
        p.push_back({"နာရီ", PosTag::kN});
      }
      break;
  }
  emit(s, p, e);
}

void outside(Rng& rng, Sentence& s) {
  for (std::size_t k = 1 + uniform_index(rng, 3); k > 0; --k) {
    // open-class nouns that are not entities
    if (uniform01(rng) < 0.15) {
      s.tokens.push_back({stem(rng), PosTag::kN, NerLabel()});
    } else {
      const Word w = pick(rng, kFunctionWords);
      s.tokens.push_back({std::string(w.surface), w.pos, NerLabel()});
    }
  }
}

}  // namespace

Corpus synthetic_corpus(std::size_t sentences, std::uint64_t seed) {
  Rng rng(seed);
  Corpus c;
  c.name = "synthetic";
  for (std::size_t n = 0; n < sentences; ++n) {
    Sentence s;
    const std::size_t entities = uniform_index(rng, 4);
    if (uniform01(rng) < 0.5) outside(rng, s);
    for (std::size_t e = 0; e < entities; ++e) {
      entity(rng, s);
      outside(rng, s);
    }
    if (s.tokens.empty()) outside(rng, s);
    s.tokens.push_back({"။", PosTag::kPunc, NerLabel()});
    c.sentences.push_back(std::move(s));
  }
  return c;
}

std::vector<NerLabel> random_valid_labels(Rng& rng, std::size_t length) {
  std::vector<NerLabel> out;
  while (out.size() < length) {
    const std::size_t left = length - out.size();
    const double u = uniform01(rng);
    if (u < 0.4) {
      out.emplace_back();
      continue;
    }
    const auto e = static_cast<Entity>(uniform_index(rng, kNumEntities));
    if (u < 0.7 || left == 1) {
      out.emplace_back(Position::kS, e);
      continue;
    }
    const std::size_t span = 2 + uniform_index(rng, std::min<std::size_t>(left - 1, 4));
    out.emplace_back(Position::kB, e);
    for (std::size_t k = 2; k < span; ++k) out.emplace_back(Position::kI, e);
    out.emplace_back(Position::kE, e);
  }
  return out;
}

std::vector<NerLabel> random_labels(Rng& rng, std::size_t length) {
  std::vector<NerLabel> out;
  for (std::size_t i = 0; i < length; ++i) out.push_back(NerLabel::from_index(uniform_index(rng, NerLabel::kCount)));
  return out;
}

Corpus random_corpus(Rng& rng, std::size_t sentences, std::size_t max_length) {
  static constexpr std::array<std::string_view, 8> kSurfaces{"မန္တလေး", "၌",  "ရန်ကုန်", "a-b",
                                                             "၁၉၉၆",    "x1", "ခဲ့",     "Zz"};
  Corpus c;
  c.name = "random";
  for (std::size_t n = 0; n < sentences; ++n) {
    Sentence s;
    const auto labels = random_valid_labels(rng, 1 + uniform_index(rng, max_length));
    for (const auto& l : labels) {
      std::string surface(pick(rng, kSurfaces));
      if (uniform01(rng) < 0.5) surface += std::to_string(uniform_index(rng, 100));
      s.tokens.push_back({surface, pos_from_index(uniform_index(rng, kNumPosTags)), l});
    }
    c.sentences.push_back(std::move(s));
  }
  return c;
}

std::string sample_conll() {
  return "မန္တလေး\tn\tS-LOC\n"
         "၌\tppm\tO\n"
         "ရန်ကုန်\tn\tB-ORG\n"
         "တက္ကသိုလ်\tn\tE-ORG\n"
         "လက်အောက်ခံ\tn\tO\n"
         "ဆေးအတတ်သင်\tn\tB-ORG\n"
         "ကောလိပ်\tn\tE-ORG\n"
         "ရှိ\tv\tO\n"
         "ခဲ့\tpart\tO\n"
         "သည်\tppm\tO\n"
         "\n";
}

}  // namespace seql::testing

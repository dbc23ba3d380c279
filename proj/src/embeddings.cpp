#include "seql/embeddings.hpp"

#include <charconv>
#include <sstream>

#include "seql/error.hpp"
#include "seql/random.hpp"
#include "seql/utf8.hpp"

namespace seql {

std::string_view to_string(EmbeddingMode mode) {
  switch (mode) {
    case EmbeddingMode::kRandom: return "random";
    case EmbeddingMode::kFrozen: return "frozen";
    case EmbeddingMode::kFinetuned: return "finetuned";
  }
  return "unknown";
}

void EmbeddingConfig::validate() const {
  if (dim < 1) throw ConfigError("embedding dim must be >= 1");
  if (min_n < 1 || min_n > max_n) throw ConfigError("need 1 <= min_n <= max_n");
  if (bucket_count < 1) throw ConfigError("bucket_count must be >= 1");
}

std::vector<std::string> char_ngrams(std::string_view word, int min_n, int max_n) {
  if (word.empty()) throw Error("char_ngrams: empty word");
  std::u32string wrapped = U"<";
  wrapped += utf8::decode(word);
  wrapped += U'>';
  const std::size_t len = wrapped.size();
  std::vector<std::string> out;
  for (std::size_t start = 0; start < len; ++start) {
    for (int n = min_n; n <= max_n; ++n) {
      const auto un = static_cast<std::size_t>(n);
      if (start + un > len) break;
      if (start == 0 && un == len) continue;
      out.push_back(utf8::encode(std::u32string_view(wrapped).substr(start, un)));
    }
  }
  return out;
}

std::uint32_t fnv1a32(std::string_view bytes) {
  std::uint32_t h = 2166136261u;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 16777619u;
  }
  return h;
}

std::size_t hash_ngram(std::string_view ngram, std::size_t bucket_count) {
  return static_cast<std::size_t>(fnv1a32(ngram)) % bucket_count;
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> words, RowMatrix word_vectors,
                               RowMatrix buckets, int min_n, int max_n, bool subword_enabled,
                               EmbeddingMode mode)
    : words_(std::move(words)),
      word_vectors_(std::move(word_vectors)),
      buckets_(std::move(buckets)),
      min_n_(min_n),
      max_n_(max_n),
      subword_enabled_(subword_enabled),
      mode_(mode) {
  if (static_cast<std::size_t>(word_vectors_.rows()) != words_.size())
    throw ShapeError("word vector rows do not match vocabulary size");
  if (word_vectors_.cols() < 1) throw ShapeError("embedding dim must be >= 1");
  if (subword_enabled_ && (buckets_.rows() < 1 || buckets_.cols() != word_vectors_.cols()))
    throw ShapeError("subword composition needs a bucket matrix of matching dim");
  for (std::size_t i = 0; i < words_.size(); ++i)
    if (!index_.emplace(words_[i], i).second) throw Error("duplicate vocabulary entry: " + words_[i]);
  recompute_unk();
}

void EmbeddingTable::recompute_unk() {
  unk_ = Eigen::VectorXd::Zero(word_vectors_.cols());
  if (word_vectors_.rows() > 0)
    unk_ = word_vectors_.colwise().mean().transpose();
}

void EmbeddingTable::set_unk(Eigen::VectorXd unk) {
  if (unk.size() != word_vectors_.cols()) throw ShapeError("UNK vector has the wrong dim");
  unk_ = std::move(unk);
}

std::optional<std::size_t> EmbeddingTable::lookup(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingTable::set_buckets(RowMatrix buckets, int min_n, int max_n) {
  if (buckets.rows() < 1 || buckets.cols() != word_vectors_.cols())
    throw ShapeError("bucket matrix must have >= 1 row and the table's dim");
  buckets_ = std::move(buckets);
  min_n_ = min_n;
  max_n_ = max_n;
  subword_enabled_ = true;
}

Composition EmbeddingTable::compose(std::string_view word) const {
  Composition out;
  const auto row = lookup(word);
  if (row) out.rows.push_back({Composition::Source::kWord, *row});
  if (subword_enabled_ && !word.empty()) {
    for (const auto& g : char_ngrams(word, min_n_, max_n_))
      out.rows.push_back({Composition::Source::kBucket, hash_ngram(g, bucket_count())});
  }
  return out;
}

Eigen::VectorXd EmbeddingTable::embed(const Composition& composition) const {
  if (composition.is_unk()) return unk_;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim());
  for (const auto& r : composition.rows) {
    if (r.source == Composition::Source::kWord)
      sum += word_vectors_.row(static_cast<Eigen::Index>(r.index)).transpose();
    else
      sum += buckets_.row(static_cast<Eigen::Index>(r.index)).transpose();
  }
  return sum / static_cast<double>(composition.rows.size());
}

Eigen::VectorXd EmbeddingTable::embed(std::string_view word) const { return embed(compose(word)); }

EmbeddingTable load_text_vectors(std::istream& in, const EmbeddingConfig& config) {
  config.validate();
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw FormatError(1, "missing 'count dim' header");
  std::size_t count = 0;
  int dim = 0;
  {
    std::istringstream header(line);
    std::string extra;
    if (!(header >> count >> dim) || (header >> extra) || dim < 1)
      throw FormatError(1, "header must be 'count dim'");
  }
  if (dim != config.dim)
    throw FormatError(1, "vector dim " + std::to_string(dim) + " does not match configured dim " +
                             std::to_string(config.dim));

  std::vector<std::string> words;
  words.reserve(count);
  RowMatrix vectors(static_cast<Eigen::Index>(count), dim);
  std::unordered_map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(' ') == std::string::npos) continue;
    if (words.size() == count) throw FormatError(line_no, "more rows than the header count");
    std::size_t at = 0;
    auto next_field = [&]() -> std::string_view {
      while (at < line.size() && line[at] == ' ') ++at;
      const std::size_t start = at;
      while (at < line.size() && line[at] != ' ') ++at;
      return std::string_view(line).substr(start, at - start);
    };
    const std::string word(next_field());
    if (!seen.emplace(word, words.size()).second)
      throw FormatError(line_no, "duplicate word '" + word + "'");
    const auto row = static_cast<Eigen::Index>(words.size());
    for (int k = 0; k < dim; ++k) {
      const std::string_view f = next_field();
      double value = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), value);
      if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size())
        throw FormatError(line_no, "expected " + std::to_string(dim) + " floats after the word");
      vectors(row, k) = value;
    }
    if (!next_field().empty())
      throw FormatError(line_no, "more than " + std::to_string(dim) + " values in row");
    words.push_back(word);
  }
  if (words.size() != count)
    throw FormatError(line_no, "header declares " + std::to_string(count) + " rows, found " +
                                   std::to_string(words.size()));
  RowMatrix buckets = RowMatrix::Zero(static_cast<Eigen::Index>(config.bucket_count), dim);
  return EmbeddingTable(std::move(words), std::move(vectors), std::move(buckets), config.min_n,
                        config.max_n, false, EmbeddingMode::kFrozen);
}

EmbeddingTable init_random(const std::vector<std::string>& vocab, const EmbeddingConfig& config) {
  config.validate();
  if (vocab.empty()) throw Error("init_random: empty vocabulary");
  const double half = 0.5 / config.dim;
  Rng rng(config.seed);
  RowMatrix vectors(static_cast<Eigen::Index>(vocab.size()), config.dim);
  for (Eigen::Index r = 0; r < vectors.rows(); ++r)
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) vectors(r, c) = uniform(rng, -half, half);
  RowMatrix buckets(static_cast<Eigen::Index>(config.bucket_count), config.dim);
  for (Eigen::Index r = 0; r < buckets.rows(); ++r)
    for (Eigen::Index c = 0; c < buckets.cols(); ++c) buckets(r, c) = uniform(rng, -half, half);
  return EmbeddingTable(vocab, std::move(vectors), std::move(buckets), config.min_n, config.max_n,
                        true, EmbeddingMode::kRandom);
}

}  // namespace seql

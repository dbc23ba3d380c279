#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace seql {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class EmbeddingMode { kRandom, kFrozen, kFinetuned };

std::string_view to_string(EmbeddingMode mode);

struct EmbeddingConfig {
  int dim = 300;
  int min_n = 3;
  int max_n = 6;
  std::size_t bucket_count = 50'000;
  std::uint64_t seed = 0;

  // Throws ConfigError unless 1 <= min_n <= max_n, dim >= 1, bucket_count >= 1.
  void validate() const;
};

// Character n-grams of "<word>" over Unicode scalar values, ordered by start
// then length, excluding the whole wrapped word. Throws on an empty word.
std::vector<std::string> char_ngrams(std::string_view word, int min_n, int max_n);

std::uint32_t fnv1a32(std::string_view bytes);

// fnv1a32(ngram) mod bucket_count.
std::size_t hash_ngram(std::string_view ngram, std::size_t bucket_count);

// How a word's vector is assembled from table rows: the mean of the listed
// rows, or the fixed UNK vector when `rows` is empty.
struct Composition {
  enum class Source : std::uint8_t { kWord, kBucket };
  struct Row {
    Source source;
    std::size_t index;
  };
  std::vector<Row> rows;

  bool is_unk() const { return rows.empty(); }
};

// Word vectors plus hashed character-n-gram buckets. When subword
// composition is disabled (plain text vectors without a bucket table), known
// words map to their own row and unknown words to the UNK vector, the
// component-wise mean of all word vectors.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> words, RowMatrix word_vectors, RowMatrix buckets,
                 int min_n, int max_n, bool subword_enabled, EmbeddingMode mode);

  int dim() const { return static_cast<int>(word_vectors_.cols()); }
  std::size_t vocab_size() const { return words_.size(); }
  std::size_t bucket_count() const { return static_cast<std::size_t>(buckets_.rows()); }
  int min_n() const { return min_n_; }
  int max_n() const { return max_n_; }
  bool subword_enabled() const { return subword_enabled_; }
  EmbeddingMode mode() const { return mode_; }
  void set_mode(EmbeddingMode mode) { mode_ = mode; }
  bool trainable() const { return mode_ != EmbeddingMode::kFrozen; }

  const std::vector<std::string>& words() const { return words_; }
  std::optional<std::size_t> lookup(std::string_view word) const;

  const RowMatrix& word_vectors() const { return word_vectors_; }
  RowMatrix& word_vectors() { return word_vectors_; }
  const RowMatrix& buckets() const { return buckets_; }
  RowMatrix& buckets() { return buckets_; }
  const Eigen::VectorXd& unk() const { return unk_; }
  // The UNK vector is fixed at construction; persistence restores it verbatim.
  void set_unk(Eigen::VectorXd unk);

  // Installs a bucket matrix and turns subword composition on.
  void set_buckets(RowMatrix buckets, int min_n, int max_n);

  Composition compose(std::string_view word) const;
  Eigen::VectorXd embed(std::string_view word) const;
  Eigen::VectorXd embed(const Composition& composition) const;

 private:
  void recompute_unk();

  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  RowMatrix word_vectors_;
  RowMatrix buckets_;
  Eigen::VectorXd unk_;
  int min_n_ = 3;
  int max_n_ = 6;
  bool subword_enabled_ = false;
  EmbeddingMode mode_ = EmbeddingMode::kFrozen;
};

// Reads the "count dim" header followed by "word v1 ... v_dim" rows. The
// result has zero buckets, subword composition off, and mode kFrozen.
EmbeddingTable load_text_vectors(std::istream& in, const EmbeddingConfig& config);

// Word rows and buckets i.i.d. uniform in [-0.5/dim, 0.5/dim] from config.seed.
EmbeddingTable init_random(const std::vector<std::string>& vocab, const EmbeddingConfig& config);

}  // namespace seql

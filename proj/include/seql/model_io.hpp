#pragma once

// Binary model files.
//
//   "SEQL"  u32 version  u32 kind  u64 n + n bytes of config text
//   u64 block count, then per block:
//     u32 n + n bytes of name, u8 type
//     type 0 (float64): u32 rank, u64 dims[rank], f64 values (row-major)
//     type 1 (strings): u64 count, then count times u32 n + n bytes
//
// All integers and floats are little-endian. Blocks are written in a fixed
// order so that save -> load -> save reproduces the same bytes.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "seql/crf.hpp"
#include "seql/embeddings.hpp"
#include "seql/neural.hpp"

namespace seql::io {

inline constexpr std::uint32_t kFormatVersion = 1;

enum class ModelKind : std::uint32_t {
  kCrf = 1,
  kBilstmSoftmax = 2,
  kBilstmCrf = 3,
  kEmbeddingBuckets = 4,  // bucket sidecar for text vector files
};

std::string_view to_string(ModelKind kind);

struct Block {
  enum class Type : std::uint8_t { kFloat64 = 0, kStrings = 1 };

  std::string name;
  Type type = Type::kFloat64;
  std::vector<std::uint64_t> shape;
  std::vector<double> values;
  std::vector<std::string> strings;
};

struct ModelFile {
  std::uint32_t version = kFormatVersion;
  ModelKind kind = ModelKind::kCrf;
  std::string config;
  std::vector<Block> blocks;

  const Block& find(std::string_view name) const;
  bool has(std::string_view name) const;
};

std::string serialize(const ModelFile& file);
// Throws ModelFileError: kNotAModelFile for a bad magic, kVersionMismatch for
// an unsupported version, kTruncated when the data ends early, kMalformed for
// anything else.
ModelFile deserialize(std::string_view bytes);

using Model = std::variant<crf::CrfModel, neural::NeuralTagger>;

struct LoadedModel {
  ModelKind kind = ModelKind::kCrf;
  std::string config;
  Model model;
};

ModelFile pack(const crf::CrfModel& model, std::string config);
ModelFile pack(const neural::NeuralTagger& model, std::string config);
LoadedModel unpack(const ModelFile& file);

void write_file(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

void save_model(const std::filesystem::path& path, const LoadedModel& model);
LoadedModel load_model(const std::filesystem::path& path);

// Bucket sidecar: a kEmbeddingBuckets file holding the n-gram matrix and its
// n-gram length bounds.
void save_buckets(const std::filesystem::path& path, const RowMatrix& buckets, int min_n, int max_n);
void load_buckets(const std::filesystem::path& path, EmbeddingTable& table);

}  // namespace seql::io

#include "seql/model_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "seql/error.hpp"

namespace seql::io {

namespace {

using Kind = ModelFileError::Kind;

constexpr std::string_view kMagic = "SEQL";

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_str32(std::string& out, std::string_view s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() {
    const auto b = take(4);
    std::uint32_t v = 0;
    for (int k = 3; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(k)]);
    return v;
  }
  std::uint64_t u64() {
    const auto b = take(8);
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(k)]);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string_view bytes(std::uint64_t n) { return take(n); }
  bool done() const { return at_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - at_; }

 private:
  std::string_view take(std::uint64_t n) {
    if (n > data_.size() - at_)
      throw ModelFileError(Kind::kTruncated, "model file is truncated at byte " + std::to_string(at_));
    const auto out = data_.substr(at_, static_cast<std::size_t>(n));
    at_ += static_cast<std::size_t>(n);
    return out;
  }

  std::string_view data_;
  std::size_t at_ = 0;
};

Block tensor(std::string name, std::vector<std::uint64_t> shape, std::vector<double> values) {
  Block b;
  b.name = std::move(name);
  b.type = Block::Type::kFloat64;
  b.shape = std::move(shape);
  b.values = std::move(values);
  return b;
}

Block matrix_block(std::string name, const Eigen::MatrixXd& m) {
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
  return tensor(std::move(name), {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
                std::move(values));
}

Block matrix_block(std::string name, const RowMatrix& m) {
  return tensor(std::move(name), {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
                std::vector<double>(m.data(), m.data() + m.size()));
}

Block vector_block(std::string name, const Eigen::VectorXd& v) {
  return tensor(std::move(name), {static_cast<std::uint64_t>(v.size())},
                std::vector<double>(v.data(), v.data() + v.size()));
}

Block strings_block(std::string name, std::vector<std::string> strings) {
  Block b;
  b.name = std::move(name);
  b.type = Block::Type::kStrings;
  b.strings = std::move(strings);
  return b;
}

const Block& tensor_of_rank(const ModelFile& f, std::string_view name, std::size_t rank) {
  const Block& b = f.find(name);
  if (b.type != Block::Type::kFloat64 || b.shape.size() != rank)
    throw ModelFileError(Kind::kMalformed, "block '" + std::string(name) + "' has the wrong type or rank");
  return b;
}

RowMatrix read_row_matrix(const ModelFile& f, std::string_view name) {
  const Block& b = tensor_of_rank(f, name, 2);
  RowMatrix m(static_cast<Eigen::Index>(b.shape[0]), static_cast<Eigen::Index>(b.shape[1]));
  std::copy(b.values.begin(), b.values.end(), m.data());
  return m;
}

Eigen::MatrixXd read_matrix(const ModelFile& f, std::string_view name) { return read_row_matrix(f, name); }

Eigen::VectorXd read_vector(const ModelFile& f, std::string_view name) {
  const Block& b = tensor_of_rank(f, name, 1);
  return Eigen::Map<const Eigen::VectorXd>(b.values.data(), static_cast<Eigen::Index>(b.values.size()));
}

const std::vector<std::string>& read_strings(const ModelFile& f, std::string_view name) {
  const Block& b = f.find(name);
  if (b.type != Block::Type::kStrings)
    throw ModelFileError(Kind::kMalformed, "block '" + std::string(name) + "' is not a string list");
  return b.strings;
}

std::vector<std::string> ner_inventory() {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < NerLabel::kCount; ++i) out.push_back(NerLabel::from_index(i).str());
  return out;
}

std::vector<std::string> pos_inventory() {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kNumPosTags; ++i) out.emplace_back(to_string(pos_from_index(i)));
  return out;
}

void pack_embeddings(ModelFile& f, const EmbeddingTable& t) {
  f.blocks.push_back(vector_block(
      "embeddings.meta",
      Eigen::Vector4d(t.min_n(), t.max_n(), t.subword_enabled() ? 1.0 : 0.0, static_cast<double>(t.mode()))));
  f.blocks.push_back(strings_block("embeddings.words", t.words()));
  f.blocks.push_back(matrix_block("embeddings.word_vectors", t.word_vectors()));
  if (t.subword_enabled()) f.blocks.push_back(matrix_block("embeddings.buckets", t.buckets()));
  f.blocks.push_back(vector_block("embeddings.unk", t.unk()));
}

EmbeddingTable unpack_embeddings(const ModelFile& f) {
  const Eigen::VectorXd meta = read_vector(f, "embeddings.meta");
  if (meta.size() != 4) throw ModelFileError(Kind::kMalformed, "bad embeddings.meta block");
  const bool subword = meta[2] != 0.0;
  const auto mode_value = static_cast<int>(meta[3]);
  if (mode_value < 0 || mode_value > 2) throw ModelFileError(Kind::kMalformed, "bad embedding mode");
  RowMatrix vectors = read_row_matrix(f, "embeddings.word_vectors");
  RowMatrix buckets = subword ? read_row_matrix(f, "embeddings.buckets") : RowMatrix(0, vectors.cols());
  try {
    EmbeddingTable t(read_strings(f, "embeddings.words"), std::move(vectors), std::move(buckets),
                     static_cast<int>(meta[0]), static_cast<int>(meta[1]), subword,
                     static_cast<EmbeddingMode>(mode_value));
    t.set_unk(read_vector(f, "embeddings.unk"));
    return t;
  } catch (const ModelFileError&) {
    throw;
  } catch (const Error& e) {
    throw ModelFileError(Kind::kMalformed, std::string("bad embedding blocks: ") + e.what());
  }
}

void pack_lstm(ModelFile& f, const std::string& prefix, const neural::LstmParams& p) {
  f.blocks.push_back(matrix_block(prefix + ".W", p.W));
  f.blocks.push_back(matrix_block(prefix + ".U", p.U));
  f.blocks.push_back(vector_block(prefix + ".b", p.b));
}

neural::LstmParams unpack_lstm(const ModelFile& f, const std::string& prefix) {
  neural::LstmParams p{read_matrix(f, prefix + ".W"), read_matrix(f, prefix + ".U"),
                       read_vector(f, prefix + ".b")};
  try {
    p.check();
  } catch (const Error& e) {
    throw ModelFileError(Kind::kMalformed, prefix + ": " + e.what());
  }
  return p;
}

void pack_head(ModelFile& f, const std::string& prefix, const neural::Head& h) {
  f.blocks.push_back(matrix_block(prefix + ".projection", h.projection));
  f.blocks.push_back(vector_block(prefix + ".bias", h.bias));
  if (h.kind == neural::Inference::kCrf) f.blocks.push_back(matrix_block(prefix + ".transitions", h.transitions));
}

neural::Head unpack_head(const ModelFile& f, const std::string& prefix, neural::Inference kind) {
  neural::Head h;
  h.kind = kind;
  h.projection = read_matrix(f, prefix + ".projection");
  h.bias = read_vector(f, prefix + ".bias");
  if (kind == neural::Inference::kCrf) h.transitions = read_matrix(f, prefix + ".transitions");
  const Eigen::Index K = h.bias.size();
  if (h.projection.cols() != K || (kind == neural::Inference::kCrf && (h.transitions.rows() != K || h.transitions.cols() != K)))
    throw ModelFileError(Kind::kMalformed, prefix + ": inconsistent head shapes");
  return h;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kCrf: return "crf";
    case ModelKind::kBilstmSoftmax: return "bilstm-softmax";
    case ModelKind::kBilstmCrf: return "bilstm-crf";
    case ModelKind::kEmbeddingBuckets: return "embedding-buckets";
  }
  return "unknown";
}

const Block& ModelFile::find(std::string_view name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b;
  throw ModelFileError(Kind::kMalformed, "model file has no block '" + std::string(name) + "'");
}

bool ModelFile::has(std::string_view name) const {
  for (const auto& b : blocks)
    if (b.name == name) return true;
  return false;
}

std::string serialize(const ModelFile& file) {
  std::string out(kMagic);
  put_u32(out, file.version);
  put_u32(out, static_cast<std::uint32_t>(file.kind));
  put_u64(out, file.config.size());
  out.append(file.config);
  put_u64(out, file.blocks.size());
  for (const auto& b : file.blocks) {
    put_str32(out, b.name);
    put_u8(out, static_cast<std::uint8_t>(b.type));
    if (b.type == Block::Type::kFloat64) {
      std::uint64_t n = 1;
      put_u32(out, static_cast<std::uint32_t>(b.shape.size()));
      for (auto d : b.shape) {
        put_u64(out, d);
        n *= d;
      }
      if (n != b.values.size()) throw Error("block '" + b.name + "' shape does not match its values");
      for (double v : b.values) put_f64(out, v);
    } else {
      put_u64(out, b.strings.size());
      for (const auto& s : b.strings) put_str32(out, s);
    }
  }
  return out;
}

ModelFile deserialize(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic)
    throw ModelFileError(Kind::kNotAModelFile, "not a model file (bad magic)");
  Reader r(bytes.substr(kMagic.size()));
  ModelFile f;
  f.version = r.u32();
  if (f.version != kFormatVersion)
    throw ModelFileError(Kind::kVersionMismatch, "model format version " + std::to_string(f.version) +
                                                     " is not supported; this build reads version " +
                                                     std::to_string(kFormatVersion));
  const std::uint32_t kind = r.u32();
  if (kind < 1 || kind > 4) throw ModelFileError(Kind::kMalformed, "unknown model kind " + std::to_string(kind));
  f.kind = static_cast<ModelKind>(kind);
  f.config = std::string(r.bytes(r.u64()));
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    Block b;
    b.name = std::string(r.bytes(r.u32()));
    const std::uint8_t type = r.u8();
    if (type > 1) throw ModelFileError(Kind::kMalformed, "block '" + b.name + "' has unknown type");
    b.type = static_cast<Block::Type>(type);
    if (b.type == Block::Type::kFloat64) {
      const std::uint32_t rank = r.u32();
      std::uint64_t n = 1;
      for (std::uint32_t k = 0; k < rank; ++k) {
        b.shape.push_back(r.u64());
        n *= b.shape.back();
      }
      if (n > r.remaining() / 8)
        throw ModelFileError(Kind::kTruncated, "block '" + b.name + "' is truncated");
      b.values.resize(static_cast<std::size_t>(n));
      for (auto& v : b.values) v = r.f64();
    } else {
      const std::uint64_t n = r.u64();
      if (n > r.remaining() / 4) throw ModelFileError(Kind::kTruncated, "block '" + b.name + "' is truncated");
      b.strings.reserve(static_cast<std::size_t>(n));
      for (std::uint64_t k = 0; k < n; ++k) b.strings.emplace_back(r.bytes(r.u32()));
    }
    f.blocks.push_back(std::move(b));
  }
  if (!r.done()) throw ModelFileError(Kind::kMalformed, "trailing bytes after the last block");
  return f;
}

ModelFile pack(const crf::CrfModel& model, std::string config) {
  ModelFile f;
  f.kind = ModelKind::kCrf;
  f.config = std::move(config);
  f.blocks.push_back(vector_block("crf.meta", Eigen::Vector2d(model.task == Task::kJoint ? 1.0 : 0.0,
                                                               model.uses_embeddings() ? 1.0 : 0.0)));
  f.blocks.push_back(strings_block("labels.ner", ner_inventory()));
  f.blocks.push_back(strings_block("labels.pos", pos_inventory()));
  std::vector<std::string> labels;
  for (const auto& l : model.labels) labels.push_back(l.str());
  f.blocks.push_back(strings_block("crf.labels", std::move(labels)));
  f.blocks.push_back(strings_block("crf.features", model.feature_names));
  f.blocks.push_back(matrix_block("crf.state_weights", model.state_weights));
  f.blocks.push_back(matrix_block("crf.transitions", model.transitions));
  if (model.embeddings) pack_embeddings(f, *model.embeddings);
  return f;
}

ModelFile pack(const neural::NeuralTagger& model, std::string config) {
  ModelFile f;
  f.kind = model.inference() == neural::Inference::kCrf ? ModelKind::kBilstmCrf : ModelKind::kBilstmSoftmax;
  f.config = std::move(config);
  f.blocks.push_back(vector_block("neural.meta", Eigen::Vector2d(model.pos ? 1.0 : 0.0, model.dropout)));
  f.blocks.push_back(strings_block("labels.ner", ner_inventory()));
  f.blocks.push_back(strings_block("labels.pos", pos_inventory()));
  pack_embeddings(f, model.embeddings);
  pack_lstm(f, "lstm.forward", model.forward);
  pack_lstm(f, "lstm.backward", model.backward);
  pack_head(f, "head.ner", model.ner);
  if (model.pos) pack_head(f, "head.pos", *model.pos);
  return f;
}

LoadedModel unpack(const ModelFile& f) {
  LoadedModel out;
  out.kind = f.kind;
  out.config = f.config;
  if (f.kind == ModelKind::kEmbeddingBuckets)
    throw ModelFileError(Kind::kMalformed, "file holds embedding buckets, not a tagger");
  if (read_strings(f, "labels.ner") != ner_inventory() || read_strings(f, "labels.pos") != pos_inventory())
    throw ModelFileError(Kind::kMalformed, "label inventory does not match this build");

  if (f.kind == ModelKind::kCrf) {
    crf::CrfModel m;
    const Eigen::VectorXd meta = read_vector(f, "crf.meta");
    if (meta.size() != 2) throw ModelFileError(Kind::kMalformed, "bad crf.meta block");
    m.task = meta[0] != 0.0 ? Task::kJoint : Task::kSingle;
    try {
      for (const auto& s : read_strings(f, "crf.labels")) m.labels.push_back(crf::ChainLabel::parse(s));
    } catch (const ModelFileError&) {
      throw;
    } catch (const Error& e) {
      throw ModelFileError(Kind::kMalformed, e.what());
    }
    m.feature_names = read_strings(f, "crf.features");
    for (std::size_t i = 0; i < m.feature_names.size(); ++i)
      m.feature_index.emplace(m.feature_names[i], static_cast<std::uint32_t>(i));
    m.state_weights = read_row_matrix(f, "crf.state_weights");
    m.transitions = read_matrix(f, "crf.transitions");
    const auto L = static_cast<Eigen::Index>(m.labels.size());
    if (m.state_weights.rows() != static_cast<Eigen::Index>(m.feature_names.size()) ||
        m.state_weights.cols() != L || m.transitions.rows() != L || m.transitions.cols() != L)
      throw ModelFileError(Kind::kMalformed, "CRF weight shapes do not match labels and features");
    if (meta[1] != 0.0) m.embeddings = unpack_embeddings(f);
    out.model = std::move(m);
    return out;
  }

  neural::NeuralTagger m;
  const Eigen::VectorXd meta = read_vector(f, "neural.meta");
  if (meta.size() != 2) throw ModelFileError(Kind::kMalformed, "bad neural.meta block");
  const auto kind = f.kind == ModelKind::kBilstmCrf ? neural::Inference::kCrf : neural::Inference::kSoftmax;
  m.embeddings = unpack_embeddings(f);
  m.forward = unpack_lstm(f, "lstm.forward");
  m.backward = unpack_lstm(f, "lstm.backward");
  m.ner = unpack_head(f, "head.ner", kind);
  if (meta[0] != 0.0) m.pos = unpack_head(f, "head.pos", kind);
  m.dropout = meta[1];
  out.model = std::move(m);
  return out;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error("failed writing '" + path.string() + "'");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

void save_model(const std::filesystem::path& path, const LoadedModel& model) {
  const ModelFile f = std::visit([&](const auto& m) { return pack(m, model.config); }, model.model);
  write_file(path, serialize(f));
}

LoadedModel load_model(const std::filesystem::path& path) { return unpack(deserialize(read_file(path))); }

void save_buckets(const std::filesystem::path& path, const RowMatrix& buckets, int min_n, int max_n) {
  ModelFile f;
  f.kind = ModelKind::kEmbeddingBuckets;
  f.blocks.push_back(vector_block("buckets.meta", Eigen::Vector2d(min_n, max_n)));
  f.blocks.push_back(matrix_block("buckets.matrix", buckets));
  write_file(path, serialize(f));
}

void load_buckets(const std::filesystem::path& path, EmbeddingTable& table) {
  const ModelFile f = deserialize(read_file(path));
  if (f.kind != ModelKind::kEmbeddingBuckets)
    throw ModelFileError(Kind::kMalformed, "'" + path.string() + "' is not a bucket sidecar");
  const Eigen::VectorXd meta = read_vector(f, "buckets.meta");
  if (meta.size() != 2) throw ModelFileError(Kind::kMalformed, "bad buckets.meta block");
  table.set_buckets(read_row_matrix(f, "buckets.matrix"), static_cast<int>(meta[0]), static_cast<int>(meta[1]));
}

}  // namespace seql::io

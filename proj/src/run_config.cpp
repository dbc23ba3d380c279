#include "seql/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "seql/error.hpp"

namespace seql {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key));
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) +
                    " (expected true or false)");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Setter = std::function<void(RunConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    t["task"] = [](RunConfig& c, std::string_view v) {
      if (v == "single") c.task = Task::kSingle;
      else if (v == "joint") c.task = Task::kJoint;
      else throw ConfigError("task must be single or joint, got '" + std::string(v) + "'");
    };
    t["model"] = [](RunConfig& c, std::string_view v) {
      if (v == "crf") c.model = ModelType::kCrf;
      else if (v == "bilstm-softmax") c.model = ModelType::kBilstmSoftmax;
      else if (v == "bilstm-crf") c.model = ModelType::kBilstmCrf;
      else throw ConfigError("model must be crf, bilstm-softmax or bilstm-crf, got '" + std::string(v) + "'");
    };
    t["embedding"] = [](RunConfig& c, std::string_view v) {
      if (v == "none") c.embedding = EmbeddingChoice::kNone;
      else if (v == "random") c.embedding = EmbeddingChoice::kRandom;
      else if (v == "pretrained-frozen") c.embedding = EmbeddingChoice::kPretrainedFrozen;
      else if (v == "pretrained-finetuned") c.embedding = EmbeddingChoice::kPretrainedFinetuned;
      else throw ConfigError("unknown embedding '" + std::string(v) + "'");
    };
    t["train"] = [](RunConfig& c, std::string_view v) { c.train = v; };
    t["valid"] = [](RunConfig& c, std::string_view v) { c.valid = v; };
    t["test"] = [](RunConfig& c, std::string_view v) { c.test = v; };
    t["vectors"] = [](RunConfig& c, std::string_view v) { c.vectors = v; };
    t["buckets"] = [](RunConfig& c, std::string_view v) { c.buckets = v; };
    t["model_out"] = [](RunConfig& c, std::string_view v) { c.model_out = v; };
    t["log"] = [](RunConfig& c, std::string_view v) { c.log = v; };
    t["seed"] = [](RunConfig& c, std::string_view v) { c.seed = parse_number<std::uint64_t>("seed", v); };
    t["learning_rate"] = [](RunConfig& c, std::string_view v) {
      c.learning_rate = parse_number<double>("learning_rate", v);
    };
    t["batch_size"] = [](RunConfig& c, std::string_view v) { c.batch_size = parse_number<int>("batch_size", v); };
    t["patience"] = [](RunConfig& c, std::string_view v) { c.patience = parse_number<int>("patience", v); };
    t["l2"] = [](RunConfig& c, std::string_view v) { c.l2 = parse_number<double>("l2", v); };
    t["epochs"] = [](RunConfig& c, std::string_view v) { c.epochs = parse_number<int>("epochs", v); };
    t["shuffle"] = [](RunConfig& c, std::string_view v) { c.shuffle = parse_bool("shuffle", v); };
    t["beta1"] = [](RunConfig& c, std::string_view v) { c.beta1 = parse_number<double>("beta1", v); };
    t["beta2"] = [](RunConfig& c, std::string_view v) { c.beta2 = parse_number<double>("beta2", v); };
    t["epsilon"] = [](RunConfig& c, std::string_view v) { c.epsilon = parse_number<double>("epsilon", v); };
    t["hidden_size"] = [](RunConfig& c, std::string_view v) {
      c.hidden_size = parse_number<int>("hidden_size", v);
    };
    t["max_epochs"] = [](RunConfig& c, std::string_view v) { c.max_epochs = parse_number<int>("max_epochs", v); };
    t["joint_loss_weight"] = [](RunConfig& c, std::string_view v) {
      c.joint_loss_weight = parse_number<double>("joint_loss_weight", v);
    };
    t["dropout"] = [](RunConfig& c, std::string_view v) { c.dropout = parse_number<double>("dropout", v); };
    t["dim"] = [](RunConfig& c, std::string_view v) { c.dim = parse_number<int>("dim", v); };
    t["min_n"] = [](RunConfig& c, std::string_view v) { c.min_n = parse_number<int>("min_n", v); };
    t["max_n"] = [](RunConfig& c, std::string_view v) { c.max_n = parse_number<int>("max_n", v); };
    t["bucket_count"] = [](RunConfig& c, std::string_view v) {
      c.bucket_count = parse_number<std::size_t>("bucket_count", v);
    };
    return t;
  }();
  return table;
}

EmbeddingMode mode_of(EmbeddingChoice choice) {
  switch (choice) {
    case EmbeddingChoice::kPretrainedFrozen: return EmbeddingMode::kFrozen;
    case EmbeddingChoice::kPretrainedFinetuned: return EmbeddingMode::kFinetuned;
    default: return EmbeddingMode::kRandom;
  }
}

}  // namespace

std::string_view to_string(ModelType type) {
  switch (type) {
    case ModelType::kCrf: return "crf";
    case ModelType::kBilstmSoftmax: return "bilstm-softmax";
    case ModelType::kBilstmCrf: return "bilstm-crf";
  }
  return "?";
}

std::string_view to_string(EmbeddingChoice choice) {
  switch (choice) {
    case EmbeddingChoice::kNone: return "none";
    case EmbeddingChoice::kRandom: return "random";
    case EmbeddingChoice::kPretrainedFrozen: return "pretrained-frozen";
    case EmbeddingChoice::kPretrainedFinetuned: return "pretrained-finetuned";
  }
  return "?";
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig c;
  std::map<std::string, std::size_t, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end())
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    if (const auto prev = seen.find(key); prev != seen.end())
      throw ConfigError("line " + std::to_string(line_no) + ": key '" + std::string(key) +
                        "' already set on line " + std::to_string(prev->second));
    seen.emplace(std::string(key), line_no);
    try {
      it->second(c, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void RunConfig::validate() const {
  if (train.empty()) throw ConfigError("train path is required");
  if (model_out.empty()) throw ConfigError("model_out path is required");
  if (model == ModelType::kCrf && embedding == EmbeddingChoice::kRandom)
    throw ConfigError("the crf model takes embedding = none or a pretrained regime, not random");
  if (is_neural() && embedding == EmbeddingChoice::kNone)
    throw ConfigError("bilstm models need an embedding choice (random or pretrained)");
  if (is_pretrained() && vectors.empty()) throw ConfigError("pretrained embeddings need a vectors path");
  if (!buckets.empty() && !is_pretrained()) throw ConfigError("buckets only applies to pretrained embeddings");
  if (is_neural()) {
    neural_config().validate();
  } else {
    crf_config().validate();
  }
  if (embedding != EmbeddingChoice::kNone) embedding_config().validate();
}

io::ModelKind RunConfig::model_kind() const {
  switch (model) {
    case ModelType::kCrf: return io::ModelKind::kCrf;
    case ModelType::kBilstmSoftmax: return io::ModelKind::kBilstmSoftmax;
    case ModelType::kBilstmCrf: return io::ModelKind::kBilstmCrf;
  }
  return io::ModelKind::kCrf;
}

double RunConfig::resolved_learning_rate() const {
  if (learning_rate) return *learning_rate;
  return is_neural() ? neural::TrainConfig{}.learning_rate : crf::TrainConfig{}.learning_rate;
}

int RunConfig::resolved_batch_size() const {
  if (batch_size) return *batch_size;
  return is_neural() ? neural::default_batch_size(mode_of(embedding)) : crf::TrainConfig{}.batch_size;
}

int RunConfig::resolved_hidden_size() const {
  return hidden_size ? *hidden_size : neural::default_hidden_size(mode_of(embedding));
}

std::string RunConfig::resolved_log() const { return log.empty() ? model_out + ".log" : log; }

crf::TrainConfig RunConfig::crf_config() const {
  crf::TrainConfig c;
  c.l2 = l2;
  c.learning_rate = resolved_learning_rate();
  c.epochs = epochs;
  c.patience = patience;
  c.batch_size = resolved_batch_size();
  c.seed = seed;
  c.shuffle = shuffle;
  return c;
}

neural::TrainConfig RunConfig::neural_config() const {
  neural::TrainConfig c;
  c.learning_rate = resolved_learning_rate();
  c.beta1 = beta1;
  c.beta2 = beta2;
  c.epsilon = epsilon;
  c.batch_size = resolved_batch_size();
  c.hidden_size = resolved_hidden_size();
  c.max_epochs = max_epochs;
  c.patience = patience;
  c.joint_loss_weight = joint_loss_weight;
  c.dropout = dropout;
  c.seed = seed;
  return c;
}

EmbeddingConfig RunConfig::embedding_config() const {
  EmbeddingConfig c;
  c.dim = dim;
  c.min_n = min_n;
  c.max_n = max_n;
  c.bucket_count = bucket_count;
  c.seed = seed;
  return c;
}

std::string RunConfig::echo() const {
  std::ostringstream os;
  auto kv = [&](std::string_view k, const std::string& v) { os << k << " = " << v << '\n'; };
  kv("task", std::string(to_string(task)));
  kv("model", std::string(to_string(model)));
  kv("embedding", std::string(to_string(embedding)));
  kv("train", train);
  if (!valid.empty()) kv("valid", valid);
  if (!test.empty()) kv("test", test);
  if (!vectors.empty()) kv("vectors", vectors);
  if (!buckets.empty()) kv("buckets", buckets);
  kv("model_out", model_out);
  kv("log", resolved_log());
  kv("seed", std::to_string(seed));
  kv("learning_rate", fmt(resolved_learning_rate()));
  kv("batch_size", std::to_string(resolved_batch_size()));
  kv("patience", std::to_string(patience));
  if (is_neural()) {
    kv("beta1", fmt(beta1));
    kv("beta2", fmt(beta2));
    kv("epsilon", fmt(epsilon));
    kv("hidden_size", std::to_string(resolved_hidden_size()));
    kv("max_epochs", std::to_string(max_epochs));
    kv("joint_loss_weight", fmt(joint_loss_weight));
    kv("dropout", fmt(dropout));
  } else {
    kv("l2", fmt(l2));
    kv("epochs", std::to_string(epochs));
    kv("shuffle", shuffle ? "true" : "false");
  }
  if (embedding != EmbeddingChoice::kNone) {
    kv("dim", std::to_string(dim));
    kv("min_n", std::to_string(min_n));
    kv("max_n", std::to_string(max_n));
    kv("bucket_count", std::to_string(bucket_count));
  }
  return os.str();
}

}  // namespace seql

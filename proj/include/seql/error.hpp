#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace seql {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed line structure in a CoNLL file.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Unknown POS or NER string.
class TagError : public Error {
 public:
  TagError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// BIOES violation found while parsing in strict mode, or an invalid label
// sequence handed to an operation that requires a valid one.
class ValidationError : public Error {
 public:
  ValidationError(std::size_t sentence, std::size_t position, const std::string& what)
      : Error("sentence " + std::to_string(sentence) + " position " +
              std::to_string(position) + ": " + what),
        sentence_(sentence),
        position_(position) {}
  explicit ValidationError(const std::string& what)
      : Error(what), sentence_(0), position_(0) {}
  std::size_t sentence() const { return sentence_; }
  std::size_t position() const { return position_; }

 private:
  std::size_t sentence_;
  std::size_t position_;
};

// Embedding vector files.
class FormatError : public Error {
 public:
  FormatError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ModelFileError : public Error {
 public:
  enum class Kind { kNotAModelFile, kVersionMismatch, kTruncated, kMalformed };

  ModelFileError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace seql

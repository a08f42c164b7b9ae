#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace triplenc {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class DimMismatch : public Error {
  public:
    DimMismatch(std::size_t expected, std::size_t actual)
        : Error("dimension mismatch: expected " + std::to_string(expected) + ", got "
                + std::to_string(actual)) {}
};

/// A vector with zero norm was used where a direction is needed. `row()` names the
/// offending matrix row when the vector came from a batch.
class ZeroNorm : public Error {
  public:
    explicit ZeroNorm(std::string what, std::optional<std::size_t> row = std::nullopt)
        : Error("zero-norm vector: " + what
                + (row ? " (row " + std::to_string(*row) + ")" : std::string{})),
          row_(row) {}
    [[nodiscard]] std::optional<std::size_t> row() const noexcept { return row_; }

  private:
    std::optional<std::size_t> row_;
};

class NonFinite : public Error {
  public:
    using Error::Error;
};

class OutOfWindow : public Error {
  public:
    using Error::Error;
};

class OrderViolation : public Error {
  public:
    using Error::Error;
};

class PoolTooSmall : public Error {
  public:
    using Error::Error;
};

class UnknownUtterance : public Error {
  public:
    explicit UnknownUtterance(const std::string& utterance)
        : Error("unknown utterance: \"" + utterance + "\"") {}
};

class MissingSubspace : public Error {
  public:
    using Error::Error;
};

class EmptyCorpus : public Error {
  public:
    EmptyCorpus() : Error("corpus is empty") {}
};

class InsufficientContext : public Error {
  public:
    using Error::Error;
};

class EmptyState : public Error {
  public:
    EmptyState() : Error("MaxSim needs at least one materialized pair") {}
};

class EmptyContext : public Error {
  public:
    EmptyContext() : Error("planning context is empty") {}
};

class IndexOutOfRange : public Error {
  public:
    IndexOutOfRange(std::size_t index, std::size_t size)
        : Error("index " + std::to_string(index) + " out of range for size "
                + std::to_string(size)) {}
};

class InvalidConfig : public Error {
  public:
    using Error::Error;
};

class ParseError : public Error {
  public:
    ParseError(std::size_t line, const std::string& msg)
        : Error("parse error at line " + std::to_string(line) + ": " + msg), line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class EmptyDialog : public Error {
  public:
    explicit EmptyDialog(std::size_t line)
        : Error("dialog at line " + std::to_string(line) + " has no utterances"), line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class BadMagic : public Error {
  public:
    using Error::Error;
};

class ManifestMismatch : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

}  // namespace triplenc

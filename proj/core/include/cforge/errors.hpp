#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cforge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input line. `line()` is 1-based.
class ParseError : public Error {
  public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line)
    {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class OffsetError : public Error {
  public:
    using Error::Error;
};

class NegativeScore : public ParseError {
  public:
    using ParseError::ParseError;
};

class UnknownConcept : public Error {
  public:
    using Error::Error;
};

class UnmappedConcept : public Error {
  public:
    using Error::Error;
};

class PoolExhausted : public Error {
  public:
    using Error::Error;
};

class ZeroVector : public Error {
  public:
    using Error::Error;
};

class DegenerateInput : public Error {
  public:
    using Error::Error;
};

class FormatError : public Error {
  public:
    using Error::Error;
};

class NonFiniteLoss : public Error {
  public:
    NonFiniteLoss(std::size_t epoch, std::size_t batch)
        : Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                std::to_string(batch)),
          epoch_(epoch), batch_(batch)
    {}
    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t batch() const noexcept { return batch_; }

  private:
    std::size_t epoch_;
    std::size_t batch_;
};

/// A sweep grid point failed; wraps the original message.
class SweepError : public Error {
  public:
    SweepError(std::string grid_value, const std::string& what)
        : Error("grid point " + grid_value + ": " + what), grid_value_(std::move(grid_value))
    {}
    const std::string& grid_value() const noexcept { return grid_value_; }

  private:
    std::string grid_value_;
};

class MissingPredictions : public Error {
  public:
    explicit MissingPredictions(std::vector<std::string> doc_ids);
    const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }

  private:
    std::vector<std::string> doc_ids_;
};

}  // namespace cforge

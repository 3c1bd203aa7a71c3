#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dodbench {

// Base of every failure the toolkit raises. Validation problems are returned
// as data (see validate_record); only faults are thrown.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoFailure : public Error {
 public:
  using Error::Error;
};

class MalformedXml : public Error {
 public:
  MalformedXml(std::uint64_t offset, const std::string& what)
      : Error("malformed XML at byte " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class OversizedElement : public Error {
 public:
  OversizedElement(std::uint64_t offset, std::size_t cap)
      : Error("publication element starting at byte " + std::to_string(offset) + " exceeds " +
              std::to_string(cap) + " bytes"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class CorruptRecord : public Error {
 public:
  CorruptRecord(std::size_t line, const std::string& what)
      : Error("corrupt record on line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class InvalidScaleFactor : public Error {
 public:
  using Error::Error;
};

class ArityMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidQuery : public Error {
 public:
  using Error::Error;
};

class EmptyPopulation : public Error {
 public:
  EmptyPopulation() : Error("selectivity undefined: population N is 0") {}
};

class UnsupportedCombination : public Error {
 public:
  using Error::Error;
};

class BackendUnreachable : public Error {
 public:
  using Error::Error;
};

class AdapterFailure : public Error {
 public:
  using Error::Error;
};

class CountMismatch : public Error {
 public:
  CountMismatch(std::uint64_t expected, std::uint64_t actual)
      : Error("count mismatch: expected " + std::to_string(expected) + ", backend reports " +
              std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}
  std::uint64_t expected() const noexcept { return expected_; }
  std::uint64_t actual() const noexcept { return actual_; }

 private:
  std::uint64_t expected_;
  std::uint64_t actual_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dodbench

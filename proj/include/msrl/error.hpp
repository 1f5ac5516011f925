#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace msrl {

enum class ErrorCode {
  CyclicTopology,
  InvalidSpec,
  PastTimestamp,
  EmptyQueue,
  InvalidReplica,
  PendingDecision,
  UnstableSystem,
  ParseError,
  SchemaError,
  OrderError,
  LengthMismatch,
  IndexOutOfRange,
  EpisodeOver,
  EmptyActionSet,
  DimensionMismatch,
  NonFiniteLoss,
  ArchitectureMismatch,
  ZeroWindow,
  NoCompletions,
  ZeroOffered,
  EmptySample,
  ConfigError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CyclicTopology: return "CyclicTopology";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::PastTimestamp: return "PastTimestamp";
    case ErrorCode::EmptyQueue: return "EmptyQueue";
    case ErrorCode::InvalidReplica: return "InvalidReplica";
    case ErrorCode::PendingDecision: return "PendingDecision";
    case ErrorCode::UnstableSystem: return "UnstableSystem";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::OrderError: return "OrderError";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EpisodeOver: return "EpisodeOver";
    case ErrorCode::EmptyActionSet: return "EmptyActionSet";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ArchitectureMismatch: return "ArchitectureMismatch";
    case ErrorCode::ZeroWindow: return "ZeroWindow";
    case ErrorCode::NoCompletions: return "NoCompletions";
    case ErrorCode::ZeroOffered: return "ZeroOffered";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Base exception for every failure the library reports. The code lets
/// callers (and tests) branch on the failure kind without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Trace parse failure; `line` is 1-based and counts the header.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Configuration failure carrying the JSON path of the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(ErrorCode::ConfigError, path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace msrl

#pragma once

#include <stdexcept>
#include <string>

namespace forge {

// Every failure the pipeline can surface, one category per reportable path.
// The CLI prints the category name as the machine-parsable error class.
enum class ErrorCode {
  MalformedRecord,
  EmptyFile,
  EncodingError,
  SizeMismatch,
  InvalidFractions,
  DegeneratePair,
  ParseError,
  InvariantViolation,
  EndpointUnreachable,
  RateLimited,
  EmptyCompletion,
  AllSamplesDegenerate,
  DimMismatch,
  ScoreOutOfRange,
  NoParsableExamples,
  EmptyPool,
  MissingVectors,
  EmptyCorpus,
  TooManyFailures,
  InconsistentGrid,
  ConfigMissing,
  InvalidArgument,
  IoError,
};

const char* error_code_name(ErrorCode code);

class ForgeError : public std::runtime_error {
 public:
  ForgeError(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }
  const char* category() const { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace forge

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace medagi {

enum class ErrorCode {
  EmptyInput,
  InvalidUtf8,
  ProviderFailure,
  DegenerateEmbedding,
  DimensionMismatch,
  ZeroVector,
  DuplicateId,
  InvalidDescriptor,
  EmbeddingFailure,
  UnknownExpert,
  IoFailure,
  ParseFailure,
  EmptyRegistry,
  FingerprintMismatch,
  DuplicateComponent,
  UnknownAdapter,
  BudgetExhausted,
  DoubleRelease,
  NoComponents,
  BackendFailure,
  CorpusParseFailure,
  UnknownExpectedExpert,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code);

// Every domain failure in the library is reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace medagi

#include "medagi/error.hpp"

namespace medagi {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidUtf8: return "InvalidUtf8";
    case ErrorCode::ProviderFailure: return "ProviderFailure";
    case ErrorCode::DegenerateEmbedding: return "DegenerateEmbedding";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::InvalidDescriptor: return "InvalidDescriptor";
    case ErrorCode::EmbeddingFailure: return "EmbeddingFailure";
    case ErrorCode::UnknownExpert: return "UnknownExpert";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::EmptyRegistry: return "EmptyRegistry";
    case ErrorCode::FingerprintMismatch: return "FingerprintMismatch";
    case ErrorCode::DuplicateComponent: return "DuplicateComponent";
    case ErrorCode::UnknownAdapter: return "UnknownAdapter";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::DoubleRelease: return "DoubleRelease";
    case ErrorCode::NoComponents: return "NoComponents";
    case ErrorCode::BackendFailure: return "BackendFailure";
    case ErrorCode::CorpusParseFailure: return "CorpusParseFailure";
    case ErrorCode::UnknownExpectedExpert: return "UnknownExpectedExpert";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace medagi

#include "modpipe/error.hpp"

namespace modpipe {

const char* to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kUsage: return "usage";
    case ErrorCategory::kParse: return "parse";
    case ErrorCategory::kValidation: return "validation";
    case ErrorCategory::kInput: return "input";
    case ErrorCategory::kContractViolation: return "contract-violation";
    case ErrorCategory::kTransport: return "transport";
    case ErrorCategory::kMissingFixture: return "missing-fixture";
    case ErrorCategory::kMissingInput: return "missing-input";
    case ErrorCategory::kTraining: return "training";
    case ErrorCategory::kInternal: return "internal";
  }
  return "internal";
}

}  // namespace modpipe

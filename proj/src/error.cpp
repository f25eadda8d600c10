#include "speclab/error.hpp"

namespace speclab {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::coefficient_regularity: return "coefficient-regularity";
    case ErrorKind::numerical_failure: return "numerical-failure";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::empty_set: return "empty-set";
    case ErrorKind::search_failure: return "search-failure";
    case ErrorKind::synthesis_failure: return "synthesis-failure";
    case ErrorKind::degenerate_chart: return "degenerate-chart";
    case ErrorKind::unsupported_geometry: return "unsupported-geometry";
    case ErrorKind::config_validation: return "config-validation";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace speclab

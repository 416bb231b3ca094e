#include "claimsfpr/error.hpp"

namespace claimsfpr {

Error::Error(std::string origin, const std::string& message)
    : std::runtime_error(origin + ": " + message), origin_(std::move(origin)) {}

}  // namespace claimsfpr

#pragma once

#include <stdexcept>
#include <string>

namespace claimsfpr {

/// Error raised by any stage of the library. `origin()` names the module
/// that raised it (datamodel, linkfit, illnessdeath, ...), and `what()` is
/// prefixed with it so messages surfacing through the CLI stay traceable.
class Error : public std::runtime_error {
public:
    Error(std::string origin, const std::string& message);

    const std::string& origin() const noexcept { return origin_; }

private:
    std::string origin_;
};

}  // namespace claimsfpr

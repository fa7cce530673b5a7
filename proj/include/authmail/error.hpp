#pragma once

#include <stdexcept>
#include <string>

namespace authmail {

/// Raised for problems with user-supplied data: unreadable files, malformed
/// manifests, corrupt model files, datasets that violate preconditions.
/// The CLI maps this to exit code 2; anything else lands on 3.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace authmail

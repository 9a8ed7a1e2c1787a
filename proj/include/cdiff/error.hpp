#pragma once

#include <stdexcept>
#include <string>

namespace cdiff {

// Domain error for violated preconditions, malformed inputs and numeric
// divergence. Carries a plain message; callers add context where useful.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

} // namespace cdiff

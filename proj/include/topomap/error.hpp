#pragma once

#include <stdexcept>
#include <string>

namespace topomap {

/// Domain error raised by every library operation (bad input, failed
/// precondition, numerical breakdown). The CLI maps it to exit code 1.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Non-fatal diagnostics (small groups, disconnected graphs). Written to
/// stderr unless silenced.
void warn(const std::string& message);
void set_warnings_enabled(bool enabled);

}  // namespace topomap

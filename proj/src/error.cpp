#include "topomap/error.hpp"

#include <atomic>
#include <iostream>

namespace topomap {

namespace {
std::atomic<bool> warnings_enabled{true};
}

void warn(const std::string& message) {
    if (warnings_enabled.load()) std::cerr << "warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) { warnings_enabled.store(enabled); }

}  // namespace topomap

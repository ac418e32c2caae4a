#pragma once

#include <string>
#include <vector>

namespace tdro {

/// Non-fatal findings attached to a result (boundary leakage, short windows, ...).
struct Diagnostics {
    std::vector<std::string> warnings;

    void warn(std::string message) { warnings.push_back(std::move(message)); }
    bool empty() const { return warnings.empty(); }
};

inline void warn_to(Diagnostics* sink, std::string message) {
    if (sink) sink->warn(std::move(message));
}

} // namespace tdro

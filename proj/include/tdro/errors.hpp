#pragma once

#include <stdexcept>
#include <string>

namespace tdro {

/// Bad input: malformed config, violated preconditions, mismatched grids.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical procedure failed (SCF divergence, norm drift, singular system).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NearSingularError : public NumericalError {
public:
    NearSingularError(const std::string& what, int channel_a, int channel_b)
        : NumericalError(what), channel_a_(channel_a), channel_b_(channel_b) {}

    int channel_a() const { return channel_a_; }
    int channel_b() const { return channel_b_; }

private:
    int channel_a_;
    int channel_b_;
};

} // namespace tdro

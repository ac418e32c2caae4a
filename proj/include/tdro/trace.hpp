#pragma once

#include <string>
#include <vector>

#include "tdro/diagnostics.hpp"
#include "tdro/errors.hpp"
#include "tdro/grid.hpp"

namespace tdro {

enum class TraceSource { exact, exact_2d, tdks_exact_vxc, tdks_exchange_sic };

inline std::string to_string(TraceSource s) {
    switch (s) {
    case TraceSource::exact: return "exact";
    case TraceSource::exact_2d: return "exact_2d";
    case TraceSource::tdks_exact_vxc: return "tdks_exact";
    case TraceSource::tdks_exchange_sic: return "tdks_sic";
    }
    return "?";
}

inline TraceSource trace_source_from_string(const std::string& s) {
    if (s == "exact") return TraceSource::exact;
    if (s == "exact_2d") return TraceSource::exact_2d;
    if (s == "tdks_exact") return TraceSource::tdks_exact_vxc;
    if (s == "tdks_sic") return TraceSource::tdks_exchange_sic;
    throw ConfigError("unknown propagation source '" + s + "'");
}

/// Snapshots n(x, t) of the one-particle density on the lab grid.
struct DensityTrace {
    Grid1D grid;
    TraceSource source = TraceSource::exact;
    double tau = 0.0;
    std::vector<double> times;
    std::vector<RealField> densities;
    Diagnostics diagnostics;

    void append(double t, RealField n) {
        if (!times.empty() && t <= times.back()) throw NumericalError("DensityTrace: times must increase");
        times.push_back(t);
        densities.push_back(std::move(n));
    }

    std::size_t size() const { return times.size(); }

    /// Linear interpolation between neighbouring snapshots; t must lie inside the trace.
    RealField at(double t) const {
        if (times.empty() || t < times.front() - 1e-12 || t > times.back() + 1e-12)
            throw ConfigError("DensityTrace::at: time outside the recorded range");
        std::size_t k = 0;
        while (k + 1 < times.size() && times[k + 1] < t) ++k;
        if (k + 1 == times.size()) return densities.back();
        const double s = (t - times[k]) / (times[k + 1] - times[k]);
        return (1.0 - s) * densities[k] + s * densities[k + 1];
    }
};

/// Running average nbar(x, t) = 1/(t - tau) int_tau^t n dt' (trapezoidal) at every snapshot t > tau.
/// Entries for t <= tau are left empty.
inline std::vector<RealField> running_average(const DensityTrace& trace) {
    std::vector<RealField> out(trace.size());
    RealField integral;
    double t_prev = trace.tau;
    RealField n_prev;
    bool started = false;
    for (std::size_t k = 0; k < trace.size(); ++k) {
        const double t = trace.times[k];
        if (t <= trace.tau) continue;
        if (!started) {
            n_prev = trace.at(trace.tau);
            integral = RealField::Zero(n_prev.size());
            started = true;
        }
        integral += 0.5 * (t - t_prev) * (n_prev + trace.densities[k]);
        out[k] = integral / (t - trace.tau);
        t_prev = t;
        n_prev = trace.densities[k];
    }
    return out;
}

} // namespace tdro

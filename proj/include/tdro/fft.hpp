#pragma once

#include <algorithm>
#include <complex>
#include <cstring>
#include <utility>

#include <fftw3.h>

#include "tdro/grid.hpp"

namespace tdro {

/// Owns an FFTW buffer and a forward/backward plan pair for a fixed shape.
/// Transforms are unnormalized; backward() divides by the total size.
/// FFTW_ESTIMATE plans are reproducible bit for bit; FFTW_MEASURE plans are faster but timing-dependent.
class FftPlan {
public:
    FftPlan() = default;

    explicit FftPlan(long n) : FftPlan(n, 1) {}

    FftPlan(long rows, long cols, unsigned flags = FFTW_ESTIMATE) : rows_(rows), cols_(cols) {
        buffer_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * size()));
        if (cols == 1) {
            forward_ = fftw_plan_dft_1d(int(rows), buffer_, buffer_, FFTW_FORWARD, flags);
            backward_ = fftw_plan_dft_1d(int(rows), buffer_, buffer_, FFTW_BACKWARD, flags);
        } else {
            forward_ = fftw_plan_dft_2d(int(rows), int(cols), buffer_, buffer_, FFTW_FORWARD, flags);
            backward_ = fftw_plan_dft_2d(int(rows), int(cols), buffer_, buffer_, FFTW_BACKWARD, flags);
        }
        // Measured wisdom would otherwise leak into later ESTIMATE plans and make them timing-dependent.
        if (!(flags & FFTW_ESTIMATE)) fftw_forget_wisdom();
    }

    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;

    FftPlan(FftPlan&& other) noexcept { swap(other); }
    FftPlan& operator=(FftPlan&& other) noexcept {
        if (this != &other) {
            release();
            swap(other);
        }
        return *this;
    }

    ~FftPlan() { release(); }

    long size() const { return rows_ * cols_; }

    /// In-place transform of contiguous data of length size().
    void forward(complex* data) { run(forward_, data, 1.0); }
    void backward(complex* data) { run(backward_, data, 1.0 / double(size())); }

private:
    void run(fftw_plan plan, complex* data, double scale) {
        std::memcpy(buffer_, data, sizeof(fftw_complex) * size());
        fftw_execute(plan);
        const auto* out = reinterpret_cast<const complex*>(buffer_);
        if (scale == 1.0) {
            std::copy(out, out + size(), data);
        } else {
            for (long i = 0; i < size(); ++i) data[i] = out[i] * scale;
        }
    }

    void swap(FftPlan& o) noexcept {
        std::swap(rows_, o.rows_);
        std::swap(cols_, o.cols_);
        std::swap(buffer_, o.buffer_);
        std::swap(forward_, o.forward_);
        std::swap(backward_, o.backward_);
    }

    void release() {
        if (forward_) fftw_destroy_plan(forward_);
        if (backward_) fftw_destroy_plan(backward_);
        if (buffer_) fftw_free(buffer_);
        forward_ = backward_ = nullptr;
        buffer_ = nullptr;
    }

    long rows_ = 0;
    long cols_ = 0;
    fftw_complex* buffer_ = nullptr;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

} // namespace tdro

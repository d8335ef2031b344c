#pragma once

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace specklegi {

/// Cached in-place 2-D complex DFT plans.
///
/// Plans are created with FFTW_ESTIMATE so plan selection never depends on
/// runtime measurements: the same build always picks the same plan, which
/// keeps outputs bit-identical across runs. FFTW_UNALIGNED lifts the SIMD
/// alignment requirement so plans can execute on any caller buffer.
/// Transforms are unnormalized (FFTW convention); callers divide by n.
class FftPlan {
public:
    /// Plan lookup; `sign` is FFTW_FORWARD or FFTW_BACKWARD.
    static const FftPlan& get(int height, int width, int sign) {
        static std::mutex mtx;
        static std::map<std::tuple<int, int, int>, std::unique_ptr<FftPlan>> cache;
        std::lock_guard<std::mutex> lock(mtx);  // FFTW planning is not thread-safe
        auto& slot = cache[{height, width, sign}];
        if (!slot) slot.reset(new FftPlan(height, width, sign));
        return *slot;
    }

    /// Executes the transform in place on `data` (size height*width, row-major).
    void execute(std::complex<double>* data) const {
        auto* p = reinterpret_cast<fftw_complex*>(data);
        fftw_execute_dft(plan_, p, p);
    }

    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;

private:
    FftPlan(int height, int width, int sign) {
        if (height <= 0 || width <= 0)
            throw std::invalid_argument("FftPlan: non-positive dimensions");
        std::vector<std::complex<double>> scratch(static_cast<size_t>(height) * width);
        auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
        plan_ = fftw_plan_dft_2d(height, width, p, p, sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!plan_) throw std::runtime_error("FftPlan: fftw_plan_dft_2d failed");
    }

    fftw_plan plan_ = nullptr;
};

/// In-place 2-D FFT of a row-major complex buffer.
inline void fft2(std::vector<std::complex<double>>& a, int height, int width, int sign) {
    if (a.size() != static_cast<size_t>(height) * width)
        throw std::invalid_argument("fft2: buffer size does not match dimensions");
    FftPlan::get(height, width, sign).execute(a.data());
}

}  // namespace specklegi

#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "specklegi/correlation.hpp"
#include "specklegi/fft.hpp"
#include "specklegi/selftest.hpp"
#include "specklegi/specklefield.hpp"

using namespace specklegi;

namespace {

class ConstantFrames final : public FrameSource {
public:
    ConstantFrames(GridSpec g, std::int64_t n, double value) : g_(g), n_(n), v_(value) {}
    Frame frame(std::int64_t i) const override {
        Frame f;
        f.grid = g_;
        f.frame_index = i;
        f.intensity.assign(g_.npix(), v_);
        return f;
    }
    std::int64_t n_frames() const override { return n_; }
    const GridSpec& grid() const override { return g_; }

private:
    GridSpec g_;
    std::int64_t n_;
    double v_;
};

/// View that multiplies every intensity by a constant.
class ScaledFrames final : public FrameSource {
public:
    ScaledFrames(const FrameSource& base, double scale) : base_(&base), s_(scale) {}
    Frame frame(std::int64_t i) const override {
        Frame f = base_->frame(i);
        for (auto& v : f.intensity) v *= s_;
        return f;
    }
    std::int64_t n_frames() const override { return base_->n_frames(); }
    const GridSpec& grid() const override { return base_->grid(); }

private:
    const FrameSource* base_;
    double s_;
};

Mask box_mask(const GridSpec& g, int x0, int y0, int w, int h) {
    Mask m;
    m.width = g.width;
    m.height = g.height;
    m.on.assign(g.npix(), 0);
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) m.on[g.index(x, y)] = 1;
    return m;
}

}  // namespace

TEST_CASE("fft wrapper: round trip and direct DFT check") {
    const int h = 6, w = 4;
    std::vector<std::complex<double>> buf(static_cast<size_t>(h) * w);
    Rng rng(3);
    for (auto& z : buf) z = {rng.normal(), rng.normal()};
    const auto original = buf;

    fft2(buf, h, w, FFTW_FORWARD);
    // direct O(n^2) DFT oracle
    for (int ky = 0; ky < h; ++ky)
        for (int kx = 0; kx < w; ++kx) {
            std::complex<double> acc = 0.0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double phase =
                        -2.0 * std::numbers::pi * (static_cast<double>(kx) * x / w +
                                                   static_cast<double>(ky) * y / h);
                    acc += original[static_cast<size_t>(y) * w + x] *
                           std::complex<double>(std::cos(phase), std::sin(phase));
                }
            CHECK(std::abs(buf[static_cast<size_t>(ky) * w + kx] - acc) < 1e-10);
        }

    fft2(buf, h, w, FFTW_BACKWARD);
    for (std::size_t i = 0; i < buf.size(); ++i)
        CHECK(std::abs(buf[i] / (static_cast<double>(h) * w) - original[i]) < 1e-12);
}

TEST_CASE("constant frames: autocorrelation is 1, differential map is 0") {
    const GridSpec grid{16, 16, 1.0, 2.0};
    const ConstantFrames frames(grid, 8, 3.25);
    const CorrelationMap ac = autocorrelation_fft(frames, 1);
    for (double v : ac.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

    const Mask mask = box_mask(grid, 6, 6, 4, 4);
    const Region reference = Region::rectangle(grid, 0, 0, 4, 4);
    const CorrelationMap dgi = differential_ghost_image(frames, mask, reference, 1);
    for (double v : dgi.values) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("correlation maps match brute-force double loops (16x16, 500 frames)") {
    const GridSpec grid{16, 16, 1.0, 2.0};
    const FrameEnsemble ens(SourceSpec::thermal(1.0), grid, 500, 61);
    const auto frames = oracle::materialize(ens);
    const Mask mask = box_mask(grid, 6, 6, 4, 4);
    const Region reference = Region::rectangle(grid, 0, 0, 4, 4);

    const double d_ac = selftest::detail::rel_scale_diff(autocorrelation_fft(ens, 2),
                                                         oracle::autocorrelation_direct(frames));
    const double d_px = selftest::detail::rel_scale_diff(
        pixel_correlation(ens, 8, 8, 2), oracle::pixel_correlation_direct(frames, 8, 8));
    const double d_gi = selftest::detail::rel_scale_diff(ghost_image(ens, mask, 2),
                                                         oracle::ghost_direct(frames, mask, nullptr));
    const double d_dgi = selftest::detail::rel_scale_diff(
        differential_ghost_image(ens, mask, reference, 2),
        oracle::ghost_direct(frames, mask, &reference));
    CHECK(d_ac <= 1e-9);
    CHECK(d_px <= 1e-9);
    CHECK(d_gi <= 1e-9);
    CHECK(d_dgi <= 1e-9);
}

TEST_CASE("ghost image with a one-pixel mask reduces to the pixel correlation") {
    const GridSpec grid{24, 24, 1.0, 2.0};
    const FrameEnsemble ens(SourceSpec::thermal(1.0), grid, 400, 62);
    const Mask single = box_mask(grid, 11, 13, 1, 1);
    const CorrelationMap gi = ghost_image(ens, single, 2);
    const CorrelationMap px = pixel_correlation(ens, 11, 13, 2);
    for (std::size_t i = 0; i < gi.values.size(); ++i) CHECK(gi.values[i] == px.values[i]);
}

TEST_CASE("the map value at the reference pixel is that pixel's g2") {
    const GridSpec grid{24, 24, 1.0, 2.0};
    const FrameEnsemble ens(SourceSpec::thermal(1.0), grid, 600, 63);
    const CorrelationMap px = pixel_correlation(ens, 12, 12, 1);
    IntensitySample series;
    for (std::int64_t i = 0; i < ens.n_frames(); ++i)
        series.values.push_back(ens.frame(i).at(12, 12));
    CHECK(px.at(12, 12) == doctest::Approx(estimate_g2(series)).epsilon(1e-12));
}

TEST_CASE("homogeneity: scaling frames by a power of two leaves maps bit-identical") {
    const GridSpec grid{16, 16, 1.0, 2.0};
    const FrameEnsemble base(SourceSpec::thermal(1.0), grid, 300, 64);
    const ScaledFrames scaled(base, 4.0);
    const Mask mask = box_mask(grid, 5, 5, 5, 5);
    const Region reference = Region::rectangle(grid, 0, 11, 4, 4);

    CHECK(autocorrelation_fft(base, 1).values == autocorrelation_fft(scaled, 1).values);
    CHECK(pixel_correlation(base, 8, 8, 1).values == pixel_correlation(scaled, 8, 8, 1).values);
    CHECK(ghost_image(base, mask, 1).values == ghost_image(scaled, mask, 1).values);
    CHECK(differential_ghost_image(base, mask, reference, 1).values ==
          differential_ghost_image(scaled, mask, reference, 1).values);
}

TEST_CASE("streaming one-pass accumulation equals a two-pass computation") {
    const GridSpec grid{16, 16, 1.0, 2.0};
    const FrameEnsemble ens(SourceSpec::thermal(1.0), grid, 500, 65);
    const Mask mask = box_mask(grid, 6, 6, 4, 4);
    const CorrelationMap one_pass = ghost_image(ens, mask, 1);

    // two-pass reference: means first, then the covariance form
    const auto frames = oracle::materialize(ens);
    const double n = static_cast<double>(frames.size());
    std::vector<double> mean_i(grid.npix(), 0.0);
    double mean_b = 0.0;
    for (const auto& f : frames) {
        double b = 0.0;
        for (int y = 6; y < 10; ++y)
            for (int x = 6; x < 10; ++x) b += f.at(x, y);
        mean_b += b / n;
        for (std::size_t p = 0; p < mean_i.size(); ++p) mean_i[p] += f.intensity[p] / n;
    }
    for (std::size_t p = 0; p < mean_i.size(); ++p) {
        double cov = 0.0;
        for (const auto& f : frames) {
            double b = 0.0;
            for (int y = 6; y < 10; ++y)
                for (int x = 6; x < 10; ++x) b += f.at(x, y);
            cov += (b - mean_b) * (f.intensity[p] - mean_i[p]) / n;
        }
        const double two_pass = 1.0 + cov / (mean_b * mean_i[p]);
        CHECK(one_pass.values[p] == doctest::Approx(two_pass).epsilon(1e-10));
    }
}

TEST_CASE("parallel reduction is bit-identical across thread counts") {
    const GridSpec grid{32, 32, 1.0, 2.0};
    const FrameEnsemble ens(SourceSpec::second_harmonic(1.0, 1.0, 1.0), grid, 1200, 66);
    const Mask mask = box_mask(grid, 12, 12, 6, 6);
    const Region reference = Region::rectangle(grid, 0, 0, 6, 6);
    const auto m1 = differential_ghost_image(ens, mask, reference, 1);
    const auto m2 = differential_ghost_image(ens, mask, reference, 2);
    const auto m8 = differential_ghost_image(ens, mask, reference, 8);
    CHECK(m1.values == m2.values);
    CHECK(m1.values == m8.values);

    const auto a1 = autocorrelation_fft(ens, 1);
    const auto a8 = autocorrelation_fft(ens, 8);
    CHECK(a1.values == a8.values);
}

TEST_CASE("error signaling: degenerate ensembles and bad regions") {
    const GridSpec grid{16, 16, 1.0, 2.0};
    const ConstantFrames zeros(grid, 4, 0.0);
    CHECK_THROWS_AS(autocorrelation_fft(zeros, 1), std::runtime_error);
    CHECK_THROWS_AS(pixel_correlation(zeros, 2, 2, 1), std::domain_error);

    const FrameEnsemble ens(SourceSpec::thermal(1.0), grid, 8, 67);
    const Mask mask = box_mask(grid, 6, 6, 4, 4);
    Region overlapping = Region::rectangle(grid, 7, 7, 4, 4);
    CHECK_THROWS_AS(differential_ghost_image(ens, mask, overlapping, 1), std::invalid_argument);
    CHECK_THROWS_AS(pixel_correlation(ens, 99, 0, 1), std::invalid_argument);

    const ConstantFrames one_frame(grid, 1, 1.0);
    CHECK_THROWS_AS(autocorrelation_fft(one_frame, 1), std::invalid_argument);
}

TEST_CASE("thermal autocorrelation has the expected center and baseline (small scale)") {
    const GridSpec grid{64, 64, 1.0, 2.0};
    const FrameEnsemble ens(SourceSpec::thermal(1.0), grid, 3000, 68);
    const CorrelationMap map = autocorrelation_fft(ens, 2);
    CHECK(map.at(32, 32) == doctest::Approx(2.0).epsilon(0.05));
    CHECK(selftest::detail::map_baseline(map) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("cascade ghost images carry a correlated background at 2, thermal at 1") {
    const GridSpec grid{64, 64, 1.0, 2.5};
    const Mask mask = [&] {
        Mask m;
        m.width = grid.width;
        m.height = grid.height;
        m.on.assign(grid.npix(), 0);
        for (int y = 28; y < 36; ++y)
            for (int x = 28; x < 36; ++x) m.on[grid.index(x, y)] = 1;
        return m;
    }();
    const Region far_bg = mask_complement(grid, mask, 12.0);
    auto background_mean = [&](const CorrelationMap& map) {
        KahanSum s;
        for (auto p : far_bg.pixels) s.add(map.values[static_cast<size_t>(p)]);
        return s.value() / static_cast<double>(far_bg.pixels.size());
    };

    const FrameEnsemble cascade(SourceSpec::speckled_speckle(1.0, 1.0), grid, 4000, 71);
    CHECK(background_mean(ghost_image(cascade, mask, 2)) == doctest::Approx(2.0).epsilon(0.06));

    const FrameEnsemble thermal(SourceSpec::thermal(1.0), grid, 3000, 72);
    CHECK(background_mean(ghost_image(thermal, mask, 2)) == doctest::Approx(1.0).epsilon(0.03));
}

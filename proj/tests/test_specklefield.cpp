#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "specklegi/specklefield.hpp"

using namespace specklegi;

namespace {

/// Uncorrelated exponential frames (no convolution); the delta-correlated
/// limit for speckle-area measurements.
class WhiteFrames final : public FrameSource {
public:
    WhiteFrames(GridSpec g, std::int64_t n, std::uint64_t seed) : g_(g), n_(n), seed_(seed) {}
    Frame frame(std::int64_t i) const override {
        Rng rng(derive_seed(seed_, 99, static_cast<std::uint64_t>(i)));
        Frame f;
        f.grid = g_;
        f.frame_index = i;
        f.intensity.resize(g_.npix());
        for (auto& v : f.intensity) v = rng.exponential(1.0);
        return f;
    }
    std::int64_t n_frames() const override { return n_; }
    const GridSpec& grid() const override { return g_; }

private:
    GridSpec g_;
    std::int64_t n_;
    std::uint64_t seed_;
};

}  // namespace

TEST_CASE("grid validation enforces the speckle_radius window") {
    GridSpec g{64, 64, 1.0, 3.0};
    CHECK_NOTHROW(g.validate());
    g.speckle_radius = 17.0;  // above min(w,h)/4
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g.speckle_radius = 0.4;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g.speckle_radius = 16.0;
    CHECK_NOTHROW(g.validate());
}

TEST_CASE("thermal synthesis: determinism, positivity, mean, g2") {
    const GridSpec grid{64, 64, 1.0, 2.5};
    const auto spec = SourceSpec::thermal(1.7);
    const FrameEnsemble a(spec, grid, 2000, 42);
    const FrameEnsemble b(spec, grid, 2000, 42);
    CHECK(a.frame(5).intensity == b.frame(5).intensity);
    CHECK(a.frame(1999).intensity == b.frame(1999).intensity);

    double mean = 0.0;
    for (std::int64_t i = 0; i < 200; ++i) {
        const Frame f = a.frame(i * 10);
        double fm = 0.0;
        for (double v : f.intensity) {
            CHECK(v >= 0.0);
            fm += v;
        }
        mean += fm / static_cast<double>(f.intensity.size());
    }
    mean /= 200.0;
    CHECK(mean == doctest::Approx(1.7).epsilon(0.01));  // ensemble mean within 1%

    const PooledG2 g2 = ensemble_single_pixel_g2(a, 2);
    CHECK(std::abs(g2.g2 - 2.0) < std::max(0.05, 3.0 * g2.se));
}

TEST_CASE("thermal frames are stationary away from nothing (torus synthesis)") {
    const GridSpec grid{48, 48, 1.0, 2.0};
    const FrameEnsemble ens(SourceSpec::thermal(1.0), grid, 3000, 7);
    std::vector<double> mean(grid.npix(), 0.0);
    for (std::int64_t i = 0; i < ens.n_frames(); ++i) {
        const Frame f = ens.frame(i);
        for (std::size_t p = 0; p < mean.size(); ++p) mean[p] += f.intensity[p];
    }
    for (auto& m : mean) m /= static_cast<double>(ens.n_frames());
    // single-pixel SE of the mean: sigma_I/sqrt(n) = mean/sqrt(n) for
    // exponential statistics; count pixels beyond 3 SE (expect ~0.3%)
    const double se = 1.0 / std::sqrt(static_cast<double>(ens.n_frames()));
    const int margin = static_cast<int>(std::ceil(3.0 * grid.speckle_radius));
    int outliers = 0, total = 0;
    for (int y = margin; y < grid.height - margin; ++y)
        for (int x = margin; x < grid.width - margin; ++x) {
            ++total;
            if (std::abs(mean[grid.index(x, y)] - 1.0) > 3.0 * se) ++outliers;
        }
    CHECK(outliers < total / 100);
}

TEST_CASE("apply_pinhole: identity, validation, mode-count convention") {
    GridSpec grid{64, 64, 1.0, 6.0};
    const ComplexField field = synthesize_thermal_field(grid, 1.0, 9);

    // disk covering the whole grid: field unchanged, mu_eff = grid/speckle area
    PinholeSpec all{32.0, 32.0, 64.0};
    const auto identity = apply_pinhole(field, all);
    CHECK(identity.field.values == field.values);
    CHECK(identity.mu_eff ==
          doctest::Approx(grid.npix() / nominal_speckle_area(6.0)).epsilon(1e-12));

    // radius equal to the speckle scale: mu_eff ~ 1/(2 ln 2) under the
    // half-max area convention (discretized disk)
    const auto one = apply_pinhole(field, {32.0, 32.0, 6.0});
    CHECK(one.mu_eff == doctest::Approx(1.0 / (2.0 * std::numbers::ln2)).epsilon(0.08));

    CHECK_THROWS_AS(apply_pinhole(field, {32.0, 32.0, 0.4}), std::invalid_argument);
    CHECK_THROWS_AS(apply_pinhole(field, {2.0, 32.0, 8.0}), std::invalid_argument);

    // restriction zeroes everything outside the disk
    const auto small = apply_pinhole(field, {32.0, 32.0, 5.0});
    for (int y = 0; y < grid.height; ++y)
        for (int x = 0; x < grid.width; ++x) {
            const double dx = x - 32.0, dy = y - 32.0;
            const bool inside = dx * dx + dy * dy <= 25.0;
            if (!inside) CHECK(small.field.values[grid.index(x, y)] == std::complex<double>(0.0));
        }
}

TEST_CASE("scatterer cascade: coherent input gives thermal statistics") {
    const GridSpec grid{48, 48, 1.0, 3.0};
    // constant-amplitude "pinhole" field: a single Gaussian stage remains
    class CoherentCascade final : public FrameSource {
    public:
        CoherentCascade(GridSpec g, std::int64_t n) : g_(g), n_(n) {
            src_.grid = g;
            src_.values.assign(g.npix(), {1.0, 0.0});
        }
        Frame frame(std::int64_t i) const override {
            const auto cloud = ScattererCloud::draw(100, derive_seed(4, 1, i));
            return scatter_speckled_speckle(src_, cloud, g_, derive_seed(4, 2, i), 1.0, 1.0);
        }
        std::int64_t n_frames() const override { return n_; }
        const GridSpec& grid() const override { return g_; }

    private:
        GridSpec g_;
        std::int64_t n_;
        ComplexField src_;
    };
    const CoherentCascade ens(grid, 1500);
    const PooledG2 g2 = ensemble_single_pixel_g2(ens, 2);
    CHECK(std::abs(g2.g2 - 2.0) <= 0.1);
}

TEST_CASE("scatterer cascade: single-speckle pinhole doubles the fluctuations") {
    const GridSpec grid{64, 64, 1.0, 3.0};
    const FrameEnsemble ens(SourceSpec::speckled_speckle(1.0, 1.0), grid, 6000, 21);
    const PooledG2 g2 = ensemble_single_pixel_g2(ens, 2);
    CHECK(std::abs(g2.g2 - 4.0) <= 0.2);

    double mean = 0.0;
    for (std::int64_t i = 0; i < 300; ++i) {
        const Frame f = ens.frame(i * 20);
        double fm = 0.0;
        for (double v : f.intensity) fm += v;
        mean += fm / static_cast<double>(f.intensity.size());
    }
    CHECK(mean / 300.0 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("scatterer cascade: wide pinhole approaches g2 = 2 + 2/mu_f") {
    const GridSpec grid{48, 48, 1.0, 3.0};
    const FrameEnsemble ens(SourceSpec::speckled_speckle(1.0, 20.0), grid, 3000, 22);
    const PooledG2 g2 = ensemble_single_pixel_g2(ens, 2);
    CHECK(std::abs(g2.g2 - (2.0 + 2.0 / 20.0)) <= 0.1);
}

TEST_CASE("scatterer cascade: degenerate inputs rejected") {
    const GridSpec grid{48, 48, 1.0, 3.0};
    ComplexField zero;
    zero.grid = grid;
    zero.values.assign(grid.npix(), {0.0, 0.0});
    const auto cloud = ScattererCloud::draw(10, 5);
    CHECK_THROWS_AS(scatter_speckled_speckle(zero, cloud, grid, 1), std::invalid_argument);
    CHECK_THROWS_AS(ScattererCloud::draw(0, 5), std::invalid_argument);
    // mode counts beyond the scatterer budget are unreachable
    CHECK_THROWS_AS(FrameEnsemble(SourceSpec::speckled_speckle(1.0, 150.0), grid, 10, 1),
                    std::invalid_argument);
}

TEST_CASE("second_harmonic: pointwise square and statistics") {
    GridSpec grid{32, 32, 1.0, 2.0};
    Frame c;
    c.grid = grid;
    c.intensity.assign(grid.npix(), 3.0);
    const Frame out = second_harmonic(c, 2.0);
    for (double v : out.intensity) CHECK(v == doctest::Approx(18.0).epsilon(1e-15));

    Frame zeros;
    zeros.grid = grid;
    zeros.intensity.assign(grid.npix(), 0.0);
    for (double v : second_harmonic(zeros, 1.0).intensity) CHECK(v == 0.0);

    CHECK_THROWS_AS(second_harmonic(c, 0.0), std::invalid_argument);

    // squared thermal speckle: g2 = 6
    const GridSpec g2grid{64, 64, 1.0, 2.5};
    const FrameEnsemble ens(SourceSpec::second_harmonic(1.0, 1.0, 1.0), g2grid, 3000, 30);
    const PooledG2 g2 = ensemble_single_pixel_g2(ens, 2);
    CHECK(std::abs(g2.g2 - 6.0) <= 0.5);
}

TEST_CASE("second-harmonic ensembles require integer mode counts") {
    const GridSpec grid{32, 32, 1.0, 2.0};
    CHECK_THROWS_AS(FrameEnsemble(SourceSpec::second_harmonic(1.0, 1.5, 1.0), grid, 4, 1),
                    std::invalid_argument);
    CHECK_NOTHROW(FrameEnsemble(SourceSpec::second_harmonic(1.0, 2.0, 1.0), grid, 4, 1));
}

TEST_CASE("field-level second harmonic matches the direct sampler (chi-square)") {
    const GridSpec grid{64, 64, 1.0, 3.0};
    const auto spec = SourceSpec::second_harmonic(1.0, 2.0, 1.0);
    const FrameEnsemble ens(spec, grid, 2500, 31);
    // subsample pixels several correlation lengths apart so draws are
    // effectively independent
    std::vector<double> field_samples;
    const int step = 12;
    for (std::int64_t i = 0; i < ens.n_frames(); ++i) {
        const Frame f = ens.frame(i);
        for (int y = 6; y < grid.height; y += step)
            for (int x = 6; x < grid.width; x += step)
                field_samples.push_back(f.at(x, y));
    }
    const auto direct = sample_intensity(spec, 100000, 32);

    std::vector<double> sorted = direct.values;
    std::sort(sorted.begin(), sorted.end());
    constexpr int bins = 20;
    std::vector<double> edges{0.0};
    for (int b = 1; b < bins; ++b)
        edges.push_back(sorted[sorted.size() * static_cast<std::size_t>(b) / bins]);
    edges.push_back(1e300);

    const double na = static_cast<double>(field_samples.size());
    const double nb = static_cast<double>(direct.values.size());
    double stat = 0.0;
    for (int b = 0; b < bins; ++b) {
        double ca = 0.0, cb = 0.0;
        for (double v : field_samples)
            if (v >= edges[b] && v < edges[b + 1]) ++ca;
        for (double v : direct.values)
            if (v >= edges[b] && v < edges[b + 1]) ++cb;
        const double t = ca * std::sqrt(nb / na) - cb * std::sqrt(na / nb);
        if (ca + cb > 0.0) stat += t * t / (ca + cb);
    }
    const double p = chi2_survival(stat, bins - 1);
    INFO("two-sample chi2 ", stat, " p ", p);
    CHECK(p > 0.001);
}

TEST_CASE("measure_speckle_area: calibration, scaling, white-noise limit") {
    // sigma = 4 keeps pixel quantization of the half-max region small
    const GridSpec g4{64, 64, 1.0, 4.0};
    const FrameEnsemble e4(SourceSpec::thermal(1.0), g4, 400, 40);
    const double a4 = measure_speckle_area(e4, 2);
    CHECK(a4 == doctest::Approx(nominal_speckle_area(4.0)).epsilon(0.15));

    const GridSpec g8{128, 128, 1.0, 8.0};
    const FrameEnsemble e8(SourceSpec::thermal(1.0), g8, 400, 41);
    const double a8 = measure_speckle_area(e8, 2);
    CHECK(a8 / a4 == doctest::Approx(4.0).epsilon(0.10));  // area scales as sigma^2

    const WhiteFrames white({48, 48, 1.0, 0.5}, 300, 42);
    CHECK(measure_speckle_area(white, 2) == doctest::Approx(1.0).epsilon(0.01));

    CHECK_THROWS_AS(measure_speckle_area(FrameEnsemble(SourceSpec::thermal(1.0), g4, 50, 1), 1),
                    std::invalid_argument);  // needs >= 100 frames
}

TEST_CASE("ensembles: single frame works, bad index rejected") {
    const GridSpec grid{32, 32, 1.0, 2.0};
    for (auto spec : {SourceSpec::thermal(1.0), SourceSpec::speckled_speckle(1.0, 1.0),
                      SourceSpec::second_harmonic(1.0, 1.0, 1.0)}) {
        const FrameEnsemble ens = generate_ensemble(spec, grid, 1, 3);
        const Frame f = ens.frame(0);
        CHECK(f.intensity.size() == grid.npix());
        CHECK_THROWS_AS(ens.frame(1), std::out_of_range);
    }
    CHECK_THROWS_AS(FrameEnsemble(SourceSpec::thermal(1.0), grid, 0, 1), std::invalid_argument);
}

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "specklegi/correlation.hpp"
#include "specklegi/fft.hpp"
#include "specklegi/frame.hpp"
#include "specklegi/numeric.hpp"
#include "specklegi/parallel.hpp"
#include "specklegi/photostatistics.hpp"
#include "specklegi/rng.hpp"

namespace specklegi {

namespace stream {
// substream tags for per-frame seed derivation
constexpr std::uint64_t frame = 1;
constexpr std::uint64_t stage1 = 2;
constexpr std::uint64_t cloud = 3;
constexpr std::uint64_t scatter = 4;
constexpr std::uint64_t mode = 5;
constexpr std::uint64_t white = 6;
}  // namespace stream

/// Half-max region area of the Gaussian intensity-correlation peak for a
/// field of correlation scale sigma: the working definition of "mean
/// speckle area" throughout (see measure_speckle_area).
inline double nominal_speckle_area(double sigma) {
    return 2.0 * std::numbers::pi * std::numbers::ln2 * sigma * sigma;
}

namespace detail {

struct KernelSpectrum {
    std::vector<double> transfer;  // FFT of the periodic Gaussian kernel (real)
    double energy = 0.0;           // sum of squared kernel samples
};

inline const KernelSpectrum& kernel_spectrum(const GridSpec& grid) {
    static std::mutex mtx;
    static std::map<std::tuple<int, int, double>, std::unique_ptr<KernelSpectrum>> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto& slot = cache[{grid.width, grid.height, grid.speckle_radius}];
    if (!slot) {
        auto ks = std::make_unique<KernelSpectrum>();
        const int w = grid.width, h = grid.height;
        const double s2 = 2.0 * grid.speckle_radius * grid.speckle_radius;
        std::vector<std::complex<double>> k(grid.npix());
        for (int y = 0; y < h; ++y) {
            const double dy = std::min(y, h - y);
            for (int x = 0; x < w; ++x) {
                const double dx = std::min(x, w - x);  // torus distance from the origin
                const double v = std::exp(-(dx * dx + dy * dy) / s2);
                k[grid.index(x, y)] = v;
                ks->energy += v * v;
            }
        }
        fft2(k, h, w, FFTW_FORWARD);
        ks->transfer.resize(k.size());
        for (std::size_t i = 0; i < k.size(); ++i) ks->transfer[i] = k[i].real();
        slot = std::move(ks);
    }
    return *slot;
}

}  // namespace detail

/// Fully developed speckle field: per-pixel circular complex Gaussian white
/// noise, both quadratures convolved (via FFT, circular) with a Gaussian
/// kernel of scale grid.speckle_radius, rescaled so the ensemble-mean
/// intensity equals `mean`. Single-pixel intensity is exponential.
inline ComplexField synthesize_thermal_field(const GridSpec& grid, double mean,
                                             std::uint64_t seed) {
    grid.validate();
    if (!(mean > 0.0)) throw std::invalid_argument("synthesize_thermal_field: mean must be > 0");
    const auto& ks = detail::kernel_spectrum(grid);
    ComplexField field;
    field.grid = grid;
    field.values.resize(grid.npix());
    Rng rng(derive_seed(seed, stream::white));
    constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2.0;
    for (auto& z : field.values)
        z = {rng.normal() * inv_sqrt2, rng.normal() * inv_sqrt2};  // E|z|^2 = 1
    fft2(field.values, grid.height, grid.width, FFTW_FORWARD);
    const double scale = std::sqrt(mean / ks.energy) / static_cast<double>(grid.npix());
    for (std::size_t i = 0; i < field.values.size(); ++i)
        field.values[i] *= ks.transfer[i] * scale;
    fft2(field.values, grid.height, grid.width, FFTW_BACKWARD);
    return field;
}

inline Frame intensity_frame(const ComplexField& field, std::int64_t index = 0) {
    Frame f;
    f.grid = field.grid;
    f.frame_index = index;
    f.intensity.resize(field.values.size());
    for (std::size_t i = 0; i < field.values.size(); ++i) f.intensity[i] = std::norm(field.values[i]);
    return f;
}

inline Frame synthesize_thermal_frame(const GridSpec& grid, double mean, std::uint64_t seed) {
    return intensity_frame(synthesize_thermal_field(grid, mean, seed));
}

/// Sum of n_modes independent speckle intensity patterns; per-pixel
/// statistics are Gamma(n_modes) with the given total mean. Used as the
/// multimode fundamental of the frequency-doubled source.
inline Frame synthesize_multimode_intensity(const GridSpec& grid, double mean_total, int n_modes,
                                            std::uint64_t seed) {
    if (n_modes < 1) throw std::invalid_argument("synthesize_multimode_intensity: n_modes >= 1");
    Frame total;
    total.grid = grid;
    total.intensity.assign(grid.npix(), 0.0);
    for (int m = 0; m < n_modes; ++m) {
        const ComplexField f = synthesize_thermal_field(grid, mean_total / n_modes,
                                                        derive_seed(seed, stream::mode, m));
        for (std::size_t i = 0; i < total.intensity.size(); ++i)
            total.intensity[i] += std::norm(f.values[i]);
    }
    return total;
}

/// Ideal second-harmonic conversion: out(p) = k * in(p)^2, grid preserved.
inline Frame second_harmonic(const Frame& in, double k) {
    if (!(k > 0.0)) throw std::invalid_argument("second_harmonic: k must be positive");
    Frame out;
    out.grid = in.grid;
    out.frame_index = in.frame_index;
    out.intensity.resize(in.intensity.size());
    for (std::size_t i = 0; i < in.intensity.size(); ++i) {
        const double v = in.intensity[i];
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("second_harmonic: invalid input intensity");
        out.intensity[i] = k * v * v;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pinhole selection
// ---------------------------------------------------------------------------

/// Disk-shaped mode selector, pixel coordinates.
struct PinholeSpec {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 1.0;
};

struct PinholeResult {
    ComplexField field;  // zero outside the disk
    double mu_eff = 0.0; // selected area / mean speckle area
};

/// Zeroes the field outside the pinhole disk. The disk must lie fully inside
/// the grid, or cover every pixel (the identity case). mu_eff uses the
/// half-max speckle-area convention of measure_speckle_area, so a disk of
/// radius equal to speckle_radius reports mu_eff = 1/(2 ln 2) ~ 0.72.
inline PinholeResult apply_pinhole(const ComplexField& in, const PinholeSpec& ph) {
    const GridSpec& g = in.grid;
    if (!(ph.radius >= 0.5))
        throw std::invalid_argument("apply_pinhole: radius must be >= 0.5 px");
    const double r2 = ph.radius * ph.radius;
    auto inside = [&](double x, double y) {
        const double dx = x - ph.cx, dy = y - ph.cy;
        return dx * dx + dy * dy <= r2;
    };
    const bool covers = inside(0, 0) && inside(g.width - 1, 0) && inside(0, g.height - 1) &&
                        inside(g.width - 1, g.height - 1);
    const bool contained = ph.cx - ph.radius >= 0.0 && ph.cx + ph.radius <= g.width - 1.0 &&
                           ph.cy - ph.radius >= 0.0 && ph.cy + ph.radius <= g.height - 1.0;
    if (!covers && !contained)
        throw std::invalid_argument("apply_pinhole: disk extends outside the grid");

    PinholeResult out;
    out.field.grid = g;
    out.field.values.assign(g.npix(), {0.0, 0.0});
    double area = 0.0;
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x)
            if (inside(x, y)) {
                out.field.values[g.index(x, y)] = in.values[g.index(x, y)];
                area += 1.0;
            }
    if (area == 0.0) throw std::invalid_argument("apply_pinhole: disk selects no pixel");
    out.mu_eff = area / nominal_speckle_area(g.speckle_radius);
    return out;
}

// ---------------------------------------------------------------------------
// Scattering cascade (speckled speckle)
// ---------------------------------------------------------------------------

/// Point scatterers diffusing the pinhole light. Transverse coordinates in
/// [-1/2, 1/2] map to far-field spatial frequencies; the axial coordinate
/// z in [0, 1) sets the propagation piston phase. Positions are redrawn
/// from the fixed unit box every frame.
struct ScattererCloud {
    std::vector<std::array<double, 3>> positions;

    static ScattererCloud draw(int count, std::uint64_t seed) {
        if (count < 1) throw std::invalid_argument("ScattererCloud: count must be >= 1");
        ScattererCloud c;
        c.positions.resize(count);
        Rng rng(derive_seed(seed, stream::cloud));
        for (auto& p : c.positions) {
            p[0] = rng.uniform() - 0.5;
            p[1] = rng.uniform() - 0.5;
            p[2] = rng.uniform();
        }
        return c;
    }
};

/// Half-width (times sigma) of the uniform spatial-frequency box whose
/// intensity-correlation FWHM matches a Gaussian field of scale sigma.
constexpr double kBoxFrequencyScale = 0.1881027;

/// Far-field superposition of the scatterer cloud illuminated by the pinhole
/// field: E(p) = sum_j A_j exp(i phi_j(p)) with one complex amplitude A_j
/// sampled per scatterer from the pinhole support and phase
/// phi_j(p) = 2 pi (z_j - f_j . p), f_j the scatterer's transverse position
/// mapped to a spatial frequency such that the output speckle size follows
/// grid.speckle_radius. Intensity is rescaled so the ensemble mean equals
/// target_mean, with pinhole_mean the per-pixel mean feeding the pinhole.
inline Frame scatter_speckled_speckle(const ComplexField& pinhole_field,
                                      const ScattererCloud& cloud, const GridSpec& grid,
                                      std::uint64_t seed, double pinhole_mean = 1.0,
                                      double target_mean = 1.0) {
    grid.validate();
    if (cloud.positions.empty())
        throw std::invalid_argument("scatter_speckled_speckle: empty scatterer cloud");
    if (!(pinhole_mean > 0.0) || !(target_mean > 0.0))
        throw std::invalid_argument("scatter_speckled_speckle: means must be positive");

    std::vector<std::size_t> support;
    for (std::size_t i = 0; i < pinhole_field.values.size(); ++i)
        if (pinhole_field.values[i] != std::complex<double>(0.0, 0.0)) support.push_back(i);
    if (support.empty())
        throw std::invalid_argument("scatter_speckled_speckle: pinhole field is identically zero");

    Rng rng(derive_seed(seed, stream::scatter));
    const int w = grid.width, h = grid.height;
    std::vector<double> er(grid.npix(), 0.0), ei(grid.npix(), 0.0);
    std::vector<double> cxr(w), cxi(w);
    const double f_half = kBoxFrequencyScale / grid.speckle_radius;

    for (const auto& pos : cloud.positions) {
        const std::size_t pick =
            std::min(support.size() - 1,
                     static_cast<std::size_t>(rng.uniform() * static_cast<double>(support.size())));
        const std::complex<double> amp = pinhole_field.values[support[pick]];
        const double piston = 2.0 * std::numbers::pi * pos[2];
        std::complex<double> b = amp * std::complex<double>(std::cos(piston), std::sin(piston));
        const double ax = -2.0 * std::numbers::pi * (2.0 * f_half * pos[0]);
        const double ay = -2.0 * std::numbers::pi * (2.0 * f_half * pos[1]);

        // column phases e^{i ax x} by rotation recurrence
        const double cax = std::cos(ax), sax = std::sin(ax);
        cxr[0] = 1.0;
        cxi[0] = 0.0;
        for (int x = 1; x < w; ++x) {
            cxr[x] = cxr[x - 1] * cax - cxi[x - 1] * sax;
            cxi[x] = cxr[x - 1] * sax + cxi[x - 1] * cax;
        }
        const double cay = std::cos(ay), say = std::sin(ay);
        double rr = b.real(), ri = b.imag();  // row factor b * e^{i ay y}
        for (int y = 0; y < h; ++y) {
            double* __restrict pr = er.data() + static_cast<std::size_t>(y) * w;
            double* __restrict pi = ei.data() + static_cast<std::size_t>(y) * w;
            const double* __restrict cr = cxr.data();
            const double* __restrict ci = cxi.data();
            for (int x = 0; x < w; ++x) {
                pr[x] += rr * cr[x] - ri * ci[x];
                pi[x] += rr * ci[x] + ri * cr[x];
            }
            const double t = rr * cay - ri * say;
            ri = rr * say + ri * cay;
            rr = t;
        }
    }

    Frame out;
    out.grid = grid;
    out.intensity.resize(grid.npix());
    const double scale = target_mean / (static_cast<double>(cloud.positions.size()) * pinhole_mean);
    for (std::size_t i = 0; i < out.intensity.size(); ++i)
        out.intensity[i] = (er[i] * er[i] + ei[i] * ei[i]) * scale;
    return out;
}

// ---------------------------------------------------------------------------
// Pinhole radius calibration for a requested first-stage mode count
// ---------------------------------------------------------------------------

namespace detail {

/// Mean of exp(-|q-q'|^2 / (2 sigma^2)) over independent uniform points in a
/// disk of radius r, integrating the continuum pair-distance density with
/// composite Simpson (the integrand is smooth on [0, 2r]).
inline double disk_pair_average(double r, double sigma) {
    const double s2 = 2.0 * sigma * sigma;
    auto f = [&](double d) {
        const double u = d / (2.0 * r);
        const double density = (2.0 * d / (r * r)) * (2.0 / std::numbers::pi) *
                               (std::acos(u) - u * std::sqrt(std::max(0.0, 1.0 - u * u)));
        return density * std::exp(-d * d / s2);
    };
    const int n = 512;
    const double h = 2.0 * r / n;
    double s = f(1e-12) + f(2.0 * r - 1e-12);
    for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

/// Relative variance of the scatterer-sampled pinhole power
/// S = sum_j |A_j|^2 for n_scatter independent draws over the disk.
inline double sampled_power_variance(double r, double sigma, int n_scatter) {
    const double n = n_scatter;
    return 1.0 / n + (1.0 - 1.0 / n) * disk_pair_average(r, sigma);
}

/// Same, but over an explicit support pixel set (exact for small disks).
inline double sampled_power_variance_discrete(const std::vector<std::array<double, 2>>& px,
                                              double sigma, int n_scatter) {
    const double s2 = 2.0 * sigma * sigma;
    double acc = 0.0;
    for (const auto& a : px)
        for (const auto& b : px) {
            const double dx = a[0] - b[0], dy = a[1] - b[1];
            acc += std::exp(-(dx * dx + dy * dy) / s2);
        }
    const double pair_avg = acc / (static_cast<double>(px.size()) * px.size());
    const double n = n_scatter;
    return 1.0 / n + (1.0 - 1.0 / n) * pair_avg;
}

}  // namespace detail

/// Pinhole radius realizing a first-stage mode count mu_f on a field of
/// correlation scale sigma1, given the scatterer count. Monotone bisection
/// on the analytic pair average, refined against the discrete pixel support
/// for small disks. Throws when mu_f is unreachable (close to or above the
/// scatterer count).
inline double pinhole_radius_for_mode_count(double mu_f, double sigma1, int n_scatter) {
    if (!(mu_f >= 1.0)) throw std::invalid_argument("mu_f must be >= 1");
    const double target = 1.0 / mu_f;
    if (target <= 1.05 / n_scatter)
        throw std::invalid_argument(
            "requested mu_f is not reachable with " + std::to_string(n_scatter) +
            " scatterers; increase the scatterer count");
    double lo = 0.5, hi = 0.5;
    if (detail::sampled_power_variance(lo, sigma1, n_scatter) <= target) return lo;
    while (detail::sampled_power_variance(hi, sigma1, n_scatter) > target) {
        hi *= 2.0;
        if (hi > 4096.0) throw std::runtime_error("pinhole radius search diverged");
    }
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (detail::sampled_power_variance(mid, sigma1, n_scatter) > target)
            lo = mid;
        else
            hi = mid;
    }
    double r = 0.5 * (lo + hi);

    // pixel-quantization refinement when the disk holds few pixels
    if (r < 11.0) {
        double best_r = r, best_err = std::numeric_limits<double>::infinity();
        for (double cand = std::max(0.5, r - 2.0); cand <= r + 2.0; cand += 0.125) {
            std::vector<std::array<double, 2>> px;
            const int reach = static_cast<int>(std::ceil(cand));
            for (int dy = -reach; dy <= reach; ++dy)
                for (int dx = -reach; dx <= reach; ++dx)
                    if (dx * dx + dy * dy <= cand * cand)
                        px.push_back({static_cast<double>(dx), static_cast<double>(dy)});
            if (px.empty()) continue;
            const double v = detail::sampled_power_variance_discrete(px, sigma1, n_scatter);
            const double err = std::abs(v - target);
            if (err < best_err) {
                best_err = err;
                best_r = cand;
            }
        }
        r = best_r;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Frame ensembles
// ---------------------------------------------------------------------------

/// Deterministic streaming ensemble: frame i depends only on
/// (spec, grid, master_seed, i), so generation order and thread count do not
/// change any pixel. Frames are synthesized on demand and never stored.
class FrameEnsemble final : public FrameSource {
public:
    FrameEnsemble(SourceSpec spec, GridSpec grid, std::int64_t n_frames,
                  std::uint64_t master_seed, int scatterer_count = 100)
        : spec_(spec), grid_(grid), n_(n_frames), seed_(master_seed),
          scatterers_(scatterer_count) {
        spec_.validate();
        grid_.validate();
        if (n_ < 1) throw std::invalid_argument("FrameEnsemble: need at least one frame");
        if (spec_.kind == SourceKind::SpeckledSpeckle) {
            pinhole_radius_ = pinhole_radius_for_mode_count(spec_.mu_f, kStage1Sigma, scatterers_);
            int patch = static_cast<int>(std::ceil(2.0 * pinhole_radius_ + 8.0 * kStage1Sigma));
            patch = std::max(patch, 32);
            patch += patch % 2;
            stage1_ = GridSpec{patch, patch, 1.0, kStage1Sigma};
            stage1_.validate();
        }
        if (spec_.kind == SourceKind::SecondHarmonic) {
            modes_ = static_cast<int>(std::llround(spec_.mu));
            if (std::abs(spec_.mu - modes_) > 1e-9)
                throw std::invalid_argument(
                    "FrameEnsemble: field synthesis needs an integer second-harmonic mode "
                    "count (the analytic operations accept real mu)");
        }
    }

    Frame frame(std::int64_t index) const override {
        if (index < 0 || index >= n_) throw std::out_of_range("FrameEnsemble: bad frame index");
        const std::uint64_t fs = derive_seed(seed_, stream::frame, static_cast<std::uint64_t>(index));
        Frame f;
        switch (spec_.kind) {
            case SourceKind::Thermal:
                f = synthesize_thermal_frame(grid_, spec_.mean(), fs);
                break;
            case SourceKind::SpeckledSpeckle: {
                const ComplexField first = synthesize_thermal_field(stage1_, 1.0,
                                                                    derive_seed(fs, stream::stage1));
                PinholeSpec ph{stage1_.width / 2.0, stage1_.height / 2.0, pinhole_radius_};
                const PinholeResult sel = apply_pinhole(first, ph);
                const ScattererCloud cloud =
                    ScattererCloud::draw(scatterers_, derive_seed(fs, stream::cloud));
                f = scatter_speckled_speckle(sel.field, cloud, grid_,
                                             derive_seed(fs, stream::scatter), 1.0, spec_.mean());
                break;
            }
            case SourceKind::SecondHarmonic: {
                const Frame fund = synthesize_multimode_intensity(grid_, spec_.mean_fund, modes_,
                                                                  derive_seed(fs, stream::stage1));
                f = second_harmonic(fund, spec_.conversion_k);
                break;
            }
        }
        f.frame_index = index;
        return f;
    }

    std::int64_t n_frames() const override { return n_; }
    const GridSpec& grid() const override { return grid_; }
    const SourceSpec& spec() const { return spec_; }
    std::uint64_t master_seed() const { return seed_; }
    double pinhole_radius() const { return pinhole_radius_; }

    static constexpr double kStage1Sigma = 4.0;  // first-diffuser speckle scale, px

private:
    SourceSpec spec_;
    GridSpec grid_;
    std::int64_t n_;
    std::uint64_t seed_;
    int scatterers_;
    int modes_ = 1;
    double pinhole_radius_ = 0.5;
    GridSpec stage1_{};
};

inline FrameEnsemble generate_ensemble(const SourceSpec& spec, const GridSpec& grid,
                                       std::int64_t n_frames, std::uint64_t master_seed) {
    return FrameEnsemble(spec, grid, n_frames, master_seed);
}

// ---------------------------------------------------------------------------
// Ensemble statistics
// ---------------------------------------------------------------------------

struct PooledG2 {
    double g2 = 0.0;
    double se = 0.0;  // block-jackknife standard error
    std::int64_t n_frames = 0;
};

/// Pooled single-pixel g2 over all frames and all pixels at least
/// border_margin pixels from the frame edge (margin < 0 selects 3 sigma).
inline PooledG2 ensemble_single_pixel_g2(const FrameSource& src, int n_threads = 1,
                                         int border_margin = -1) {
    const GridSpec g = src.grid();
    if (border_margin < 0) border_margin = static_cast<int>(std::ceil(3.0 * g.speckle_radius));
    if (2 * border_margin >= std::min(g.width, g.height))
        throw std::invalid_argument("ensemble_single_pixel_g2: margin leaves no pixels");
    struct Acc {
        double s1 = 0.0, s2 = 0.0;
        std::int64_t n = 0;
    };
    const int x0 = border_margin, x1 = g.width - border_margin;
    const int y0 = border_margin, y1 = g.height - border_margin;
    auto blocks = map_frame_blocks<Acc>(
        src, n_threads, [] { return Acc{}; },
        [&](Acc& a, const Frame& f) {
            KahanSum s1, s2;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) {
                    const double v = f.at(x, y);
                    s1.add(v);
                    s2.add(v * v);
                }
            a.s1 += s1.value();
            a.s2 += s2.value();
            a.n += static_cast<std::int64_t>(x1 - x0) * (y1 - y0);
        });

    double S1 = 0.0, S2 = 0.0;
    std::int64_t N = 0, frames = 0;
    for (const auto& b : blocks) {
        S1 += b.s1;
        S2 += b.s2;
        N += b.n;
    }
    frames = src.n_frames();
    auto g2_of = [](double s1, double s2, double n) { return (s2 / n) / ((s1 / n) * (s1 / n)); };
    PooledG2 out;
    out.n_frames = frames;
    out.g2 = g2_of(S1, S2, static_cast<double>(N));
    if (blocks.size() >= 2) {
        std::vector<double> loo;
        loo.reserve(blocks.size());
        for (const auto& b : blocks)
            loo.push_back(g2_of(S1 - b.s1, S2 - b.s2, static_cast<double>(N - b.n)));
        const double m = mean_of(loo);
        double ss = 0.0;
        for (double v : loo) ss += (v - m) * (v - m);
        const double nb = static_cast<double>(loo.size());
        out.se = std::sqrt((nb - 1.0) / nb * ss);
    }
    return out;
}

/// Mean speckle area (px^2) from the averaged FFT autocorrelation: the area
/// of the connected region around the peak where the background-subtracted
/// map exceeds half its central value.
inline double measure_speckle_area(const FrameSource& src, int n_threads = 1) {
    if (src.n_frames() < 100)
        throw std::invalid_argument("measure_speckle_area: need at least 100 frames");
    const CorrelationMap map = autocorrelation_fft(src, n_threads);
    const GridSpec& g = map.grid;
    const int cx = g.width / 2, cy = g.height / 2;

    // baseline from lags far outside any plausible correlation lobe
    const double far = std::min(g.width, g.height) / 3.0;
    std::vector<double> base;
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) {
            const double dx = x - cx, dy = y - cy;
            if (dx * dx + dy * dy >= far * far) base.push_back(map.at(x, y));
        }
    if (base.size() < 16) throw std::runtime_error("measure_speckle_area: grid too small");
    const double baseline = mean_of(base);
    const double noise = sample_stddev(base);
    const double peak = map.at(cx, cy);
    if (!(peak - baseline > 3.0 * noise) || !(peak > baseline))
        throw std::runtime_error("measure_speckle_area: no resolvable correlation peak");

    const double threshold = baseline + 0.5 * (peak - baseline);
    // flood fill from the center over pixels above the half-max threshold
    std::vector<std::uint8_t> seen(g.npix(), 0);
    std::vector<std::pair<int, int>> stack{{cx, cy}};
    seen[g.index(cx, cy)] = 1;
    double area = 0.0;
    while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        if (map.at(x, y) < threshold) continue;
        area += 1.0;
        const int nx[4] = {x - 1, x + 1, x, x};
        const int ny[4] = {y, y, y - 1, y + 1};
        for (int k = 0; k < 4; ++k) {
            if (nx[k] < 0 || ny[k] < 0 || nx[k] >= g.width || ny[k] >= g.height) continue;
            if (!seen[g.index(nx[k], ny[k])]) {
                seen[g.index(nx[k], ny[k])] = 1;
                stack.emplace_back(nx[k], ny[k]);
            }
        }
    }
    return area;
}

}  // namespace specklegi

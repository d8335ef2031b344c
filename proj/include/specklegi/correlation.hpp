#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "specklegi/fft.hpp"
#include "specklegi/frame.hpp"
#include "specklegi/io.hpp"
#include "specklegi/numeric.hpp"
#include "specklegi/parallel.hpp"

namespace specklegi {

enum class MapKind { Autocorrelation, PixelCorr, GI, DGI };

inline const char* to_string(MapKind k) {
    switch (k) {
        case MapKind::Autocorrelation: return "autocorrelation";
        case MapKind::PixelCorr: return "pixel-correlation";
        case MapKind::GI: return "gi";
        case MapKind::DGI: return "dgi";
    }
    return "?";
}

/// Normalized ensemble correlation map. Uncorrelated lags/pixels sit at 1
/// for autocorrelation, pixel correlation and GI; differential maps sit at 0
/// and may be negative.
struct CorrelationMap {
    GridSpec grid;
    std::vector<double> values;
    MapKind kind = MapKind::Autocorrelation;
    std::int64_t n_frames_used = 0;

    double at(int x, int y) const { return values[grid.index(x, y)]; }
};

namespace detail {
inline void add_vec(std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}
}  // namespace detail

// ---------------------------------------------------------------------------
// FFT autocorrelation, averaged over the ensemble
// ---------------------------------------------------------------------------

/// Accumulator: per-frame power spectra and the running mean frame.
/// |FFT(I)|^2 is linear in the average, so the inverse transform is applied
/// once at finalize time instead of once per frame.
struct AutocorrAcc {
    std::vector<double> power_sum;
    std::vector<double> frame_sum;
    std::int64_t n = 0;
    std::vector<std::complex<double>> scratch;  // reused within a block, not merged

    explicit AutocorrAcc(const GridSpec& g)
        : power_sum(g.npix(), 0.0), frame_sum(g.npix(), 0.0) {}

    void step(const Frame& f) {
        const auto& g = f.grid;
        scratch.assign(f.intensity.begin(), f.intensity.end());
        fft2(scratch, g.height, g.width, FFTW_FORWARD);
        for (std::size_t i = 0; i < power_sum.size(); ++i) power_sum[i] += std::norm(scratch[i]);
        detail::add_vec(frame_sum, f.intensity);
        ++n;
    }

    void merge(const AutocorrAcc& o) {
        detail::add_vec(power_sum, o.power_sum);
        detail::add_vec(frame_sum, o.frame_sum);
        n += o.n;
    }
};

inline AutocorrAcc autocorrelation_accumulate(const FrameSource& src, int n_threads = 1) {
    if (src.n_frames() < 2)
        throw std::invalid_argument("autocorrelation: need at least 2 frames");
    const GridSpec g = src.grid();
    return reduce_frames<AutocorrAcc>(
        src, n_threads, [&g] { return AutocorrAcc(g); },
        [](AutocorrAcc& a, const Frame& f) { a.step(f); },
        [](AutocorrAcc& a, const AutocorrAcc& b) { a.merge(b); });
}

/// Average circular intensity autocorrelation divided by the autocorrelation
/// of the ensemble-mean frame, shifted so zero lag sits at the map center.
/// The central value estimates the zero-lag g2; fully uncorrelated lags sit
/// at 1.
inline CorrelationMap autocorrelation_finalize(const AutocorrAcc& acc, const GridSpec& grid) {
    if (acc.n < 2) throw std::invalid_argument("autocorrelation: need at least 2 frames");
    const int w = grid.width, h = grid.height;
    const std::size_t npix = grid.npix();
    const double npixd = static_cast<double>(npix);
    const double n = static_cast<double>(acc.n);

    std::vector<std::complex<double>> buf(npix);
    // raw <autocorrelation> = IFFT(<|FFT I|^2>) / npix
    for (std::size_t i = 0; i < npix; ++i) buf[i] = acc.power_sum[i] / n;
    fft2(buf, h, w, FFTW_BACKWARD);
    std::vector<double> ac_avg(npix);
    for (std::size_t i = 0; i < npix; ++i) ac_avg[i] = buf[i].real() / npixd;

    // autocorrelation of the mean pattern (the normalization)
    for (std::size_t i = 0; i < npix; ++i) buf[i] = acc.frame_sum[i] / n;
    fft2(buf, h, w, FFTW_FORWARD);
    for (auto& z : buf) z = std::norm(z);
    fft2(buf, h, w, FFTW_BACKWARD);

    CorrelationMap map;
    map.grid = grid;
    map.kind = MapKind::Autocorrelation;
    map.n_frames_used = acc.n;
    map.values.resize(npix);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double denom = buf[grid.index(x, y)].real() / npixd;
            if (!(denom > 0.0))
                throw std::runtime_error("autocorrelation: degenerate (all-zero) frames");
            // shift zero lag to the center pixel
            const int xs = (x + w / 2) % w;
            const int ys = (y + h / 2) % h;
            map.values[grid.index(xs, ys)] = ac_avg[grid.index(x, y)] / denom;
        }
    return map;
}

inline CorrelationMap autocorrelation_fft(const FrameSource& src, int n_threads = 1) {
    return autocorrelation_finalize(autocorrelation_accumulate(src, n_threads), src.grid());
}

// ---------------------------------------------------------------------------
// Single-pixel correlation map
// ---------------------------------------------------------------------------

struct PixelCorrAcc {
    std::vector<double> cross_sum;  // sum_t I_t(px) I_t(p)
    std::vector<double> frame_sum;  // sum_t I_t(p)
    double px_sum = 0.0;
    std::int64_t n = 0;
    std::size_t px_index = 0;

    PixelCorrAcc(const GridSpec& g, std::size_t px)
        : cross_sum(g.npix(), 0.0), frame_sum(g.npix(), 0.0), px_index(px) {}

    void step(const Frame& f) {
        const double v = f.intensity[px_index];
        for (std::size_t i = 0; i < cross_sum.size(); ++i) {
            cross_sum[i] += v * f.intensity[i];
            frame_sum[i] += f.intensity[i];
        }
        px_sum += v;
        ++n;
    }

    void merge(const PixelCorrAcc& o) {
        detail::add_vec(cross_sum, o.cross_sum);
        detail::add_vec(frame_sum, o.frame_sum);
        px_sum += o.px_sum;
        n += o.n;
    }
};

inline PixelCorrAcc pixel_correlation_accumulate(const FrameSource& src, int px, int py,
                                                 int n_threads = 1) {
    const GridSpec g = src.grid();
    if (px < 0 || py < 0 || px >= g.width || py >= g.height)
        throw std::invalid_argument("pixel_correlation: pixel outside grid");
    if (src.n_frames() < 2)
        throw std::invalid_argument("pixel_correlation: need at least 2 frames");
    const std::size_t idx = g.index(px, py);
    return reduce_frames<PixelCorrAcc>(
        src, n_threads, [&] { return PixelCorrAcc(g, idx); },
        [](PixelCorrAcc& a, const Frame& f) { a.step(f); },
        [](PixelCorrAcc& a, const PixelCorrAcc& b) { a.merge(b); });
}

inline CorrelationMap pixel_correlation_finalize(const PixelCorrAcc& acc, const GridSpec& grid) {
    const double n = static_cast<double>(acc.n);
    const double mean_px = acc.px_sum / n;
    if (!(mean_px != 0.0))
        throw std::domain_error("pixel_correlation: reference pixel has zero mean");
    CorrelationMap map;
    map.grid = grid;
    map.kind = MapKind::PixelCorr;
    map.n_frames_used = acc.n;
    map.values.resize(grid.npix());
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        const double mean_i = acc.frame_sum[i] / n;
        if (!(mean_i != 0.0))
            throw std::domain_error("pixel_correlation: zero-mean field pixel");
        map.values[i] = (acc.cross_sum[i] / n) / (mean_px * mean_i);
    }
    return map;
}

/// G_px(p) = <I_px I_p> / (<I_px><I_p>) over the ensemble.
inline CorrelationMap pixel_correlation(const FrameSource& src, int px, int py,
                                        int n_threads = 1) {
    return pixel_correlation_finalize(pixel_correlation_accumulate(src, px, py, n_threads),
                                      src.grid());
}

// ---------------------------------------------------------------------------
// Ghost imaging and differential ghost imaging
// ---------------------------------------------------------------------------

/// Shared accumulator for the bucket (object) sum and the optional
/// reference-region sum. Bucket sums run compensated: masks can cover 1e4+
/// pixels and their sums feed ratios directly.
struct BucketAcc {
    std::vector<double> bucket_cross;  // sum_t b_t I_t(p)
    std::vector<double> ref_cross;     // sum_t r_t I_t(p) (empty if no reference)
    std::vector<double> frame_sum;
    double bucket_sum = 0.0;
    double ref_sum = 0.0;
    std::int64_t n = 0;
    std::vector<std::int32_t> mask_pixels;
    std::vector<std::int32_t> ref_pixels;

    BucketAcc(const GridSpec& g, std::vector<std::int32_t> mask_px,
              std::vector<std::int32_t> ref_px)
        : bucket_cross(g.npix(), 0.0),
          ref_cross(ref_px.empty() ? 0 : g.npix(), 0.0),
          frame_sum(g.npix(), 0.0),
          mask_pixels(std::move(mask_px)),
          ref_pixels(std::move(ref_px)) {}

    void step(const Frame& f) {
        KahanSum bs;
        for (auto p : mask_pixels) bs.add(f.intensity[static_cast<std::size_t>(p)]);
        const double b = bs.value();
        bucket_sum += b;
        if (!ref_pixels.empty()) {
            KahanSum rs;
            for (auto p : ref_pixels) rs.add(f.intensity[static_cast<std::size_t>(p)]);
            const double r = rs.value();
            ref_sum += r;
            for (std::size_t i = 0; i < frame_sum.size(); ++i) {
                bucket_cross[i] += b * f.intensity[i];
                ref_cross[i] += r * f.intensity[i];
                frame_sum[i] += f.intensity[i];
            }
        } else {
            for (std::size_t i = 0; i < frame_sum.size(); ++i) {
                bucket_cross[i] += b * f.intensity[i];
                frame_sum[i] += f.intensity[i];
            }
        }
        ++n;
    }

    void merge(const BucketAcc& o) {
        detail::add_vec(bucket_cross, o.bucket_cross);
        if (!ref_cross.empty()) detail::add_vec(ref_cross, o.ref_cross);
        detail::add_vec(frame_sum, o.frame_sum);
        bucket_sum += o.bucket_sum;
        ref_sum += o.ref_sum;
        n += o.n;
    }

    /// Removes a previously merged partial accumulation (jackknife support).
    void subtract(const BucketAcc& o) {
        for (std::size_t i = 0; i < bucket_cross.size(); ++i) bucket_cross[i] -= o.bucket_cross[i];
        if (!ref_cross.empty())
            for (std::size_t i = 0; i < ref_cross.size(); ++i) ref_cross[i] -= o.ref_cross[i];
        for (std::size_t i = 0; i < frame_sum.size(); ++i) frame_sum[i] -= o.frame_sum[i];
        bucket_sum -= o.bucket_sum;
        ref_sum -= o.ref_sum;
        n -= o.n;
    }
};

inline std::vector<std::int32_t> mask_pixel_list(const GridSpec& grid, const Mask& mask) {
    if (mask.width != grid.width || mask.height != grid.height)
        throw std::invalid_argument("mask does not match grid");
    mask.validate();
    return Region::from_mask(grid, mask).pixels;
}

inline BucketAcc bucket_accumulate(const FrameSource& src, const Mask& mask,
                                   const Region* reference, int n_threads = 1) {
    const GridSpec g = src.grid();
    if (src.n_frames() < 2) throw std::invalid_argument("ghost imaging: need at least 2 frames");
    auto mask_px = mask_pixel_list(g, mask);
    std::vector<std::int32_t> ref_px;
    if (reference) {
        reference->validate(g);
        Region mask_region;
        mask_region.pixels = mask_px;
        if (!reference->disjoint_from(mask_region))
            throw std::invalid_argument("reference region overlaps the object mask");
        ref_px = reference->pixels;
    }
    return reduce_frames<BucketAcc>(
        src, n_threads, [&] { return BucketAcc(g, mask_px, ref_px); },
        [](BucketAcc& a, const Frame& f) { a.step(f); },
        [](BucketAcc& a, const BucketAcc& b) { a.merge(b); });
}

inline CorrelationMap ghost_finalize(const BucketAcc& acc, const GridSpec& grid, bool differential) {
    if (differential && acc.ref_cross.empty())
        throw std::invalid_argument("dgi: missing reference accumulation");
    const double n = static_cast<double>(acc.n);
    const double mean_b = acc.bucket_sum / n;
    if (!(mean_b != 0.0)) throw std::domain_error("ghost image: zero mean bucket");
    const double mean_r = acc.ref_sum / n;
    if (differential && !(mean_r != 0.0))
        throw std::domain_error("dgi: zero mean reference signal");
    CorrelationMap map;
    map.grid = grid;
    map.kind = differential ? MapKind::DGI : MapKind::GI;
    map.n_frames_used = acc.n;
    map.values.resize(grid.npix());
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        const double mean_i = acc.frame_sum[i] / n;
        if (!(mean_i != 0.0)) throw std::domain_error("ghost image: zero-mean field pixel");
        const double gi = (acc.bucket_cross[i] / n) / (mean_b * mean_i);
        if (differential) {
            const double ref = (acc.ref_cross[i] / n) / (mean_r * mean_i);
            map.values[i] = gi - ref;
        } else {
            map.values[i] = gi;
        }
    }
    return map;
}

/// G_GI(p) = <b I_p> / (<b><I_p>) with bucket b = sum of I over mask pixels.
inline CorrelationMap ghost_image(const FrameSource& src, const Mask& mask, int n_threads = 1) {
    return ghost_finalize(bucket_accumulate(src, mask, nullptr, n_threads), src.grid(), false);
}

/// G_DGI(p) = <b I_p>/(<b><I_p>) - <r I_p>/(<r><I_p>) with r summed over a
/// reference region disjoint from the mask.
inline CorrelationMap differential_ghost_image(const FrameSource& src, const Mask& mask,
                                               const Region& reference, int n_threads = 1) {
    return ghost_finalize(bucket_accumulate(src, mask, &reference, n_threads), src.grid(), true);
}

// ---------------------------------------------------------------------------
// Map export
// ---------------------------------------------------------------------------

inline void write_map_csv(const CorrelationMap& map, const std::filesystem::path& path,
                          std::vector<std::string> comments = {}) {
    comments.insert(comments.begin(),
                    std::string("map kind = ") + to_string(map.kind) +
                        ", frames = " + std::to_string(map.n_frames_used));
    write_csv_matrix(path, map.grid.width, map.grid.height, map.values, comments);
}

/// 16-bit grayscale export. By default the map is normalized to its own
/// min/max; a fixed dynamic range can be imposed to make images comparable
/// across sources. The applied scale goes to a sidecar text file.
inline void write_map_pgm16(const CorrelationMap& map, const std::filesystem::path& image_path,
                            const std::filesystem::path& sidecar_path,
                            std::vector<std::string> comments = {},
                            const double* fixed_lo = nullptr, const double* fixed_hi = nullptr) {
    double lo = map.values.empty() ? 0.0 : map.values[0];
    double hi = lo;
    for (double v : map.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (fixed_lo) lo = *fixed_lo;
    if (fixed_hi) hi = *fixed_hi;
    write_pgm16(image_path, map.grid.width, map.grid.height, map.values, lo, hi, comments);
    std::string side;
    side += "image = " + image_path.filename().string() + "\n";
    side += "kind = " + std::string(to_string(map.kind)) + "\n";
    side += "frames = " + std::to_string(map.n_frames_used) + "\n";
    side += "scale_min = " + format_g9(lo) + "\n";
    side += "scale_max = " + format_g9(hi) + "\n";
    side += "mapping = value -> round(65535 * (value - scale_min) / (scale_max - scale_min))\n";
    for (const auto& c : comments) side += "# " + c + "\n";
    write_text_file(sidecar_path, side);
}

}  // namespace specklegi

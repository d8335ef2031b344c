#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "specklegi/correlation.hpp"
#include "specklegi/frame.hpp"
#include "specklegi/numeric.hpp"
#include "specklegi/specklefield.hpp"

namespace specklegi {

/// Background pixels must sit outside the correlation halo of the object,
/// so the exclusion margin grows with the speckle size (never below 5 px).
inline double default_background_margin(const GridSpec& grid) {
    return std::max(5.0, 4.0 * grid.speckle_radius);
}

inline double region_mean(const CorrelationMap& map, const Region& region) {
    region.validate(map.grid);
    KahanSum s;
    for (auto p : region.pixels) s.add(map.values[static_cast<std::size_t>(p)]);
    return s.value() / static_cast<double>(region.pixels.size());
}

inline double region_stddev(const CorrelationMap& map, const Region& region) {
    region.validate(map.grid);
    std::vector<double> vals;
    vals.reserve(region.pixels.size());
    for (auto p : region.pixels) vals.push_back(map.values[static_cast<std::size_t>(p)]);
    return sample_stddev(vals);
}

inline void check_metric_regions(const CorrelationMap& map, const Region& object,
                                 const Region& background) {
    object.validate(map.grid);
    background.validate(map.grid);
    if (!object.disjoint_from(background))
        throw std::invalid_argument("metrics: object and background regions overlap");
}

struct ContrastResult {
    double value = 0.0;
    bool clamped = false;  // set when the object-background difference was negative
};

/// Image contrast C = sqrt(mean over object - mean over background).
/// A negative difference (pure noise) is clamped to 0 and flagged.
inline ContrastResult contrast(const CorrelationMap& map, const Region& object,
                               const Region& background) {
    check_metric_regions(map, object, background);
    const double diff = region_mean(map, object) - region_mean(map, background);
    if (diff < 0.0) return {0.0, true};
    return {std::sqrt(diff), false};
}

/// SNR = (object mean - background mean) / (sample std dev of background pixels).
inline double snr(const CorrelationMap& map, const Region& object, const Region& background) {
    check_metric_regions(map, object, background);
    if (background.pixels.size() < 2)
        throw std::invalid_argument("snr: background needs at least 2 pixels");
    const double sigma = region_stddev(map, background);
    if (!(sigma > 0.0)) throw std::domain_error("snr: zero background deviation");
    return (region_mean(map, object) - region_mean(map, background)) / sigma;
}

// ---------------------------------------------------------------------------
// Power-law fitting
// ---------------------------------------------------------------------------

struct PowerLawFit {
    double a = 0.0;         // prefactor of y = a x^b
    double b = 0.0;         // exponent
    double residual = 0.0;  // RMS residual in log space
};

/// Least squares of ln y against ln x. Requires >= 3 strictly positive
/// points with at least two distinct abscissas.
inline PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw std::invalid_argument("fit_power_law: need at least 3 points");
    const double n = static_cast<double>(points.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : points) {
        if (!(x > 0.0) || !(y > 0.0))
            throw std::invalid_argument("fit_power_law: points must be strictly positive");
        const double lx = std::log(x), ly = std::log(y);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double det = n * sxx - sx * sx;
    if (!(std::abs(det) > 1e-12 * std::max(1.0, n * sxx)))
        throw std::invalid_argument("fit_power_law: abscissas are not distinct");
    PowerLawFit fit;
    fit.b = (n * sxy - sx * sy) / det;
    const double intercept = (sy - fit.b * sx) / n;
    fit.a = std::exp(intercept);
    double ss = 0.0;
    for (const auto& [x, y] : points) {
        const double r = std::log(y) - (intercept + fit.b * std::log(x));
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

// ---------------------------------------------------------------------------
// Speckle-count sweep
// ---------------------------------------------------------------------------

enum class Method { GI, DGI };

inline const char* to_string(Method m) { return m == Method::GI ? "gi" : "dgi"; }

/// One figure-of-merit measurement at a given object-area / speckle-area
/// ratio.
struct MetricsRecord {
    double ratio = 0.0;  // A_b / A_sp, from the measured speckle area
    double contrast = 0.0;
    bool contrast_clamped = false;
    double snr = 0.0;
    Method method = Method::GI;
    SourceKind source = SourceKind::Thermal;
    std::int64_t n_frames = 0;
    std::uint64_t seed = 0;
};

/// Adjusts grid.speckle_radius until the measured mean speckle area is
/// within rel_tol of target_area. Returns the calibrated grid and the
/// measured area. Uses a short probe ensemble; deterministic.
struct SpeckleCalibration {
    GridSpec grid;
    double measured_area = 0.0;
};

inline SpeckleCalibration calibrate_speckle_radius(const SourceSpec& spec, GridSpec grid,
                                                   double target_area, std::uint64_t seed,
                                                   int n_threads = 1, double rel_tol = 0.10,
                                                   std::int64_t probe_frames = 256) {
    const double cap = std::min(grid.width, grid.height) / 4.0;
    double sigma = std::sqrt(target_area / (2.0 * std::numbers::pi * std::numbers::ln2));
    sigma = std::clamp(sigma, 0.5, cap);
    double measured = 0.0;
    for (int attempt = 0; attempt < 4; ++attempt) {
        grid.speckle_radius = sigma;
        const FrameEnsemble probe(spec, grid, probe_frames, derive_seed(seed, 0xCA11, attempt));
        measured = measure_speckle_area(probe, n_threads);
        if (std::abs(measured - target_area) <= rel_tol * target_area)
            return {grid, measured};
        // speckle area scales as sigma^2
        const double next = std::clamp(sigma * std::sqrt(target_area / measured), 0.5, cap);
        if (next == sigma) break;  // pinned at a bound, cannot improve
        sigma = next;
    }
    throw std::invalid_argument(
        "calibrate_speckle_radius: target speckle area " + format_g9(target_area) +
        " px^2 not reachable on this grid (measured " + format_g9(measured) +
        " px^2 at sigma " + format_g9(sigma) + "); adjust the ratio or grid");
}

/// Feasible A_b/A_sp ratio interval for a mask on a grid, from the
/// speckle_radius bounds. Used to compose configuration errors.
inline std::pair<double, double> feasible_ratio_range(const GridSpec& grid, double mask_area) {
    const double cap = std::min(grid.width, grid.height) / 4.0;
    const double amax = nominal_speckle_area(cap);
    const double amin = nominal_speckle_area(0.5);
    return {mask_area / amax, mask_area / amin};
}

/// Runs GI and DGI at each requested A_b/A_sp ratio: calibrates the speckle
/// size, generates the ensemble, reconstructs both maps and evaluates C and
/// SNR against the object (mask) and background (pixels > 5 px away from the
/// mask) regions. The differential reference region defaults to that same
/// far-from-mask complement.
inline std::vector<MetricsRecord> sweep_speckle_count(const SourceSpec& spec, GridSpec grid,
                                                      const Mask& mask,
                                                      const std::vector<double>& ratios,
                                                      std::int64_t n_frames,
                                                      std::uint64_t master_seed,
                                                      int n_threads = 1) {
    if (ratios.empty()) throw std::invalid_argument("sweep: no ratios");
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        if (!(ratios[i] >= 1.0)) throw std::invalid_argument("sweep: ratios must be >= 1");
        for (std::size_t j = i + 1; j < ratios.size(); ++j)
            if (ratios[i] == ratios[j]) throw std::invalid_argument("sweep: duplicate ratio");
    }
    if (n_frames < 2) throw std::invalid_argument("sweep: need at least 2 frames");
    mask.validate();
    const double mask_area = static_cast<double>(mask.count());

    std::vector<MetricsRecord> out;
    out.reserve(2 * ratios.size());
    for (std::size_t ri = 0; ri < ratios.size(); ++ri) {
        const double target_area = mask_area / ratios[ri];
        const std::uint64_t run_seed = derive_seed(master_seed, 0x5EEB, ri);
        SpeckleCalibration cal;
        try {
            cal = calibrate_speckle_radius(spec, grid, target_area, run_seed, n_threads);
        } catch (const std::invalid_argument& e) {
            const auto [lo, hi] = feasible_ratio_range(grid, mask_area);
            throw std::invalid_argument("sweep: ratio " + format_g9(ratios[ri]) +
                                        " unachievable (feasible range about [" + format_g9(lo) +
                                        ", " + format_g9(hi) + "]): " + e.what());
        }
        const FrameEnsemble ens(spec, cal.grid, n_frames, run_seed);
        const Region object = Region::from_mask(cal.grid, mask);
        const Region background =
            mask_complement(cal.grid, mask, default_background_margin(cal.grid));
        const BucketAcc acc = bucket_accumulate(ens, mask, &background, n_threads);
        const CorrelationMap gi = ghost_finalize(acc, cal.grid, false);
        const CorrelationMap dgi = ghost_finalize(acc, cal.grid, true);
        const double measured_ratio = mask_area / cal.measured_area;
        for (const auto* map : {&gi, &dgi}) {
            MetricsRecord rec;
            rec.ratio = measured_ratio;
            const ContrastResult c = contrast(*map, object, background);
            rec.contrast = c.value;
            rec.contrast_clamped = c.clamped;
            rec.snr = snr(*map, object, background);
            rec.method = map->kind == MapKind::GI ? Method::GI : Method::DGI;
            rec.source = spec.kind;
            rec.n_frames = n_frames;
            rec.seed = run_seed;
            out.push_back(rec);
        }
    }
    return out;
}

/// CSV block for sweep records: header, rows, then power-law fits of the
/// requested metrics as commented trailer lines.
inline std::string sweep_records_csv(const std::vector<MetricsRecord>& records,
                                     const std::vector<std::string>& comments,
                                     bool fit_contrast = true, bool fit_snr = false) {
    std::string out;
    for (const auto& c : comments) out += "# " + c + "\n";
    out += "ratio,source,method,contrast,snr,n_frames,seed\n";
    for (const auto& r : records) {
        out += format_g9(r.ratio);
        out += ',';
        out += to_string(r.source);
        out += ',';
        out += to_string(r.method);
        out += ',';
        out += format_g9(r.contrast);
        out += ',';
        out += format_g9(r.snr);
        out += ',';
        out += std::to_string(r.n_frames);
        out += ',';
        out += std::to_string(r.seed);
        out += '\n';
    }
    // group by (source, method) preserving first appearance order
    std::vector<std::pair<SourceKind, Method>> groups;
    for (const auto& r : records) {
        const std::pair<SourceKind, Method> key{r.source, r.method};
        if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
    }
    for (const auto& [src, method] : groups) {
        for (int metric = 0; metric < 2; ++metric) {
            if (metric == 0 && !fit_contrast) continue;
            if (metric == 1 && !fit_snr) continue;
            std::vector<std::pair<double, double>> pts;
            for (const auto& r : records)
                if (r.source == src && r.method == method) {
                    const double y = metric == 0 ? r.contrast : r.snr;
                    if (y > 0.0) pts.emplace_back(r.ratio, y);
                }
            if (pts.size() < 3) continue;
            const PowerLawFit fit = fit_power_law(pts);
            out += std::string("# fit source=") + to_string(src) + " method=" + to_string(method) +
                   " metric=" + (metric == 0 ? "contrast" : "snr") + " a=" + format_g9(fit.a) +
                   " b=" + format_g9(fit.b) + " residual=" + format_g9(fit.residual) + "\n";
        }
    }
    return out;
}

}  // namespace specklegi

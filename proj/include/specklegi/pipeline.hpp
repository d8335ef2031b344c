#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "specklegi/correlation.hpp"
#include "specklegi/frame_io.hpp"
#include "specklegi/masks.hpp"
#include "specklegi/metrics.hpp"
#include "specklegi/runconfig.hpp"
#include "specklegi/specklefield.hpp"

namespace specklegi {

/// Adds/updates manifest entries (path, size, content hash, config digest)
/// for the artifacts of a run. Existing entries for other artifacts are kept.
inline void update_manifest(const std::filesystem::path& output_dir,
                            const std::vector<std::filesystem::path>& artifacts,
                            std::uint64_t config_digest) {
    const auto manifest_path = output_dir / "manifest.txt";
    std::map<std::string, std::string> entries;
    if (std::filesystem::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            const auto sp = line.find("  ");
            if (sp != std::string::npos) entries[line.substr(0, sp)] = line.substr(sp + 2);
        }
    }
    for (const auto& a : artifacts) {
        const auto rel = std::filesystem::relative(a, output_dir).string();
        entries[rel] = "bytes=" + std::to_string(std::filesystem::file_size(a)) +
                       " fnv64=" + hex64(fnv1a64_file(a)) + " config=" + hex64(config_digest);
    }
    std::string out = "# specklegi artifact manifest\n";
    for (const auto& [k, v] : entries) out += k + "  " + v + "\n";
    write_text_file(manifest_path, out);
}

/// Opens the configured frame source: a cache file when `cache` is set,
/// otherwise a deterministic generator ensemble.
inline std::unique_ptr<FrameSource> open_frames(const RunConfig& cfg) {
    if (!cfg.cache_path.empty()) {
        auto cached = std::make_unique<CachedFrames>(cfg.cache_path);
        if (!cached->grid().same_shape(cfg.grid))
            throw std::invalid_argument("cache grid does not match configured grid");
        return cached;
    }
    return std::make_unique<FrameEnsemble>(cfg.source, cfg.grid, cfg.n_frames, cfg.master_seed);
}

struct SimulateOutcome {
    std::filesystem::path cache_file;
    std::filesystem::path summary_file;
    double measured_g2 = 0.0;
    double g2_se = 0.0;
    double analytic_g2 = 0.0;
    std::uint64_t cache_digest = 0;
};

/// Generates the configured ensemble, writes the frame cache and a summary
/// comparing the pooled single-pixel g2 estimate with the analytic value.
inline SimulateOutcome run_simulate(const RunConfig& cfg) {
    cfg.validate();
    std::filesystem::create_directories(cfg.output_dir);
    const FrameEnsemble ens(cfg.source, cfg.grid, cfg.n_frames, cfg.master_seed);

    SimulateOutcome out;
    out.cache_file = cfg.output_dir / "frames.bin";
    try {
        write_frame_cache(out.cache_file, ens, to_string(cfg.source.kind), cfg.master_seed,
                          cfg.config_comments());
    } catch (...) {
        std::filesystem::remove(out.cache_file);
        throw;
    }
    out.cache_digest = fnv1a64_file(out.cache_file);

    const PooledG2 g2 = ensemble_single_pixel_g2(ens, cfg.threads);
    out.measured_g2 = g2.g2;
    out.g2_se = g2.se;
    out.analytic_g2 = cfg.source.single_pixel_g2();

    std::ostringstream os;
    for (const auto& c : cfg.config_comments()) os << "# " << c << "\n";
    os << "frames = " << cfg.n_frames << "\n";
    os << "cache = " << out.cache_file.filename().string() << "\n";
    os << "cache_fnv64 = " << hex64(out.cache_digest) << "\n";
    os << "measured_single_pixel_g2 = " << format_g9(out.measured_g2) << "\n";
    os << "measured_g2_standard_error = " << format_g9(out.g2_se) << "\n";
    os << "analytic_single_pixel_g2 = " << format_g9(out.analytic_g2) << "\n";
    out.summary_file = cfg.output_dir / "simulate_summary.txt";
    write_text_file(out.summary_file, os.str());
    update_manifest(cfg.output_dir, {out.cache_file, out.summary_file}, cfg.digest());
    return out;
}

struct ReconstructOutcome {
    std::filesystem::path csv_file;
    std::filesystem::path image_file;
    std::filesystem::path sidecar_file;
    std::filesystem::path metrics_file;  // empty when no mask was involved
    double contrast = 0.0;
    double snr_value = 0.0;
    bool have_metrics = false;
};

/// The differential reference region: a configured rectangle, or every pixel
/// outside the mask's correlation halo (which doubles as the metrics
/// background region).
inline Region resolve_reference(const RunConfig& cfg, const Mask& mask) {
    if (cfg.reference == "auto")
        return mask_complement(cfg.grid, mask, default_background_margin(cfg.grid));
    const auto r = cfg.parse_reference_rect();
    return Region::rectangle(cfg.grid, r[0], r[1], r[2], r[3]);
}

/// Reconstructs one correlation map (autocorrelation, single-pixel, GI or
/// DGI), exports it as CSV plus 16-bit image with scale sidecar, and appends
/// a metrics line when an object mask is present.
inline ReconstructOutcome run_reconstruct(const RunConfig& cfg) {
    cfg.validate();
    if ((cfg.method == ReconstructMethod::GI || cfg.method == ReconstructMethod::DGI) &&
        cfg.mask_path.empty())
        throw std::invalid_argument("reconstruct: ghost-imaging methods require a mask");
    std::filesystem::create_directories(cfg.output_dir);
    const auto frames = open_frames(cfg);

    CorrelationMap map;
    Mask mask;
    Region background;
    bool have_mask = false;
    switch (cfg.method) {
        case ReconstructMethod::Autocorr:
            map = autocorrelation_fft(*frames, cfg.threads);
            break;
        case ReconstructMethod::Pixel: {
            const int px = cfg.pixel_x >= 0 ? cfg.pixel_x : cfg.grid.width / 2;
            const int py = cfg.pixel_y >= 0 ? cfg.pixel_y : cfg.grid.height / 2;
            map = pixel_correlation(*frames, px, py, cfg.threads);
            break;
        }
        case ReconstructMethod::GI:
        case ReconstructMethod::DGI: {
            mask = cfg.load_mask();
            have_mask = true;
            background = mask_complement(cfg.grid, mask, default_background_margin(cfg.grid));
            if (cfg.method == ReconstructMethod::GI) {
                map = ghost_image(*frames, mask, cfg.threads);
            } else {
                const Region reference = resolve_reference(cfg, mask);
                map = differential_ghost_image(*frames, mask, reference, cfg.threads);
            }
            break;
        }
    }

    ReconstructOutcome out;
    const std::string stem = std::string("map_") + to_string(cfg.method);
    out.csv_file = cfg.output_dir / (stem + ".csv");
    out.image_file = cfg.output_dir / (stem + ".pgm");
    out.sidecar_file = cfg.output_dir / (stem + "_scale.txt");
    write_map_csv(map, out.csv_file, cfg.config_comments());
    if (cfg.scale == "norm") {
        write_map_pgm16(map, out.image_file, out.sidecar_file, cfg.config_comments());
    } else {
        const auto [lo, hi] = cfg.parse_fixed_scale();
        write_map_pgm16(map, out.image_file, out.sidecar_file, cfg.config_comments(), &lo, &hi);
    }

    std::vector<std::filesystem::path> artifacts{out.csv_file, out.image_file, out.sidecar_file};
    if (have_mask) {
        const Region object = Region::from_mask(cfg.grid, mask);
        const ContrastResult c = contrast(map, object, background);
        out.contrast = c.value;
        out.snr_value = snr(map, object, background);
        out.have_metrics = true;
        std::string line;
        for (const auto& cm : cfg.config_comments()) line += "# " + cm + "\n";
        line += "method,contrast,contrast_clamped,snr,n_frames\n";
        line += std::string(to_string(cfg.method)) + "," + format_g9(out.contrast) + "," +
                (c.clamped ? "1" : "0") + "," + format_g9(out.snr_value) + "," +
                std::to_string(map.n_frames_used) + "\n";
        out.metrics_file = cfg.output_dir / (stem + "_metrics.csv");
        write_text_file(out.metrics_file, line);
        artifacts.push_back(out.metrics_file);
    }
    update_manifest(cfg.output_dir, artifacts, cfg.digest());
    return out;
}

/// Crude log-log chart of sweep records as an 8-bit graymap: one marker per
/// record, brighter for DGI, plus fitted lines for the contrast curves.
inline void write_sweep_plot(const std::filesystem::path& path,
                             const std::vector<MetricsRecord>& records) {
    constexpr int w = 480, h = 360, margin = 40;
    std::vector<std::uint8_t> img(static_cast<std::size_t>(w) * h, 255);
    double lx0 = 1e300, lx1 = -1e300, ly0 = 1e300, ly1 = -1e300;
    for (const auto& r : records) {
        for (double v : {r.contrast, r.snr}) {
            if (v <= 0.0) continue;
            lx0 = std::min(lx0, std::log(r.ratio));
            lx1 = std::max(lx1, std::log(r.ratio));
            ly0 = std::min(ly0, std::log(v));
            ly1 = std::max(ly1, std::log(v));
        }
    }
    if (!(lx1 > lx0) || !(ly1 > ly0)) return;
    auto px = [&](double lx) {
        return margin + static_cast<int>((w - 2 * margin) * (lx - lx0) / (lx1 - lx0));
    };
    auto py = [&](double ly) {
        return h - margin - static_cast<int>((h - 2 * margin) * (ly - ly0) / (ly1 - ly0));
    };
    auto dot = [&](int x, int y, std::uint8_t v, int size) {
        for (int dy = -size; dy <= size; ++dy)
            for (int dx = -size; dx <= size; ++dx) {
                const int xx = x + dx, yy = y + dy;
                if (xx >= 0 && yy >= 0 && xx < w && yy < h)
                    img[static_cast<std::size_t>(yy) * w + xx] = v;
            }
    };
    for (int x = margin; x < w - margin; ++x) img[static_cast<std::size_t>(h - margin) * w + x] = 0;
    for (int y = margin; y < h - margin; ++y) img[static_cast<std::size_t>(y) * w + margin] = 0;
    for (const auto& r : records) {
        const std::uint8_t shade =
            r.source == SourceKind::Thermal ? 170 : r.source == SourceKind::SpeckledSpeckle ? 105 : 40;
        if (r.contrast > 0.0)
            dot(px(std::log(r.ratio)), py(std::log(r.contrast)), shade, r.method == Method::DGI ? 3 : 1);
        if (r.snr > 0.0)
            dot(px(std::log(r.ratio)), py(std::log(r.snr)), shade, r.method == Method::DGI ? 2 : 1);
    }
    write_pgm8(path, w, h, img, {"specklegi sweep chart: log ratio vs log C and log SNR"});
}

struct SweepOutcome {
    std::filesystem::path csv_file;
    std::filesystem::path plot_file;  // empty unless requested
    std::vector<MetricsRecord> records;
};

/// Full figure-of-merit sweep over the configured sources. When the config
/// names a single source, only that source is swept; `all_sources` adds the
/// other two with matching defaults.
inline SweepOutcome run_sweep(const RunConfig& cfg, bool all_sources = true) {
    cfg.validate();
    std::filesystem::create_directories(cfg.output_dir);
    const Mask mask = cfg.mask_path.empty() ? embed_mask(make_llama_mask(), cfg.grid)
                                            : cfg.load_mask();

    std::vector<SourceSpec> sources;
    if (all_sources) {
        sources.push_back(SourceSpec::thermal(1.0));
        sources.push_back(SourceSpec::speckled_speckle(1.0, 1.0));
        sources.push_back(SourceSpec::second_harmonic(1.0, 1.0, 1.0));
    } else {
        sources.push_back(cfg.source);
    }

    SweepOutcome out;
    for (const auto& src : sources) {
        auto recs = sweep_speckle_count(src, cfg.grid, mask, cfg.ratios, cfg.n_frames,
                                        cfg.master_seed, cfg.threads);
        out.records.insert(out.records.end(), recs.begin(), recs.end());
    }

    out.csv_file = cfg.output_dir / "sweep.csv";
    write_text_file(out.csv_file,
                    sweep_records_csv(out.records, cfg.config_comments(), true, cfg.fit_snr));
    std::vector<std::filesystem::path> artifacts{out.csv_file};
    if (cfg.plot) {
        out.plot_file = cfg.output_dir / "sweep.pgm";
        write_sweep_plot(out.plot_file, out.records);
        artifacts.push_back(out.plot_file);
    }
    update_manifest(cfg.output_dir, artifacts, cfg.digest());
    return out;
}

}  // namespace specklegi

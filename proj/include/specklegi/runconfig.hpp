#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "specklegi/frame.hpp"
#include "specklegi/io.hpp"
#include "specklegi/masks.hpp"
#include "specklegi/parallel.hpp"
#include "specklegi/photostatistics.hpp"

namespace specklegi {

enum class ReconstructMethod { Autocorr, Pixel, GI, DGI };

inline const char* to_string(ReconstructMethod m) {
    switch (m) {
        case ReconstructMethod::Autocorr: return "autocorr";
        case ReconstructMethod::Pixel: return "pixel";
        case ReconstructMethod::GI: return "gi";
        case ReconstructMethod::DGI: return "dgi";
    }
    return "?";
}

inline ReconstructMethod reconstruct_method_from_string(const std::string& s) {
    if (s == "autocorr") return ReconstructMethod::Autocorr;
    if (s == "pixel") return ReconstructMethod::Pixel;
    if (s == "gi") return ReconstructMethod::GI;
    if (s == "dgi") return ReconstructMethod::DGI;
    throw std::invalid_argument("unknown reconstruction method: " + s);
}

/// Fully validated run configuration. Built from a flat "key = value" file
/// and/or command-line overrides; unknown keys are rejected and every value
/// is checked before any computation starts.
struct RunConfig {
    SourceSpec source;
    GridSpec grid;
    std::int64_t n_frames = 1000;
    std::uint64_t master_seed = 42;
    std::string mask_path;                          // file path or "builtin:llama"
    std::string reference = "auto";                 // "auto" or "x,y,w,h"
    std::filesystem::path output_dir = "out";
    int threads = 1;
    ReconstructMethod method = ReconstructMethod::DGI;
    int pixel_x = -1, pixel_y = -1;                 // reconstruct --method pixel
    std::string scale = "norm";                     // "norm" or "fixed:<lo>:<hi>"
    std::string cache_path;                         // optional ensemble cache input
    bool write_cache = false;                       // reconstruct/sweep: also cache frames
    std::vector<double> ratios = {1, 2, 4, 8};      // sweep abscissas
    bool fit_snr = false;                           // sweep: also fit the SNR curves
    bool plot = false;                              // sweep: emit a chart image

    void validate() const {
        source.validate();
        grid.validate();
        if (n_frames < 1) throw std::invalid_argument("config: n_frames must be >= 1");
        if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
        if (scale != "norm" && scale.rfind("fixed:", 0) != 0)
            throw std::invalid_argument("config: scale must be 'norm' or 'fixed:<lo>:<hi>'");
        if (!scale.compare(0, 6, "fixed:")) parse_fixed_scale();  // throws if malformed
        if (reference != "auto") parse_reference_rect();
    }

    std::pair<double, double> parse_fixed_scale() const {
        double lo, hi;
        char c1, c2;
        std::istringstream is(scale.substr(6));
        std::string rest;
        std::getline(is, rest);
        if (std::sscanf(rest.c_str(), "%lf%c%lf%c", &lo, &c1, &hi, &c2) < 3 || !(hi > lo))
            throw std::invalid_argument("config: bad fixed scale '" + scale + "'");
        return {lo, hi};
    }

    std::array<int, 4> parse_reference_rect() const {
        int x, y, w, h;
        if (std::sscanf(reference.c_str(), "%d,%d,%d,%d", &x, &y, &w, &h) != 4 || w <= 0 || h <= 0)
            throw std::invalid_argument("config: reference must be 'auto' or 'x,y,w,h'");
        return {x, y, w, h};
    }

    Mask load_mask() const {
        if (mask_path.empty()) throw std::invalid_argument("config: mask path required");
        Mask inner = mask_path == "builtin:llama" ? make_llama_mask() : load_mask_pgm(mask_path);
        if (inner.width == grid.width && inner.height == grid.height) return inner;
        return embed_mask(inner, grid);  // small masks are centered on the grid
    }

    /// Canonical text rendering of the effective configuration; embedded in
    /// every artifact and hashed for the manifest.
    std::string effective_text() const {
        std::ostringstream os;
        os << "source = " << to_string(source.kind) << "\n";
        switch (source.kind) {
            case SourceKind::Thermal:
                os << "mean_intensity = " << format_g9(source.mean_intensity) << "\n";
                break;
            case SourceKind::SpeckledSpeckle:
                os << "mean_intensity = " << format_g9(source.mean_intensity) << "\n";
                os << "mu_f = " << format_g9(source.mu_f) << "\n";
                os << "mu_s = " << format_g9(source.mu_s) << "\n";
                break;
            case SourceKind::SecondHarmonic:
                os << "mean_fund = " << format_g9(source.mean_fund) << "\n";
                os << "mu = " << format_g9(source.mu) << "\n";
                os << "conversion_k = " << format_g9(source.conversion_k) << "\n";
                break;
        }
        os << "width = " << grid.width << "\n";
        os << "height = " << grid.height << "\n";
        os << "pixel_pitch = " << format_g9(grid.pixel_pitch) << "\n";
        os << "speckle_radius = " << format_g9(grid.speckle_radius) << "\n";
        os << "n_frames = " << n_frames << "\n";
        os << "master_seed = " << master_seed << "\n";
        if (!mask_path.empty()) os << "mask = " << mask_path << "\n";
        os << "reference = " << reference << "\n";
        os << "method = " << to_string(method) << "\n";
        if (pixel_x >= 0) os << "pixel = " << pixel_x << "," << pixel_y << "\n";
        os << "scale = " << scale << "\n";
        // the cache is recorded by name only: regeneration from the source
        // parameters above reproduces its exact content, and runtime details
        // (absolute paths, thread counts) never influence the output bytes
        if (!cache_path.empty())
            os << "cache = " << std::filesystem::path(cache_path).filename().string() << "\n";
        if (!ratios.empty()) {
            os << "ratios = ";
            for (std::size_t i = 0; i < ratios.size(); ++i)
                os << (i ? "," : "") << format_g9(ratios[i]);
            os << "\n";
        }
        return os.str();
    }

    std::uint64_t digest() const { return fnv1a64_str(effective_text()); }

    /// Comment lines for artifact headers: the full effective configuration.
    std::vector<std::string> config_comments() const {
        std::vector<std::string> out{"specklegi configuration (reproduces this artifact):"};
        std::istringstream is(effective_text());
        std::string line;
        while (std::getline(is, line)) out.push_back(line);
        return out;
    }
};

/// Applies one "key = value" assignment; throws on unknown keys or bad
/// values. Shared by the config-file parser and the CLI flag handling.
inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto to_i64 = [&](const std::string& v) { return std::stoll(v); };
    auto to_f = [&](const std::string& v) { return std::stod(v); };
    if (key == "source")
        cfg.source.kind = source_kind_from_string(value);
    else if (key == "mean_intensity")
        cfg.source.mean_intensity = to_f(value);
    else if (key == "mu_f")
        cfg.source.mu_f = to_f(value);
    else if (key == "mu_s")
        cfg.source.mu_s = to_f(value);
    else if (key == "mu")
        cfg.source.mu = to_f(value);
    else if (key == "conversion_k")
        cfg.source.conversion_k = to_f(value);
    else if (key == "mean_fund")
        cfg.source.mean_fund = to_f(value);
    else if (key == "width")
        cfg.grid.width = static_cast<int>(to_i64(value));
    else if (key == "height")
        cfg.grid.height = static_cast<int>(to_i64(value));
    else if (key == "pixel_pitch")
        cfg.grid.pixel_pitch = to_f(value);
    else if (key == "speckle_radius")
        cfg.grid.speckle_radius = to_f(value);
    else if (key == "n_frames")
        cfg.n_frames = to_i64(value);
    else if (key == "master_seed")
        cfg.master_seed = std::stoull(value);
    else if (key == "mask")
        cfg.mask_path = value;
    else if (key == "reference")
        cfg.reference = value;
    else if (key == "output_dir")
        cfg.output_dir = value;
    else if (key == "threads")
        cfg.threads = static_cast<int>(to_i64(value));
    else if (key == "method")
        cfg.method = reconstruct_method_from_string(value);
    else if (key == "pixel") {
        if (std::sscanf(value.c_str(), "%d,%d", &cfg.pixel_x, &cfg.pixel_y) != 2)
            throw std::invalid_argument("config: pixel must be 'x,y'");
    } else if (key == "scale")
        cfg.scale = value;
    else if (key == "cache")
        cfg.cache_path = value;
    else if (key == "write_cache")
        cfg.write_cache = to_i64(value) != 0;
    else if (key == "ratios") {
        cfg.ratios.clear();
        std::istringstream is(value);
        std::string tok;
        while (std::getline(is, tok, ',')) cfg.ratios.push_back(to_f(tok));
    } else if (key == "fit_snr")
        cfg.fit_snr = to_i64(value) != 0;
    else if (key == "plot")
        cfg.plot = to_i64(value) != 0;
    else
        throw std::invalid_argument("config: unknown key '" + key + "'");
}

inline RunConfig parse_config_file(const std::filesystem::path& path,
                                   RunConfig base = RunConfig{}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) +
                                        ": expected 'key = value'");
        try {
            apply_config_entry(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const std::exception& e) {
            throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": " +
                                        e.what());
        }
    }
    return base;
}

}  // namespace specklegi

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "specklegi/frame.hpp"

namespace specklegi {

/// FNV-1a 64-bit hash, used for artifact and configuration digests.
inline std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64_str(const std::string& s) {
    return fnv1a64({reinterpret_cast<const unsigned char*>(s.data()), s.size()});
}

inline std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for hashing: " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        h = fnv1a64({reinterpret_cast<const unsigned char*>(buf),
                     static_cast<std::size_t>(in.gcount())},
                    h);
        if (in.eof()) break;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Locale-independent shortest-ish formatting with 9 significant digits,
/// the precision used by all CSV artifacts.
inline std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Writes a numeric matrix as CSV, one grid row per line, 9 significant
/// digits, preceded by '#' comment lines carrying the effective configuration.
inline void write_csv_matrix(const std::filesystem::path& path, int width, int height,
                             std::span<const double> values,
                             const std::vector<std::string>& comments) {
    if (values.size() != static_cast<std::size_t>(width) * height)
        throw std::invalid_argument("write_csv_matrix: size mismatch");
    std::ostringstream os;
    for (const auto& c : comments) os << "# " << c << "\n";
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            if (x) os << ',';
            os << format_g9(values[static_cast<std::size_t>(y) * width + x]);
        }
        os << '\n';
    }
    write_text_file(path, os.str());
}

// ---------------------------------------------------------------------------
// Portable graymaps
// ---------------------------------------------------------------------------

struct PgmImage {
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::vector<std::uint16_t> pixels;
};

inline PgmImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open PGM: " + path.string());
    auto next_token = [&in, &path]() {
        std::string tok;
        for (;;) {
            int c = in.get();
            if (c == EOF) throw std::runtime_error("truncated PGM header: " + path.string());
            if (c == '#') {
                while (c != EOF && c != '\n') c = in.get();
                continue;
            }
            if (std::isspace(c)) {
                if (!tok.empty()) return tok;
                continue;
            }
            tok.push_back(static_cast<char>(c));
        }
    };
    const std::string magic = next_token();
    if (magic != "P2" && magic != "P5")
        throw std::runtime_error("unsupported PGM magic '" + magic + "' in " + path.string());
    PgmImage img;
    img.width = std::stoi(next_token());
    img.height = std::stoi(next_token());
    img.maxval = std::stoi(next_token());
    if (img.width <= 0 || img.height <= 0 || img.maxval <= 0 || img.maxval > 65535)
        throw std::runtime_error("bad PGM header in " + path.string());
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    img.pixels.resize(n);
    if (magic == "P2") {
        for (auto& p : img.pixels) p = static_cast<std::uint16_t>(std::stoi(next_token()));
    } else {
        // one whitespace byte separates header and raster
        const int bytes = img.maxval > 255 ? 2 : 1;
        std::vector<unsigned char> raw(n * bytes);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != raw.size())
            throw std::runtime_error("truncated PGM raster: " + path.string());
        for (std::size_t i = 0; i < n; ++i)
            img.pixels[i] = bytes == 2
                                ? static_cast<std::uint16_t>(raw[2 * i] << 8 | raw[2 * i + 1])
                                : raw[i];
    }
    return img;
}

/// Loads a graymap as a binary mask: pixels at or above 50% of full scale
/// transmit.
inline Mask load_mask_pgm(const std::filesystem::path& path) {
    const PgmImage img = read_pgm(path);
    Mask m;
    m.width = img.width;
    m.height = img.height;
    m.on.resize(img.pixels.size());
    const double threshold = 0.5 * img.maxval;
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        m.on[i] = img.pixels[i] >= threshold ? 1 : 0;
    m.validate();
    return m;
}

inline void write_pgm8(const std::filesystem::path& path, int width, int height,
                       std::span<const std::uint8_t> pixels,
                       const std::vector<std::string>& comments = {}) {
    std::ostringstream os;
    os << "P5\n";
    for (const auto& c : comments) os << "# " << c << "\n";
    os << width << " " << height << "\n255\n";
    os.write(reinterpret_cast<const char*>(pixels.data()),
             static_cast<std::streamsize>(pixels.size()));
    write_text_file(path, os.str());
}

/// 16-bit graymap of `values` linearly mapped from [lo, hi] to [0, 65535].
/// The scale must be recorded by the caller (see map export helpers).
inline void write_pgm16(const std::filesystem::path& path, int width, int height,
                        std::span<const double> values, double lo, double hi,
                        const std::vector<std::string>& comments = {}) {
    if (values.size() != static_cast<std::size_t>(width) * height)
        throw std::invalid_argument("write_pgm16: size mismatch");
    std::ostringstream os;
    os << "P5\n";
    for (const auto& c : comments) os << "# " << c << "\n";
    os << width << " " << height << "\n65535\n";
    const double span = hi - lo;
    for (double v : values) {
        double t = span > 0.0 ? (v - lo) / span : 0.0;
        t = std::min(1.0, std::max(0.0, t));
        const auto q = static_cast<std::uint16_t>(t * 65535.0 + 0.5);
        os.put(static_cast<char>(q >> 8));   // PGM stores most significant byte first
        os.put(static_cast<char>(q & 0xff));
    }
    write_text_file(path, os.str());
}

}  // namespace specklegi

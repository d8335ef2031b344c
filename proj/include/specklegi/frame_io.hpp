#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "specklegi/frame.hpp"
#include "specklegi/photostatistics.hpp"

namespace specklegi {

/// Frame cache: a small self-describing text header ("key value" lines,
/// '#' comments allowed, terminated by "end"), followed by the frames as
/// raw 32-bit little-endian floats, row-major, frame after frame.
struct FrameCacheHeader {
    GridSpec grid;
    std::int64_t n_frames = 0;
    std::string source = "unknown";
    std::uint64_t master_seed = 0;
    std::vector<std::string> comments;

    std::string to_text() const {
        std::ostringstream os;
        os << "specklegi-frames 1\n";
        os << "width " << grid.width << "\n";
        os << "height " << grid.height << "\n";
        os << "frames " << n_frames << "\n";
        os << "speckle_radius " << grid.speckle_radius << "\n";
        os << "pixel_pitch " << grid.pixel_pitch << "\n";
        os << "source " << source << "\n";
        os << "master_seed " << master_seed << "\n";
        for (const auto& c : comments) os << "# " << c << "\n";
        os << "data float32 little-endian row-major\n";
        os << "end\n";
        return os.str();
    }
};

/// Streams every frame of `src` into the cache file. Writes to a temporary
/// name and renames on success so a failed run never leaves a partial cache.
inline void write_frame_cache(const std::filesystem::path& path, const FrameSource& src,
                              const std::string& source_name, std::uint64_t master_seed,
                              const std::vector<std::string>& comments = {}) {
    FrameCacheHeader hdr;
    hdr.grid = src.grid();
    hdr.n_frames = src.n_frames();
    hdr.source = source_name;
    hdr.master_seed = master_seed;
    hdr.comments = comments;

    const std::filesystem::path tmp = path.string() + ".partial";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write frame cache: " + tmp.string());
        const std::string header = hdr.to_text();
        out.write(header.data(), static_cast<std::streamsize>(header.size()));
        std::vector<float> row(hdr.grid.npix());
        for (std::int64_t i = 0; i < hdr.n_frames; ++i) {
            const Frame f = src.frame(i);
            for (std::size_t p = 0; p < row.size(); ++p)
                row[p] = static_cast<float>(f.intensity[p]);
            out.write(reinterpret_cast<const char*>(row.data()),
                      static_cast<std::streamsize>(row.size() * sizeof(float)));
            if (!out) {
                out.close();
                std::filesystem::remove(tmp);
                throw std::runtime_error("frame cache write failed at frame " + std::to_string(i) +
                                         ": " + tmp.string());
            }
        }
    }
    std::filesystem::rename(tmp, path);
}

/// File-backed frame source. frame(i) reads with pread, so concurrent reads
/// from worker threads are safe.
class CachedFrames final : public FrameSource {
public:
    explicit CachedFrames(const std::filesystem::path& path) : path_(path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open frame cache: " + path.string());
        std::string line;
        bool saw_end = false;
        std::map<std::string, std::string> kv;
        while (std::getline(in, line)) {
            if (line == "end") {
                saw_end = true;
                break;
            }
            if (line.empty() || line[0] == '#') continue;
            const auto sp = line.find(' ');
            if (sp == std::string::npos) continue;
            kv[line.substr(0, sp)] = line.substr(sp + 1);
        }
        if (!saw_end || kv["specklegi-frames"] != "1")
            throw std::runtime_error("not a specklegi frame cache: " + path.string());
        grid_.width = std::stoi(kv.at("width"));
        grid_.height = std::stoi(kv.at("height"));
        grid_.speckle_radius = std::stod(kv.at("speckle_radius"));
        grid_.pixel_pitch = std::stod(kv.at("pixel_pitch"));
        n_ = std::stoll(kv.at("frames"));
        source_ = kv.count("source") ? kv.at("source") : "unknown";
        master_seed_ = kv.count("master_seed") ? std::stoull(kv.at("master_seed")) : 0;
        grid_.validate();
        data_offset_ = static_cast<std::int64_t>(in.tellg());
        in.close();

        const auto expected =
            data_offset_ + n_ * static_cast<std::int64_t>(grid_.npix() * sizeof(float));
        if (std::filesystem::file_size(path) != static_cast<std::uintmax_t>(expected))
            throw std::runtime_error("frame cache truncated: " + path.string());
        fd_ = ::open(path.c_str(), O_RDONLY);
        if (fd_ < 0) throw std::runtime_error("cannot open frame cache: " + path.string());
    }

    ~CachedFrames() override {
        if (fd_ >= 0) ::close(fd_);
    }
    CachedFrames(const CachedFrames&) = delete;
    CachedFrames& operator=(const CachedFrames&) = delete;

    Frame frame(std::int64_t index) const override {
        if (index < 0 || index >= n_) throw std::out_of_range("CachedFrames: bad frame index");
        const std::size_t npix = grid_.npix();
        std::vector<float> raw(npix);
        const std::int64_t off = data_offset_ + index * static_cast<std::int64_t>(npix * 4);
        std::size_t done = 0;
        while (done < npix * 4) {
            const ssize_t got = ::pread(fd_, reinterpret_cast<char*>(raw.data()) + done,
                                        npix * 4 - done, off + static_cast<std::int64_t>(done));
            if (got <= 0) throw std::runtime_error("frame cache read failed: " + path_.string());
            done += static_cast<std::size_t>(got);
        }
        Frame f;
        f.grid = grid_;
        f.frame_index = index;
        f.intensity.assign(raw.begin(), raw.end());
        return f;
    }

    std::int64_t n_frames() const override { return n_; }
    const GridSpec& grid() const override { return grid_; }
    const std::string& source_name() const { return source_; }
    std::uint64_t master_seed() const { return master_seed_; }

private:
    std::filesystem::path path_;
    GridSpec grid_{};
    std::int64_t n_ = 0;
    std::string source_;
    std::uint64_t master_seed_ = 0;
    std::int64_t data_offset_ = 0;
    int fd_ = -1;
};

}  // namespace specklegi

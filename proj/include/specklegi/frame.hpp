#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace specklegi {

/// Pixel grid of the virtual camera. `speckle_radius` is the Gaussian
/// correlation scale sigma of the synthesized field, in pixels.
struct GridSpec {
    int width = 200;
    int height = 200;
    double pixel_pitch = 1.0;  // physical pitch, informational only
    double speckle_radius = 3.0;

    void validate() const {
        if (width < 2 || height < 2 || static_cast<long>(width) * height < 4)
            throw std::invalid_argument("GridSpec: grid must have at least 4 pixels");
        if (!(pixel_pitch > 0.0))
            throw std::invalid_argument("GridSpec: pixel pitch must be positive");
        const double cap = std::min(width, height) / 4.0;
        if (!(speckle_radius >= 0.5) || !(speckle_radius <= cap))
            throw std::invalid_argument(
                "GridSpec: speckle_radius must lie in [0.5, min(width,height)/4] px");
    }

    std::size_t npix() const { return static_cast<std::size_t>(width) * height; }
    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    bool same_shape(const GridSpec& o) const { return width == o.width && height == o.height; }
};

/// One single-shot intensity image.
struct Frame {
    GridSpec grid;
    std::vector<double> intensity;  // row-major, non-negative
    std::int64_t frame_index = 0;

    double at(int x, int y) const { return intensity[grid.index(x, y)]; }
};

/// Complex field on a grid (pre-detection amplitude).
struct ComplexField {
    GridSpec grid;
    std::vector<std::complex<double>> values;
};

/// Streaming source of frames. Implementations must be safe to call from
/// several threads at once and must return identical frames per index.
class FrameSource {
public:
    virtual ~FrameSource() = default;
    virtual Frame frame(std::int64_t index) const = 0;
    virtual std::int64_t n_frames() const = 0;
    virtual const GridSpec& grid() const = 0;
};

/// View of a contiguous index range [begin, end) of another source.
class FrameSlice final : public FrameSource {
public:
    FrameSlice(const FrameSource& base, std::int64_t begin, std::int64_t end)
        : base_(&base), begin_(begin), end_(end) {
        if (begin < 0 || end > base.n_frames() || begin >= end)
            throw std::invalid_argument("FrameSlice: bad range");
    }
    Frame frame(std::int64_t i) const override { return base_->frame(begin_ + i); }
    std::int64_t n_frames() const override { return end_ - begin_; }
    const GridSpec& grid() const override { return base_->grid(); }

private:
    const FrameSource* base_;
    std::int64_t begin_, end_;
};

/// Binary transmission mask (true = object pixel).
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> on;

    void validate() const {
        if (width <= 0 || height <= 0 || on.size() != static_cast<size_t>(width) * height)
            throw std::invalid_argument("Mask: inconsistent dimensions");
        if (std::find(on.begin(), on.end(), std::uint8_t{1}) == on.end())
            throw std::invalid_argument("Mask: no transmitting pixel");
    }

    bool at(int x, int y) const { return on[static_cast<size_t>(y) * width + x] != 0; }

    std::int64_t count() const {
        std::int64_t c = 0;
        for (auto v : on) c += (v != 0);
        return c;
    }

    struct Box {
        int x0, y0, x1, y1;  // inclusive bounds
    };
    Box bounding_box() const {
        Box b{width, height, -1, -1};
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                if (at(x, y)) {
                    b.x0 = std::min(b.x0, x);
                    b.y0 = std::min(b.y0, y);
                    b.x1 = std::max(b.x1, x);
                    b.y1 = std::max(b.y1, y);
                }
        return b;
    }
};

/// Set of pixels (flattened indices, sorted unique) within a grid.
struct Region {
    std::vector<std::int32_t> pixels;

    void validate(const GridSpec& grid) const {
        if (pixels.empty()) throw std::invalid_argument("Region: empty");
        const auto n = static_cast<std::int32_t>(grid.npix());
        for (auto p : pixels)
            if (p < 0 || p >= n) throw std::invalid_argument("Region: pixel out of bounds");
    }

    static Region rectangle(const GridSpec& grid, int x0, int y0, int w, int h) {
        if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > grid.width || y0 + h > grid.height)
            throw std::invalid_argument("Region::rectangle: outside grid");
        Region r;
        r.pixels.reserve(static_cast<size_t>(w) * h);
        for (int y = y0; y < y0 + h; ++y)
            for (int x = x0; x < x0 + w; ++x)
                r.pixels.push_back(static_cast<std::int32_t>(grid.index(x, y)));
        return r;
    }

    static Region from_mask(const GridSpec& grid, const Mask& mask) {
        if (mask.width != grid.width || mask.height != grid.height)
            throw std::invalid_argument("Region::from_mask: mask does not match grid");
        Region r;
        for (int y = 0; y < mask.height; ++y)
            for (int x = 0; x < mask.width; ++x)
                if (mask.at(x, y)) r.pixels.push_back(static_cast<std::int32_t>(grid.index(x, y)));
        return r;
    }

    bool disjoint_from(const Region& o) const {
        // both pixel lists are built sorted
        std::size_t i = 0, j = 0;
        while (i < pixels.size() && j < o.pixels.size()) {
            if (pixels[i] == o.pixels[j]) return false;
            if (pixels[i] < o.pixels[j])
                ++i;
            else
                ++j;
        }
        return true;
    }
};

/// Pixels at Euclidean distance > `margin` from every mask pixel.
/// This is the default averaging/normalization region for differential
/// imaging and the background region for the figures of merit.
inline Region mask_complement(const GridSpec& grid, const Mask& mask, double margin = 5.0) {
    if (mask.width != grid.width || mask.height != grid.height)
        throw std::invalid_argument("mask_complement: mask does not match grid");
    const int r = static_cast<int>(std::ceil(margin));
    // dilate the mask by a disk of radius `margin`, then take the complement
    std::vector<std::uint8_t> near(grid.npix(), 0);
    for (int y = 0; y < grid.height; ++y)
        for (int x = 0; x < grid.width; ++x) {
            if (!mask.at(x, y)) continue;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    if (dx * dx + dy * dy > margin * margin) continue;
                    const int xx = x + dx, yy = y + dy;
                    if (xx < 0 || yy < 0 || xx >= grid.width || yy >= grid.height) continue;
                    near[grid.index(xx, yy)] = 1;
                }
        }
    Region out;
    for (std::size_t i = 0; i < near.size(); ++i)
        if (!near[i]) out.pixels.push_back(static_cast<std::int32_t>(i));
    if (out.pixels.empty())
        throw std::invalid_argument("mask_complement: mask leaves no background pixels");
    return out;
}

}  // namespace specklegi

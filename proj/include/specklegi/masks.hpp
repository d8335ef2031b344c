#pragma once

#include <cmath>
#include <stdexcept>

#include "specklegi/frame.hpp"

namespace specklegi {

/// Built-in 40x40 llama silhouette used by the demos and the verification
/// suite: body, slanted neck, head with ear, tail and four legs. Strokes are
/// at least ~3 px wide so the shape survives moderate speckle blur.
inline Mask make_llama_mask() {
    constexpr int n = 40;
    Mask m;
    m.width = n;
    m.height = n;
    m.on.assign(static_cast<std::size_t>(n) * n, 0);
    auto set = [&](int x, int y) {
        if (x >= 0 && y >= 0 && x < n && y < n) m.on[static_cast<std::size_t>(y) * n + x] = 1;
    };
    auto ellipse = [&](double cx, double cy, double rx, double ry) {
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                const double ex = (x - cx) / rx, ey = (y - cy) / ry;
                if (ex * ex + ey * ey <= 1.0) set(x, y);
            }
    };
    auto box = [&](int x0, int y0, int x1, int y1) {
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) set(x, y);
    };

    ellipse(24.0, 22.0, 12.0, 8.0);                  // body
    for (int y = 4; y <= 20; ++y) {                  // neck, leaning forward
        const int cx = static_cast<int>(std::lround(9.0 + (y - 8) * 0.35));
        box(cx - 2, y, cx + 2, y);
    }
    ellipse(8.0, 6.0, 4.5, 3.2);                     // head
    box(10, 0, 12, 4);                               // ear
    box(14, 28, 17, 38);                             // legs
    box(20, 28, 23, 38);
    box(27, 28, 30, 38);
    box(32, 28, 35, 38);
    ellipse(36.0, 17.0, 2.5, 3.0);                   // tail
    m.validate();
    return m;
}

/// Places a small mask onto a larger grid-sized canvas; negative offsets
/// center it.
inline Mask embed_mask(const Mask& inner, const GridSpec& grid, int x0 = -1, int y0 = -1) {
    if (inner.width > grid.width || inner.height > grid.height)
        throw std::invalid_argument("embed_mask: mask larger than grid");
    if (x0 < 0) x0 = (grid.width - inner.width) / 2;
    if (y0 < 0) y0 = (grid.height - inner.height) / 2;
    if (x0 + inner.width > grid.width || y0 + inner.height > grid.height)
        throw std::invalid_argument("embed_mask: mask placed outside grid");
    Mask m;
    m.width = grid.width;
    m.height = grid.height;
    m.on.assign(grid.npix(), 0);
    for (int y = 0; y < inner.height; ++y)
        for (int x = 0; x < inner.width; ++x)
            if (inner.at(x, y)) m.on[grid.index(x0 + x, y0 + y)] = 1;
    m.validate();
    return m;
}

}  // namespace specklegi

#pragma once

// Binary raster plus the handful of morphology and labeling primitives the
// DRC and lithography models need. Row 0 is the lowest y.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "hotguard/error.hpp"

namespace hotguard {

struct BinaryImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;  // row-major, values in {0,1}

    BinaryImage() = default;
    BinaryImage(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }

    std::int64_t count() const {
        std::int64_t n = 0;
        for (auto b : bits) n += b;
        return n;
    }

    friend bool operator==(const BinaryImage&, const BinaryImage&) = default;
};

namespace detail {

// Running AND (erode) or OR (dilate) over a window [i + lo, i + hi] along one axis.
// Out-of-range samples count as 0 for OR and as 0 for AND as well, so erosion
// treats the outside as background.
inline void window_pass(const std::vector<std::uint8_t>& in, std::vector<std::uint8_t>& out,
                        int width, int height, bool horizontal, int lo, int hi, bool is_and) {
    out.assign(in.size(), 0);
    const int outer = horizontal ? height : width;
    const int inner = horizontal ? width : height;
    std::vector<int> prefix(static_cast<std::size_t>(inner) + 1);
    for (int o = 0; o < outer; ++o) {
        auto idx = [&](int i) {
            return horizontal ? static_cast<std::size_t>(o) * width + i
                              : static_cast<std::size_t>(i) * width + o;
        };
        prefix[0] = 0;
        for (int i = 0; i < inner; ++i) prefix[i + 1] = prefix[i] + in[idx(i)];
        for (int i = 0; i < inner; ++i) {
            const int a = i + lo;
            const int b = i + hi;
            const int ca = std::clamp(a, 0, inner);
            const int cb = std::clamp(b + 1, 0, inner);
            const int ones = cb > ca ? prefix[cb] - prefix[ca] : 0;
            const int span = b - a + 1;
            out[idx(i)] = is_and ? static_cast<std::uint8_t>(ones == span && a >= 0 && b < inner)
                                 : static_cast<std::uint8_t>(ones > 0);
        }
    }
}

}  // namespace detail

/// Dilation by a (2r+1)-square centered structuring element.
inline BinaryImage dilate_square(const BinaryImage& img, int radius) {
    if (radius <= 0) return img;
    std::vector<std::uint8_t> tmp;
    BinaryImage out(img.width, img.height);
    detail::window_pass(img.bits, tmp, img.width, img.height, true, -radius, radius, false);
    detail::window_pass(tmp, out.bits, img.width, img.height, false, -radius, radius, false);
    return out;
}

/// Morphological opening by a k x k square: keeps exactly the pixels covered by
/// some k x k square lying entirely inside the foreground.
inline BinaryImage open_square(const BinaryImage& img, int k) {
    if (k <= 1) return img;
    std::vector<std::uint8_t> tmp;
    std::vector<std::uint8_t> eroded;
    // Erosion anchored at the low corner: E(x) = 1 iff [x, x+k) is all ones.
    detail::window_pass(img.bits, tmp, img.width, img.height, true, 0, k - 1, true);
    detail::window_pass(tmp, eroded, img.width, img.height, false, 0, k - 1, true);
    // Dilation with the reflected element: D(x) = 1 iff some E in (x-k, x].
    BinaryImage out(img.width, img.height);
    detail::window_pass(eroded, tmp, img.width, img.height, true, -(k - 1), 0, false);
    detail::window_pass(tmp, out.bits, img.width, img.height, false, -(k - 1), 0, false);
    return out;
}

struct Component {
    std::int64_t pixels = 0;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive pixel bbox
};

struct Labeling {
    std::vector<std::int32_t> labels;  // -1 = background, else component index
    std::vector<Component> components;
};

/// 4-connected component labeling; component indices follow raster scan order.
inline Labeling label_components(const BinaryImage& img) {
    Labeling out;
    out.labels.assign(img.bits.size(), -1);
    std::vector<std::int32_t> stack;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const auto start = static_cast<std::size_t>(y) * img.width + x;
            if (!img.bits[start] || out.labels[start] >= 0) continue;
            const auto id = static_cast<std::int32_t>(out.components.size());
            Component c{0, x, y, x, y};
            stack.assign(1, static_cast<std::int32_t>(start));
            out.labels[start] = id;
            while (!stack.empty()) {
                const auto p = stack.back();
                stack.pop_back();
                const int px = p % img.width;
                const int py = p / img.width;
                ++c.pixels;
                c.x0 = std::min(c.x0, px);
                c.x1 = std::max(c.x1, px);
                c.y0 = std::min(c.y0, py);
                c.y1 = std::max(c.y1, py);
                const int nx[4] = {px - 1, px + 1, px, px};
                const int ny[4] = {py, py, py - 1, py + 1};
                for (int k = 0; k < 4; ++k) {
                    if (nx[k] < 0 || ny[k] < 0 || nx[k] >= img.width || ny[k] >= img.height) continue;
                    const auto q = static_cast<std::size_t>(ny[k]) * img.width + nx[k];
                    if (img.bits[q] && out.labels[q] < 0) {
                        out.labels[q] = id;
                        stack.push_back(static_cast<std::int32_t>(q));
                    }
                }
            }
            out.components.push_back(c);
        }
    }
    return out;
}

/// Binary 8-bit PGM (P5), top row = highest y.
inline void write_pgm(const BinaryImage& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    std::vector<char> row(static_cast<std::size_t>(img.width));
    for (int y = img.height - 1; y >= 0; --y) {
        for (int x = 0; x < img.width; ++x) row[x] = img.at(x, y) ? static_cast<char>(255) : 0;
        f.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw IoError("write failed for " + path);
}

}  // namespace hotguard

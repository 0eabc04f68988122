#pragma once

// Clip -> 1110x1110 binary image (1 nm pixels) -> 10x10 grid of 111x111 blocks ->
// first 32 zig-zag coefficients of each block's orthonormal 2-D DCT-II.
// Tensor layout is (block-row, block-col, coefficient); block-row 0 holds the
// lowest y, matching BinaryImage rows.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "hotguard/error.hpp"
#include "hotguard/geometry.hpp"
#include "hotguard/image.hpp"

namespace hotguard {

inline constexpr int kBlock = 111;
inline constexpr int kBlocks = 10;
inline constexpr int kCoeffs = 32;
inline constexpr std::size_t kFeatureSize = static_cast<std::size_t>(kBlocks) * kBlocks * kCoeffs;

struct FeatureTensor {
    std::array<float, kFeatureSize> values{};
    float at(int br, int bc, int k) const { return values[(static_cast<std::size_t>(br) * kBlocks + bc) * kCoeffs + k]; }
    friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;
};

inline BinaryImage clip_to_image(const LayoutClip& clip) { return rasterize(clip, 1); }

/// (row-frequency, column-frequency) pairs in JPEG zig-zag order.
inline std::vector<std::pair<int, int>> zigzag_order(int n, std::size_t count) {
    std::vector<std::pair<int, int>> out;
    for (int s = 0; s <= 2 * (n - 1) && out.size() < count; ++s) {
        const int lo = std::max(0, s - (n - 1));
        const int hi = std::min(s, n - 1);
        if (s % 2 == 1)
            for (int r = lo; r <= hi && out.size() < count; ++r) out.push_back({r, s - r});
        else
            for (int r = hi; r >= lo && out.size() < count; --r) out.push_back({r, s - r});
    }
    return out;
}

/// Orthonormal DCT-II basis: basis[k * n + i] = c_k cos(pi (2i+1) k / 2n).
inline std::vector<double> dct_basis(int n) {
    std::vector<double> b(static_cast<std::size_t>(n) * n);
    for (int k = 0; k < n; ++k) {
        const double c = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
        for (int i = 0; i < n; ++i)
            b[static_cast<std::size_t>(k) * n + i] = c * std::cos(std::numbers::pi * (2 * i + 1) * k / (2.0 * n));
    }
    return b;
}

/// Full 2-D orthonormal DCT-II of an n x n row-major block.
inline std::vector<double> dct2(const std::vector<double>& block, int n) {
    if (block.size() != static_cast<std::size_t>(n) * n) throw DimensionError("dct2: block is not n x n");
    const auto b = dct_basis(n);
    std::vector<double> tmp(block.size(), 0.0), out(block.size(), 0.0);
    for (int y = 0; y < n; ++y)
        for (int l = 0; l < n; ++l) {
            double acc = 0.0;
            for (int x = 0; x < n; ++x) acc += b[static_cast<std::size_t>(l) * n + x] * block[static_cast<std::size_t>(y) * n + x];
            tmp[static_cast<std::size_t>(y) * n + l] = acc;
        }
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            double acc = 0.0;
            for (int y = 0; y < n; ++y) acc += b[static_cast<std::size_t>(k) * n + y] * tmp[static_cast<std::size_t>(y) * n + l];
            out[static_cast<std::size_t>(k) * n + l] = acc;
        }
    return out;
}

/// Inverse of dct2.
inline std::vector<double> idct2(const std::vector<double>& coeffs, int n) {
    if (coeffs.size() != static_cast<std::size_t>(n) * n) throw DimensionError("idct2: block is not n x n");
    const auto b = dct_basis(n);
    std::vector<double> tmp(coeffs.size(), 0.0), out(coeffs.size(), 0.0);
    for (int k = 0; k < n; ++k)
        for (int x = 0; x < n; ++x) {
            double acc = 0.0;
            for (int l = 0; l < n; ++l) acc += b[static_cast<std::size_t>(l) * n + x] * coeffs[static_cast<std::size_t>(k) * n + l];
            tmp[static_cast<std::size_t>(k) * n + x] = acc;
        }
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k) acc += b[static_cast<std::size_t>(k) * n + y] * tmp[static_cast<std::size_t>(k) * n + x];
            out[static_cast<std::size_t>(y) * n + x] = acc;
        }
    return out;
}

namespace detail {

struct DctTables {
    std::vector<std::pair<int, int>> order = zigzag_order(kBlock, kCoeffs);
    int max_freq = 0;
    std::vector<double> basis = dct_basis(kBlock);
    std::vector<double> prefix;  // prefix[l * (kBlock+1) + x] = sum_{i<x} basis[l][i]
    DctTables() {
        for (auto [r, c] : order) max_freq = std::max({max_freq, r, c});
        prefix.assign(static_cast<std::size_t>(max_freq + 1) * (kBlock + 1), 0.0);
        for (int l = 0; l <= max_freq; ++l)
            for (int x = 0; x < kBlock; ++x)
                prefix[static_cast<std::size_t>(l) * (kBlock + 1) + x + 1] =
                    prefix[static_cast<std::size_t>(l) * (kBlock + 1) + x] + basis[static_cast<std::size_t>(l) * kBlock + x];
    }
};

inline const DctTables& dct_tables() {
    static const DctTables t;
    return t;
}

}  // namespace detail

/// Truncated block DCT of a real-valued 1110x1110 field (row-major, row 0 = lowest y).
inline FeatureTensor dct_features(const std::vector<double>& field, int width, int height) {
    if (width != kClipSize || height != kClipSize || field.size() != static_cast<std::size_t>(width) * height)
        throw DimensionError("dct_features expects a 1110x1110 image, got " + std::to_string(width) + "x" +
                             std::to_string(height));
    const auto& t = detail::dct_tables();
    const int f = t.max_freq + 1;
    FeatureTensor out;
    std::vector<double> rows(static_cast<std::size_t>(kBlock) * f);
    for (int br = 0; br < kBlocks; ++br)
        for (int bc = 0; bc < kBlocks; ++bc) {
            for (int y = 0; y < kBlock; ++y) {
                const double* src = &field[static_cast<std::size_t>(br * kBlock + y) * width + bc * kBlock];
                for (int l = 0; l < f; ++l) {
                    double acc = 0.0;
                    const double* bl = &t.basis[static_cast<std::size_t>(l) * kBlock];
                    for (int x = 0; x < kBlock; ++x) acc += bl[x] * src[x];
                    rows[static_cast<std::size_t>(y) * f + l] = acc;
                }
            }
            for (int i = 0; i < kCoeffs; ++i) {
                const auto [k, l] = t.order[i];
                double acc = 0.0;
                for (int y = 0; y < kBlock; ++y) acc += t.basis[static_cast<std::size_t>(k) * kBlock + y] * rows[static_cast<std::size_t>(y) * f + l];
                out.values[(static_cast<std::size_t>(br) * kBlocks + bc) * kCoeffs + i] = static_cast<float>(acc);
            }
        }
    return out;
}

/// Binary-image fast path: row sums come from basis prefix sums over runs of ones.
inline FeatureTensor dct_features(const BinaryImage& img) {
    if (img.width != kClipSize || img.height != kClipSize)
        throw DimensionError("dct_features expects a 1110x1110 image, got " + std::to_string(img.width) + "x" +
                             std::to_string(img.height));
    const auto& t = detail::dct_tables();
    const int f = t.max_freq + 1;
    const auto P = [&](int l, int x) { return t.prefix[static_cast<std::size_t>(l) * (kBlock + 1) + x]; };
    FeatureTensor out;
    std::vector<double> rows(static_cast<std::size_t>(kBlock) * f);
    for (int br = 0; br < kBlocks; ++br)
        for (int bc = 0; bc < kBlocks; ++bc) {
            bool any = false;
            std::fill(rows.begin(), rows.end(), 0.0);
            for (int y = 0; y < kBlock; ++y) {
                const std::uint8_t* src = &img.bits[static_cast<std::size_t>(br * kBlock + y) * img.width + bc * kBlock];
                for (int x = 0; x < kBlock;) {
                    if (!src[x]) {
                        ++x;
                        continue;
                    }
                    int e = x;
                    while (e < kBlock && src[e]) ++e;
                    for (int l = 0; l < f; ++l) rows[static_cast<std::size_t>(y) * f + l] += P(l, e) - P(l, x);
                    any = true;
                    x = e;
                }
            }
            if (!any) continue;
            for (int i = 0; i < kCoeffs; ++i) {
                const auto [k, l] = t.order[i];
                double acc = 0.0;
                for (int y = 0; y < kBlock; ++y) acc += t.basis[static_cast<std::size_t>(k) * kBlock + y] * rows[static_cast<std::size_t>(y) * f + l];
                out.values[(static_cast<std::size_t>(br) * kBlocks + bc) * kCoeffs + i] = static_cast<float>(acc);
            }
        }
    return out;
}

inline FeatureTensor featurize(const LayoutClip& clip) { return dct_features(clip_to_image(clip)); }

// Feature cache: "HGFT", u32 version, u32 count, u32 rows, u32 cols, u32 coeffs,
// u64 config digest, then count * 3200 little-endian f32 in manifest order.
inline constexpr char kFeatureMagic[4] = {'H', 'G', 'F', 'T'};
inline constexpr std::uint32_t kFeatureVersion = 1;

namespace detail {

template <typename T>
void put_le(std::string& out, T v) {
    std::make_unsigned_t<T> u;
    std::memcpy(&u, &v, sizeof v);
    for (std::size_t i = 0; i < sizeof v; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw FormatError("unexpected end of data at byte offset " + std::to_string(pos));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += sizeof(T);
    T v;
    std::memcpy(&v, &u, sizeof v);
    return v;
}

inline std::uint32_t f32_bits(float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    return u;
}

inline float bits_f32(std::uint32_t u) {
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed for " + path);
}

}  // namespace detail

struct FeatureCache {
    std::uint64_t config_digest = 0;
    std::vector<FeatureTensor> tensors;
};

inline std::string encode_feature_cache(const FeatureCache& cache) {
    std::string out(kFeatureMagic, 4);
    detail::put_le<std::uint32_t>(out, kFeatureVersion);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cache.tensors.size()));
    detail::put_le<std::uint32_t>(out, kBlocks);
    detail::put_le<std::uint32_t>(out, kBlocks);
    detail::put_le<std::uint32_t>(out, kCoeffs);
    detail::put_le<std::uint64_t>(out, cache.config_digest);
    out.reserve(out.size() + cache.tensors.size() * kFeatureSize * 4);
    for (const auto& t : cache.tensors)
        for (float v : t.values) detail::put_le<std::uint32_t>(out, detail::f32_bits(v));
    return out;
}

inline FeatureCache decode_feature_cache(const std::string& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kFeatureMagic, 4) != 0) throw FormatError("not a feature cache (bad magic)");
    std::size_t pos = 4;
    if (detail::get_le<std::uint32_t>(bytes, pos) != kFeatureVersion) throw FormatError("unsupported feature cache version");
    const auto count = detail::get_le<std::uint32_t>(bytes, pos);
    const auto r = detail::get_le<std::uint32_t>(bytes, pos);
    const auto c = detail::get_le<std::uint32_t>(bytes, pos);
    const auto k = detail::get_le<std::uint32_t>(bytes, pos);
    if (r != kBlocks || c != kBlocks || k != kCoeffs) throw FormatError("feature cache has unexpected tensor dims");
    FeatureCache cache;
    cache.config_digest = detail::get_le<std::uint64_t>(bytes, pos);
    if (bytes.size() - pos != static_cast<std::size_t>(count) * kFeatureSize * 4)
        throw FormatError("feature cache payload size does not match its header");
    cache.tensors.resize(count);
    for (auto& t : cache.tensors)
        for (auto& v : t.values) v = detail::bits_f32(detail::get_le<std::uint32_t>(bytes, pos));
    return cache;
}

inline void save_feature_cache(const FeatureCache& cache, const std::string& path) {
    detail::write_file(path, encode_feature_cache(cache));
}

inline FeatureCache load_feature_cache(const std::string& path) { return decode_feature_cache(detail::read_file(path)); }

}  // namespace hotguard

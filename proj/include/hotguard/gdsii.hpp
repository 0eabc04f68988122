#pragma once

// Minimal GDSII stream reader/writer: one structure, BOUNDARY elements on
// layer 1 / datatype 0, 1 database unit = 1 nm. Anything else encountered on
// read is skipped and flagged.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "hotguard/error.hpp"
#include "hotguard/geometry.hpp"

namespace hotguard::gds {

enum RecordType : std::uint8_t {
    HEADER = 0x00,
    BGNLIB = 0x01,
    LIBNAME = 0x02,
    UNITS = 0x03,
    ENDLIB = 0x04,
    BGNSTR = 0x05,
    STRNAME = 0x06,
    ENDSTR = 0x07,
    BOUNDARY = 0x08,
    PATH = 0x09,
    SREF = 0x0A,
    AREF = 0x0B,
    TEXT = 0x0C,
    LAYER = 0x0D,
    DATATYPE = 0x0E,
    XY = 0x10,
    ENDEL = 0x11,
    BOX = 0x2D,
};

enum DataType : std::uint8_t { NoData = 0, BitArray = 1, Int16 = 2, Int32 = 3, Real8 = 5, Ascii = 6 };

struct GdsRecord {
    std::uint16_t length = 4;  // 4 + payload size
    std::uint8_t record_type = 0;
    std::uint8_t data_type = 0;
    std::vector<std::uint8_t> payload;
};

/// Encode a double as an 8-byte excess-64 base-16 GDSII real.
inline std::array<std::uint8_t, 8> encode_real8(double value) {
    std::array<std::uint8_t, 8> out{};
    if (value == 0.0) return out;
    std::uint8_t sign = 0;
    if (value < 0) {
        sign = 0x80;
        value = -value;
    }
    int exponent = 64;
    while (value >= 1.0) {
        value /= 16.0;
        ++exponent;
    }
    while (value < 1.0 / 16.0) {
        value *= 16.0;
        --exponent;
    }
    auto mantissa = static_cast<std::uint64_t>(std::llround(value * 72057594037927936.0));  // 2^56
    if (mantissa >= (1ULL << 56)) {
        mantissa >>= 4;
        ++exponent;
    }
    out[0] = static_cast<std::uint8_t>(sign | (exponent & 0x7f));
    for (int i = 7; i >= 1; --i) {
        out[i] = static_cast<std::uint8_t>(mantissa & 0xff);
        mantissa >>= 8;
    }
    return out;
}

inline double decode_real8(const std::uint8_t* b) {
    std::uint64_t mantissa = 0;
    for (int i = 1; i < 8; ++i) mantissa = (mantissa << 8) | b[i];
    const int exponent = (b[0] & 0x7f) - 64;
    const double v = static_cast<double>(mantissa) / 72057594037927936.0 * std::pow(16.0, exponent);
    return (b[0] & 0x80) ? -v : v;
}

class Writer {
public:
    void record(std::uint8_t type, std::uint8_t dtype, const std::vector<std::uint8_t>& payload = {}) {
        const auto len = static_cast<std::uint16_t>(4 + payload.size());
        put16(len);
        buf_.push_back(type);
        buf_.push_back(dtype);
        buf_.insert(buf_.end(), payload.begin(), payload.end());
    }
    void int16s(std::uint8_t type, std::initializer_list<std::int16_t> values) {
        std::vector<std::uint8_t> p;
        for (auto v : values) {
            p.push_back(static_cast<std::uint8_t>((static_cast<std::uint16_t>(v) >> 8) & 0xff));
            p.push_back(static_cast<std::uint8_t>(static_cast<std::uint16_t>(v) & 0xff));
        }
        record(type, Int16, p);
    }
    void ascii(std::uint8_t type, const std::string& s) {
        std::vector<std::uint8_t> p(s.begin(), s.end());
        if (p.size() % 2) p.push_back(0);
        record(type, Ascii, p);
    }
    void xy(const std::vector<Point>& pts) {
        std::vector<std::uint8_t> p;
        auto put32 = [&](std::int32_t v) {
            const auto u = static_cast<std::uint32_t>(v);
            for (int s = 24; s >= 0; s -= 8) p.push_back(static_cast<std::uint8_t>((u >> s) & 0xff));
        };
        for (const auto& pt : pts) {
            put32(pt.x);
            put32(pt.y);
        }
        record(XY, Int32, p);
    }
    const std::vector<std::uint8_t>& bytes() const { return buf_; }

private:
    void put16(std::uint16_t v) {
        buf_.push_back(static_cast<std::uint8_t>(v >> 8));
        buf_.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
    std::vector<std::uint8_t> buf_;
};

/// Serialize a clip to GDSII bytes. Timestamps are fixed so output is reproducible.
inline std::vector<std::uint8_t> encode_clip(const LayoutClip& clip, const std::string& libname = "HOTGUARD") {
    Writer w;
    w.int16s(HEADER, {600});
    w.int16s(BGNLIB, {2000, 1, 1, 0, 0, 0, 2000, 1, 1, 0, 0, 0});
    w.ascii(LIBNAME, libname);
    {
        std::vector<std::uint8_t> p;
        for (double d : {1e-3, 1e-9}) {
            const auto r = encode_real8(d);
            p.insert(p.end(), r.begin(), r.end());
        }
        w.record(UNITS, Real8, p);
    }
    w.int16s(BGNSTR, {2000, 1, 1, 0, 0, 0, 2000, 1, 1, 0, 0, 0});
    w.ascii(STRNAME, clip.id);
    for (const auto& poly : clip.polygons) {
        w.record(BOUNDARY, NoData);
        w.int16s(LAYER, {1});
        w.int16s(DATATYPE, {0});
        auto pts = poly.vertices();
        pts.push_back(pts.front());
        w.xy(pts);
        w.record(ENDEL, NoData);
    }
    w.record(ENDSTR, NoData);
    w.record(ENDLIB, NoData);
    return w.bytes();
}

inline std::size_t write_clip_gds(const LayoutClip& clip, const std::string& path,
                                  const std::string& libname = "HOTGUARD") {
    const auto bytes = encode_clip(clip, libname);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed for " + path);
    return bytes.size();
}

struct GdsReadResult {
    LayoutClip clip;
    bool skipped_unknown = false;
    std::vector<std::string> warnings;
};

inline GdsReadResult decode_clip(const std::vector<std::uint8_t>& data) {
    GdsReadResult out;
    std::size_t pos = 0;
    bool in_boundary = false;
    bool in_skipped_element = false;
    bool saw_endlib = false;
    std::vector<Point> pending;
    auto warn = [&](const std::string& msg) {
        out.skipped_unknown = true;
        out.warnings.push_back(msg + " at byte offset " + std::to_string(pos));
    };
    while (pos < data.size() && !saw_endlib) {
        if (data.size() - pos < 4) throw ParseError("truncated record header", pos);
        const std::uint16_t len = static_cast<std::uint16_t>((data[pos] << 8) | data[pos + 1]);
        const std::uint8_t type = data[pos + 2];
        const std::uint8_t dtype = data[pos + 3];
        if (len < 4) throw ParseError("record length below 4", pos);
        if (len % 2) throw ParseError("odd record length", pos);
        if (pos + len > data.size()) throw ParseError("truncated record", pos);
        const std::uint8_t* payload = data.data() + pos + 4;
        const std::size_t plen = len - 4u;
        (void)dtype;
        switch (type) {
            case HEADER:
            case BGNLIB:
            case LIBNAME:
            case UNITS:
            case BGNSTR:
            case ENDSTR:
            case LAYER:
            case DATATYPE:
                break;
            case STRNAME: {
                std::string s(reinterpret_cast<const char*>(payload), plen);
                while (!s.empty() && s.back() == '\0') s.pop_back();
                out.clip.id = s;
                break;
            }
            case BOUNDARY:
                in_boundary = true;
                pending.clear();
                break;
            case PATH:
            case SREF:
            case AREF:
            case TEXT:
            case BOX:
                in_skipped_element = true;
                warn("skipped unsupported element type " + std::to_string(type));
                break;
            case XY: {
                if (in_skipped_element) break;
                if (!in_boundary) throw ParseError("XY outside BOUNDARY", pos);
                if (plen % 8) throw ParseError("XY payload not a multiple of 8 bytes", pos);
                auto get32 = [&](std::size_t off) {
                    const std::uint32_t u = (static_cast<std::uint32_t>(payload[off]) << 24) |
                                            (static_cast<std::uint32_t>(payload[off + 1]) << 16) |
                                            (static_cast<std::uint32_t>(payload[off + 2]) << 8) |
                                            static_cast<std::uint32_t>(payload[off + 3]);
                    return static_cast<std::int32_t>(u);
                };
                for (std::size_t k = 0; k < plen; k += 8) pending.push_back({get32(k), get32(k + 4)});
                if (pending.size() < 2 || pending.front() != pending.back())
                    throw ParseError("XY loop not closed", pos);
                for (std::size_t k = 0; k + 1 < pending.size(); ++k)
                    if (pending[k].x != pending[k + 1].x && pending[k].y != pending[k + 1].y)
                        throw ParseError("non-rectilinear XY segment", pos);
                break;
            }
            case ENDEL:
                if (in_boundary) {
                    try {
                        out.clip.polygons.emplace_back(pending);
                    } catch (const StructuralError& e) {
                        throw ParseError(std::string("invalid boundary: ") + e.what(), pos);
                    }
                }
                in_boundary = false;
                in_skipped_element = false;
                break;
            case ENDLIB:
                saw_endlib = true;
                break;
            default:
                if (!in_skipped_element) warn("skipped unknown record type " + std::to_string(type));
                break;
        }
        pos += len;
    }
    if (!saw_endlib) throw ParseError("missing ENDLIB", pos);
    return out;
}

inline GdsReadResult read_clip_gds(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_clip(data);
}

}  // namespace hotguard::gds

#pragma once

// Architectures A and B, the network container, initialization and the HSDM
// model file.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include "hotguard/error.hpp"
#include "hotguard/features.hpp"
#include "hotguard/nn/layers.hpp"
#include "hotguard/rng.hpp"

namespace hotguard::nn {

enum class LayerKind { Conv, Pool, Flatten, Dense };
enum class Activation { None, Relu, Softmax };

struct LayerSpec {
    LayerKind kind;
    int units = 0;  // output channels (Conv) or output width (Dense)
    Activation act = Activation::None;
    std::string name;
    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ArchSpec {
    std::string name;
    Shape input{kBlocks, kBlocks, kCoeffs};
    std::vector<LayerSpec> layers;
    // Fixed (not learned) divisor applied to the input: raw DCT coefficients of
    // 111x111 unit-pixel blocks reach 111, so this maps them to O(1).
    int input_divisor = kBlock;

    static ArchSpec build(const std::string& name, Shape input, const std::vector<int>& stage1,
                          const std::vector<int>& stage2) {
        ArchSpec a{name, input, {}, kBlock};
        int i = 1;
        for (int c : stage1) a.layers.push_back({LayerKind::Conv, c, Activation::Relu, "conv1_" + std::to_string(i++)});
        a.layers.push_back({LayerKind::Pool, 0, Activation::None, "pool1"});
        i = 1;
        for (int c : stage2) a.layers.push_back({LayerKind::Conv, c, Activation::Relu, "conv2_" + std::to_string(i++)});
        a.layers.push_back({LayerKind::Pool, 0, Activation::None, "pool2"});
        a.layers.push_back({LayerKind::Flatten, 0, Activation::None, "flatten"});
        a.layers.push_back({LayerKind::Dense, 250, Activation::Relu, "fc1"});
        a.layers.push_back({LayerKind::Dense, 2, Activation::Softmax, "fc2"});
        return a;
    }
    static ArchSpec A() { return build("A", {kBlocks, kBlocks, kCoeffs}, {16, 16}, {32, 32}); }
    static ArchSpec B() { return build("B", {kBlocks, kBlocks, kCoeffs}, {32, 32, 32, 32}, {64, 64, 64, 64}); }
    static ArchSpec by_name(const std::string& n) {
        if (n == "A") return A();
        if (n == "B") return B();
        throw ConfigError("unknown architecture '" + n + "' (expected A or B)");
    }

    /// Output shape of every layer, in order.
    std::vector<Shape> shape_chain() const {
        std::vector<Shape> out;
        Shape s = input;
        for (const auto& l : layers) {
            switch (l.kind) {
                case LayerKind::Conv: s = {s.h, s.w, l.units}; break;
                case LayerKind::Pool: s = {s.h / 2, s.w / 2, s.c}; break;
                case LayerKind::Flatten: s = {1, 1, static_cast<int>(s.size())}; break;
                case LayerKind::Dense: s = {1, 1, l.units}; break;
            }
            out.push_back(s);
        }
        return out;
    }

    /// Compact text form stored in model files, e.g. "A;10x10x32/111;c16r,c16r,p,...".
    std::string descriptor() const {
        std::ostringstream os;
        os << name << ';' << input.h << 'x' << input.w << 'x' << input.c << '/' << input_divisor << ';';
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            if (i) os << ',';
            switch (l.kind) {
                case LayerKind::Conv: os << 'c' << l.units; break;
                case LayerKind::Pool: os << 'p'; break;
                case LayerKind::Flatten: os << 'f'; break;
                case LayerKind::Dense: os << 'd' << l.units; break;
            }
            if (l.act == Activation::Relu) os << 'r';
            if (l.act == Activation::Softmax) os << 's';
        }
        return os.str();
    }
};

/// Parameters for one layer; empty for pool and flatten.
template <typename T>
struct LayerParams {
    std::vector<T> w, b;
};

template <typename T>
class Network {
public:
    struct Cache {
        std::vector<T> input;              // scaled network input
        std::vector<std::vector<T>> acts;  // post-activation output of each layer
        std::vector<std::vector<int>> argmax;
        std::array<T, 2> logits{};
        std::array<T, 2> probs{};
    };

    Network() = default;

    explicit Network(ArchSpec arch) : arch_(std::move(arch)), shapes_(arch_.shape_chain()) {
        params_.resize(arch_.layers.size());
        Shape in = arch_.input;
        for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
            const auto& l = arch_.layers[i];
            if (l.kind == LayerKind::Conv) {
                params_[i].w.assign(static_cast<std::size_t>(9) * in.c * l.units, T(0));
                params_[i].b.assign(l.units, T(0));
            } else if (l.kind == LayerKind::Dense) {
                params_[i].w.assign(in.size() * l.units, T(0));
                params_[i].b.assign(l.units, T(0));
            }
            in = shapes_[i];
        }
        if (shapes_.empty() || shapes_.back().size() != 2 || arch_.layers.back().act != Activation::Softmax)
            throw ConfigError("architecture must end in a 2-way softmax");
    }

    const ArchSpec& arch() const { return arch_; }
    const std::vector<Shape>& shapes() const { return shapes_; }
    std::vector<LayerParams<T>>& params() { return params_; }
    const std::vector<LayerParams<T>>& params() const { return params_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.w.size() + p.b.size();
        return n;
    }

    Shape input_shape(std::size_t layer) const { return layer == 0 ? arch_.input : shapes_[layer - 1]; }

    /// He-uniform for ReLU layers, Glorot-uniform for the softmax layer, zero biases.
    void initialize(std::uint64_t seed) {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            const auto& l = arch_.layers[i];
            if (params_[i].w.empty()) continue;
            const Shape in = input_shape(i);
            const double fan_in = l.kind == LayerKind::Conv ? 9.0 * in.c : static_cast<double>(in.size());
            const double fan_out = l.kind == LayerKind::Conv ? 9.0 * l.units : static_cast<double>(l.units);
            const double limit = l.act == Activation::Relu ? std::sqrt(6.0 / fan_in) : std::sqrt(6.0 / (fan_in + fan_out));
            Rng rng(derive_seed(seed, l.name, 0));
            for (auto& v : params_[i].w) v = static_cast<T>((2.0 * rng.uniform01() - 1.0) * limit);
            std::fill(params_[i].b.begin(), params_[i].b.end(), T(0));
        }
    }

    std::size_t layer_index(const std::string& name) const {
        for (std::size_t i = 0; i < arch_.layers.size(); ++i)
            if (arch_.layers[i].name == name) return i;
        throw InterfaceError("unknown layer '" + name + "'");
    }

    void forward(const T* input, Cache& c) const {
        const std::size_t n = arch_.layers.size();
        c.acts.resize(n);
        c.argmax.resize(n);
        c.input.resize(arch_.input.size());
        const T scale = T(1) / static_cast<T>(arch_.input_divisor);
        for (std::size_t i = 0; i < c.input.size(); ++i) c.input[i] = input[i] * scale;
        const T* in = c.input.data();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& l = arch_.layers[i];
            const Shape s = input_shape(i);
            auto& out = c.acts[i];
            out.resize(shapes_[i].size());
            switch (l.kind) {
                case LayerKind::Conv:
                    conv3x3_forward(in, s, params_[i].w.data(), params_[i].b.data(), l.units, out.data());
                    break;
                case LayerKind::Pool:
                    c.argmax[i].resize(out.size());
                    maxpool2_forward(in, s, out.data(), c.argmax[i].data());
                    break;
                case LayerKind::Flatten: std::copy(in, in + out.size(), out.begin()); break;
                case LayerKind::Dense:
                    dense_forward(in, static_cast<int>(s.size()), params_[i].w.data(), params_[i].b.data(), l.units,
                                  out.data());
                    break;
            }
            if (l.act == Activation::Relu) relu_inplace(out.data(), out.size());
            if (l.act == Activation::Softmax) {
                c.logits = {out[0], out[1]};
                softmax(c.logits.data(), c.probs.data(), 2);
                out[0] = c.probs[0];
                out[1] = c.probs[1];
            }
            in = out.data();
        }
    }

    std::array<T, 2> predict(const T* input) const {
        Cache c;
        forward(input, c);
        return c.probs;
    }

    /// Backpropagate d(loss)/d(logits) through a cache from forward(); accumulates into grads.
    void backward(const Cache& c, const std::array<T, 2>& glogits,
                  std::vector<LayerParams<T>>& grads) const {
        const std::size_t n = arch_.layers.size();
        std::vector<T> g(glogits.begin(), glogits.end()), gin;
        for (std::size_t k = n; k-- > 0;) {
            const auto& l = arch_.layers[k];
            const Shape s = input_shape(k);
            const T* in = k == 0 ? c.input.data() : c.acts[k - 1].data();
            if (l.act == Activation::Relu) relu_backward_inplace(c.acts[k].data(), g.data(), g.size());
            const bool need_in = k > 0;
            gin.assign(need_in ? s.size() : 0, T(0));
            switch (l.kind) {
                case LayerKind::Conv:
                    conv3x3_backward(in, s, params_[k].w.data(), l.units, g.data(), need_in ? gin.data() : nullptr,
                                     grads[k].w.data(), grads[k].b.data());
                    break;
                case LayerKind::Pool:
                    gin.resize(s.size());
                    maxpool2_backward(s, g.data(), c.argmax[k].data(), g.size(), gin.data());
                    break;
                case LayerKind::Flatten: gin = g; break;
                case LayerKind::Dense:
                    dense_backward(in, static_cast<int>(s.size()), params_[k].w.data(), l.units, g.data(),
                                   need_in ? gin.data() : nullptr, grads[k].w.data(), grads[k].b.data());
                    break;
            }
            g.swap(gin);
        }
    }

    std::vector<LayerParams<T>> zero_grads() const {
        std::vector<LayerParams<T>> g(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            g[i].w.assign(params_[i].w.size(), T(0));
            g[i].b.assign(params_[i].b.size(), T(0));
        }
        return g;
    }

    template <typename U>
    Network<U> cast() const {
        Network<U> out(arch_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            out.params()[i].w.assign(params_[i].w.begin(), params_[i].w.end());
            out.params()[i].b.assign(params_[i].b.begin(), params_[i].b.end());
        }
        return out;
    }

private:
    ArchSpec arch_;
    std::vector<Shape> shapes_;
    std::vector<LayerParams<T>> params_;
};

using Model = Network<float>;

// Model file: "HSDM", u32 version, u64 config digest, u32 descriptor length,
// descriptor bytes, u32 tensor count, then per tensor u32 element count and
// little-endian f32 values (w then b for each parametrized layer).
inline constexpr char kModelMagic[4] = {'H', 'S', 'D', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

inline std::string encode_model(const Model& m, std::uint64_t config_digest = 0) {
    using hotguard::detail::put_le;
    std::string out(kModelMagic, 4);
    put_le<std::uint32_t>(out, kModelVersion);
    put_le<std::uint64_t>(out, config_digest);
    const auto desc = m.arch().descriptor();
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(desc.size()));
    out += desc;
    std::uint32_t tensors = 0;
    for (const auto& p : m.params())
        if (!p.w.empty()) tensors += 2;
    put_le<std::uint32_t>(out, tensors);
    for (const auto& p : m.params()) {
        if (p.w.empty()) continue;
        for (const auto* t : {&p.w, &p.b}) {
            put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t->size()));
            for (float v : *t) put_le<std::uint32_t>(out, hotguard::detail::f32_bits(v));
        }
    }
    return out;
}

struct LoadedModel {
    Model model;
    std::uint64_t config_digest = 0;
};

inline LoadedModel decode_model(const std::string& bytes) {
    using hotguard::detail::get_le;
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kModelMagic, 4) != 0) throw FormatError("not a model file (bad magic)");
    {
        std::size_t pos = 4;
        if (get_le<std::uint32_t>(bytes, pos) != kModelVersion) throw FormatError("unsupported model file version");
        LoadedModel out;
        out.config_digest = get_le<std::uint64_t>(bytes, pos);
        const auto dlen = get_le<std::uint32_t>(bytes, pos);
        if (pos + dlen > bytes.size()) throw FormatError("truncated model descriptor");
        const std::string desc = bytes.substr(pos, dlen);
        pos += dlen;
        ArchSpec arch;
        if (desc == ArchSpec::A().descriptor())
            arch = ArchSpec::A();
        else if (desc == ArchSpec::B().descriptor())
            arch = ArchSpec::B();
        else
            throw FormatError("unknown architecture descriptor '" + desc + "'");
        out.model = Model(arch);
        const auto tensors = get_le<std::uint32_t>(bytes, pos);
        std::uint32_t expected = 0;
        for (const auto& p : out.model.params())
            if (!p.w.empty()) expected += 2;
        if (tensors != expected) throw FormatError("model tensor count does not match its architecture");
        for (auto& p : out.model.params()) {
            if (p.w.empty()) continue;
            for (auto* t : {&p.w, &p.b}) {
                if (get_le<std::uint32_t>(bytes, pos) != t->size())
                    throw FormatError("model tensor shape does not match its architecture");
                for (auto& v : *t) v = hotguard::detail::bits_f32(get_le<std::uint32_t>(bytes, pos));
            }
        }
        if (pos != bytes.size()) throw FormatError("trailing bytes after model tensors");
        return out;
    }
}

inline void save_model(const Model& m, const std::string& path, std::uint64_t config_digest = 0) {
    hotguard::detail::write_file(path, encode_model(m, config_digest));
}

inline LoadedModel load_model(const std::string& path) { return decode_model(hotguard::detail::read_file(path)); }

}  // namespace hotguard::nn

#pragma once

// Central-difference gradient checks for every layer kernel, in double, with
// step max(1e-5, 1e-3 |w|) per coordinate.
// Each instance draws random shapes and data, forms the scalar loss
// L = sum(out * R) for a random R, and compares analytic against numeric
// gradients for every input, weight and bias coordinate. The reported error of
// an instance is ||analytic - numeric|| / (||analytic|| + ||numeric||).

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "hotguard/nn/layers.hpp"
#include "hotguard/nn/model.hpp"
#include "hotguard/rng.hpp"

namespace gradcheck {

using hotguard::Rng;
using hotguard::nn::Shape;

struct Result {
    std::string layer;
    int instances = 0;
    double worst = 0.0;
};

inline std::vector<double> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = (rng.uniform01() * 2.0 - 1.0) * scale;
    return v;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double step_for(double w) { return std::max(1e-5, 1e-3 * std::abs(w)); }

// Numeric gradient of loss() with respect to every entry of x (perturbed in place).
inline std::vector<double> numeric(std::vector<double>& x, const std::function<double()>& loss) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i], h = step_for(keep);
        x[i] = keep + h;
        const double lp = loss();
        x[i] = keep - h;
        const double lm = loss();
        x[i] = keep;
        g[i] = (lp - lm) / (2 * h);
    }
    return g;
}

inline double rel_error(const std::vector<double>& a, const std::vector<double>& n) {
    double d = 0, na = 0, nn = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += (a[i] - n[i]) * (a[i] - n[i]);
        na += a[i] * a[i];
        nn += n[i] * n[i];
    }
    const double den = std::sqrt(na) + std::sqrt(nn);
    return den == 0.0 ? 0.0 : std::sqrt(d) / den;
}

inline double conv_instance(Rng& rng) {
    const Shape s{static_cast<int>(rng.uniform_int(2, 6)), static_cast<int>(rng.uniform_int(2, 6)),
                  static_cast<int>(rng.uniform_int(1, 4))};
    const int cout = static_cast<int>(rng.uniform_int(1, 4));
    auto in = random_vec(rng, s.size());
    auto w = random_vec(rng, static_cast<std::size_t>(9) * s.c * cout);
    auto b = random_vec(rng, cout);
    const auto r = random_vec(rng, static_cast<std::size_t>(s.h) * s.w * cout);
    std::vector<double> out(r.size());
    auto loss = [&] {
        hotguard::nn::conv3x3_forward(in.data(), s, w.data(), b.data(), cout, out.data());
        return dot(out, r);
    };
    std::vector<double> gin(in.size()), gw(w.size(), 0.0), gb(b.size(), 0.0);
    hotguard::nn::conv3x3_backward(in.data(), s, w.data(), cout, r.data(), gin.data(), gw.data(), gb.data());
    return std::max({rel_error(gin, numeric(in, loss)), rel_error(gw, numeric(w, loss)), rel_error(gb, numeric(b, loss))});
}

inline double pool_instance(Rng& rng) {
    const Shape s{static_cast<int>(rng.uniform_int(2, 7)), static_cast<int>(rng.uniform_int(2, 7)),
                  static_cast<int>(rng.uniform_int(1, 4))};
    auto in = random_vec(rng, s.size());
    const Shape o{s.h / 2, s.w / 2, s.c};
    const auto r = random_vec(rng, o.size());
    std::vector<double> out(o.size());
    std::vector<int> am(o.size());
    auto loss = [&] {
        hotguard::nn::maxpool2_forward(in.data(), s, out.data(), am.data());
        return dot(out, r);
    };
    loss();
    std::vector<double> gin(in.size());
    hotguard::nn::maxpool2_backward(s, r.data(), am.data(), o.size(), gin.data());
    return rel_error(gin, numeric(in, loss));
}

inline double dense_instance(Rng& rng) {
    const int n_in = static_cast<int>(rng.uniform_int(1, 20)), n_out = static_cast<int>(rng.uniform_int(1, 10));
    auto in = random_vec(rng, n_in);
    auto w = random_vec(rng, static_cast<std::size_t>(n_in) * n_out);
    auto b = random_vec(rng, n_out);
    const auto r = random_vec(rng, n_out);
    std::vector<double> out(n_out);
    auto loss = [&] {
        hotguard::nn::dense_forward(in.data(), n_in, w.data(), b.data(), n_out, out.data());
        return dot(out, r);
    };
    std::vector<double> gin(in.size()), gw(w.size(), 0.0), gb(b.size(), 0.0);
    hotguard::nn::dense_backward(in.data(), n_in, w.data(), n_out, r.data(), gin.data(), gw.data(), gb.data());
    return std::max({rel_error(gin, numeric(in, loss)), rel_error(gw, numeric(w, loss)), rel_error(gb, numeric(b, loss))});
}

inline double relu_instance(Rng& rng) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 40));
    auto in = random_vec(rng, n);
    for (auto& v : in)
        if (std::abs(v) < 1e-3) v = 0.5;  // keep clear of the kink
    const auto r = random_vec(rng, n);
    auto loss = [&] {
        auto out = in;
        hotguard::nn::relu_inplace(out.data(), n);
        return dot(out, r);
    };
    auto out = in;
    hotguard::nn::relu_inplace(out.data(), n);
    auto g = r;
    hotguard::nn::relu_backward_inplace(out.data(), g.data(), n);
    return rel_error(g, numeric(in, loss));
}

inline double softmax_ce_instance(Rng& rng) {
    const int n = static_cast<int>(rng.uniform_int(2, 6));
    auto logits = random_vec(rng, n, 3.0);
    const int target = static_cast<int>(rng.uniform_int(0, n - 1));
    const double weight = 1.0 + 21.0 * rng.uniform01();
    std::vector<double> p(n), g(n);
    auto loss = [&] { return hotguard::nn::softmax_ce(logits.data(), n, target, weight, p.data(), static_cast<double*>(nullptr)); };
    hotguard::nn::softmax_ce(logits.data(), n, target, weight, p.data(), g.data());
    return rel_error(g, numeric(logits, loss));
}

// Whole architecture-A network in double: weighted CE loss, 40 random parameter
// coordinates per instance plus all of fc2.
inline double network_instance(Rng& rng) {
    using Net = hotguard::nn::Network<double>;
    Net net(hotguard::nn::ArchSpec::A());
    net.initialize(rng.next());
    for (auto& p : net.params())
        for (auto& b : p.b) b = (rng.uniform01() - 0.5) * 0.1;
    const auto x = random_vec(rng, net.arch().input.size(), 100.0);
    const int target = static_cast<int>(rng.uniform_int(0, 1));
    const double weight = target ? 7.0 : 1.0;
    auto loss = [&] {
        Net::Cache c;
        net.forward(x.data(), c);
        std::array<double, 2> p{};
        return hotguard::nn::softmax_ce(c.logits.data(), 2, target, weight, p.data(), static_cast<double*>(nullptr));
    };
    Net::Cache c;
    net.forward(x.data(), c);
    std::array<double, 2> p{}, gl{};
    hotguard::nn::softmax_ce(c.logits.data(), 2, target, weight, p.data(), gl.data());
    auto grads = net.zero_grads();
    net.backward(c, gl, grads);
    std::vector<double> a, n;
    auto probe = [&](std::vector<double>& param, const std::vector<double>& grad, std::size_t i) {
        const double keep = param[i], h = step_for(keep);
        param[i] = keep + h;
        const double lp = loss();
        param[i] = keep - h;
        const double lm = loss();
        param[i] = keep;
        a.push_back(grad[i]);
        n.push_back((lp - lm) / (2 * h));
    };
    auto& ps = net.params();
    for (int k = 0; k < 40; ++k) {
        std::size_t li;
        do li = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(ps.size()) - 1));
        while (ps[li].w.empty());
        const bool bias = rng.bernoulli(0.3);
        auto& vec = bias ? ps[li].b : ps[li].w;
        const auto& g = bias ? grads[li].b : grads[li].w;
        probe(vec, g, static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(vec.size()) - 1)));
    }
    for (std::size_t i = 0; i < ps.back().w.size(); ++i) probe(ps.back().w, grads.back().w, i);
    return rel_error(a, n);
}

inline std::vector<Result> run_all(std::uint64_t seed, int instances, int network_instances) {
    const std::vector<std::pair<std::string, std::function<double(Rng&)>>> kinds = {
        {"conv3x3", conv_instance}, {"maxpool2", pool_instance}, {"dense", dense_instance},
        {"relu", relu_instance},    {"softmax_ce", softmax_ce_instance}, {"network_A", network_instance}};
    std::vector<Result> out;
    for (const auto& [name, fn] : kinds) {
        Rng rng(hotguard::derive_seed(seed, name));
        Result r{name, 0, 0.0};
        const int count = name == "network_A" ? network_instances : instances;
        for (int i = 0; i < count; ++i) {
            r.worst = std::max(r.worst, fn(rng));
            ++r.instances;
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace gradcheck

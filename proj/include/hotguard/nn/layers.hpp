#pragma once

// Single-sample layer kernels in HWC layout. Conv weights are [kh][kw][cin][cout],
// dense weights are [in][out]. Backward kernels accumulate (+=) into parameter
// gradients and overwrite input gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace hotguard::nn {

struct Shape {
    int h = 0, w = 0, c = 0;
    std::size_t size() const { return static_cast<std::size_t>(h) * w * c; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

/// 3x3, stride 1, zero "same" padding.
template <typename T>
void conv3x3_forward(const T* in, Shape s, const T* w, const T* b, int cout, T* out) {
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
            T* o = out + (static_cast<std::size_t>(y) * s.w + x) * cout;
            for (int co = 0; co < cout; ++co) o[co] = b[co];
            for (int dy = 0; dy < 3; ++dy) {
                const int iy = y + dy - 1;
                if (iy < 0 || iy >= s.h) continue;
                for (int dx = 0; dx < 3; ++dx) {
                    const int ix = x + dx - 1;
                    if (ix < 0 || ix >= s.w) continue;
                    const T* src = in + (static_cast<std::size_t>(iy) * s.w + ix) * s.c;
                    const T* wk = w + static_cast<std::size_t>(dy * 3 + dx) * s.c * cout;
                    for (int ci = 0; ci < s.c; ++ci) {
                        const T v = src[ci];
                        if (v == T(0)) continue;
                        const T* wr = wk + static_cast<std::size_t>(ci) * cout;
                        for (int co = 0; co < cout; ++co) o[co] += v * wr[co];
                    }
                }
            }
        }
}

/// gin may be null when the input gradient is not needed (first layer).
template <typename T>
void conv3x3_backward(const T* in, Shape s, const T* w, int cout, const T* gout, T* gin, T* gw, T* gb) {
    if (gin) std::fill(gin, gin + s.size(), T(0));
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
            const T* g = gout + (static_cast<std::size_t>(y) * s.w + x) * cout;
            bool any = false;
            for (int co = 0; co < cout; ++co) {
                gb[co] += g[co];
                any |= g[co] != T(0);
            }
            if (!any) continue;
            for (int dy = 0; dy < 3; ++dy) {
                const int iy = y + dy - 1;
                if (iy < 0 || iy >= s.h) continue;
                for (int dx = 0; dx < 3; ++dx) {
                    const int ix = x + dx - 1;
                    if (ix < 0 || ix >= s.w) continue;
                    const std::size_t off = (static_cast<std::size_t>(iy) * s.w + ix) * s.c;
                    const T* src = in + off;
                    const std::size_t wo = static_cast<std::size_t>(dy * 3 + dx) * s.c * cout;
                    for (int ci = 0; ci < s.c; ++ci) {
                        const T* wr = w + wo + static_cast<std::size_t>(ci) * cout;
                        T* gwr = gw + wo + static_cast<std::size_t>(ci) * cout;
                        const T v = src[ci];
                        T acc = T(0);
                        for (int co = 0; co < cout; ++co) {
                            gwr[co] += v * g[co];
                            acc += wr[co] * g[co];
                        }
                        if (gin) gin[off + ci] += acc;
                    }
                }
            }
        }
}

/// 2x2 max pooling, stride 2, floor mode. argmax receives the flat input index per output.
template <typename T>
Shape maxpool2_forward(const T* in, Shape s, T* out, int* argmax) {
    const Shape o{s.h / 2, s.w / 2, s.c};
    for (int y = 0; y < o.h; ++y)
        for (int x = 0; x < o.w; ++x)
            for (int c = 0; c < s.c; ++c) {
                int best = -1;
                T bv{};
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const int idx = ((2 * y + dy) * s.w + (2 * x + dx)) * s.c + c;
                        if (best < 0 || in[idx] > bv) {
                            best = idx;
                            bv = in[idx];
                        }
                    }
                const std::size_t oi = (static_cast<std::size_t>(y) * o.w + x) * o.c + c;
                out[oi] = bv;
                argmax[oi] = best;
            }
    return o;
}

template <typename T>
void maxpool2_backward(Shape in_shape, const T* gout, const int* argmax, std::size_t out_size, T* gin) {
    std::fill(gin, gin + in_shape.size(), T(0));
    for (std::size_t i = 0; i < out_size; ++i) gin[argmax[i]] += gout[i];
}

template <typename T>
void dense_forward(const T* in, int n_in, const T* w, const T* b, int n_out, T* out) {
    std::copy(b, b + n_out, out);
    for (int i = 0; i < n_in; ++i) {
        const T v = in[i];
        if (v == T(0)) continue;
        const T* wr = w + static_cast<std::size_t>(i) * n_out;
        for (int o = 0; o < n_out; ++o) out[o] += v * wr[o];
    }
}

template <typename T>
void dense_backward(const T* in, int n_in, const T* w, int n_out, const T* gout, T* gin, T* gw, T* gb) {
    for (int o = 0; o < n_out; ++o) gb[o] += gout[o];
    for (int i = 0; i < n_in; ++i) {
        const T* wr = w + static_cast<std::size_t>(i) * n_out;
        T* gwr = gw + static_cast<std::size_t>(i) * n_out;
        const T v = in[i];
        T acc = T(0);
        for (int o = 0; o < n_out; ++o) {
            gwr[o] += v * gout[o];
            acc += wr[o] * gout[o];
        }
        if (gin) gin[i] = acc;
    }
}

template <typename T>
void relu_inplace(T* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > T(0) ? x[i] : T(0);
}

/// Gradient through ReLU given its output.
template <typename T>
void relu_backward_inplace(const T* out, T* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!(out[i] > T(0))) g[i] = T(0);
}

template <typename T>
void softmax(const T* logits, T* p, int n) {
    T m = logits[0];
    for (int i = 1; i < n; ++i) m = std::max(m, logits[i]);
    T sum = T(0);
    for (int i = 0; i < n; ++i) sum += (p[i] = std::exp(logits[i] - m));
    for (int i = 0; i < n; ++i) p[i] /= sum;
}

/// Weighted cross-entropy of a softmax output; writes d(loss)/d(logits) = weight (p - onehot).
template <typename T>
T softmax_ce(const T* logits, int n, int target, T weight, T* p, T* glogits) {
    softmax(logits, p, n);
    T m = logits[0];
    for (int i = 1; i < n; ++i) m = std::max(m, logits[i]);
    T sum = T(0);
    for (int i = 0; i < n; ++i) sum += std::exp(logits[i] - m);
    const T loss = weight * (std::log(sum) + m - logits[target]);
    if (glogits)
        for (int i = 0; i < n; ++i) glogits[i] = weight * (p[i] - (i == target ? T(1) : T(0)));
    return loss;
}

}  // namespace hotguard::nn

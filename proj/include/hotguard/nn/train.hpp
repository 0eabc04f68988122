#pragma once

// Training recipe: weighted 2-class cross-entropy, Adam, reduce-on-plateau,
// early stopping, per-epoch checkpoints, and checkpoint selection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "hotguard/error.hpp"
#include "hotguard/features.hpp"
#include "hotguard/manifest.hpp"
#include "hotguard/nn/model.hpp"
#include "hotguard/parallel.hpp"
#include "hotguard/rng.hpp"

namespace hotguard::nn {

struct TrainConfig {
    int batch_size = 64;
    double lr = 1e-3;
    double min_lr = 1e-5;
    double lr_reduce_factor = 0.3;
    int lr_patience = 3;
    int early_stop_patience = 10;
    int max_epochs = 20;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
    std::optional<double> class_weight;  // default: clamp(round(N_nhs / N_hs), 2, 22)
    double validation_fraction = 0.10;
    std::uint64_t seed = 0;

    void validate() const {
        if (batch_size <= 0) throw ConfigError("batch_size must be positive");
        if (!(lr > 0) || !(min_lr > 0) || min_lr > lr) throw ConfigError("need 0 < min_lr <= lr");
        if (!(lr_reduce_factor > 0 && lr_reduce_factor < 1)) throw ConfigError("lr_reduce_factor must lie in (0, 1)");
        if (lr_patience <= 0 || early_stop_patience <= 0 || max_epochs <= 0) throw ConfigError("patience and max_epochs must be positive");
        if (class_weight && !(*class_weight > 0)) throw ConfigError("class_weight must be positive");
        if (!(validation_fraction > 0 && validation_fraction < 1)) throw ConfigError("validation_fraction must lie in (0, 1)");
    }
};

inline double default_class_weight(std::size_t n_nonhotspot, std::size_t n_hotspot) {
    if (n_hotspot == 0) return 22.0;
    return std::clamp(std::round(static_cast<double>(n_nonhotspot) / static_cast<double>(n_hotspot)), 2.0, 22.0);
}

/// Learning-rate reduction on validation-loss plateau plus early stopping.
/// An epoch "improves" when its loss is strictly below the best seen so far.
class PlateauSchedule {
public:
    struct Decision {
        double next_lr;
        bool stop;
    };

    explicit PlateauSchedule(const TrainConfig& cfg) : cfg_(cfg), lr_(cfg.lr) {}

    double lr() const { return lr_; }
    int reductions() const { return reductions_; }
    int epochs_seen() const { return epochs_; }

    Decision update(double val_loss) {
        ++epochs_;
        if (val_loss < best_) {
            best_ = val_loss;
            plateau_wait_ = 0;
            stop_wait_ = 0;
        } else {
            ++plateau_wait_;
            ++stop_wait_;
            if (plateau_wait_ >= cfg_.lr_patience) {
                plateau_wait_ = 0;
                if (lr_ > cfg_.min_lr) {
                    ++reductions_;
                    lr_ = std::max(cfg_.lr * std::pow(cfg_.lr_reduce_factor, reductions_), cfg_.min_lr);
                }
            }
        }
        return {lr_, stop_wait_ >= cfg_.early_stop_patience || epochs_ >= cfg_.max_epochs};
    }

private:
    TrainConfig cfg_;
    double lr_;
    double best_ = INFINITY;
    int plateau_wait_ = 0;
    int stop_wait_ = 0;
    int reductions_ = 0;
    int epochs_ = 0;
};

template <typename T>
class Adam {
public:
    Adam(const Network<T>& net, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : b1_(beta1), b2_(beta2), eps_(eps), m_(net.zero_grads()), v_(net.zero_grads()) {}

    /// grads already hold d(loss)/d(param) for the mean batch loss.
    void step(Network<T>& net, const std::vector<LayerParams<T>>& grads, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, t_);
        const double c2 = 1.0 - std::pow(b2_, t_);
        auto upd = [&](std::vector<T>& w, const std::vector<T>& g, std::vector<T>& m, std::vector<T>& v) {
            for (std::size_t i = 0; i < w.size(); ++i) {
                m[i] = static_cast<T>(b1_ * m[i] + (1.0 - b1_) * g[i]);
                v[i] = static_cast<T>(b2_ * v[i] + (1.0 - b2_) * static_cast<double>(g[i]) * g[i]);
                const double mh = m[i] / c1;
                const double vh = v[i] / c2;
                w[i] = static_cast<T>(w[i] - lr * mh / (std::sqrt(vh) + eps_));
            }
        };
        auto& p = net.params();
        for (std::size_t k = 0; k < p.size(); ++k) {
            upd(p[k].w, grads[k].w, m_[k].w, v_[k].w);
            upd(p[k].b, grads[k].b, m_[k].b, v_[k].b);
        }
    }

    long steps() const { return t_; }

private:
    double b1_, b2_, eps_;
    std::vector<LayerParams<T>> m_, v_;
    long t_ = 0;
};

struct Checkpoint {
    int epoch = 0;
    std::vector<LayerParams<float>> params;
    double lr = 0;
    double train_loss = 0, val_loss = 0;
    double val_acc_nonhotspot = 0, val_acc_hotspot = 0, val_acc = 0;
};

struct TrainResult {
    std::vector<Checkpoint> checkpoints;
    double class_weight = 1.0;
    std::size_t train_size = 0, val_size = 0;
};

/// Stratified split: returns (train indices, validation indices), each sorted.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(const std::vector<Label>& y,
                                                                                       double fraction,
                                                                                       std::uint64_t seed) {
    std::vector<std::size_t> tr, va;
    for (Label cls : {Label::NonHotspot, Label::Hotspot}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (y[i] == cls) idx.push_back(i);
        Rng rng(derive_seed(seed, cls == Label::Hotspot ? "split/hs" : "split/nhs"));
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_int(0, static_cast<std::int64_t>(i - 1))]);
        const auto n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(idx.size())));
        va.insert(va.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
        tr.insert(tr.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
    }
    std::sort(tr.begin(), tr.end());
    std::sort(va.begin(), va.end());
    return {tr, va};
}

inline int label_index(Label l) { return l == Label::Hotspot ? 1 : 0; }

/// Argmax with ties resolved toward Hotspot.
template <typename T>
Label decide(const std::array<T, 2>& probs) {
    return probs[1] >= probs[0] ? Label::Hotspot : Label::NonHotspot;
}

namespace detail {

struct EvalStats {
    double loss = 0;
    std::size_t n[2] = {0, 0}, correct[2] = {0, 0};
};

inline EvalStats evaluate_indices(const Model& net, const std::vector<FeatureTensor>& x, const std::vector<Label>& y,
                                  const std::vector<std::size_t>& idx) {
    EvalStats s;
    Model::Cache c;
    for (std::size_t i : idx) {
        net.forward(x[i].values.data(), c);
        const int t = label_index(y[i]);
        s.loss += -std::log(std::max(static_cast<double>(c.probs[t]), 1e-30));
        ++s.n[t];
        if (decide(c.probs) == y[i]) ++s.correct[t];
    }
    if (!idx.empty()) s.loss /= static_cast<double>(idx.size());
    return s;
}

}  // namespace detail

/// Fixed sub-batch size for gradient accumulation; sums are combined in a fixed
/// order so results do not depend on `jobs`.
inline constexpr int kGradChunk = 16;

inline TrainResult train(const ArchSpec& arch, const std::vector<FeatureTensor>& x, const std::vector<Label>& y,
                         const TrainConfig& cfg, unsigned jobs = 1) {
    cfg.validate();
    if (x.size() != y.size()) throw TrainingSetupError("feature and label counts differ");
    std::size_t n_hs = 0;
    for (Label l : y) n_hs += l == Label::Hotspot;
    if (x.empty() || n_hs == 0 || n_hs == y.size()) throw TrainingSetupError("training data must contain both classes");

    TrainResult res;
    res.class_weight = cfg.class_weight ? *cfg.class_weight : default_class_weight(y.size() - n_hs, n_hs);
    auto [tr, va] = stratified_split(y, cfg.validation_fraction, cfg.seed);
    res.train_size = tr.size();
    res.val_size = va.size();
    bool tr_hs = false, tr_nhs = false;
    for (std::size_t i : tr) (y[i] == Label::Hotspot ? tr_hs : tr_nhs) = true;
    if (!tr_hs || !tr_nhs) throw TrainingSetupError("training split lost a class");

    Model net(arch);
    net.initialize(derive_seed(cfg.seed, "init"));
    Adam<float> opt(net, cfg.beta1, cfg.beta2, cfg.epsilon);
    PlateauSchedule sched(cfg);
    const float w_hs = static_cast<float>(res.class_weight);

    for (int epoch = 1;; ++epoch) {
        const double lr = sched.lr();
        std::vector<std::size_t> order = tr;
        Rng rng(derive_seed(cfg.seed, "epoch", static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<std::int64_t>(i - 1))]);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const std::size_t bsz = end - start;
            const std::size_t chunks = (bsz + kGradChunk - 1) / kGradChunk;
            std::vector<std::vector<LayerParams<float>>> cg(chunks);
            std::vector<double> closs(chunks, 0.0);
            parallel_for(chunks, jobs, [&](std::size_t ch) {
                cg[ch] = net.zero_grads();
                Model::Cache c;
                const std::size_t a = start + ch * kGradChunk, b = std::min(end, a + kGradChunk);
                for (std::size_t k = a; k < b; ++k) {
                    const std::size_t i = order[k];
                    net.forward(x[i].values.data(), c);
                    const int t = label_index(y[i]);
                    const float w = t == 1 ? w_hs : 1.0f;
                    std::array<float, 2> p{}, g{};
                    closs[ch] += softmax_ce(c.logits.data(), 2, t, w, p.data(), g.data());
                    net.backward(c, g, cg[ch]);
                }
            });
            auto& grads = cg[0];
            for (std::size_t ch = 1; ch < chunks; ++ch)
                for (std::size_t k = 0; k < grads.size(); ++k) {
                    for (std::size_t j = 0; j < grads[k].w.size(); ++j) grads[k].w[j] += cg[ch][k].w[j];
                    for (std::size_t j = 0; j < grads[k].b.size(); ++j) grads[k].b[j] += cg[ch][k].b[j];
                }
            const float inv = 1.0f / static_cast<float>(bsz);
            for (auto& g : grads) {
                for (auto& v : g.w) v *= inv;
                for (auto& v : g.b) v *= inv;
            }
            for (double l : closs) loss_sum += l;
            opt.step(net, grads, lr);
        }

        const auto vs = detail::evaluate_indices(net, x, y, va);
        Checkpoint cp;
        cp.epoch = epoch;
        cp.params = net.params();
        cp.lr = lr;
        cp.train_loss = loss_sum / static_cast<double>(order.size());
        cp.val_loss = vs.loss;
        cp.val_acc_nonhotspot = vs.n[0] ? static_cast<double>(vs.correct[0]) / vs.n[0] : 0.0;
        cp.val_acc_hotspot = vs.n[1] ? static_cast<double>(vs.correct[1]) / vs.n[1] : 0.0;
        cp.val_acc = va.empty() ? 0.0 : static_cast<double>(vs.correct[0] + vs.correct[1]) / static_cast<double>(va.size());
        res.checkpoints.push_back(std::move(cp));
        // An empty validation split cannot drive the schedule; fall back to training loss.
        if (sched.update(va.empty() ? res.checkpoints.back().train_loss : vs.loss).stop) break;
    }
    return res;
}

struct SelectionCandidate {
    double overall_accuracy;
    double hotspot_recall;
};

struct Selection {
    std::size_t index = 0;
    bool degraded = false;
};

/// Highest overall accuracy among candidates with hotspot recall >= 0.90;
/// otherwise the highest-recall candidate, flagged degraded. Ties keep the earliest.
inline Selection select_model(const std::vector<SelectionCandidate>& c, double min_recall = 0.90) {
    if (c.empty()) throw SelectionError("no candidates to select from");
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < c.size(); ++i)
        if (c[i].hotspot_recall >= min_recall && (!best || c[i].overall_accuracy > c[*best].overall_accuracy)) best = i;
    if (best) return {*best, false};
    std::size_t r = 0;
    for (std::size_t i = 1; i < c.size(); ++i)
        if (c[i].hotspot_recall > c[r].hotspot_recall) r = i;
    return {r, true};
}

inline Selection select_checkpoint(const std::vector<Checkpoint>& cps) {
    std::vector<SelectionCandidate> c;
    for (const auto& cp : cps) c.push_back({cp.val_acc, cp.val_acc_hotspot});
    return select_model(c);
}

inline Model model_from_checkpoint(const ArchSpec& arch, const Checkpoint& cp) {
    Model m(arch);
    m.params() = cp.params;
    return m;
}

inline void write_training_log(const TrainResult& r, const std::string& path, const std::string& config_digest) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "# config_digest=" << config_digest << '\n';
    f << "epoch,lr,train_loss,val_loss,val_acc_nonhotspot,val_acc_hotspot,val_acc\n";
    char buf[256];
    for (const auto& c : r.checkpoints) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.6f,%.6f,%.6f\n", c.epoch, c.lr, c.train_loss, c.val_loss,
                      c.val_acc_nonhotspot, c.val_acc_hotspot, c.val_acc);
        f << buf;
    }
    if (!f) throw IoError("write failed for " + path);
}

}  // namespace hotguard::nn

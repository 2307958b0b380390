#include "vlmd/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vlmd {

double TokenWeights::delete_mass(std::span<const TokenId> targets, TokenId delete_id) const {
    double mass = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (targets[i] == delete_id) {
            mass += weights[i];
        }
    }
    return mass;
}

TokenWeights token_weights(std::span<const TokenId> targets, const NoisySequence& zt, const WeightPolicy& policy,
                           const Vocabulary& vocab) {
    if (targets.size() != zt.tokens.size()) {
        throw std::invalid_argument("token_weights: z0 and z_t are not aligned");
    }
    TokenWeights w;
    w.weights.assign(targets.size(), 0.0);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (zt.tokens[i] == vocab.mask()) {
            ++w.n_mask;
            if (targets[i] == vocab.del()) {
                ++w.n_delete;
            }
        }
    }
    if (w.n_mask == 0) {
        w.empty = true;
        return w;
    }
    double factor = 1.0;
    double delete_weight = 1.0;
    if (policy.mode == WeightMode::Balanced && w.n_delete > 0) {
        const auto nm = static_cast<double>(w.n_mask);
        const auto nd = static_cast<double>(w.n_delete);
        factor = nm / (nm - nd + 1.0);
        delete_weight = factor / nd;
    }
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (zt.tokens[i] == vocab.mask()) {
            w.weights[i] = targets[i] == vocab.del() ? delete_weight : factor;
        }
    }
    return w;
}

LossResult weighted_loss(const LossBatch& batch, const NoiseSchedule& schedule, bool want_grad) {
    LossResult r;
    if (batch.empty()) {
        return r;
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    if (want_grad) {
        r.grad.resize(batch.size());
    }
    for (std::size_t e = 0; e < batch.size(); ++e) {
        const auto& ex = batch[e];
        const std::size_t n = ex.length();
        const std::size_t v = ex.vocab_size;
        if (ex.logits.size() != n * v || ex.mask_flags.size() != n || ex.weights.size() != n || v == 0) {
            throw std::invalid_argument("weighted_loss: logits, targets, mask flags and weights disagree in length");
        }
        if (!std::all_of(ex.logits.begin(), ex.logits.end(), [](double x) { return std::isfinite(x); })) {
            throw std::domain_error("weighted_loss: non-finite logit");
        }
        const double wt = schedule.weight(ex.time);
        if (want_grad) {
            r.grad[e].assign(n * v, 0.0);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const bool masked = ex.mask_flags[i] != 0;
            if (masked ? !(ex.weights[i] > 0.0) : ex.weights[i] != 0.0) {
                throw std::invalid_argument("weighted_loss: weights must be positive exactly at masked positions");
            }
            if (!masked) {
                continue;
            }
            const double* row = ex.logits.data() + i * v;
            const double mx = *std::max_element(row, row + v);
            double z = 0.0;
            for (std::size_t k = 0; k < v; ++k) {
                z += std::exp(row[k] - mx);
            }
            const auto target = static_cast<std::size_t>(ex.targets[i]);
            if (target >= v) {
                throw std::invalid_argument("weighted_loss: target id outside the vocabulary");
            }
            const double log_z = mx + std::log(z);
            const double scale = wt * ex.weights[i] * inv_b;
            r.loss -= scale * (row[target] - log_z);
            if (want_grad) {
                double* g = r.grad[e].data() + i * v;
                for (std::size_t k = 0; k < v; ++k) {
                    g[k] = scale * std::exp(row[k] - log_z);
                }
                g[target] -= scale;
            }
        }
    }
    return r;
}

}  // namespace vlmd

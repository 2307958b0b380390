#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vlmd/noise.hpp"

namespace vlmd {

enum class WeightMode {
    Balanced,  // delete targets share the weight of a single regular prediction
    Uniform,   // every masked target weighs 1
};

struct WeightPolicy {
    WeightMode mode = WeightMode::Balanced;
};

struct TokenWeights {
    std::vector<double> weights;  // one per position, zero where unmasked
    std::size_t n_mask = 0;
    std::size_t n_delete = 0;
    bool empty = false;  // no masked position: nothing to learn from this example

    double delete_mass(std::span<const TokenId> targets, TokenId delete_id) const;
};

/// Per-token weights over an aligned (z0, z_t) pair.
///
/// Balanced: factor = N_mask / (N_mask - N_delete + 1); masked non-delete
/// targets get `factor`, masked delete targets `factor / N_delete`. With no
/// delete target every masked weight is 1, which keeps the plain objective.
TokenWeights token_weights(std::span<const TokenId> targets, const NoisySequence& zt, const WeightPolicy& policy,
                           const Vocabulary& vocab);

struct LossExample {
    std::size_t vocab_size = 0;
    std::vector<double> logits;  // row-major, positions x vocab_size
    Tokens targets;
    std::vector<char> mask_flags;
    double time = 1.0;
    std::vector<double> weights;

    std::size_t length() const { return targets.size(); }
};

using LossBatch = std::vector<LossExample>;

struct LossResult {
    double loss = 0.0;
    // d loss / d logits, same layout as each example's logits. Rows of
    // unmasked positions are exactly zero.
    std::vector<std::vector<double>> grad;
};

/// Batch mean of  -w(t) * sum_n mask_n * w_n * log softmax(logits_n)[target_n].
/// Throws std::invalid_argument on shape/weight violations and
/// std::domain_error on non-finite logits.
LossResult weighted_loss(const LossBatch& batch, const NoiseSchedule& schedule, bool want_grad = true);

}  // namespace vlmd

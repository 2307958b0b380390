#include "vlmd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vlmd {

double learning_rate(const OptimizerConfig& cfg, int step) {
    const int total = std::max(1, cfg.steps);
    const int warmup = static_cast<int>(std::floor(cfg.warmup_frac * total));
    if (step < warmup) {
        return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
    }
    const double span = std::max(1, total - warmup);
    const double progress = std::clamp(static_cast<double>(step - warmup) / span, 0.0, 1.0);
    const double floor = cfg.min_lr_frac * cfg.lr;
    return floor + (cfg.lr - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename S>
double loss_and_grad(const Transformer<S>& net, const std::vector<TrainingSample>& batch, const WeightPolicy& policy,
                     const NoiseSchedule& schedule, const Vocabulary& vocab, std::vector<S>* grads, StepLog* stats) {
    using Mat = typename Transformer<S>::Mat;
    if (grads) {
        grads->assign(net.params().size(), S(0));
    }
    const double inv_b = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
    typename Transformer<S>::Cache cache;
    double total = 0.0;
    for (const auto& sample : batch) {
        const auto& targets = sample.z0.tokens;
        const TokenWeights w = token_weights(targets, sample.zt, policy, vocab);
        if (stats) {
            stats->masked_tokens += w.n_mask;
            stats->delete_weight_mass += w.delete_mass(targets, vocab.del()) * inv_b;
        }
        if (w.empty) {
            continue;
        }
        net.forward(sample.zt.tokens, cache);
        const auto n = static_cast<std::size_t>(cache.logits.rows());
        const auto v = static_cast<std::size_t>(cache.logits.cols());
        LossBatch one(1);
        auto& ex = one[0];
        ex.vocab_size = v;
        ex.logits.assign(cache.logits.data(), cache.logits.data() + n * v);
        ex.targets = targets;
        ex.mask_flags.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            ex.mask_flags[i] = sample.zt.tokens[i] == vocab.mask();
        }
        ex.time = sample.zt.time;
        ex.weights = w.weights;
        const LossResult r = weighted_loss(one, schedule, grads != nullptr);
        total += r.loss * inv_b;
        if (grads) {
            Mat dlogits(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(v));
            for (std::size_t k = 0; k < n * v; ++k) {
                dlogits.data()[k] = static_cast<S>(r.grad[0][k] * inv_b);
            }
            net.backward(cache, dlogits, *grads);
        }
    }
    return total;
}

template double loss_and_grad<float>(const Transformer<float>&, const std::vector<TrainingSample>&,
                                     const WeightPolicy&, const NoiseSchedule&, const Vocabulary&,
                                     std::vector<float>*, StepLog*);
template double loss_and_grad<double>(const Transformer<double>&, const std::vector<TrainingSample>&,
                                      const WeightPolicy&, const NoiseSchedule&, const Vocabulary&,
                                      std::vector<double>*, StepLog*);

void Adam::step(std::vector<float>& params, const std::vector<float>& grads, const OptimizerConfig& cfg, double lr) {
    ++t_;
    const double b1 = cfg.beta1;
    const double b2 = cfg.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const auto step = static_cast<float>(lr / c1);
    const auto inv_c2 = static_cast<float>(1.0 / c2);
    const auto fb1 = static_cast<float>(b1);
    const auto fb2 = static_cast<float>(b2);
    const auto eps = static_cast<float>(cfg.eps);
    const auto decay = static_cast<float>(lr * cfg.weight_decay);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const float g = grads[i];
        m_[i] = fb1 * m_[i] + (1.0f - fb1) * g;
        v_[i] = fb2 * v_[i] + (1.0f - fb2) * g * g;
        params[i] -= step * m_[i] / (std::sqrt(v_[i] * inv_c2) + eps) + decay * params[i];
    }
}

TrainResult train(Transformer<float>& net, const ExampleSampler& sampler, const TrainSetup& setup,
                  const Vocabulary& vocab, const std::function<void(const StepLog&)>& on_step) {
    const auto& opt = setup.optimizer;
    if (opt.steps < 0 || opt.batch_size < 1) {
        throw std::invalid_argument("train: steps must be >= 0 and batch_size >= 1");
    }
    if (net.config().vocab_size != vocab.size()) {
        throw std::invalid_argument("train: model vocabulary size does not match the vocabulary");
    }
    TrainResult result;
    Adam adam(net.params().size());
    std::vector<float> grads;
    std::vector<TrainingSample> batch;
    for (int step = 0; step < opt.steps; ++step) {
        batch.clear();
        for (int b = 0; b < opt.batch_size; ++b) {
            Rng rng(derive_seed(opt.seed, {static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(b)}));
            const InfillExample ex = sampler(rng);
            batch.push_back(make_training_sample(ex, setup.augment, setup.schedule, vocab, rng));
        }
        StepLog log;
        log.step = step;
        log.lr = learning_rate(opt, step);
        log.loss = loss_and_grad(net, batch, setup.policy, setup.schedule, vocab, &grads, &log);

        double sq = 0.0;
        for (float g : grads) {
            sq += static_cast<double>(g) * g;
        }
        log.grad_norm = std::sqrt(sq);
        if (!std::isfinite(log.loss) || !std::isfinite(log.grad_norm)) {
            throw TrainingDiverged("train: non-finite loss or gradient at step " + std::to_string(step) +
                                       " (loss=" + std::to_string(log.loss) + ", lr=" + std::to_string(log.lr) + ")",
                                   log);
        }
        if (opt.grad_clip > 0.0 && log.grad_norm > opt.grad_clip) {
            const auto s = static_cast<float>(opt.grad_clip / log.grad_norm);
            for (auto& g : grads) {
                g *= s;
            }
        }
        adam.step(net.params(), grads, opt, log.lr);
        result.log.push_back(log);
        if (on_step) {
            on_step(log);
        }
    }
    return result;
}

}  // namespace vlmd

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vlmd/loss.hpp"
#include "vlmd/noise.hpp"
#include "vlmd/transformer.hpp"

namespace vlmd {

struct OptimizerConfig {
    int steps = 1000;
    int batch_size = 16;
    double lr = 3e-4;
    double warmup_frac = 0.1;
    double min_lr_frac = 0.0;  // cosine floor as a fraction of lr
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    double grad_clip = 1.0;
    std::uint64_t seed = 1;
};

/// Linear warmup over warmup_frac of the steps, then cosine decay.
double learning_rate(const OptimizerConfig& cfg, int step);

struct StepLog {
    int step = 0;
    double loss = 0.0;
    double lr = 0.0;
    double grad_norm = 0.0;
    std::size_t masked_tokens = 0;
    double delete_weight_mass = 0.0;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, StepLog last) : std::runtime_error(what), last_(last) {}
    const StepLog& last() const { return last_; }

private:
    StepLog last_;
};

/// Draws one split training example; the trainer passes a per-example stream.
using ExampleSampler = std::function<InfillExample(Rng&)>;

struct TrainSetup {
    AugmentConfig augment;
    NoiseSchedule schedule;
    WeightPolicy policy;
    OptimizerConfig optimizer;
};

struct TrainResult {
    std::vector<StepLog> log;
};

/// Loss and parameter gradient for a fixed set of training samples.
template <typename S>
double loss_and_grad(const Transformer<S>& net, const std::vector<TrainingSample>& batch, const WeightPolicy& policy,
                     const NoiseSchedule& schedule, const Vocabulary& vocab, std::vector<S>* grads,
                     StepLog* stats = nullptr);

/// Adam state over the flat parameter vector.
class Adam {
public:
    explicit Adam(std::size_t n) : m_(n, 0.0f), v_(n, 0.0f) {}
    void step(std::vector<float>& params, const std::vector<float>& grads, const OptimizerConfig& cfg, double lr);

private:
    std::vector<float> m_;
    std::vector<float> v_;
    long t_ = 0;
};

/// Sample x0 and t, augment to z0, corrupt to z_t, take the weighted loss,
/// update. Throws TrainingDiverged on a non-finite loss or gradient.
TrainResult train(Transformer<float>& net, const ExampleSampler& sampler, const TrainSetup& setup,
                  const Vocabulary& vocab, const std::function<void(const StepLog&)>& on_step = {});

}  // namespace vlmd

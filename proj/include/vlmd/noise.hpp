#pragma once

#include <cstddef>
#include <vector>

#include "vlmd/rng.hpp"
#include "vlmd/sequence.hpp"

namespace vlmd {

/// Linear masking schedule: alpha(t) = 1 - t, loss weight w(t) = 1 / max(t, t_floor).
struct NoiseSchedule {
    double t_floor = 1e-3;

    double alpha(double t) const;
    double mask_probability(double t) const { return 1.0 - alpha(t); }
    double weight(double t) const;
};

enum class MergeKind { Static, DynamicInverse, Mixture };

struct MergeScheduler {
    MergeKind kind = MergeKind::Mixture;
    double p_merge = 0.5;
    double inverse_scale = 4.0;
    // Relative weights of the static and dynamic-inverse branches for Mixture.
    double static_weight = 1.0;
    double dynamic_weight = 1.0;
};

struct AugmentConfig {
    MergeScheduler scheduler;
    int delete_max = 64;
    int merge_pass_cap = 4;
    bool interleave_deletes = false;
};

/// M_t: x0 positions that gate merging. Sorted, unique.
struct PseudoMask {
    std::vector<std::size_t> indices;
    double time = 0.0;
};

PseudoMask sample_pseudo_mask(const CleanSequence& x0, double t, const NoiseSchedule& schedule, Rng& rng);

/// Static: p_merge. Dynamic-inverse: min(1, inverse_scale / max(1, n)).
/// Mixture: one branch drawn per call with the configured weights.
double merge_probability(const MergeScheduler& scheduler, std::size_t n_pseudo_masked, Rng& rng);

/// Pair-merges adjacent units inside each maximal run of pseudo-masked
/// indices. Each pass walks the run left to right and fuses the current
/// unit with its right neighbour with probability `p_merge`; passes repeat up
/// to `pass_cap` times or until the run is a single unit. Units covering more
/// than one x0 token become [expand].
AugmentedSequence merge_spans(const CleanSequence& x0, const PseudoMask& mask, double p_merge, int pass_cap,
                              const Vocabulary& vocab, Rng& rng);

/// Same, with the merge probability drawn from the configured scheduler.
AugmentedSequence merge_spans(const CleanSequence& x0, const PseudoMask& mask, const AugmentConfig& cfg,
                              const Vocabulary& vocab, Rng& rng);

/// Appends k ~ Uniform{0..delete_max} [delete] tokens at the end of z.active
/// (or scatters them inside the region when cfg.interleave_deletes is set).
AugmentedSequence insert_deletes(const AugmentedSequence& z, const AugmentConfig& cfg, const Vocabulary& vocab,
                                 Rng& rng);

/// Inserts exactly `count` deletes; the random variant above draws `count`.
AugmentedSequence insert_deletes(const AugmentedSequence& z, int count, bool interleave, const Vocabulary& vocab,
                                 Rng& rng);

/// Absorbing corruption restricted to z0.active: sentinels always become
/// [mask], regular tokens with probability 1 - alpha(t). Draws exactly one
/// uniform per active position so that calls sharing an Rng state are
/// monotonically coupled in t.
NoisySequence corrupt(const AugmentedSequence& z0, double t, const NoiseSchedule& schedule, const Vocabulary& vocab,
                      Rng& rng);

/// Places an augmented middle between the example's context.
AugmentedSequence with_context(const InfillExample& example, const AugmentedSequence& middle);

/// One training draw for a split example: a single t drives both the pseudo
/// mask and the corruption.
struct TrainingSample {
    AugmentedSequence z0;
    NoisySequence zt;
};

TrainingSample make_training_sample(const InfillExample& example, const AugmentConfig& cfg,
                                    const NoiseSchedule& schedule, const Vocabulary& vocab, Rng& rng);

/// Same with an externally supplied time.
TrainingSample make_training_sample(const InfillExample& example, double t, const AugmentConfig& cfg,
                                    const NoiseSchedule& schedule, const Vocabulary& vocab, Rng& rng);

}  // namespace vlmd

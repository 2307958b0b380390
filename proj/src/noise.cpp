#include "vlmd/noise.hpp"

#include <algorithm>
#include <stdexcept>

namespace vlmd {

double NoiseSchedule::alpha(double t) const {
    return 1.0 - std::clamp(t, 0.0, 1.0);
}

double NoiseSchedule::weight(double t) const {
    return 1.0 / std::max(t, t_floor);
}

PseudoMask sample_pseudo_mask(const CleanSequence& x0, double t, const NoiseSchedule& schedule, Rng& rng) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::invalid_argument("sample_pseudo_mask: t must lie in [0, 1]");
    }
    PseudoMask m;
    m.time = t;
    const double p = schedule.mask_probability(t);
    for (std::size_t i = 0; i < x0.size(); ++i) {
        if (rng.uniform() < p) {
            m.indices.push_back(i);
        }
    }
    return m;
}

double merge_probability(const MergeScheduler& s, std::size_t n_pseudo_masked, Rng& rng) {
    auto static_p = [&] { return std::clamp(s.p_merge, 0.0, 1.0); };
    auto dynamic_p = [&] {
        const double n = static_cast<double>(std::max<std::size_t>(1, n_pseudo_masked));
        return std::clamp(s.inverse_scale / n, 0.0, 1.0);
    };
    switch (s.kind) {
        case MergeKind::Static:
            return static_p();
        case MergeKind::DynamicInverse:
            return dynamic_p();
        case MergeKind::Mixture: {
            const double total = s.static_weight + s.dynamic_weight;
            const double p_static = total > 0.0 ? s.static_weight / total : 0.5;
            return rng.bernoulli(p_static) ? static_p() : dynamic_p();
        }
    }
    return 0.0;
}

AugmentedSequence merge_spans(const CleanSequence& x0, const PseudoMask& mask, double p_merge, int pass_cap,
                              const Vocabulary& vocab, Rng& rng) {
    const std::size_t n = x0.size();
    std::vector<char> gated(n, 0);
    for (auto i : mask.indices) {
        if (i >= n) {
            throw std::invalid_argument("merge_spans: pseudo-mask index out of range");
        }
        gated[i] = 1;
    }

    AugmentedSequence z;
    z.tokens.reserve(n);
    z.span_map.reserve(n);
    auto emit = [&](Span s) {
        z.tokens.push_back(s.size() == 1 ? x0.tokens[s.begin] : vocab.expand());
        z.span_map.push_back(s);
    };

    std::vector<Span> units;
    std::vector<Span> next;
    std::size_t i = 0;
    while (i < n) {
        if (!gated[i]) {
            emit({i, i + 1});
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && gated[j]) {
            ++j;
        }
        units.clear();
        for (std::size_t k = i; k < j; ++k) {
            units.push_back({k, k + 1});
        }
        for (int pass = 0; pass < pass_cap && units.size() > 1; ++pass) {
            next.clear();
            std::size_t u = 0;
            while (u < units.size()) {
                if (u + 1 < units.size() && rng.bernoulli(p_merge)) {
                    next.push_back({units[u].begin, units[u + 1].end});
                    u += 2;
                } else {
                    next.push_back(units[u]);
                    u += 1;
                }
            }
            units.swap(next);
        }
        for (const auto& s : units) {
            emit(s);
        }
        i = j;
    }
    z.active = {0, z.tokens.size()};
    return z;
}

AugmentedSequence merge_spans(const CleanSequence& x0, const PseudoMask& mask, const AugmentConfig& cfg,
                              const Vocabulary& vocab, Rng& rng) {
    const double p = merge_probability(cfg.scheduler, mask.indices.size(), rng);
    return merge_spans(x0, mask, p, cfg.merge_pass_cap, vocab, rng);
}

AugmentedSequence insert_deletes(const AugmentedSequence& z, int count, bool interleave, const Vocabulary& vocab,
                                 Rng& rng) {
    if (count < 0) {
        throw std::invalid_argument("insert_deletes: negative count");
    }
    if (z.active.end > z.tokens.size() || z.active.begin > z.active.end ||
        z.span_map.size() != z.active.size()) {
        throw std::invalid_argument("insert_deletes: invalid region bounds");
    }
    AugmentedSequence out = z;
    if (count == 0) {
        return out;
    }
    // x0 boundary at the end of the region, for the empty spans of deletes.
    auto boundary_before = [&](std::size_t local) -> std::size_t {
        if (local == 0) {
            return out.span_map.empty() ? 0 : out.span_map.front().begin;
        }
        return out.span_map[local - 1].end;
    };
    for (int d = 0; d < count; ++d) {
        std::size_t local = out.active.size();
        if (interleave) {
            local = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(out.active.size())));
        }
        const std::size_t b = boundary_before(local);
        out.tokens.insert(out.tokens.begin() + static_cast<std::ptrdiff_t>(out.active.begin + local), vocab.del());
        out.span_map.insert(out.span_map.begin() + static_cast<std::ptrdiff_t>(local), Span{b, b});
        ++out.active.end;
    }
    return out;
}

AugmentedSequence insert_deletes(const AugmentedSequence& z, const AugmentConfig& cfg, const Vocabulary& vocab,
                                 Rng& rng) {
    if (cfg.delete_max < 0) {
        throw std::invalid_argument("insert_deletes: delete_max must be >= 0");
    }
    const int k = cfg.delete_max == 0 ? 0 : static_cast<int>(rng.uniform_int(0, cfg.delete_max));
    return insert_deletes(z, k, cfg.interleave_deletes, vocab, rng);
}

NoisySequence corrupt(const AugmentedSequence& z0, double t, const NoiseSchedule& schedule, const Vocabulary& vocab,
                      Rng& rng) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::invalid_argument("corrupt: t must lie in [0, 1]");
    }
    NoisySequence zt;
    zt.tokens = z0.tokens;
    zt.time = t;
    const double p = schedule.mask_probability(t);
    for (std::size_t i = z0.active.begin; i < z0.active.end; ++i) {
        const double u = rng.uniform();
        const TokenId tok = z0.tokens[i];
        if (tok == vocab.expand() || tok == vocab.del() || u < p) {
            zt.tokens[i] = vocab.mask();
        }
    }
    zt.masked = mask_positions(zt.tokens, vocab.mask());
    return zt;
}

AugmentedSequence with_context(const InfillExample& example, const AugmentedSequence& middle) {
    AugmentedSequence out;
    out.tokens = example.leading_context();
    out.active.begin = out.tokens.size();
    out.tokens.insert(out.tokens.end(), middle.tokens.begin() + static_cast<std::ptrdiff_t>(middle.active.begin),
                      middle.tokens.begin() + static_cast<std::ptrdiff_t>(middle.active.end));
    out.active.end = out.tokens.size();
    out.tokens.insert(out.tokens.end(), example.suffix.tokens.begin(), example.suffix.tokens.end());
    out.span_map = middle.span_map;
    return out;
}

TrainingSample make_training_sample(const InfillExample& example, double t, const AugmentConfig& cfg,
                                    const NoiseSchedule& schedule, const Vocabulary& vocab, Rng& rng) {
    const PseudoMask m = sample_pseudo_mask(example.middle, t, schedule, rng);
    AugmentedSequence middle = merge_spans(example.middle, m, cfg, vocab, rng);
    middle = insert_deletes(middle, cfg, vocab, rng);
    TrainingSample s;
    s.z0 = with_context(example, middle);
    s.zt = corrupt(s.z0, t, schedule, vocab, rng);
    return s;
}

TrainingSample make_training_sample(const InfillExample& example, const AugmentConfig& cfg,
                                    const NoiseSchedule& schedule, const Vocabulary& vocab, Rng& rng) {
    // t in (0, 1]
    const double t = 1.0 - rng.uniform();
    return make_training_sample(example, t, cfg, schedule, vocab, rng);
}

}  // namespace vlmd

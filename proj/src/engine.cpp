#include "vlmd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace vlmd {

namespace {

constexpr std::size_t kMaxExpansionCap = 1u << 30;

bool expand_blocked(const GenerationState& s, const GenerationConfig& cfg) {
    return !cfg.expand_enabled || s.active.size() >= cfg.max_len || s.expansions_done >= cfg.expansion_cap;
}

// Zeroes `id` in the row and renormalizes; returns false when the row is left
// without mass.
bool zero_and_renormalize(std::span<double> row, TokenId id) {
    const auto k = static_cast<std::size_t>(id);
    if (row[k] == 0.0) {
        return true;
    }
    row[k] = 0.0;
    const double total = std::accumulate(row.begin(), row.end(), 0.0);
    if (!(total > 0.0)) {
        return false;
    }
    for (auto& v : row) {
        v /= total;
    }
    return true;
}

std::int64_t termination_measure(const GenerationState& s, const GenerationConfig& cfg, TokenId mask_id) {
    const auto cap = static_cast<std::int64_t>(std::min(cfg.expansion_cap, kMaxExpansionCap));
    const auto used = static_cast<std::int64_t>(s.expansions_done);
    return static_cast<std::int64_t>(s.masks_in_region(mask_id)) + 2 * std::max<std::int64_t>(0, cap - used);
}

}  // namespace

void GenerationConfig::validate() const {
    auto need = [](bool ok, const char* field, const char* what) {
        if (!ok) {
            throw std::invalid_argument(std::string("generation.") + field + ": " + what);
        }
    };
    need(init_mask_len >= 1, "init_mask_len", "must be >= 1");
    need(max_len >= init_mask_len, "max_len", "must be >= init_mask_len");
    need(unmask_budget >= 1, "unmask_budget", "must be >= 1");
    need(temperature > 0.0 && std::isfinite(temperature), "temperature", "must be > 0");
    need(top_p > 0.0 && top_p <= 1.0, "top_p", "must lie in (0, 1]");
    need(expansion_cap <= kMaxExpansionCap, "expansion_cap", "too large");
}

std::size_t GenerationState::masks_in_region(TokenId mask_id) const {
    const auto r = region();
    return static_cast<std::size_t>(std::count(r.begin(), r.end(), mask_id));
}

GenerationState make_state(const Prompt& prompt, bool record_trace) {
    GenerationState s;
    s.sequence = prompt.sequence.tokens;
    s.active = prompt.active;
    s.record_trace = record_trace;
    return s;
}

double entropy(std::span<const double> row) {
    double h = 0.0;
    for (double p : row) {
        if (p > 0.0) {
            h -= p * std::log(p);
        }
    }
    return h;
}

std::vector<std::size_t> confidence_rank(const ProbRows& rows, std::span<const std::size_t> masked,
                                         ConfidenceMeasure measure) {
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(masked.size());
    for (auto pos : masked) {
        const auto row = rows.row(pos);
        const double c = measure == ConfidenceMeasure::NegEntropy ? -entropy(row)
                                                                   : *std::max_element(row.begin(), row.end());
        scored.emplace_back(c, pos);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) {
            return a.first > b.first;
        }
        return a.second < b.second;
    });
    std::vector<std::size_t> out;
    out.reserve(scored.size());
    for (const auto& [c, pos] : scored) {
        out.push_back(pos);
    }
    return out;
}

TokenId sample_token(std::span<const double> row, double temperature, double top_p, Rng& rng) {
    // Tempered distribution, computed in log space.
    double max_logit = -INFINITY;
    std::vector<double> logit(row.size(), -INFINITY);
    for (std::size_t k = 0; k < row.size(); ++k) {
        if (row[k] > 0.0) {
            logit[k] = std::log(row[k]) / temperature;
            max_logit = std::max(max_logit, logit[k]);
        }
    }
    if (!std::isfinite(max_logit)) {
        throw std::invalid_argument("sample_token: row has no probability mass");
    }
    std::vector<double> p(row.size(), 0.0);
    double z = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) {
        if (std::isfinite(logit[k])) {
            p[k] = std::exp(logit[k] - max_logit);
            z += p[k];
        }
    }
    std::vector<std::size_t> order(row.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });

    std::size_t keep = 0;
    double cum = 0.0;
    while (keep < order.size() && p[order[keep]] > 0.0) {
        cum += p[order[keep]] / z;
        ++keep;
        if (cum >= top_p - 1e-12) {
            break;
        }
    }
    double kept_mass = 0.0;
    for (std::size_t i = 0; i < keep; ++i) {
        kept_mass += p[order[i]];
    }
    double u = rng.uniform() * kept_mass;
    for (std::size_t i = 0; i < keep; ++i) {
        u -= p[order[i]];
        if (u < 0.0) {
            return static_cast<TokenId>(order[i]);
        }
    }
    return static_cast<TokenId>(order[keep - 1]);
}

TokenId argmax_token(std::span<const double> row) {
    if (row.empty()) {
        throw std::invalid_argument("argmax_token: empty row");
    }
    return static_cast<TokenId>(std::max_element(row.begin(), row.end()) - row.begin());
}

void enforce_length_cap(const GenerationState& state, ProbRows& rows, std::span<const std::size_t> positions,
                        const GenerationConfig& cfg, const Vocabulary& vocab) {
    const bool no_expand = expand_blocked(state, cfg);
    const bool no_delete = !cfg.delete_enabled;
    if (!no_expand && !no_delete) {
        return;
    }
    for (auto pos : positions) {
        auto row = rows.row(pos);
        const bool ok = (!no_expand || zero_and_renormalize(row, vocab.expand())) &&
                        (!no_delete || zero_and_renormalize(row, vocab.del()));
        if (!ok) {
            throw std::logic_error("enforce_length_cap: row at position " + std::to_string(pos) +
                                   " has no mass left after removing gated states");
        }
    }
}

std::size_t broadcast_delete(GenerationState& s, std::size_t position, const Vocabulary& vocab) {
    if (!s.active.contains(position)) {
        throw std::out_of_range("broadcast_delete: position outside the active region");
    }
    const auto first = s.sequence.begin() + static_cast<std::ptrdiff_t>(position);
    const auto region_end = s.sequence.begin() + static_cast<std::ptrdiff_t>(s.active.end);
    const bool tail_all_masks = std::all_of(first + 1, region_end, [&](TokenId t) { return t == vocab.mask(); });
    const auto last = tail_all_masks ? region_end : first + 1;
    const auto removed = static_cast<std::size_t>(last - first);
    s.sequence.erase(first, last);
    s.active.end -= removed;
    ++s.delete_steps;
    return removed;
}

TraceEvent apply_prediction(GenerationState& s, std::size_t position, TokenId token, const GenerationConfig& cfg,
                            const Vocabulary& vocab) {
    if (!s.active.contains(position)) {
        throw std::out_of_range("apply_prediction: position " + std::to_string(position) +
                                " outside the active region");
    }
    if (s.sequence[position] != vocab.mask()) {
        throw std::invalid_argument("apply_prediction: position " + std::to_string(position) + " is not masked");
    }
    if (!vocab.contains(token) || token == vocab.mask()) {
        throw std::invalid_argument("apply_prediction: invalid predicted id");
    }
    TraceEvent ev{position, token, EventKind::Fill, 0};
    if (token == vocab.expand()) {
        s.sequence.insert(s.sequence.begin() + static_cast<std::ptrdiff_t>(position), vocab.mask());
        ++s.active.end;
        ++s.expansions_done;
        ev.kind = EventKind::Expand;
    } else if (token == vocab.del()) {
        if (cfg.broadcasting) {
            ev.removed = broadcast_delete(s, position, vocab);
            ev.kind = ev.removed > 1 ? EventKind::Broadcast : EventKind::Delete;
        } else {
            s.sequence.erase(s.sequence.begin() + static_cast<std::ptrdiff_t>(position));
            --s.active.end;
            ++s.delete_steps;
            ev.removed = 1;
            ev.kind = EventKind::Delete;
        }
    } else {
        s.sequence[position] = token;
    }
    return ev;
}

GenerationState generate(const Prompt& prompt, const Denoiser& model, const GenerationConfig& cfg,
                         const Vocabulary& vocab, Rng& rng, bool record_trace) {
    cfg.validate();
    if (prompt.active.end > prompt.sequence.tokens.size() || prompt.active.begin > prompt.active.end) {
        throw std::invalid_argument("generate: active region out of bounds");
    }
    if (prompt.active.size() > cfg.max_len) {
        throw std::invalid_argument("generate: initial region longer than generation.max_len");
    }
    if (model.vocab_size() != static_cast<std::size_t>(vocab.size())) {
        throw std::invalid_argument("generate: model and vocabulary sizes differ");
    }
    GenerationState s = make_state(prompt, record_trace);
    const TokenId mask = vocab.mask();
    const std::size_t step_cap = cfg.effective_step_cap();

    std::vector<std::size_t> masked;
    std::vector<double> row;
    while (s.masks_in_region(mask) > 0) {
        if (s.steps_done >= step_cap) {
            throw GenerationAborted("generate: step cap of " + std::to_string(step_cap) + " predict calls exceeded",
                                    std::move(s));
        }
        ProbRows rows = model.predict(s.sequence);
        if (rows.rows() != s.sequence.size() || rows.cols() != static_cast<std::size_t>(vocab.size())) {
            throw std::logic_error("generate: denoiser returned rows of the wrong shape");
        }
        masked.clear();
        for (std::size_t i = s.active.begin; i < s.active.end; ++i) {
            if (s.sequence[i] == mask) {
                masked.push_back(i);
            }
        }
        for (auto pos : masked) {
            if (!zero_and_renormalize(rows.row(pos), mask)) {
                throw std::logic_error("generate: row puts all mass on [mask]");
            }
        }
        enforce_length_cap(s, rows, masked, cfg, vocab);

        auto ranked = confidence_rank(rows, masked, cfg.confidence);
        ranked.resize(std::min(ranked.size(), cfg.unmask_budget));
        std::sort(ranked.begin(), ranked.end());

        TraceRecord rec;
        if (record_trace) {
            rec.step = s.steps_done + 1;
            rec.before.assign(s.region().begin(), s.region().end());
        }
        std::ptrdiff_t shift = 0;
        bool tail_removed = false;
        for (auto pos : ranked) {
            const auto cur = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(pos) + shift);
            if (tail_removed) {
                // Swallowed by a broadcast deletion earlier in this step.
                if (record_trace) {
                    rec.events.push_back({pos, -1, EventKind::Skipped, 0});
                }
                continue;
            }
            const auto src = rows.row(pos);
            row.assign(src.begin(), src.end());
            // Earlier applications in this step may have hit L_max or the cap.
            if (expand_blocked(s, cfg) && !zero_and_renormalize(row, vocab.expand())) {
                throw std::logic_error("generate: row has no mass left once [expand] is gated");
            }
            const TokenId tok = cfg.greedy ? argmax_token(row) : sample_token(row, cfg.temperature, cfg.top_p, rng);
            const std::int64_t before = termination_measure(s, cfg, mask);
            const std::size_t size_before = s.active.size();
            TraceEvent ev = apply_prediction(s, cur, tok, cfg, vocab);
            ev.position = pos;
            if (termination_measure(s, cfg, mask) >= before) {
                throw std::logic_error("generate: termination measure did not decrease");
            }
            if (s.active.size() > cfg.max_len) {
                throw std::logic_error("generate: active region exceeded max_len");
            }
            shift += static_cast<std::ptrdiff_t>(s.active.size()) - static_cast<std::ptrdiff_t>(size_before);
            tail_removed = ev.removed > 0 && cur == s.active.end;
            if (record_trace) {
                rec.events.push_back(ev);
            }
        }
        ++s.steps_done;
        if (record_trace) {
            rec.after.assign(s.region().begin(), s.region().end());
            rec.expansions_done = s.expansions_done;
            rec.delete_steps = s.delete_steps;
            s.trajectory.push_back(std::move(rec));
        }
    }
    return s;
}

}  // namespace vlmd

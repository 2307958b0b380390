#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "vlmd/denoiser.hpp"
#include "vlmd/rng.hpp"
#include "vlmd/sequence.hpp"

namespace vlmd {

enum class ConfidenceMeasure { NegEntropy, MaxProb };

struct GenerationConfig {
    std::size_t init_mask_len = 64;
    std::size_t max_len = 128;      // L_max, bound on the active region
    std::size_t unmask_budget = 1;  // n positions per predict call
    double temperature = 0.2;
    double top_p = 0.9;
    bool greedy = false;  // argmax instead of sampling; temperature and top_p unused
    std::size_t expansion_cap = 128;
    bool broadcasting = true;
    bool expand_enabled = true;
    bool delete_enabled = true;
    ConfidenceMeasure confidence = ConfidenceMeasure::NegEntropy;
    std::size_t step_cap = 0;  // predict calls; 0 means 16 * max_len

    std::size_t effective_step_cap() const { return step_cap ? step_cap : 16 * max_len; }
    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

enum class EventKind { Fill, Expand, Delete, Broadcast, Skipped };

struct TraceEvent {
    std::size_t position = 0;  // index in the sequence the step's rows were computed on
    TokenId token = -1;
    EventKind kind = EventKind::Fill;
    std::size_t removed = 0;  // tokens removed by a delete
};

struct TraceRecord {
    std::size_t step = 0;
    Tokens before;  // active region before the step
    Tokens after;
    std::vector<TraceEvent> events;
    std::size_t expansions_done = 0;
    std::size_t delete_steps = 0;
};

struct GenerationState {
    Tokens sequence;
    Region active;
    std::size_t expansions_done = 0;
    std::size_t steps_done = 0;
    std::size_t delete_steps = 0;
    bool record_trace = false;
    std::vector<TraceRecord> trajectory;

    std::span<const TokenId> region() const {
        return std::span<const TokenId>(sequence).subspan(active.begin, active.size());
    }
    std::size_t masks_in_region(TokenId mask_id) const;
};

GenerationState make_state(const Prompt& prompt, bool record_trace = false);

/// Raised when the predict-call budget runs out; carries the partial state.
class GenerationAborted : public std::runtime_error {
public:
    GenerationAborted(const std::string& what, GenerationState state)
        : std::runtime_error(what), state_(std::move(state)) {}
    const GenerationState& state() const { return state_; }

private:
    GenerationState state_;
};

double entropy(std::span<const double> row);

/// Masked positions by descending confidence, ties broken by ascending index.
std::vector<std::size_t> confidence_rank(const ProbRows& rows, std::span<const std::size_t> masked,
                                         ConfidenceMeasure measure = ConfidenceMeasure::NegEntropy);

/// Temperature on log-probabilities, then nucleus truncation: the smallest
/// prefix of ids in descending probability (ascending id on ties) whose mass
/// reaches top_p.
TokenId sample_token(std::span<const double> row, double temperature, double top_p, Rng& rng);

/// Highest-probability id, lowest id on ties.
TokenId argmax_token(std::span<const double> row);

/// Zeroes [expand] when the region is at L_max, the expansion cap is spent
/// or expansion is disabled, and [delete] when deletion is disabled; touched
/// rows are renormalized. Applied to the listed rows only. Throws
/// std::logic_error if a row loses all its mass.
void enforce_length_cap(const GenerationState& state, ProbRows& rows, std::span<const std::size_t> positions,
                        const GenerationConfig& cfg, const Vocabulary& vocab);

/// Removes `position`, plus the whole run to its right when every remaining
/// region token there is [mask]. Counts one delete step. Returns the number
/// of tokens removed.
std::size_t broadcast_delete(GenerationState& state, std::size_t position, const Vocabulary& vocab);

/// Writes one sampled prediction at a masked region position: [expand] becomes
/// two masks, [delete] removes the position (broadcast when enabled), a
/// regular id is written in place. Throws std::out_of_range outside the
/// region and std::invalid_argument on an unmasked position.
TraceEvent apply_prediction(GenerationState& state, std::size_t position, TokenId token, const GenerationConfig& cfg,
                            const Vocabulary& vocab);

/// The variable-length denoising loop. Runs until the active region holds no
/// [mask]; throws GenerationAborted past the step cap.
GenerationState generate(const Prompt& prompt, const Denoiser& model, const GenerationConfig& cfg,
                         const Vocabulary& vocab, Rng& rng, bool record_trace = false);

}  // namespace vlmd

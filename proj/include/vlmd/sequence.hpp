#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "vlmd/vocab.hpp"

namespace vlmd {

/// Half-open index range.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool empty() const { return end == begin; }
    bool contains(std::size_t i) const { return i >= begin && i < end; }
    bool operator==(const Span&) const = default;
};

/// The mutable part of a sequence; everything outside it is frozen context.
using Region = Span;

/// x0: regular tokens only.
struct CleanSequence {
    Tokens tokens;

    std::size_t size() const { return tokens.size(); }
    bool operator==(const CleanSequence&) const = default;
};

/// Throws std::invalid_argument if any id is not a regular symbol.
CleanSequence make_clean(Tokens tokens, const Vocabulary& vocab);

struct InfillExample {
    CleanSequence prefix;
    CleanSequence middle;
    CleanSequence suffix;
    CleanSequence instruction;

    Tokens solution() const;
    /// instruction ‖ prefix
    Tokens leading_context() const;
};

/// z0: regular tokens and [expand]/[delete] sentinels.
///
/// `span_map[i]` is the range of x0 positions covered by
/// `tokens[active.begin + i]`. It exists only to check merge coverage.
struct AugmentedSequence {
    Tokens tokens;
    std::vector<Span> span_map;
    Region active;
};

/// z_t: `masked` lists, in increasing order, exactly the positions that hold
/// the [mask] id.
struct NoisySequence {
    Tokens tokens;
    std::vector<std::size_t> masked;
    double time = 1.0;
};

std::vector<std::size_t> mask_positions(std::span<const TokenId> tokens, TokenId mask_id);

struct Prompt {
    NoisySequence sequence;
    Region active;
};

/// instruction ‖ prefix ‖ init_mask_len × [mask] ‖ suffix.
/// Throws std::invalid_argument when init_mask_len is zero.
Prompt assemble_prompt(const InfillExample& example, std::size_t init_mask_len, const Vocabulary& vocab);

/// Newline-delimited records of space-separated symbols.
void write_sequences(const std::filesystem::path& path, std::span<const Tokens> sequences, const Vocabulary& vocab);
std::vector<Tokens> read_sequences(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace vlmd

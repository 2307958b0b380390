#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlmd/rng.hpp"
#include "vlmd/sequence.hpp"

namespace vlmd {

enum class TaskKind { Copy, ArithmeticChain, BalancedBrackets, KeyValue };

const char* to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view name);

struct TaskParams {
    TaskKind kind = TaskKind::KeyValue;
    // copy: word length range; balanced-brackets: string length range
    int min_len = 4;
    int max_len = 8;
    int alphabet = 8;  // copy: number of letters
    int max_depth = 3;
    int n_terms = 2;
    int max_operand = 20;
    // key-value
    int n_keys = 16;
    int records = 2;
    int value_min = 3;
    int value_max = 12;
    int value_alphabet = 16;
    std::uint64_t table_seed = 7;
};

using Symbols = std::vector<std::string>;

/// Generator plus deterministic validator for one synthetic family.
class SyntheticTask {
public:
    explicit SyntheticTask(TaskParams params);

    const TaskParams& params() const { return params_; }

    /// Regular symbols the task can emit; feeds build_vocabulary.
    Symbols symbols() const;

    Symbols generate(Rng& rng) const;
    bool validate(std::span<const std::string> solution) const;

    /// Key-value only: a split whose middle is one record's value, so the
    /// middle (and its length) is determined by the prefix. nullopt for
    /// other tasks.
    std::optional<Span> unique_middle_split(std::span<const std::string> solution, Rng& rng) const;

    /// Key-value lookup table (empty for other kinds).
    const std::vector<Symbols>& table() const { return table_; }

private:
    TaskParams params_;
    std::vector<Symbols> table_;
};

/// Throws std::invalid_argument when count is zero.
std::vector<Symbols> gen_corpus(const SyntheticTask& task, std::size_t count, Rng& rng);

InfillExample split_at(std::span<const TokenId> solution, std::size_t i, std::size_t j);

/// Uniform over all pairs 0 <= i <= j <= n with j - i >= min_middle.
/// Throws std::invalid_argument when the solution is shorter than min_middle.
Span sample_split(std::size_t n, Rng& rng, std::size_t min_middle = 1);
InfillExample fim_split(std::span<const TokenId> solution, Rng& rng, std::size_t min_middle = 1);

/// One evaluation record: a solution with its ground-truth split points.
struct EvalItem {
    Tokens solution;
    Span split;

    InfillExample example() const { return split_at(solution, split.begin, split.end); }
};

/// Unique-middle splits where the task supports them, fim_split otherwise.
std::vector<EvalItem> make_eval_set(const SyntheticTask& task, const Vocabulary& vocab, std::size_t count, Rng& rng);

/// Corpus: one solution per line. Eval set: solution, TAB, "i j".
void write_corpus(const std::filesystem::path& path, std::span<const Symbols> corpus);
std::vector<Symbols> read_corpus(const std::filesystem::path& path);
void write_eval_set(const std::filesystem::path& path, std::span<const EvalItem> items, const Vocabulary& vocab);
std::vector<EvalItem> read_eval_set(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace vlmd

#include "vlmd/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace vlmd {

namespace {

std::string letter(int i) { return std::string(1, static_cast<char>('a' + i)); }
std::string key_symbol(int i) { return std::string(1, static_cast<char>('A' + i)); }

bool is_digit_symbol(const std::string& s) { return s.size() == 1 && s[0] >= '0' && s[0] <= '9'; }

// Reads a decimal number starting at pos; returns nullopt on malformed input
// (no digits, or a leading zero on a multi-digit number).
std::optional<long> read_number(std::span<const std::string> s, std::size_t& pos) {
    const std::size_t start = pos;
    long value = 0;
    while (pos < s.size() && is_digit_symbol(s[pos])) {
        value = value * 10 + (s[pos][0] - '0');
        ++pos;
        if (value > 1'000'000'000L) {
            return std::nullopt;
        }
    }
    if (pos == start || (pos - start > 1 && s[start] == "0")) {
        return std::nullopt;
    }
    return value;
}

void push_number(Symbols& out, long v) {
    for (char c : std::to_string(v)) {
        out.emplace_back(1, c);
    }
}

}  // namespace

const char* to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::Copy:
            return "copy";
        case TaskKind::ArithmeticChain:
            return "arithmetic-chain";
        case TaskKind::BalancedBrackets:
            return "balanced-brackets";
        case TaskKind::KeyValue:
            return "key-value";
    }
    return "?";
}

TaskKind task_kind_from_string(std::string_view name) {
    for (auto k : {TaskKind::Copy, TaskKind::ArithmeticChain, TaskKind::BalancedBrackets, TaskKind::KeyValue}) {
        if (name == to_string(k)) {
            return k;
        }
    }
    throw std::invalid_argument("unknown task kind '" + std::string(name) + "'");
}

SyntheticTask::SyntheticTask(TaskParams params) : params_(params) {
    const auto& p = params_;
    if (p.min_len < 1 || p.max_len < p.min_len) {
        throw std::invalid_argument("task: require 1 <= min_len <= max_len");
    }
    if (p.kind == TaskKind::Copy && (p.alphabet < 1 || p.alphabet > 26)) {
        throw std::invalid_argument("task: copy alphabet must be in [1, 26]");
    }
    if (p.kind == TaskKind::BalancedBrackets && (p.max_depth < 1 || p.max_len < 2)) {
        throw std::invalid_argument("task: balanced-brackets needs max_depth >= 1 and max_len >= 2");
    }
    if (p.kind == TaskKind::ArithmeticChain && (p.n_terms < 1 || p.max_operand < 0)) {
        throw std::invalid_argument("task: arithmetic-chain needs n_terms >= 1 and max_operand >= 0");
    }
    if (p.kind == TaskKind::KeyValue) {
        if (p.n_keys < 1 || p.n_keys > 26 || p.records < 1 || p.records > p.n_keys) {
            throw std::invalid_argument("task: key-value needs 1 <= records <= n_keys <= 26");
        }
        if (p.value_min < 1 || p.value_max < p.value_min || p.value_alphabet < 1 || p.value_alphabet > 26) {
            throw std::invalid_argument("task: key-value value length/alphabet out of range");
        }
        Rng rng(derive_seed(p.table_seed, {0x6b76}));
        table_.resize(static_cast<std::size_t>(p.n_keys));
        for (auto& value : table_) {
            const auto len = rng.uniform_int(p.value_min, p.value_max);
            for (std::int64_t i = 0; i < len; ++i) {
                value.push_back(letter(static_cast<int>(rng.uniform_int(0, p.value_alphabet - 1))));
            }
        }
    }
}

Symbols SyntheticTask::symbols() const {
    Symbols out;
    switch (params_.kind) {
        case TaskKind::Copy:
            for (int i = 0; i < params_.alphabet; ++i) {
                out.push_back(letter(i));
            }
            out.emplace_back("|");
            break;
        case TaskKind::ArithmeticChain:
            for (int i = 0; i < 10; ++i) {
                out.push_back(std::to_string(i));
            }
            out.emplace_back("+");
            out.emplace_back("=");
            break;
        case TaskKind::BalancedBrackets:
            out = {"(", ")", "[", "]"};
            break;
        case TaskKind::KeyValue:
            for (int i = 0; i < params_.n_keys; ++i) {
                out.push_back(key_symbol(i));
            }
            for (int i = 0; i < params_.value_alphabet; ++i) {
                out.push_back(letter(i));
            }
            out.emplace_back("=");
            out.emplace_back(";");
            break;
    }
    return out;
}

Symbols SyntheticTask::generate(Rng& rng) const {
    const auto& p = params_;
    Symbols out;
    switch (p.kind) {
        case TaskKind::Copy: {
            const auto len = rng.uniform_int(p.min_len, p.max_len);
            Symbols word;
            for (std::int64_t i = 0; i < len; ++i) {
                word.push_back(letter(static_cast<int>(rng.uniform_int(0, p.alphabet - 1))));
            }
            out = word;
            out.emplace_back("|");
            out.insert(out.end(), word.rbegin(), word.rend());
            break;
        }
        case TaskKind::ArithmeticChain: {
            long sum = 0;
            for (int k = 0; k < p.n_terms; ++k) {
                const long v = rng.uniform_int(0, p.max_operand);
                sum += v;
                if (k) {
                    out.emplace_back("+");
                }
                push_number(out, v);
            }
            out.emplace_back("=");
            push_number(out, sum);
            break;
        }
        case TaskKind::BalancedBrackets: {
            const int lo = (p.min_len + 1) / 2;
            const int hi = std::max(lo, p.max_len / 2);
            const auto pairs = static_cast<int>(rng.uniform_int(lo, hi));
            std::vector<char> stack;
            int opens_left = pairs;
            while (opens_left > 0 || !stack.empty()) {
                const bool can_open = opens_left > 0 && static_cast<int>(stack.size()) < p.max_depth;
                const bool can_close = !stack.empty();
                if (can_open && (!can_close || rng.bernoulli(0.5))) {
                    const char c = rng.bernoulli(0.5) ? '(' : '[';
                    stack.push_back(c);
                    out.emplace_back(1, c);
                    --opens_left;
                } else {
                    out.emplace_back(stack.back() == '(' ? ")" : "]");
                    stack.pop_back();
                }
            }
            break;
        }
        case TaskKind::KeyValue: {
            std::vector<int> keys(static_cast<std::size_t>(p.n_keys));
            std::iota(keys.begin(), keys.end(), 0);
            for (int r = 0; r < p.records; ++r) {
                const auto pick = rng.uniform_int(r, p.n_keys - 1);
                std::swap(keys[static_cast<std::size_t>(r)], keys[static_cast<std::size_t>(pick)]);
                const int k = keys[static_cast<std::size_t>(r)];
                out.push_back(key_symbol(k));
                out.emplace_back("=");
                const auto& v = table_[static_cast<std::size_t>(k)];
                out.insert(out.end(), v.begin(), v.end());
                out.emplace_back(";");
            }
            break;
        }
    }
    return out;
}

bool SyntheticTask::validate(std::span<const std::string> s) const {
    const auto& p = params_;
    switch (p.kind) {
        case TaskKind::Copy: {
            const auto bar = std::find(s.begin(), s.end(), "|");
            if (bar == s.end() || std::find(bar + 1, s.end(), "|") != s.end()) {
                return false;
            }
            const auto n = static_cast<std::size_t>(bar - s.begin());
            if (s.size() != 2 * n + 1 || n == 0) {
                return false;
            }
            for (std::size_t i = 0; i < n; ++i) {
                if (s[i] != s[s.size() - 1 - i]) {
                    return false;
                }
            }
            return true;
        }
        case TaskKind::ArithmeticChain: {
            std::size_t pos = 0;
            long sum = 0;
            for (int k = 0; k < p.n_terms; ++k) {
                if (k) {
                    if (pos >= s.size() || s[pos] != "+") {
                        return false;
                    }
                    ++pos;
                }
                auto v = read_number(s, pos);
                if (!v) {
                    return false;
                }
                sum += *v;
            }
            if (pos >= s.size() || s[pos] != "=") {
                return false;
            }
            ++pos;
            auto total = read_number(s, pos);
            return total && pos == s.size() && *total == sum;
        }
        case TaskKind::BalancedBrackets: {
            if (s.empty()) {
                return false;
            }
            std::vector<char> stack;
            for (const auto& sym : s) {
                if (sym == "(" || sym == "[") {
                    stack.push_back(sym[0]);
                    if (static_cast<int>(stack.size()) > p.max_depth) {
                        return false;
                    }
                } else if (sym == ")" || sym == "]") {
                    if (stack.empty() || stack.back() != (sym == ")" ? '(' : '[')) {
                        return false;
                    }
                    stack.pop_back();
                } else {
                    return false;
                }
            }
            return stack.empty();
        }
        case TaskKind::KeyValue: {
            std::size_t pos = 0;
            int records = 0;
            while (pos < s.size()) {
                const auto& k = s[pos];
                if (k.size() != 1 || k[0] < 'A' || k[0] >= 'A' + p.n_keys) {
                    return false;
                }
                const auto& value = table_[static_cast<std::size_t>(k[0] - 'A')];
                if (pos + 1 >= s.size() || s[pos + 1] != "=") {
                    return false;
                }
                pos += 2;
                if (pos + value.size() >= s.size()) {
                    return false;
                }
                if (!std::equal(value.begin(), value.end(), s.begin() + static_cast<std::ptrdiff_t>(pos))) {
                    return false;
                }
                pos += value.size();
                if (s[pos] != ";") {
                    return false;
                }
                ++pos;
                ++records;
            }
            return records == p.records;
        }
    }
    return false;
}

std::optional<Span> SyntheticTask::unique_middle_split(std::span<const std::string> s, Rng& rng) const {
    if (params_.kind != TaskKind::KeyValue) {
        return std::nullopt;
    }
    std::vector<Span> values;
    std::size_t i = 0;
    while (i + 1 < s.size()) {
        if (s[i + 1] == "=") {
            std::size_t j = i + 2;
            while (j < s.size() && s[j] != ";") {
                ++j;
            }
            values.push_back({i + 2, j});
            i = j + 1;
        } else {
            ++i;
        }
    }
    if (values.empty()) {
        return std::nullopt;
    }
    return values[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(values.size()) - 1))];
}

std::vector<Symbols> gen_corpus(const SyntheticTask& task, std::size_t count, Rng& rng) {
    if (count == 0) {
        throw std::invalid_argument("gen_corpus: count must be >= 1");
    }
    std::vector<Symbols> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(task.generate(rng));
    }
    return out;
}

InfillExample split_at(std::span<const TokenId> s, std::size_t i, std::size_t j) {
    if (i > j || j > s.size()) {
        throw std::invalid_argument("split_at: require 0 <= i <= j <= |solution|");
    }
    InfillExample ex;
    ex.prefix.tokens.assign(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(i));
    ex.middle.tokens.assign(s.begin() + static_cast<std::ptrdiff_t>(i), s.begin() + static_cast<std::ptrdiff_t>(j));
    ex.suffix.tokens.assign(s.begin() + static_cast<std::ptrdiff_t>(j), s.end());
    return ex;
}

Span sample_split(std::size_t n, Rng& rng, std::size_t min_middle) {
    if (n < min_middle) {
        throw std::invalid_argument("fim_split: solution shorter than min_middle");
    }
    // Pairs with middle length d: n - d + 1 choices of i.
    std::uint64_t total = 0;
    for (std::size_t d = min_middle; d <= n; ++d) {
        total += n - d + 1;
    }
    auto u = static_cast<std::uint64_t>(rng.uniform_int(0, static_cast<std::int64_t>(total) - 1));
    for (std::size_t d = min_middle; d <= n; ++d) {
        const std::uint64_t c = n - d + 1;
        if (u < c) {
            return {static_cast<std::size_t>(u), static_cast<std::size_t>(u) + d};
        }
        u -= c;
    }
    return {0, n};
}

InfillExample fim_split(std::span<const TokenId> solution, Rng& rng, std::size_t min_middle) {
    const Span s = sample_split(solution.size(), rng, min_middle);
    return split_at(solution, s.begin, s.end);
}

std::vector<EvalItem> make_eval_set(const SyntheticTask& task, const Vocabulary& vocab, std::size_t count,
                                    Rng& rng) {
    std::vector<EvalItem> out;
    for (const auto& sol : gen_corpus(task, count, rng)) {
        EvalItem item;
        item.solution = vocab.encode(sol);
        if (auto s = task.unique_middle_split(sol, rng)) {
            item.split = *s;
        } else {
            item.split = sample_split(item.solution.size(), rng, 1);
        }
        out.push_back(std::move(item));
    }
    return out;
}

void write_corpus(const std::filesystem::path& path, std::span<const Symbols> corpus) {
    std::ofstream os(path);
    if (!os) {
        throw std::runtime_error("cannot write " + path.string());
    }
    for (const auto& sol : corpus) {
        for (std::size_t i = 0; i < sol.size(); ++i) {
            os << (i ? " " : "") << sol[i];
        }
        os << '\n';
    }
}

std::vector<Symbols> read_corpus(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::vector<Symbols> out;
    std::string line;
    while (std::getline(is, line)) {
        auto syms = split_symbols(line);
        if (!syms.empty()) {
            out.push_back(std::move(syms));
        }
    }
    return out;
}

void write_eval_set(const std::filesystem::path& path, std::span<const EvalItem> items, const Vocabulary& vocab) {
    std::ofstream os(path);
    if (!os) {
        throw std::runtime_error("cannot write " + path.string());
    }
    for (const auto& it : items) {
        os << vocab.decode(it.solution) << '\t' << it.split.begin << ' ' << it.split.end << '\n';
    }
}

std::vector<EvalItem> read_eval_set(const std::filesystem::path& path, const Vocabulary& vocab) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::vector<EvalItem> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw std::runtime_error("eval set line " + std::to_string(lineno) + ": missing split points");
        }
        EvalItem it;
        it.solution = vocab.encode(std::string_view(line).substr(0, tab));
        const auto nums = split_symbols(std::string_view(line).substr(tab + 1));
        if (nums.size() != 2) {
            throw std::runtime_error("eval set line " + std::to_string(lineno) + ": expected 'i j'");
        }
        it.split = {std::stoul(nums[0]), std::stoul(nums[1])};
        if (it.split.begin > it.split.end || it.split.end > it.solution.size()) {
            throw std::runtime_error("eval set line " + std::to_string(lineno) + ": split out of range");
        }
        out.push_back(std::move(it));
    }
    return out;
}

}  // namespace vlmd

#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "vlmd/tasks.hpp"

using namespace vlmd;

namespace {

SyntheticTask task_of(TaskKind kind) {
    TaskParams p;
    p.kind = kind;
    return SyntheticTask(p);
}

const TaskKind kAllKinds[] = {TaskKind::Copy, TaskKind::ArithmeticChain, TaskKind::BalancedBrackets,
                              TaskKind::KeyValue};

Symbols tokens_of(std::string_view text) { return split_symbols(text); }

}  // namespace

TEST_CASE("task names round-trip") {
    for (auto k : kAllKinds) {
        CHECK(task_kind_from_string(to_string(k)) == k);
    }
    CHECK_THROWS_AS(task_kind_from_string("sudoku"), std::invalid_argument);
}

TEST_CASE("generated solutions validate and use only task symbols") {
    for (auto k : kAllKinds) {
        const auto task = task_of(k);
        const auto syms = task.symbols();
        const std::set<std::string> allowed(syms.begin(), syms.end());
        Rng rng(11);
        for (int i = 0; i < 500; ++i) {
            const Symbols s = task.generate(rng);
            REQUIRE_MESSAGE(task.validate(s), to_string(k));
            for (const auto& sym : s) {
                CHECK(allowed.count(sym) == 1);
            }
        }
    }
}

TEST_CASE("hand-written solutions") {
    TaskParams brackets;
    brackets.kind = TaskKind::BalancedBrackets;
    const SyntheticTask b(brackets);
    CHECK(b.validate(tokens_of("( ( ) ( ) ) [ ( ( ) ) ]")));
    CHECK_FALSE(b.validate(tokens_of("( ( ) ( ) ) [ ( ( ) ] )")));
    CHECK_FALSE(b.validate(tokens_of("( ( ( ( ) ) ) )")));  // deeper than max_depth 3
    CHECK_FALSE(b.validate(tokens_of("")));

    TaskParams arith;
    arith.kind = TaskKind::ArithmeticChain;
    const SyntheticTask a(arith);
    CHECK(a.validate(tokens_of("3 + 4 = 7")));
    CHECK(a.validate(tokens_of("1 2 + 9 = 2 1")));
    CHECK_FALSE(a.validate(tokens_of("3 + 4 = 8")));
    CHECK_FALSE(a.validate(tokens_of("0 3 + 4 = 7")));
    CHECK_FALSE(a.validate(tokens_of("3 + 4 = 7 7")));

    TaskParams copy;
    copy.kind = TaskKind::Copy;
    const SyntheticTask c(copy);
    CHECK(c.validate(tokens_of("a b c | c b a")));
    CHECK_FALSE(c.validate(tokens_of("a b c | a b c")));
    CHECK_FALSE(c.validate(tokens_of("| ")));
}

TEST_CASE("key-value validation follows the fixed table") {
    TaskParams p;
    p.records = 1;
    const SyntheticTask task(p);
    REQUIRE(task.table().size() == 16);
    for (const auto& v : task.table()) {
        CHECK(v.size() >= 3);
        CHECK(v.size() <= 12);
    }
    Symbols good{"C", "="};
    good.insert(good.end(), task.table()[2].begin(), task.table()[2].end());
    good.emplace_back(";");
    CHECK(task.validate(good));
    Symbols short_value = good;
    short_value.erase(short_value.end() - 2);
    CHECK_FALSE(task.validate(short_value));
    Symbols long_value = good;
    long_value.insert(long_value.end() - 1, "a");
    CHECK_FALSE(task.validate(long_value));

    TaskParams other = p;
    other.table_seed = 8;
    CHECK(SyntheticTask(other).table() != task.table());
    CHECK(SyntheticTask(p).table() == task.table());
}

TEST_CASE("validators reject random same-length middles") {
    for (auto k : kAllKinds) {
        const auto task = task_of(k);
        const auto syms = task.symbols();
        Rng rng(23);
        int trials = 0;
        int rejected = 0;
        while (trials < 2000) {
            Symbols s = task.generate(rng);
            const Span sp = sample_split(s.size(), rng, 1);
            Symbols corrupted = s;
            for (std::size_t i = sp.begin; i < sp.end; ++i) {
                corrupted[i] = syms[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(syms.size()) - 1))];
            }
            if (corrupted == s) {
                continue;
            }
            ++trials;
            rejected += task.validate(corrupted) ? 0 : 1;
        }
        const double rate = rejected / static_cast<double>(trials);
        INFO(to_string(k), " rejection rate ", rate);
        if (k == TaskKind::BalancedBrackets) {
            // Swapping ( for [ inside a matched pair is a different valid string.
            CHECK(rate >= 0.95);
        } else {
            CHECK(rate >= 0.99);
        }
    }
}

TEST_CASE("task parameters are checked") {
    TaskParams p;
    p.records = 17;
    CHECK_THROWS_AS(SyntheticTask{p}, std::invalid_argument);
    p = TaskParams{};
    p.value_min = 0;
    CHECK_THROWS_AS(SyntheticTask{p}, std::invalid_argument);
    p = TaskParams{};
    p.kind = TaskKind::Copy;
    p.alphabet = 27;
    CHECK_THROWS_AS(SyntheticTask{p}, std::invalid_argument);
    p = TaskParams{};
    p.min_len = 5;
    p.max_len = 4;
    CHECK_THROWS_AS(SyntheticTask{p}, std::invalid_argument);
}

TEST_CASE("gen_corpus") {
    const auto task = task_of(TaskKind::Copy);
    Rng rng(1);
    CHECK_THROWS_AS(gen_corpus(task, 0, rng), std::invalid_argument);
    Rng a(5), b(5);
    const auto ca = gen_corpus(task, 50, a);
    CHECK(ca.size() == 50);
    CHECK(ca == gen_corpus(task, 50, b));
}

TEST_CASE("split_at reconstructs the solution") {
    const Tokens s{5, 6, 7, 8, 9};
    const auto ex = split_at(s, 1, 3);
    CHECK(ex.prefix.tokens == Tokens{5});
    CHECK(ex.middle.tokens == Tokens{6, 7});
    CHECK(ex.suffix.tokens == Tokens{8, 9});
    CHECK(ex.solution() == s);
    CHECK(split_at(s, 0, 0).middle.tokens.empty());
    CHECK(split_at(s, 0, 5).middle.tokens == s);
    CHECK_THROWS_AS(split_at(s, 3, 2), std::invalid_argument);
    CHECK_THROWS_AS(split_at(s, 0, 6), std::invalid_argument);
}

TEST_CASE("fim_split covers every pair uniformly") {
    const std::size_t n = 12;
    Tokens s(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = static_cast<TokenId>(10 + i);
    }
    Rng rng(99);
    const int draws = 100000;
    double sum = 0.0;
    std::map<std::pair<std::size_t, std::size_t>, int> seen;
    for (int k = 0; k < draws; ++k) {
        const auto ex = fim_split(s, rng);
        REQUIRE(ex.solution() == s);
        REQUIRE(!ex.middle.tokens.empty());
        sum += static_cast<double>(ex.middle.tokens.size());
        ++seen[{ex.prefix.tokens.size(), ex.middle.tokens.size()}];
    }
    // Uniform over pairs i < j: n(n+1)/2 pairs with mean middle length (n+2)/3.
    const double expected = (n + 2) / 3.0;
    CHECK(std::abs(sum / draws - expected) <= 0.01 * expected);
    CHECK(seen.size() == n * (n + 1) / 2);

    Rng r2(3);
    CHECK_THROWS_AS(fim_split(Tokens{1, 2}, r2, 3), std::invalid_argument);
    CHECK(fim_split(Tokens{1, 2}, r2, 2).middle.tokens == Tokens{1, 2});
}

TEST_CASE("eval sets split key-value items on a whole value") {
    const auto task = task_of(TaskKind::KeyValue);
    const auto vocab = build_vocabulary(task.symbols());
    Rng rng(4);
    const auto items = make_eval_set(task, vocab, 200, rng);
    REQUIRE(items.size() == 200);
    for (const auto& it : items) {
        const auto syms = split_symbols(vocab.decode(it.solution));
        REQUIRE(it.split.begin >= 2);
        CHECK(syms[it.split.begin - 1] == "=");
        CHECK(syms[it.split.end] == ";");
        const auto& key = syms[it.split.begin - 2];
        const auto& value = task.table()[static_cast<std::size_t>(key[0] - 'A')];
        CHECK(Symbols(syms.begin() + static_cast<std::ptrdiff_t>(it.split.begin),
                      syms.begin() + static_cast<std::ptrdiff_t>(it.split.end)) == value);
    }
}

TEST_CASE("corpus and eval files round-trip") {
    const auto dir = testing::scratch_dir("tasks_files");
    const auto task = task_of(TaskKind::ArithmeticChain);
    const auto vocab = build_vocabulary(task.symbols());
    Rng rng(8);
    const auto corpus = gen_corpus(task, 30, rng);
    write_corpus(dir / "corpus.txt", corpus);
    CHECK(read_corpus(dir / "corpus.txt") == corpus);

    const auto items = make_eval_set(task, vocab, 30, rng);
    write_eval_set(dir / "eval.tsv", items, vocab);
    const auto back = read_eval_set(dir / "eval.tsv", vocab);
    REQUIRE(back.size() == items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        CHECK(back[i].solution == items[i].solution);
        CHECK(back[i].split.begin == items[i].split.begin);
        CHECK(back[i].split.end == items[i].split.end);
    }

    {
        std::ofstream os(dir / "bad.tsv");
        os << "3 + 4 = 7\t3 9\n";
    }
    CHECK_THROWS_AS(read_eval_set(dir / "bad.tsv", vocab), std::runtime_error);
    CHECK_THROWS_AS(read_corpus(dir / "missing.txt"), std::runtime_error);
}

// Acceptance checks, one line per criterion. Trained toy runs are cached in
// --work-dir keyed on their full config, so reruns only pay for evaluation.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "vlmd/harness.hpp"
#include "vlmd/loss.hpp"

using namespace vlmd;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string read_file(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

// ---------------------------------------------------------------- criterion 1

Outcome weight_calibration() {
    const Vocabulary v = build_vocabulary({"a", "b", "c"});
    std::size_t cases = 0;
    for (std::size_t nm = 1; nm <= 64; ++nm) {
        for (std::size_t nd = 1; nd <= nm; ++nd) {
            // Two context tokens, then nm masked targets whose last nd are deletes.
            Tokens targets{0, 1};
            for (std::size_t i = 0; i < nm - nd; ++i) {
                targets.push_back(i % 2 ? v.expand() : static_cast<TokenId>(i % 3));
            }
            targets.insert(targets.end(), nd, v.del());
            NoisySequence zt;
            zt.tokens = targets;
            for (std::size_t i = 2; i < zt.tokens.size(); ++i) {
                zt.tokens[i] = v.mask();
            }
            zt.masked = mask_positions(zt.tokens, v.mask());
            const TokenWeights w = token_weights(targets, zt, WeightPolicy{}, v);
            double total = 0.0;
            double deletes = 0.0;
            double one = static_cast<double>(nm) / static_cast<double>(nm - nd + 1);
            for (std::size_t i = 0; i < targets.size(); ++i) {
                total += w.weights[i];
                if (targets[i] == v.del()) {
                    deletes += w.weights[i];
                } else if (i >= 2 && w.weights[i] != one) {
                    return {false, "non-delete weight " + fmt("%.17g", w.weights[i]) + " at N_mask=" +
                                       std::to_string(nm) + ", N_delete=" + std::to_string(nd)};
                }
            }
            if (std::abs(total - static_cast<double>(nm)) > 1e-12 * static_cast<double>(nm) ||
                std::abs(deletes - one) > 1e-12 * one) {
                return {false, "sum " + fmt("%.17g", total) + ", delete total " + fmt("%.17g", deletes) +
                                   " at N_mask=" + std::to_string(nm) + ", N_delete=" + std::to_string(nd)};
            }
            ++cases;
        }
    }
    return {true, std::to_string(cases) + " (N_mask, N_delete) pairs, sum = N_mask and delete group = one target"};
}

// ---------------------------------------------------------------- criterion 2

Outcome gradient_check() {
    const Vocabulary v = build_vocabulary({"a", "b", "c", "d"});
    const NoiseSchedule schedule;
    Rng rng(2024);
    double worst = 0.0;
    std::size_t unmasked_checks = 0;
    for (int batch_no = 0; batch_no < 10; ++batch_no) {
        LossBatch batch;
        const auto b = rng.uniform_int(1, 3);
        for (std::int64_t e = 0; e < b; ++e) {
            LossExample ex;
            const auto len = static_cast<std::size_t>(rng.uniform_int(2, 7));
            ex.vocab_size = static_cast<std::size_t>(v.size());
            ex.time = 0.05 + 0.95 * rng.uniform();
            NoisySequence zt;
            for (std::size_t i = 0; i < len; ++i) {
                const bool del = rng.bernoulli(0.3);
                const TokenId regular = static_cast<TokenId>(rng.uniform_int(0, v.regular_size() - 1));
                const TokenId target = del ? v.del() : (rng.bernoulli(0.2) ? v.expand() : regular);
                const bool sentinel = target == v.del() || target == v.expand();
                ex.targets.push_back(target);
                zt.tokens.push_back(sentinel || rng.bernoulli(0.5) ? v.mask() : target);
            }
            zt.masked = mask_positions(zt.tokens, v.mask());
            ex.weights = token_weights(ex.targets, zt, WeightPolicy{}, v).weights;
            for (auto t : zt.tokens) {
                ex.mask_flags.push_back(t == v.mask());
            }
            for (std::size_t k = 0; k < len * ex.vocab_size; ++k) {
                ex.logits.push_back(1.5 * rng.normal());
            }
            batch.push_back(std::move(ex));
        }
        const LossResult r = weighted_loss(batch, schedule);
        const double h = 1e-5;
        for (std::size_t e = 0; e < batch.size(); ++e) {
            const auto& ex = batch[e];
            for (std::size_t k = 0; k < ex.logits.size(); ++k) {
                auto up = batch;
                auto down = batch;
                up[e].logits[k] += h;
                down[e].logits[k] -= h;
                const double fd = (weighted_loss(up, schedule, false).loss - weighted_loss(down, schedule, false).loss) /
                                  (2 * h);
                const double an = r.grad[e][k];
                worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
                if (!ex.mask_flags[k / ex.vocab_size]) {
                    auto moved = batch;
                    moved[e].logits[k] += 7.0 * rng.normal();
                    if (weighted_loss(moved, schedule, false).loss != r.loss || an != 0.0) {
                        return {false, "unmasked logit changed the loss or has a gradient"};
                    }
                    ++unmasked_checks;
                }
            }
        }
    }

    // Same check through the transformer parameters, in double precision.
    ModelConfig mc;
    mc.vocab_size = v.size();
    mc.d_model = 8;
    mc.n_heads = 2;
    mc.n_layers = 2;
    mc.d_ff = 12;
    mc.max_len = 16;
    Transformer<double> net(mc);
    net.init(rng, 0.4);
    AugmentConfig aug;
    aug.delete_max = 3;
    double worst_net = 0.0;
    for (int batch_no = 0; batch_no < 10; ++batch_no) {
        std::vector<TrainingSample> batch;
        while (batch.size() < 2) {
            InfillExample ex;
            ex.prefix.tokens = {0, static_cast<TokenId>(rng.uniform_int(0, 3))};
            ex.middle.tokens = {static_cast<TokenId>(rng.uniform_int(0, 3)), 1, 2};
            ex.suffix.tokens = {3};
            auto s = make_training_sample(ex, 0.3 + 0.6 * rng.uniform(), aug, schedule, v, rng);
            if (!s.zt.masked.empty()) {
                batch.push_back(std::move(s));
            }
        }
        std::vector<double> grads;
        loss_and_grad(net, batch, WeightPolicy{}, schedule, v, &grads);
        double num = 0.0;
        double den = 0.0;
        for (int probe = 0; probe < 60; ++probe) {
            const auto idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(grads.size()) - 1));
            const double keep = net.params()[idx];
            const double h = 1e-6;
            net.params()[idx] = keep + h;
            const double up = loss_and_grad<double>(net, batch, WeightPolicy{}, schedule, v, nullptr);
            net.params()[idx] = keep - h;
            const double down = loss_and_grad<double>(net, batch, WeightPolicy{}, schedule, v, nullptr);
            net.params()[idx] = keep;
            const double fd = (up - down) / (2 * h);
            num += (fd - grads[idx]) * (fd - grads[idx]);
            den += fd * fd;
        }
        worst_net = std::max(worst_net, den > 0 ? std::sqrt(num / den) : 0.0);
    }
    const bool ok = worst <= 1e-3 && worst_net <= 1e-3;
    return {ok, "max rel err logits " + fmt("%.2e", worst) + ", parameters " + fmt("%.2e", worst_net) +
                    " (limit 1e-3); " + std::to_string(unmasked_checks) + " unmasked perturbations left the loss unchanged"};
}

// ---------------------------------------------------------------- criterion 3

Outcome forward_statistics() {
    const NoiseSchedule schedule;
    const Vocabulary v = build_vocabulary({"a", "b"});
    Rng rng(77);
    CleanSequence x0;
    x0.tokens.assign(10000, 0);
    AugmentedSequence z0;
    z0.tokens = x0.tokens;
    z0.active = {0, z0.tokens.size()};
    double worst = 0.0;
    for (int k = 1; k <= 9; ++k) {
        const double t = 0.1 * k;
        const double expected = 1.0 - schedule.alpha(t);
        const double pseudo = static_cast<double>(sample_pseudo_mask(x0, t, schedule, rng).indices.size()) / 1e4;
        const double masked = static_cast<double>(corrupt(z0, t, schedule, v, rng).masked.size()) / 1e4;
        worst = std::max({worst, std::abs(pseudo - expected), std::abs(masked - expected)});
    }
    AugmentedSequence s;
    s.tokens = {0, 1, v.expand(), 0, v.del(), v.expand(), 1, v.del(), v.del(), 0};
    s.active = {1, 9};
    for (int i = 0; i < 100000; ++i) {
        const NoisySequence zt = corrupt(s, rng.uniform(), schedule, v, rng);
        for (std::size_t p = 0; p < s.tokens.size(); ++p) {
            const bool sentinel = s.tokens[p] == v.expand() || s.tokens[p] == v.del();
            if ((sentinel && zt.tokens[p] != v.mask()) || (!s.active.contains(p) && zt.tokens[p] != s.tokens[p])) {
                return {false, "draw " + std::to_string(i) + ": sentinel left unmasked or context touched"};
            }
        }
    }
    return {worst <= 0.02, "max |masked fraction - (1 - alpha)| = " + fmt("%.4f", worst) +
                               " (limit 0.02); 1e5 draws with every sentinel masked"};
}

// ---------------------------------------------------------------- criterion 4

// Spiky random rows with extra weight on the sentinels.
class RandomRows : public Denoiser {
public:
    RandomRows(const Vocabulary& v, std::uint64_t seed, double bias) : v_(v), seed_(seed), bias_(bias) {}
    std::size_t max_length() const override { return 4096; }
    std::size_t vocab_size() const override { return static_cast<std::size_t>(v_.size()); }

protected:
    ProbRows predict_rows(std::span<const TokenId> tokens) const override {
        Rng rng(derive_seed(seed_, {calls_++}));
        ProbRows rows(tokens.size(), vocab_size());
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            double sum = 0.0;
            for (std::size_t k = 0; k < vocab_size(); ++k) {
                double x = std::pow(rng.uniform(), 4.0) + 1e-3;
                if (static_cast<TokenId>(k) == v_.expand() || static_cast<TokenId>(k) == v_.del()) {
                    x *= bias_;
                }
                rows.at(i, k) = x;
                sum += x;
            }
            for (auto& p : rows.row(i)) {
                p /= sum;
            }
        }
        return rows;
    }

private:
    const Vocabulary& v_;
    std::uint64_t seed_;
    double bias_;
    mutable std::uint64_t calls_ = 0;
};

Outcome engine_mechanics() {
    const Vocabulary v = build_vocabulary({"a", "b", "c", "d", "e"});
    const TokenId a = v.id("a");
    const TokenId b = v.id("b");
    const TokenId c = v.id("c");
    auto prompt = [&](const std::string& pre, std::size_t masks, const std::string& post) {
        InfillExample ex;
        ex.prefix.tokens = v.encode(pre);
        ex.suffix.tokens = v.encode(post);
        return assemble_prompt(ex, masks, v);
    };
    auto config = [](std::size_t n) {
        GenerationConfig g;
        g.init_mask_len = 1;
        g.max_len = 32;
        g.expansion_cap = 32;
        g.unmask_budget = n;
        return g;
    };
    Rng rng(1);
    std::vector<std::string> failures;

    {
        ScriptedDenoiser d(v, {{{1, a}, {2, b}, {3, c}}});
        const auto s = generate(prompt("d", 3, "e"), d, config(3), v, rng);
        if (v.decode(s.sequence) != "d a b c e" || s.steps_done != 1) {
            failures.push_back("regular fill");
        }
    }
    {
        ScriptedDenoiser d(v, {{{0, v.expand()}}, {{0, a}}, {{1, b}}});
        const auto s = generate(prompt("", 1, ""), d, config(1), v, rng);
        if (v.decode(s.sequence) != "a b" || s.expansions_done != 1 || s.steps_done != 3) {
            failures.push_back("expand then fill");
        }
    }
    {
        ScriptedDenoiser d(v, {{{1, v.del()}}});
        const auto s = generate(prompt("a", 8, "b"), d, config(1), v, rng);
        if (v.decode(s.sequence) != "a b" || !s.active.empty() || s.steps_done != 1 || s.delete_steps != 1) {
            failures.push_back("delete with broadcast");
        }
    }

    Rng meta(404);
    std::size_t steps_checked = 0;
    for (int run = 0; run < 1000; ++run) {
        GenerationConfig g;
        g.max_len = static_cast<std::size_t>(meta.uniform_int(1, 24));
        g.init_mask_len = static_cast<std::size_t>(meta.uniform_int(1, static_cast<std::int64_t>(g.max_len)));
        g.unmask_budget = static_cast<std::size_t>(meta.uniform_int(1, 4));
        g.expansion_cap = static_cast<std::size_t>(meta.uniform_int(0, 30));
        g.broadcasting = meta.bernoulli(0.5);
        g.temperature = 0.2 + meta.uniform();
        g.top_p = 0.1 + 0.9 * meta.uniform();
        const RandomRows d(v, meta.next_u64(), 1.0 + 10.0 * meta.uniform());
        Rng r(meta.next_u64());
        GenerationState s;
        try {
            s = generate(prompt("a b", g.init_mask_len, "c"), d, g, v, r, true);
        } catch (const std::exception& e) {
            failures.push_back("randomized run " + std::to_string(run) + ": " + e.what());
            break;
        }
        std::size_t prev_exp = 0;
        for (const auto& rec : s.trajectory) {
            auto measure = [&](const Tokens& region, std::size_t expansions) {
                return static_cast<long>(std::count(region.begin(), region.end(), v.mask())) +
                       2 * (static_cast<long>(g.expansion_cap) - static_cast<long>(expansions));
            };
            if (measure(rec.after, rec.expansions_done) >= measure(rec.before, prev_exp) ||
                rec.after.size() > g.max_len || rec.before.size() > g.max_len) {
                failures.push_back("randomized run " + std::to_string(run) + " step " + std::to_string(rec.step));
                break;
            }
            prev_exp = rec.expansions_done;
            ++steps_checked;
        }
    }
    if (!failures.empty()) {
        return {false, "failed: " + failures.front()};
    }
    return {true, "3 scripted traces exact; measure decreased on all " + std::to_string(steps_checked) +
                      " steps of 1000 randomized runs; region never exceeded L_max"};
}

// ------------------------------------------------------------ trained models

struct Toy {
    std::filesystem::path work;
    RunConfig base;
    std::map<std::string, double> train_cpu;

    // Trains (or reuses) the run for cfg under work/name.
    TrainedRun run(const std::string& name, const RunConfig& cfg) {
        const auto dir = work / name;
        const std::string key = to_json(cfg);
        if (std::filesystem::exists(dir / "model.ckpt") && to_json(load_config(dir / "config.json")) == key &&
            std::filesystem::exists(dir / "train_cpu_seconds")) {
            std::ifstream(dir / "train_cpu_seconds") >> train_cpu[name];
            std::cerr << "reusing trained run " << dir << '\n';
            return load_run(dir);
        }
        std::cerr << "training " << name << " (" << cfg.optimizer.steps << " steps)\n";
        const double t0 = cpu_seconds();
        TrainedRun r = run_training(cfg, [&](const StepLog& l) {
            if ((l.step + 1) % 1000 == 0) {
                std::cerr << "  step " << l.step + 1 << " loss " << l.loss << '\n';
            }
        });
        train_cpu[name] = cpu_seconds() - t0;
        std::filesystem::create_directories(dir);
        save_run(dir, r);
        std::ofstream(dir / "train_cpu_seconds") << train_cpu[name] << '\n';
        return r;
    }
};

struct Reports {
    EvalReport full;
    EvalReport no_broadcast;
    EvalReport no_expand;
    EvalReport no_delete;
    EvalReport uniform;
    double eval_cpu_broadcast = 0.0;
};

std::string row_summary(const EvalReport& r, double LengthRow::*field, double scale, const char* spec) {
    std::string out;
    for (const auto& row : r.rows) {
        out += (out.empty() ? "" : " ") + row.label + "=" + fmt(spec, scale * (row.*field));
    }
    return out;
}

Outcome broadcasting_efficiency(const Reports& rep, const std::vector<std::size_t>& lengths) {
    bool ok = rep.full.rows.front().prompts >= 200;
    double prev = -1.0;
    for (auto len : lengths) {
        const auto* on = rep.full.find(std::to_string(len));
        const auto* off = rep.no_broadcast.find(std::to_string(len));
        ok = ok && on->mean_delete_steps <= 2.0 && off->mean_delete_steps > prev;
        prev = off->mean_delete_steps;
    }
    ok = ok && prev > 5.0 && rep.eval_cpu_broadcast < 600.0;
    return {ok, std::to_string(rep.full.rows.front().prompts) + " prompts; delete_steps with broadcasting [" +
                    row_summary(rep.full, &LengthRow::mean_delete_steps, 1, "%.2f") + "], without [" +
                    row_summary(rep.no_broadcast, &LengthRow::mean_delete_steps, 1, "%.2f") + "]; eval " +
                    fmt("%.0f", rep.eval_cpu_broadcast) + " s CPU (limit 600)"};
}

Outcome length_robustness(const Reports& rep, const std::vector<std::size_t>& lengths, double train_cpu) {
    double lo = 1.0;
    double hi = 0.0;
    for (auto len : lengths) {
        const double em = rep.full.find(std::to_string(len))->exact_match;
        lo = std::min(lo, em);
        hi = std::max(hi, em);
    }
    const double avg = rep.full.find("Avg.")->exact_match;
    const double oracle = rep.full.find("Oracle")->exact_match;
    const std::string first = std::to_string(lengths.front());
    const std::string last = std::to_string(lengths.back());
    const double expand_loss = rep.full.find(first)->exact_match - rep.no_expand.find(first)->exact_match;
    const double delete_loss = rep.full.find(last)->exact_match - rep.no_delete.find(last)->exact_match;
    const bool ok = 100 * (hi - lo) <= 10.0 && 100 * std::abs(avg - oracle) <= 5.0 && 100 * expand_loss >= 30.0 &&
                    100 * delete_loss >= 20.0 && train_cpu < 1800.0;
    return {ok, "full [" + row_summary(rep.full, &LengthRow::exact_match, 100, "%.1f") + "]; spread " +
                    fmt("%.1f", 100 * (hi - lo)) + " (<= 10), |Avg-Oracle| " + fmt("%.1f", 100 * std::abs(avg - oracle)) +
                    " (<= 5), w/o expand loses " + fmt("%.1f", 100 * expand_loss) + " at " + first +
                    " (>= 30), w/o delete loses " + fmt("%.1f", 100 * delete_loss) + " at " + last +
                    " (>= 20); training " + fmt("%.0f", train_cpu) + " s CPU (limit 1800)"};
}

Outcome loss_balancing(const Reports& rep) {
    const double full = rep.full.find("Avg.")->exact_match;
    const double uniform = rep.uniform.find("Avg.")->exact_match;
    return {uniform < full, "Avg. exact match: balanced " + fmt("%.1f", 100 * full) + ", uniform " +
                                fmt("%.1f", 100 * uniform) + " [" +
                                row_summary(rep.uniform, &LengthRow::exact_match, 100, "%.1f") + "]"};
}

// ---------------------------------------------------------------- criterion 8

Outcome determinism(const std::filesystem::path& work, RunConfig cfg) {
    cfg.optimizer.steps = 40;
    cfg.corpus.eval_count = 20;
    cfg.eval.lengths = {4, 16};
    std::vector<std::string> ckpts;
    std::vector<std::string> logs;
    std::vector<std::string> reports;
    for (int rep = 0; rep < 2; ++rep) {
        const auto dir = work / ("determinism" + std::to_string(rep));
        std::filesystem::remove_all(dir);
        save_run(dir, run_training(cfg));
        ckpts.push_back(read_file(dir / "model.ckpt"));
        logs.push_back(read_file(dir / "train_log.jsonl"));
        TrainedRun r = load_run(dir);
        const TaskBundle bundle = make_task(r.config.task);
        const auto items = eval_items(r.config, bundle);
        TinyTransformer model(std::move(r.net));
        for (int threads : {1, 2}) {
            EvalConfig ec = r.config.eval;
            ec.threads = threads;
            reports.push_back(render_jsonl(evaluate(model, bundle, items, r.config.generation, ec, "full")));
        }
        const GenerationState s = trace_prompt(model, items[0].example(), 8, r.config.generation, bundle.vocab, 3);
        reports.push_back(render_trace_jsonl(s, bundle.vocab));
    }
    const bool same_ckpt = ckpts[0] == ckpts[1] && !ckpts[0].empty();
    const bool same_log = logs[0] == logs[1];
    const bool same_reports = reports[0] == reports[1] && reports[0] == reports[3] && reports[0] == reports[4] &&
                              reports[2] == reports[5];
    return {same_ckpt && same_log && same_reports,
            std::string("checkpoints ") + (same_ckpt ? "identical" : "DIFFER") + " (" + std::to_string(ckpts[0].size()) +
                " bytes), train logs " + (same_log ? "identical" : "DIFFER") + ", eval reports and traces across runs and thread counts " +
                (same_reports ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    std::string work_dir = "acceptance_runs";
    std::string config_path;
    std::vector<int> only;
    app.add_option("--work-dir", work_dir, "Where trained runs are cached");
    app.add_option("--config", config_path, "Toy training config")->required();
    app.add_option("--only", only, "Run only these criteria")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
    int failed = 0;
    auto report = [&](int id, const char* name, double limit, const std::function<Outcome()>& fn) {
        if (!wanted(id)) {
            return;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (limit > 0 && secs >= limit) {
            o.pass = false;
            o.detail += "; over the time limit";
        }
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << " [PRIMARY] " << name << ": " << o.detail
                  << "  (" << fmt("%.1f", secs) << " s" << (limit > 0 ? ", limit " + fmt("%.0f", limit) + " s" : "")
                  << ")" << std::endl;
    };

    report(1, "weight calibration", 1.0, weight_calibration);
    report(2, "loss gradient", 30.0, gradient_check);
    report(3, "forward-process statistics", 10.0, forward_statistics);
    report(4, "engine mechanics", 10.0, engine_mechanics);

    const RunConfig base = load_config(config_path);
    if (wanted(5) || wanted(6) || wanted(7)) {
        Toy toy{work_dir, base, {}};
        std::optional<Reports> rep;
        std::optional<std::string> setup_error;
        try {
            Reports r;
            const TaskBundle bundle = make_task(base.task);
            const auto items = eval_items(base, bundle);
            TinyTransformer full(toy.run("balanced", base).net);
            RunConfig uni_cfg = base;
            uni_cfg.loss.mode = WeightMode::Uniform;
            TinyTransformer uniform(toy.run("uniform", uni_cfg).net);
            const GenerationConfig g = base.generation;
            auto eval = [&](const Denoiser& m, Ablation ab) {
                std::cerr << "evaluating " << ab.id() << '\n';
                return evaluate(m, bundle, items, ab.apply(g), base.eval, ab.id());
            };
            const double t0 = cpu_seconds();
            r.full = eval(full, {});
            r.no_broadcast = eval(full, {true, true, false});
            r.eval_cpu_broadcast = cpu_seconds() - t0;
            r.no_expand = eval(full, {false, true, true});
            r.no_delete = eval(full, {true, false, true});
            r.uniform = eval(uniform, {});
            for (const auto* e : {&r.full, &r.no_broadcast, &r.no_expand, &r.no_delete, &r.uniform}) {
                std::cerr << render_table(*e);
            }
            rep = std::move(r);
        } catch (const std::exception& e) {
            setup_error = e.what();
        }
        auto guarded = [&](auto fn) {
            return [&, fn]() -> Outcome {
                if (!rep) {
                    return {false, "training/evaluation failed: " + *setup_error};
                }
                return fn();
            };
        };
        const auto& lengths = base.eval.lengths;
        report(5, "broadcasting efficiency", 0.0, guarded([&] { return broadcasting_efficiency(*rep, lengths); }));
        report(6, "length robustness", 0.0,
               guarded([&] { return length_robustness(*rep, lengths, toy.train_cpu["balanced"]); }));
        report(7, "loss balancing ablation", 0.0, guarded([&] { return loss_balancing(*rep); }));
    }
    report(8, "determinism", 0.0, [&] { return determinism(std::filesystem::path(work_dir), base); });

    std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << std::endl;
    return failed ? 1 : 0;
}

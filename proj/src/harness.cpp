#include "vlmd/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "vlmd/checkpoint.hpp"

namespace vlmd {

using nlohmann::json;

namespace {

constexpr std::uint64_t kOracleRow = 1ull << 40;
constexpr std::uint64_t kInitStream = 0x1417;

std::string join_symbols(const std::vector<std::string>& symbols) {
    std::string out;
    for (const auto& s : symbols) {
        if (!out.empty()) {
            out += ' ';
        }
        out += s;
    }
    return out;
}

std::string show(std::span<const TokenId> ids, const Vocabulary& vocab) { return join_symbols(vocab.to_symbols(ids)); }

struct PromptResult {
    Tokens middle;
    bool exact = false;
    bool valid = false;
    std::size_t steps = 0;
    std::size_t expansions = 0;
    std::size_t delete_steps = 0;
    bool aborted = false;
};

PromptResult run_prompt(const Denoiser& model, const TaskBundle& bundle, const EvalItem& item, std::size_t init_len,
                        const GenerationConfig& gen, std::uint64_t seed) {
    const InfillExample ex = item.example();
    const Prompt prompt = assemble_prompt(ex, init_len, bundle.vocab);
    Rng rng(seed);
    PromptResult r;
    GenerationState state;
    try {
        state = generate(prompt, model, gen, bundle.vocab, rng);
    } catch (const GenerationAborted& e) {
        state = e.state();
        r.aborted = true;
    }
    r.middle.assign(state.region().begin(), state.region().end());
    r.steps = state.steps_done;
    r.expansions = state.expansions_done;
    r.delete_steps = state.delete_steps;
    if (!r.aborted) {
        r.exact = r.middle == ex.middle.tokens;
        Tokens full = ex.prefix.tokens;
        full.insert(full.end(), r.middle.begin(), r.middle.end());
        full.insert(full.end(), ex.suffix.tokens.begin(), ex.suffix.tokens.end());
        r.valid = bundle.task.validate(bundle.vocab.to_symbols(full));
    }
    return r;
}

LengthRow aggregate(const std::string& label, std::size_t init_len, const std::vector<PromptResult>& results) {
    LengthRow row;
    row.label = label;
    row.init_mask_len = init_len;
    row.prompts = results.size();
    std::size_t exact = 0;
    std::size_t valid = 0;
    std::size_t steps = 0;
    std::size_t expansions = 0;
    std::size_t deletes = 0;
    for (const auto& r : results) {
        exact += r.exact;
        valid += r.valid;
        steps += r.steps;
        expansions += r.expansions;
        deletes += r.delete_steps;
        row.aborted += r.aborted;
    }
    if (!results.empty()) {
        const auto n = static_cast<double>(results.size());
        row.exact_match = static_cast<double>(exact) / n;
        row.validator_pass = static_cast<double>(valid) / n;
        row.mean_steps = static_cast<double>(steps) / n;
        row.mean_expansions = static_cast<double>(expansions) / n;
        row.mean_delete_steps = static_cast<double>(deletes) / n;
    }
    return row;
}

json row_json(const LengthRow& r, const std::string& ablation) {
    return json{{"type", "row"},
                {"ablation", ablation},
                {"row", r.label},
                {"init_mask_len", r.init_mask_len},
                {"prompts", r.prompts},
                {"exact_match", r.exact_match},
                {"validator_pass", r.validator_pass},
                {"mean_steps", r.mean_steps},
                {"mean_expansions", r.mean_expansions},
                {"mean_delete_steps", r.mean_delete_steps},
                {"aborted", r.aborted}};
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

const char* event_name(EventKind k) {
    switch (k) {
        case EventKind::Fill:
            return "fill";
        case EventKind::Expand:
            return "expand";
        case EventKind::Delete:
            return "delete";
        case EventKind::Broadcast:
            return "broadcast";
        case EventKind::Skipped:
            return "skipped";
    }
    return "?";
}

}  // namespace

TaskBundle make_task(const TaskParams& params) {
    SyntheticTask task(params);
    Vocabulary vocab = build_vocabulary(task.symbols());
    return TaskBundle{std::move(task), std::move(vocab)};
}

ModelConfig model_config(const RunConfig& cfg, const Vocabulary& vocab) {
    ModelConfig m = cfg.model;
    m.vocab_size = vocab.size();
    return m;
}

std::vector<Symbols> training_corpus(const RunConfig& cfg, const SyntheticTask& task) {
    Rng rng(derive_seed(cfg.corpus.seed, {1}));
    return gen_corpus(task, cfg.corpus.train_count, rng);
}

std::vector<EvalItem> eval_items(const RunConfig& cfg, const TaskBundle& bundle) {
    Rng rng(derive_seed(cfg.corpus.seed, {2}));
    return make_eval_set(bundle.task, bundle.vocab, cfg.corpus.eval_count, rng);
}

ExampleSampler make_sampler(const RunConfig& cfg, const TaskBundle& bundle, const std::vector<Symbols>& corpus) {
    if (corpus.empty()) {
        throw std::invalid_argument("make_sampler: empty corpus");
    }
    std::vector<Tokens> encoded;
    encoded.reserve(corpus.size());
    for (const auto& line : corpus) {
        encoded.push_back(bundle.vocab.encode(line));
    }
    const SyntheticTask* task = &bundle.task;
    const CorpusConfig cc = cfg.corpus;
    return [task, cc, corpus, encoded = std::move(encoded)](Rng& rng) {
        const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(encoded.size()) - 1));
        const bool unique = cc.split == SplitMode::Unique ||
                            (cc.split == SplitMode::Mixed && rng.bernoulli(cc.unique_fraction));
        if (unique) {
            if (auto s = task->unique_middle_split(corpus[k], rng)) {
                return split_at(encoded[k], s->begin, s->end);
            }
        }
        return fim_split(encoded[k], rng, 1);
    };
}

TrainedRun run_training(const RunConfig& cfg, const std::function<void(const StepLog&)>& on_step) {
    validate(cfg);
    TaskBundle bundle = make_task(cfg.task);
    const auto corpus = training_corpus(cfg, bundle.task);
    const auto sampler = make_sampler(cfg, bundle, corpus);

    Transformer<float> net(model_config(cfg, bundle.vocab));
    Rng init_rng(derive_seed(cfg.optimizer.seed, {kInitStream}));
    net.init(init_rng);

    TrainSetup setup{cfg.augment, cfg.schedule, cfg.loss, cfg.optimizer};
    TrainResult result = train(net, sampler, setup, bundle.vocab, on_step);
    return TrainedRun{cfg, std::move(bundle.vocab), std::move(net), std::move(result.log)};
}

std::string step_log_jsonl(const StepLog& log) {
    return json{{"step", log.step},
                {"loss", log.loss},
                {"lr", log.lr},
                {"grad_norm", log.grad_norm},
                {"masked_tokens", log.masked_tokens},
                {"delete_weight_mass", log.delete_weight_mass}}
        .dump();
}

void save_run(const std::filesystem::path& dir, const TrainedRun& run) {
    std::filesystem::create_directories(dir);
    save_config(dir / "config.json", run.config);
    run.vocab.save(dir / "vocab.txt");
    save_checkpoint(dir / "model.ckpt", run.net);
    std::ofstream os(dir / "train_log.jsonl");
    if (!os) {
        throw std::runtime_error("cannot write " + (dir / "train_log.jsonl").string());
    }
    for (const auto& l : run.log) {
        os << step_log_jsonl(l) << '\n';
    }
}

TrainedRun load_run(const std::filesystem::path& dir) {
    RunConfig cfg = load_config(dir / "config.json");
    Vocabulary vocab = Vocabulary::load(dir / "vocab.txt");
    Transformer<float> net = load_checkpoint(dir / "model.ckpt");
    if (net.config().vocab_size != vocab.size()) {
        throw std::runtime_error("load_run: checkpoint vocabulary size " + std::to_string(net.config().vocab_size) +
                                 " does not match vocab.txt (" + std::to_string(vocab.size()) + ")");
    }
    return TrainedRun{std::move(cfg), std::move(vocab), std::move(net), {}};
}

void dump_augmented(const RunConfig& cfg, std::size_t count, const std::filesystem::path& path) {
    validate(cfg);
    const TaskBundle bundle = make_task(cfg.task);
    const auto corpus = training_corpus(cfg, bundle.task);
    const auto sampler = make_sampler(cfg, bundle, corpus);
    std::ofstream os(path);
    if (!os) {
        throw std::runtime_error("cannot write " + path.string());
    }
    // Same streams as the first training step, so the first batch_size draws
    // are exactly what step 0 sees.
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(derive_seed(cfg.optimizer.seed, {0, static_cast<std::uint64_t>(i)}));
        const InfillExample ex = sampler(rng);
        const TrainingSample s = make_training_sample(ex, cfg.augment, cfg.schedule, bundle.vocab, rng);
        const auto& r = s.z0.active;
        os << "z0\t" << show(std::span<const TokenId>(s.z0.tokens).subspan(0, r.begin), bundle.vocab) << " | "
           << show(std::span<const TokenId>(s.z0.tokens).subspan(r.begin, r.size()), bundle.vocab) << " | "
           << show(std::span<const TokenId>(s.z0.tokens).subspan(r.end), bundle.vocab) << '\n';
        os << "zt\t" << show(std::span<const TokenId>(s.zt.tokens).subspan(r.begin, r.size()), bundle.vocab)
           << "\tt=" << s.zt.time << '\n';
    }
}

GenerationConfig Ablation::apply(GenerationConfig cfg) const {
    cfg.expand_enabled = cfg.expand_enabled && expand;
    cfg.delete_enabled = cfg.delete_enabled && del;
    cfg.broadcasting = cfg.broadcasting && broadcast;
    return cfg;
}

std::string Ablation::id() const {
    std::string out;
    auto add = [&](bool on, const char* name) {
        if (!on) {
            out += out.empty() ? "" : "+";
            out += name;
        }
    };
    add(expand, "no-expand");
    add(del, "no-delete");
    add(broadcast, "no-broadcast");
    return out.empty() ? "full" : out;
}

const LengthRow* EvalReport::find(const std::string& label) const {
    for (const auto& r : rows) {
        if (r.label == label) {
            return &r;
        }
    }
    return nullptr;
}

std::size_t EvalReport::total_aborted() const {
    std::size_t n = 0;
    for (const auto& r : rows) {
        if (r.label != "Avg.") {
            n += r.aborted;
        }
    }
    return n;
}

EvalReport evaluate(const Denoiser& model, const TaskBundle& bundle, const std::vector<EvalItem>& items,
                    const GenerationConfig& gen, const EvalConfig& eval, const std::string& ablation_id) {
    if (eval.lengths.empty()) {
        throw std::invalid_argument("evaluate: no init mask lengths");
    }
    gen.validate();
    struct Job {
        std::string label;
        std::size_t init_len;  // 0: per-item true middle length
        std::uint64_t row_key;
    };
    std::vector<Job> jobs;
    for (auto len : eval.lengths) {
        jobs.push_back({std::to_string(len), len, len});
    }
    if (eval.oracle) {
        jobs.push_back({"Oracle", 0, kOracleRow});
    }

    std::vector<std::vector<PromptResult>> results(jobs.size(), std::vector<PromptResult>(items.size()));
    const std::size_t total = jobs.size() * items.size();
    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t t = first; t < total; t += stride) {
            const std::size_t j = t / items.size();
            const std::size_t k = t % items.size();
            const auto& item = items[k];
            const std::size_t init_len = jobs[j].init_len ? jobs[j].init_len : std::max<std::size_t>(1, item.split.size());
            GenerationConfig g = gen;
            g.init_mask_len = init_len;
            g.max_len = std::max(g.max_len, init_len);
            results[j][k] = run_prompt(model, bundle, item, init_len, g,
                                       derive_seed(eval.seed, {jobs[j].row_key, static_cast<std::uint64_t>(k)}));
        }
    };
    const auto threads = static_cast<std::size_t>(std::max(1, eval.threads));
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr error;
        std::mutex error_mutex;
        for (std::size_t i = 0; i < threads; ++i) {
            pool.emplace_back([&, i] {
                try {
                    work(i, threads);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool) {
            th.join();
        }
        if (error) {
            std::rethrow_exception(error);
        }
    }

    EvalReport report;
    report.ablation = ablation_id;
    LengthRow avg;
    avg.label = "Avg.";
    avg.prompts = items.size();
    const auto n = static_cast<double>(eval.lengths.size());
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        LengthRow row = aggregate(jobs[j].label, jobs[j].init_len, results[j]);
        std::vector<Tokens> outs;
        outs.reserve(items.size());
        for (auto& r : results[j]) {
            outs.push_back(std::move(r.middle));
        }
        if (j < eval.lengths.size()) {
            avg.exact_match += row.exact_match / n;
            avg.validator_pass += row.validator_pass / n;
            avg.mean_steps += row.mean_steps / n;
            avg.mean_expansions += row.mean_expansions / n;
            avg.mean_delete_steps += row.mean_delete_steps / n;
            avg.aborted += row.aborted;
        }
        if (j == eval.lengths.size()) {
            report.rows.push_back(avg);
            report.outputs.emplace_back();
        }
        report.rows.push_back(row);
        report.outputs.push_back(std::move(outs));
    }
    if (!eval.oracle) {
        report.rows.push_back(avg);
        report.outputs.emplace_back();
    }
    return report;
}

std::string render_table(const EvalReport& report) {
    std::ostringstream os;
    os << "ablation: " << report.ablation << "  (Avg. = unweighted mean over init lengths)\n";
    os << "init_len   exact   valid   steps  expand  delete  aborted\n";
    for (const auto& r : report.rows) {
        char line[160];
        std::snprintf(line, sizeof line, "%-8s  %6.1f  %6.1f  %6.2f  %6.2f  %6.2f  %7zu\n", r.label.c_str(),
                      100.0 * r.exact_match, 100.0 * r.validator_pass, r.mean_steps, r.mean_expansions,
                      r.mean_delete_steps, r.aborted);
        os << line;
    }
    return os.str();
}

std::string render_jsonl(const EvalReport& report) {
    std::string out = json{{"type", "header"}, {"ablation", report.ablation}, {"avg", "unweighted mean over init lengths"}}
                          .dump() +
                      "\n";
    for (const auto& r : report.rows) {
        out += row_json(r, report.ablation).dump() + "\n";
    }
    return out;
}

RunConfig sweep_point(const RunConfig& base, const std::string& param, double value) {
    RunConfig cfg = base;
    if (param == "p_merge") {
        cfg.augment.scheduler.p_merge = value;
    } else if (param == "mix_ratio") {
        cfg.augment.scheduler.kind = MergeKind::Mixture;
        cfg.augment.scheduler.static_weight = value;
        cfg.augment.scheduler.dynamic_weight = 1.0 - value;
    } else {
        throw std::invalid_argument("sweep: unknown parameter '" + param + "' (expected p_merge or mix_ratio)");
    }
    return cfg;
}

SweepResult run_sweep(const RunConfig& base, const SweepSpec& spec,
                      const std::function<void(std::size_t, const TrainedRun&)>& on_trained) {
    if (spec.values.empty()) {
        throw std::invalid_argument("sweep: empty grid");
    }
    for (double v : spec.values) {
        validate(sweep_point(base, spec.param, v));
    }
    SweepResult out{spec, {}};
    const TaskBundle bundle = make_task(base.task);
    const auto items = eval_items(base, bundle);
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
        const RunConfig cfg = sweep_point(base, spec.param, spec.values[i]);
        TrainedRun run = run_training(cfg);
        if (on_trained) {
            on_trained(i, run);
        }
        TinyTransformer model(std::move(run.net));
        out.reports.push_back(evaluate(model, bundle, items, cfg.generation, cfg.eval,
                                       spec.param + "=" + fmt("%g", spec.values[i])));
    }
    return out;
}

std::string render_sweep(const SweepResult& result) {
    std::ostringstream os;
    os << "exact match (%) by " << result.spec.param << "  (Avg. = unweighted mean over init lengths)\n";
    os << "init_len";
    for (double v : result.spec.values) {
        os << fmt("%9g", v);
    }
    os << '\n';
    if (!result.reports.empty()) {
        for (const auto& row : result.reports.front().rows) {
            char label[32];
            std::snprintf(label, sizeof label, "%-8s", row.label.c_str());
            os << label;
            for (const auto& rep : result.reports) {
                const LengthRow* r = rep.find(row.label);
                os << fmt("%9.1f", r ? 100.0 * r->exact_match : 0.0);
            }
            os << '\n';
        }
    }
    return os.str();
}

std::string render_sweep_jsonl(const SweepResult& result) {
    std::string out;
    for (std::size_t i = 0; i < result.reports.size(); ++i) {
        for (const auto& r : result.reports[i].rows) {
            json j = row_json(r, result.reports[i].ablation);
            j["param"] = result.spec.param;
            j["value"] = result.spec.values[i];
            out += j.dump() + "\n";
        }
    }
    return out;
}

GenerationState trace_prompt(const Denoiser& model, const InfillExample& example, std::size_t init_mask_len,
                             const GenerationConfig& gen, const Vocabulary& vocab, std::uint64_t seed) {
    if (init_mask_len == 0) {
        GenerationState s;
        s.sequence = example.leading_context();
        s.active = {s.sequence.size(), s.sequence.size()};
        s.sequence.insert(s.sequence.end(), example.suffix.tokens.begin(), example.suffix.tokens.end());
        s.record_trace = true;
        return s;
    }
    GenerationConfig g = gen;
    g.init_mask_len = init_mask_len;
    g.max_len = std::max(g.max_len, init_mask_len);
    Rng rng(seed);
    return generate(assemble_prompt(example, init_mask_len, vocab), model, g, vocab, rng, true);
}

std::string render_storyboard(const GenerationState& state, const Vocabulary& vocab) {
    std::ostringstream os;
    if (!state.trajectory.empty()) {
        const std::span<const TokenId> seq(state.sequence);
        os << "prefix: " << show(seq.subspan(0, state.active.begin), vocab) << '\n';
        os << "suffix: " << show(seq.subspan(state.active.end), vocab) << '\n';
    }
    for (const auto& rec : state.trajectory) {
        os << "step " << rec.step << "  expansions=" << rec.expansions_done << " delete_steps=" << rec.delete_steps
           << '\n';
        os << "  before: " << show(rec.before, vocab) << '\n';
        for (const auto& ev : rec.events) {
            os << "  " << event_name(ev.kind) << " @" << ev.position;
            if (ev.kind == EventKind::Fill) {
                os << ' ' << vocab.symbol(ev.token);
            } else if (ev.kind == EventKind::Broadcast || ev.kind == EventKind::Delete) {
                os << " removed " << ev.removed;
            }
            os << '\n';
        }
        os << "  after:  " << show(rec.after, vocab) << '\n';
    }
    return os.str();
}

std::string render_trace_jsonl(const GenerationState& state, const Vocabulary& vocab, const std::string& label) {
    std::string out;
    for (const auto& rec : state.trajectory) {
        json events = json::array();
        json positions = json::array();
        json ids = json::array();
        for (const auto& ev : rec.events) {
            json e = {{"kind", event_name(ev.kind)}, {"position", ev.position}};
            if (ev.kind != EventKind::Skipped) {
                e["token"] = vocab.symbol(ev.token);
                positions.push_back(ev.position);
                ids.push_back(ev.token);
            }
            if (ev.kind == EventKind::Delete || ev.kind == EventKind::Broadcast) {
                e["removed"] = ev.removed;
            }
            events.push_back(std::move(e));
        }
        json j = {{"label", label},
                  {"step", rec.step},
                  {"region_before", show(rec.before, vocab)},
                  {"region_after", show(rec.after, vocab)},
                  {"positions", std::move(positions)},
                  {"token_ids", std::move(ids)},
                  {"events", std::move(events)},
                  {"expansions_done", rec.expansions_done},
                  {"delete_steps", rec.delete_steps}};
        out += j.dump() + "\n";
    }
    return out;
}

}  // namespace vlmd

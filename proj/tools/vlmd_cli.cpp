#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vlmd/checkpoint.hpp"
#include "vlmd/harness.hpp"

using namespace vlmd;

namespace {

enum Exit { kOk = 0, kError = 1, kConfig = 2, kInvariant = 3 };

// Applies "a.b.c=value" overrides; value is parsed as JSON, falling back to a
// plain string.
RunConfig with_overrides(nlohmann::json j, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) {
            throw ConfigError({o + ": override must look like field.path=value"});
        }
        std::string ptr = "/" + o.substr(0, eq);
        std::replace(ptr.begin(), ptr.end(), '.', '/');
        const std::string text = o.substr(eq + 1);
        nlohmann::json value;
        try {
            value = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error&) {
            value = text;
        }
        j[nlohmann::json::json_pointer(ptr)] = value;
    }
    return config_from_json(j.dump());
}

RunConfig read_config(const std::string& path, const std::vector<std::string>& overrides) {
    nlohmann::json j = nlohmann::json::object();
    if (!path.empty()) {
        std::ifstream is(path);
        if (!is) {
            throw ConfigError({"<file>: cannot read " + path});
        }
        try {
            j = nlohmann::json::parse(is);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError({std::string("<root>: ") + e.what()});
        }
    }
    return with_overrides(std::move(j), overrides);
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream os(path);
    if (!os) {
        throw std::runtime_error("cannot write " + path);
    }
    os << text;
}

std::vector<EvalItem> load_items(const std::string& eval_set, const RunConfig& cfg, const TaskBundle& bundle) {
    if (!eval_set.empty()) {
        return read_eval_set(eval_set, bundle.vocab);
    }
    return eval_items(cfg, bundle);
}

struct AblationFlags {
    bool no_expand = false;
    bool no_delete = false;
    bool no_broadcast = false;

    void attach(CLI::App* cmd) {
        cmd->add_flag("--no-expand", no_expand, "Disable [expand] at inference");
        cmd->add_flag("--no-delete", no_delete, "Disable [delete] at inference");
        cmd->add_flag("--no-broadcast", no_broadcast, "Disable deletion broadcasting");
    }
    Ablation ablation() const { return Ablation{!no_expand, !no_delete, !no_broadcast}; }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Variable-length masked diffusion: train, evaluate and inspect toy infilling models"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string out;
    std::string run_dir;
    std::string eval_set;
    std::string label;
    std::string trace_path;
    std::vector<std::size_t> lengths;
    int threads = 0;
    bool greedy = false;
    AblationFlags flags;

    auto* train = app.add_subcommand("train", "Train a model and write a run directory");
    std::size_t dump_count = 0;
    std::string dump_path;
    train->add_option("-c,--config", config_path, "JSON config (defaults apply to missing keys)");
    train->add_option("--set", overrides, "Override a field, e.g. optimizer.steps=200");
    train->add_option("-o,--out", out, "Run directory")->required();
    train->add_option("--dump-augmented", dump_count, "Also write this many (z0, z_t) training draws");
    train->add_option("--dump-path", dump_path, "Where to write them (default <out>/augmented.txt)");

    auto* eval = app.add_subcommand("eval", "Evaluate a run over init mask lengths");
    eval->add_option("-r,--run", run_dir, "Run directory")->required();
    eval->add_option("--eval-set", eval_set, "Eval set file (default: regenerate from the run config)");
    eval->add_option("--lengths", lengths, "Init mask lengths")->delimiter(',');
    eval->add_option("--threads", threads, "Worker threads");
    eval->add_option("--label", label, "Ablation id written to the report (default derived from flags)");
    eval->add_flag("--greedy", greedy, "Argmax decoding");
    eval->add_option("--set", overrides, "Override a field of the run config (generation.* or eval.*)");
    eval->add_option("-o,--out", out, "JSONL report path (table goes to stdout)");
    eval->add_option("--trace", trace_path, "Write per-step JSONL records for the first prompt at each length");
    flags.attach(eval);

    auto* sweep = app.add_subcommand("sweep", "Train and evaluate over a grid of one augmentation knob");
    std::string param;
    std::vector<double> values;
    std::string sweep_runs;
    sweep->add_option("-c,--config", config_path, "Base JSON config");
    sweep->add_option("--set", overrides, "Override a field of the base config");
    sweep->add_option("--param", param, "p_merge or mix_ratio")->required();
    sweep->add_option("--values", values, "Grid values")->delimiter(',');
    sweep->add_option("-o,--out", out, "JSONL report path");
    sweep->add_option("--runs", sweep_runs, "Also save each trained run under this directory");

    auto* trace = app.add_subcommand("trace", "Write the step-by-step trajectory of one prompt");
    std::size_t index = 0;
    std::size_t init_len = 8;
    std::uint64_t seed = 0;
    trace->add_option("-r,--run", run_dir, "Run directory")->required();
    trace->add_option("--eval-set", eval_set, "Eval set file (default: regenerate from the run config)");
    trace->add_option("--index", index, "Eval item index");
    trace->add_option("--init-len", init_len, "Initial mask length (0 gives an empty storyboard)");
    trace->add_option("--seed", seed, "Sampling seed");
    trace->add_flag("--greedy", greedy, "Argmax decoding");
    trace->add_option("--set", overrides, "Override a field of the run config");
    trace->add_option("-o,--out", out, "Storyboard path (default stdout)");
    trace->add_option("--trace", trace_path, "Also write per-step JSONL records here");
    flags.attach(trace);

    auto* gen = app.add_subcommand("gen-corpus", "Write the training corpus and eval set for a config");
    gen->add_option("-c,--config", config_path, "JSON config");
    gen->add_option("--set", overrides, "Override a field");
    gen->add_option("-o,--out", out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            const RunConfig cfg = read_config(config_path, overrides);
            std::filesystem::create_directories(out);
            if (dump_count > 0) {
                dump_augmented(cfg, dump_count, dump_path.empty() ? std::filesystem::path(out) / "augmented.txt"
                                                                  : std::filesystem::path(dump_path));
            }
            const int every = std::max(1, cfg.optimizer.steps / 20);
            const TrainedRun run = run_training(cfg, [&](const StepLog& l) {
                if (l.step % every == 0 || l.step + 1 == cfg.optimizer.steps) {
                    std::cerr << step_log_jsonl(l) << '\n';
                }
            });
            save_run(out, run);
            return kOk;
        }

        if (gen->parsed()) {
            const RunConfig cfg = read_config(config_path, overrides);
            const TaskBundle bundle = make_task(cfg.task);
            std::filesystem::create_directories(out);
            write_corpus(std::filesystem::path(out) / "corpus.txt", training_corpus(cfg, bundle.task));
            write_eval_set(std::filesystem::path(out) / "eval.tsv", eval_items(cfg, bundle), bundle.vocab);
            bundle.vocab.save(std::filesystem::path(out) / "vocab.txt");
            return kOk;
        }

        if (sweep->parsed()) {
            const RunConfig cfg = read_config(config_path, overrides);
            const SweepResult result = run_sweep(cfg, SweepSpec{param, values}, [&](std::size_t i, const TrainedRun& r) {
                std::cerr << "trained grid point " << i + 1 << "/" << values.size() << '\n';
                if (!sweep_runs.empty()) {
                    save_run(std::filesystem::path(sweep_runs) / ("point" + std::to_string(i)), r);
                }
            });
            std::cout << render_sweep(result);
            if (!out.empty()) {
                write_text(out, render_sweep_jsonl(result));
            }
            std::size_t aborted = 0;
            for (const auto& r : result.reports) {
                aborted += r.total_aborted();
            }
            return aborted ? kInvariant : kOk;
        }

        TrainedRun run = load_run(run_dir);
        if (!overrides.empty()) {
            run.config = with_overrides(nlohmann::json::parse(to_json(run.config)), overrides);
        }
        const RunConfig& cfg = run.config;
        const TaskBundle bundle = make_task(cfg.task);
        if (!(bundle.vocab == run.vocab)) {
            throw std::runtime_error("run vocabulary does not match its task config");
        }
        const auto items = load_items(eval_set, cfg, bundle);
        GenerationConfig g = flags.ablation().apply(cfg.generation);
        g.greedy = g.greedy || greedy;
        TinyTransformer model(std::move(run.net));

        if (eval->parsed()) {
            EvalConfig ec = cfg.eval;
            if (!lengths.empty()) {
                ec.lengths = lengths;
            }
            if (threads > 0) {
                ec.threads = threads;
            }
            const EvalReport report = evaluate(model, bundle, items, g, ec, label.empty() ? flags.ablation().id() : label);
            std::cout << render_table(report);
            if (!out.empty()) {
                write_text(out, render_jsonl(report));
            }
            if (!trace_path.empty() && !items.empty()) {
                std::string records;
                for (auto len : ec.lengths) {
                    const GenerationState s = trace_prompt(model, items.front().example(), len, g, bundle.vocab,
                                                           derive_seed(ec.seed, {len, 0}));
                    records += render_trace_jsonl(s, bundle.vocab, std::to_string(len));
                }
                write_text(trace_path, records);
            }
            if (report.total_aborted() > 0) {
                std::cerr << "error: " << report.total_aborted() << " generations hit the step cap\n";
                return kInvariant;
            }
            return kOk;
        }

        if (trace->parsed()) {
            if (index >= items.size()) {
                throw std::out_of_range("trace: --index " + std::to_string(index) + " past the eval set (" +
                                        std::to_string(items.size()) + " items)");
            }
            const GenerationState s = trace_prompt(model, items[index].example(), init_len, g, bundle.vocab, seed);
            write_text(out, render_storyboard(s, bundle.vocab));
            if (!trace_path.empty()) {
                write_text(trace_path, render_trace_jsonl(s, bundle.vocab, std::to_string(init_len)));
            }
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kConfig;
    } catch (const GenerationAborted& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvariant;
    } catch (const std::logic_error& e) {
        // invalid_argument and out_of_range are usage errors, not broken invariants.
        if (dynamic_cast<const std::invalid_argument*>(&e) || dynamic_cast<const std::out_of_range*>(&e) ||
            dynamic_cast<const std::length_error*>(&e)) {
            std::cerr << "error: " << e.what() << '\n';
            return kError;
        }
        std::cerr << "invariant violation: " << e.what() << '\n';
        return kInvariant;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kError;
    }
    return kOk;
}

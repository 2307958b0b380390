#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "vlmd/harness.hpp"
#include "vlmd/loss.hpp"

namespace py = pybind11;
using namespace vlmd;

namespace {

py::dict row_dict(const LengthRow& r) {
    py::dict d;
    d["label"] = r.label;
    d["init_mask_len"] = r.init_mask_len;
    d["prompts"] = r.prompts;
    d["exact_match"] = r.exact_match;
    d["validator_pass"] = r.validator_pass;
    d["mean_steps"] = r.mean_steps;
    d["mean_expansions"] = r.mean_expansions;
    d["mean_delete_steps"] = r.mean_delete_steps;
    d["aborted"] = r.aborted;
    return d;
}

RunConfig parse_config(const std::string& text) { return config_from_json(text.empty() ? "{}" : text); }

// One (z0, z_t) draw for a clean middle between a prefix and a suffix.
py::dict augment(const std::string& prefix, const std::string& middle, const std::string& suffix,
                 const std::string& config, double t, std::uint64_t seed) {
    const RunConfig cfg = parse_config(config);
    const TaskBundle bundle = make_task(cfg.task);
    const auto& v = bundle.vocab;
    InfillExample ex;
    ex.prefix.tokens = v.encode(prefix);
    ex.middle.tokens = v.encode(middle);
    ex.suffix.tokens = v.encode(suffix);
    Rng rng(seed);
    const TrainingSample s = t < 0 ? make_training_sample(ex, cfg.augment, cfg.schedule, v, rng)
                                   : make_training_sample(ex, t, cfg.augment, cfg.schedule, v, rng);
    const TokenWeights w = token_weights(s.z0.tokens, s.zt, cfg.loss, v);
    py::dict d;
    d["z0"] = v.to_symbols(s.z0.tokens);
    d["zt"] = v.to_symbols(s.zt.tokens);
    d["region"] = py::make_tuple(s.z0.active.begin, s.z0.active.end);
    d["t"] = s.zt.time;
    d["weights"] = w.weights;
    d["n_mask"] = w.n_mask;
    d["n_delete"] = w.n_delete;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Variable-length masked diffusion on toy infilling tasks";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<GenerationAborted>(m, "GenerationAborted", PyExc_RuntimeError);

    m.def("default_config", [] { return to_json(RunConfig{}); }, "Default run config as JSON text.");
    m.def(
        "normalize_config", [](const std::string& text) { return to_json(parse_config(text)); }, py::arg("config"),
        "Fill defaults and validate; raises ConfigError naming every bad field.");

    m.def("augment", &augment, py::arg("prefix"), py::arg("middle"), py::arg("suffix"), py::arg("config") = "",
          py::arg("t") = -1.0, py::arg("seed") = 0,
          "Sample one training pair. Symbols are space separated; t < 0 draws t from the schedule.");

    m.def(
        "gen_corpus",
        [](const std::string& config, const std::filesystem::path& out) {
            const RunConfig cfg = parse_config(config);
            const TaskBundle bundle = make_task(cfg.task);
            std::filesystem::create_directories(out);
            write_corpus(out / "corpus.txt", training_corpus(cfg, bundle.task));
            write_eval_set(out / "eval.tsv", eval_items(cfg, bundle), bundle.vocab);
            bundle.vocab.save(out / "vocab.txt");
        },
        py::arg("config"), py::arg("out"));

    m.def(
        "train",
        [](const std::string& config, const std::filesystem::path& out, py::object on_step) {
            const RunConfig cfg = parse_config(config);
            std::optional<TrainedRun> run;
            {
                py::gil_scoped_release release;
                run = run_training(cfg, [&](const StepLog& l) {
                    if (!on_step.is_none()) {
                        py::gil_scoped_acquire acquire;
                        on_step(l.step, l.loss);
                    }
                });
            }
            save_run(out, *run);
            py::list losses;
            for (const auto& l : run->log) {
                losses.append(l.loss);
            }
            return losses;
        },
        py::arg("config"), py::arg("out"), py::arg("on_step") = py::none(),
        "Train and write a run directory; returns the per-step losses.");

    m.def(
        "evaluate",
        [](const std::filesystem::path& run_dir, std::vector<std::size_t> lengths, bool expand, bool del,
           bool broadcast, int threads) {
            TrainedRun run = load_run(run_dir);
            const TaskBundle bundle = make_task(run.config.task);
            const auto items = eval_items(run.config, bundle);
            EvalConfig ec = run.config.eval;
            if (!lengths.empty()) {
                ec.lengths = std::move(lengths);
            }
            ec.threads = threads;
            const Ablation ab{expand, del, broadcast};
            TinyTransformer model(std::move(run.net));
            EvalReport report;
            {
                py::gil_scoped_release release;
                report = evaluate(model, bundle, items, ab.apply(run.config.generation), ec, ab.id());
            }
            py::list rows;
            for (const auto& r : report.rows) {
                rows.append(row_dict(r));
            }
            return rows;
        },
        py::arg("run_dir"), py::arg("lengths") = std::vector<std::size_t>{}, py::arg("expand") = true,
        py::arg("delete") = true, py::arg("broadcast") = true, py::arg("threads") = 1,
        "Evaluate a run directory; one dict per row (lengths, Avg., Oracle).");

    m.def(
        "trace",
        [](const std::filesystem::path& run_dir, std::size_t index, std::size_t init_len, std::uint64_t seed) {
            TrainedRun run = load_run(run_dir);
            const TaskBundle bundle = make_task(run.config.task);
            const auto items = eval_items(run.config, bundle);
            if (index >= items.size()) {
                throw py::index_error("trace: index past the eval set");
            }
            TinyTransformer model(std::move(run.net));
            const GenerationState s =
                trace_prompt(model, items[index].example(), init_len, run.config.generation, bundle.vocab, seed);
            return py::make_tuple(render_storyboard(s, bundle.vocab), render_trace_jsonl(s, bundle.vocab));
        },
        py::arg("run_dir"), py::arg("index") = 0, py::arg("init_len") = 8, py::arg("seed") = 0,
        "Returns (storyboard text, JSONL step records).");
}

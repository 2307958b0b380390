#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vlmd/config.hpp"
#include "vlmd/engine.hpp"
#include "vlmd/tasks.hpp"
#include "vlmd/trainer.hpp"
#include "vlmd/transformer.hpp"
#include "vlmd/vocab.hpp"

namespace vlmd {

/// Task plus the vocabulary built from its symbols.
struct TaskBundle {
    SyntheticTask task;
    Vocabulary vocab;
};

TaskBundle make_task(const TaskParams& params);

/// cfg.model with vocab_size filled in.
ModelConfig model_config(const RunConfig& cfg, const Vocabulary& vocab);

std::vector<Symbols> training_corpus(const RunConfig& cfg, const SyntheticTask& task);
std::vector<EvalItem> eval_items(const RunConfig& cfg, const TaskBundle& bundle);

/// Draws a corpus line and splits it according to cfg.corpus.split.
ExampleSampler make_sampler(const RunConfig& cfg, const TaskBundle& bundle, const std::vector<Symbols>& corpus);

struct TrainedRun {
    RunConfig config;
    Vocabulary vocab;
    Transformer<float> net;
    std::vector<StepLog> log;
};

/// Deterministic in cfg. Throws ConfigError or TrainingDiverged.
TrainedRun run_training(const RunConfig& cfg, const std::function<void(const StepLog&)>& on_step = {});

/// Run directory layout: config.json, vocab.txt, model.ckpt, train_log.jsonl.
void save_run(const std::filesystem::path& dir, const TrainedRun& run);
/// Loads config, vocabulary and checkpoint; the log is left empty.
TrainedRun load_run(const std::filesystem::path& dir);

std::string step_log_jsonl(const StepLog& log);

/// Writes `count` (z0, z_t) training draws as text, two lines per draw.
void dump_augmented(const RunConfig& cfg, std::size_t count, const std::filesystem::path& path);

/// Inference-time ablations. Uniform loss weighting is a training-time
/// setting and lives in RunConfig::loss.
struct Ablation {
    bool expand = true;
    bool del = true;
    bool broadcast = true;

    GenerationConfig apply(GenerationConfig cfg) const;
    /// "full", "no-expand", "no-delete+no-broadcast", ...
    std::string id() const;
};

struct LengthRow {
    std::string label;             // init length, "Avg." or "Oracle"
    std::size_t init_mask_len = 0;  // 0 for Avg. and Oracle
    std::size_t prompts = 0;
    double exact_match = 0.0;
    double validator_pass = 0.0;
    double mean_steps = 0.0;
    double mean_expansions = 0.0;
    double mean_delete_steps = 0.0;
    std::size_t aborted = 0;
};

struct EvalReport {
    std::string ablation;
    std::vector<LengthRow> rows;
    // outputs[r][k]: generated middle for prompt k under rows[r] (Avg. has none).
    std::vector<std::vector<Tokens>> outputs;

    const LengthRow* find(const std::string& label) const;
    std::size_t total_aborted() const;
};

/// One row per length in eval.lengths, then the unweighted Avg. of those
/// rows, then the Oracle row (init length = true middle length) when
/// eval.oracle is set. Prompt k of a row is seeded from (eval.seed, row, k),
/// so reports do not depend on eval.threads.
EvalReport evaluate(const Denoiser& model, const TaskBundle& bundle, const std::vector<EvalItem>& items,
                    const GenerationConfig& gen, const EvalConfig& eval, const std::string& ablation_id);

std::string render_table(const EvalReport& report);
std::string render_jsonl(const EvalReport& report);

/// Grid over one augmentation knob: "p_merge" (static probability) or
/// "mix_ratio" (static share of the scheduler mixture; 1 is pure static,
/// 0 pure dynamic-inverse).
struct SweepSpec {
    std::string param;
    std::vector<double> values;
};

RunConfig sweep_point(const RunConfig& base, const std::string& param, double value);

struct SweepResult {
    SweepSpec spec;
    std::vector<EvalReport> reports;  // one per grid value
};

/// Trains and evaluates every grid point. Throws std::invalid_argument on an
/// empty grid or unknown parameter.
SweepResult run_sweep(const RunConfig& base, const SweepSpec& spec,
                      const std::function<void(std::size_t, const TrainedRun&)>& on_trained = {});

/// Rows: eval labels; columns: grid values; cells: exact match.
std::string render_sweep(const SweepResult& result);
std::string render_sweep_jsonl(const SweepResult& result);

/// Generates one prompt with tracing. An init length of zero gives an empty
/// trajectory.
GenerationState trace_prompt(const Denoiser& model, const InfillExample& example, std::size_t init_mask_len,
                             const GenerationConfig& gen, const Vocabulary& vocab, std::uint64_t seed);

/// Human-readable per-step storyboard; empty for an empty trajectory.
std::string render_storyboard(const GenerationState& state, const Vocabulary& vocab);

/// One JSON record per step: label, step, region before/after, applied
/// positions and token ids, events and counters.
std::string render_trace_jsonl(const GenerationState& state, const Vocabulary& vocab, const std::string& label = "");

}  // namespace vlmd

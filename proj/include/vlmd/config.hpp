#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "vlmd/engine.hpp"
#include "vlmd/loss.hpp"
#include "vlmd/noise.hpp"
#include "vlmd/tasks.hpp"
#include "vlmd/trainer.hpp"
#include "vlmd/transformer.hpp"

namespace vlmd {

enum class SplitMode {
    Uniform,  // fim_split over the whole solution
    Unique,   // task's unique-middle split (falls back to uniform)
    Mixed,    // Unique with probability unique_fraction, else Uniform
};

struct CorpusConfig {
    std::size_t train_count = 2000;
    std::size_t eval_count = 200;
    std::uint64_t seed = 11;
    SplitMode split = SplitMode::Uniform;
    double unique_fraction = 0.5;
};

struct EvalConfig {
    std::vector<std::size_t> lengths = {4, 8, 16, 32, 64};
    bool oracle = true;
    std::uint64_t seed = 5;
    int threads = 1;
};

/// Everything a run depends on. Serializes to and from JSON.
struct RunConfig {
    TaskParams task;
    CorpusConfig corpus;
    AugmentConfig augment;
    NoiseSchedule schedule;
    WeightPolicy loss;
    ModelConfig model;  // vocab_size is filled in from the task
    OptimizerConfig optimizer;
    GenerationConfig generation;
    EvalConfig eval;
};

/// Every validation failure, one "field.path: message" per entry.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

std::string to_json(const RunConfig& cfg, int indent = 2);
/// Missing keys keep their defaults; unknown keys and type errors are
/// reported as ConfigError entries.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& cfg);

/// Throws ConfigError listing every problem.
void validate(const RunConfig& cfg);

const char* to_string(SplitMode m);
const char* to_string(MergeKind k);
const char* to_string(WeightMode m);

}  // namespace vlmd

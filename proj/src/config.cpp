#include "vlmd/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace vlmd {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
        out += "\n  " + s;
    }
    return out;
}

SplitMode split_from(const std::string& s) {
    if (s == "uniform") return SplitMode::Uniform;
    if (s == "unique") return SplitMode::Unique;
    if (s == "mixed") return SplitMode::Mixed;
    throw std::invalid_argument("expected one of uniform|unique|mixed");
}

MergeKind merge_from(const std::string& s) {
    if (s == "static") return MergeKind::Static;
    if (s == "dynamic-inverse") return MergeKind::DynamicInverse;
    if (s == "mixture") return MergeKind::Mixture;
    throw std::invalid_argument("expected one of static|dynamic-inverse|mixture");
}

WeightMode weight_from(const std::string& s) {
    if (s == "balanced") return WeightMode::Balanced;
    if (s == "uniform") return WeightMode::Uniform;
    throw std::invalid_argument("expected one of balanced|uniform");
}

ConfidenceMeasure confidence_from(const std::string& s) {
    if (s == "neg-entropy") return ConfidenceMeasure::NegEntropy;
    if (s == "max-prob") return ConfidenceMeasure::MaxProb;
    throw std::invalid_argument("expected one of neg-entropy|max-prob");
}

const char* to_string(ConfidenceMeasure m) {
    return m == ConfidenceMeasure::NegEntropy ? "neg-entropy" : "max-prob";
}

json to_value(const RunConfig& c) {
    const auto& t = c.task;
    const auto& a = c.augment;
    const auto& o = c.optimizer;
    const auto& g = c.generation;
    return json{
        {"task",
         {{"kind", to_string(t.kind)},
          {"min_len", t.min_len},
          {"max_len", t.max_len},
          {"alphabet", t.alphabet},
          {"max_depth", t.max_depth},
          {"n_terms", t.n_terms},
          {"max_operand", t.max_operand},
          {"n_keys", t.n_keys},
          {"records", t.records},
          {"value_min", t.value_min},
          {"value_max", t.value_max},
          {"value_alphabet", t.value_alphabet},
          {"table_seed", t.table_seed}}},
        {"corpus",
         {{"train_count", c.corpus.train_count},
          {"eval_count", c.corpus.eval_count},
          {"seed", c.corpus.seed},
          {"split", to_string(c.corpus.split)},
          {"unique_fraction", c.corpus.unique_fraction}}},
        {"augment",
         {{"scheduler",
           {{"kind", to_string(a.scheduler.kind)},
            {"p_merge", a.scheduler.p_merge},
            {"inverse_scale", a.scheduler.inverse_scale},
            {"static_weight", a.scheduler.static_weight},
            {"dynamic_weight", a.scheduler.dynamic_weight}}},
          {"delete_max", a.delete_max},
          {"merge_pass_cap", a.merge_pass_cap},
          {"interleave_deletes", a.interleave_deletes}}},
        {"schedule", {{"kind", "linear"}, {"t_floor", c.schedule.t_floor}}},
        {"loss", {{"weighting", to_string(c.loss.mode)}}},
        {"model",
         {{"d_model", c.model.d_model},
          {"n_heads", c.model.n_heads},
          {"n_layers", c.model.n_layers},
          {"d_ff", c.model.d_ff},
          {"max_len", c.model.max_len}}},
        {"optimizer",
         {{"steps", o.steps},
          {"batch_size", o.batch_size},
          {"lr", o.lr},
          {"warmup_frac", o.warmup_frac},
          {"min_lr_frac", o.min_lr_frac},
          {"beta1", o.beta1},
          {"beta2", o.beta2},
          {"eps", o.eps},
          {"weight_decay", o.weight_decay},
          {"grad_clip", o.grad_clip},
          {"seed", o.seed}}},
        {"generation",
         {{"init_mask_len", g.init_mask_len},
          {"max_len", g.max_len},
          {"unmask_budget", g.unmask_budget},
          {"temperature", g.temperature},
          {"top_p", g.top_p},
          {"greedy", g.greedy},
          {"expansion_cap", g.expansion_cap},
          {"broadcasting", g.broadcasting},
          {"expand_enabled", g.expand_enabled},
          {"delete_enabled", g.delete_enabled},
          {"confidence", to_string(g.confidence)},
          {"step_cap", g.step_cap}}},
        {"eval",
         {{"lengths", c.eval.lengths},
          {"oracle", c.eval.oracle},
          {"seed", c.eval.seed},
          {"threads", c.eval.threads}}},
    };
}

// Overlays `user` onto `base`, reporting unknown keys and type mismatches.
void merge_checked(json& base, const json& user, const std::string& path, std::vector<std::string>& problems) {
    if (!user.is_object()) {
        problems.push_back((path.empty() ? std::string("<root>") : path) + ": expected an object");
        return;
    }
    for (const auto& [key, value] : user.items()) {
        const std::string field = path.empty() ? key : path + "." + key;
        if (!base.contains(key)) {
            problems.push_back(field + ": unknown key");
            continue;
        }
        json& slot = base[key];
        if (slot.is_object()) {
            merge_checked(slot, value, field, problems);
        } else if (slot.is_boolean() && !value.is_boolean()) {
            problems.push_back(field + ": expected a boolean");
        } else if (slot.is_string() && !value.is_string()) {
            problems.push_back(field + ": expected a string");
        } else if (slot.is_number_integer() && !value.is_number_integer()) {
            problems.push_back(field + ": expected an integer (got " + value.dump() + ")");
        } else if (slot.is_number_unsigned() && value.is_number_integer() && value.get<std::int64_t>() < 0) {
            problems.push_back(field + ": must be non-negative (got " + value.dump() + ")");
        } else if (slot.is_number_float() && !value.is_number()) {
            problems.push_back(field + ": expected a number");
        } else if (slot.is_array() &&
                   (!value.is_array() || !std::all_of(value.begin(), value.end(), [](const json& v) {
                       return v.is_number_integer() && v.get<std::int64_t>() >= 0;
                   }))) {
            problems.push_back(field + ": expected a list of non-negative integers");
        } else {
            slot = value;
        }
    }
}

template <typename E, typename F>
void read_enum(const json& j, const char* key, const std::string& field, E& out, F parse,
               std::vector<std::string>& problems) {
    try {
        out = parse(j.at(key).get<std::string>());
    } catch (const std::invalid_argument& e) {
        problems.push_back(field + ": " + e.what() + " (got \"" + j.at(key).get<std::string>() + "\")");
    }
}

RunConfig from_value(const json& j, std::vector<std::string>& problems) {
    RunConfig c;
    const auto& t = j.at("task");
    read_enum(t, "kind", "task.kind", c.task.kind, [](const std::string& s) { return task_kind_from_string(s); },
              problems);
    c.task.min_len = t.at("min_len");
    c.task.max_len = t.at("max_len");
    c.task.alphabet = t.at("alphabet");
    c.task.max_depth = t.at("max_depth");
    c.task.n_terms = t.at("n_terms");
    c.task.max_operand = t.at("max_operand");
    c.task.n_keys = t.at("n_keys");
    c.task.records = t.at("records");
    c.task.value_min = t.at("value_min");
    c.task.value_max = t.at("value_max");
    c.task.value_alphabet = t.at("value_alphabet");
    c.task.table_seed = t.at("table_seed");

    const auto& co = j.at("corpus");
    c.corpus.train_count = co.at("train_count");
    c.corpus.eval_count = co.at("eval_count");
    c.corpus.seed = co.at("seed");
    read_enum(co, "split", "corpus.split", c.corpus.split, split_from, problems);
    c.corpus.unique_fraction = co.at("unique_fraction");

    const auto& a = j.at("augment");
    const auto& s = a.at("scheduler");
    read_enum(s, "kind", "augment.scheduler.kind", c.augment.scheduler.kind, merge_from, problems);
    c.augment.scheduler.p_merge = s.at("p_merge");
    c.augment.scheduler.inverse_scale = s.at("inverse_scale");
    c.augment.scheduler.static_weight = s.at("static_weight");
    c.augment.scheduler.dynamic_weight = s.at("dynamic_weight");
    c.augment.delete_max = a.at("delete_max");
    c.augment.merge_pass_cap = a.at("merge_pass_cap");
    c.augment.interleave_deletes = a.at("interleave_deletes");

    if (j.at("schedule").at("kind") != "linear") {
        problems.push_back("schedule.kind: only \"linear\" is supported");
    }
    c.schedule.t_floor = j.at("schedule").at("t_floor");
    read_enum(j.at("loss"), "weighting", "loss.weighting", c.loss.mode, weight_from, problems);

    const auto& m = j.at("model");
    c.model.d_model = m.at("d_model");
    c.model.n_heads = m.at("n_heads");
    c.model.n_layers = m.at("n_layers");
    c.model.d_ff = m.at("d_ff");
    c.model.max_len = m.at("max_len");

    const auto& o = j.at("optimizer");
    c.optimizer.steps = o.at("steps");
    c.optimizer.batch_size = o.at("batch_size");
    c.optimizer.lr = o.at("lr");
    c.optimizer.warmup_frac = o.at("warmup_frac");
    c.optimizer.min_lr_frac = o.at("min_lr_frac");
    c.optimizer.beta1 = o.at("beta1");
    c.optimizer.beta2 = o.at("beta2");
    c.optimizer.eps = o.at("eps");
    c.optimizer.weight_decay = o.at("weight_decay");
    c.optimizer.grad_clip = o.at("grad_clip");
    c.optimizer.seed = o.at("seed");

    const auto& g = j.at("generation");
    c.generation.init_mask_len = g.at("init_mask_len");
    c.generation.max_len = g.at("max_len");
    c.generation.unmask_budget = g.at("unmask_budget");
    c.generation.temperature = g.at("temperature");
    c.generation.top_p = g.at("top_p");
    c.generation.greedy = g.at("greedy");
    c.generation.expansion_cap = g.at("expansion_cap");
    c.generation.broadcasting = g.at("broadcasting");
    c.generation.expand_enabled = g.at("expand_enabled");
    c.generation.delete_enabled = g.at("delete_enabled");
    read_enum(g, "confidence", "generation.confidence", c.generation.confidence, confidence_from, problems);
    c.generation.step_cap = g.at("step_cap");

    const auto& e = j.at("eval");
    c.eval.lengths = e.at("lengths").get<std::vector<std::size_t>>();
    c.eval.oracle = e.at("oracle");
    c.eval.seed = e.at("seed");
    c.eval.threads = e.at("threads");
    return c;
}

}  // namespace

const char* to_string(SplitMode m) {
    switch (m) {
        case SplitMode::Uniform:
            return "uniform";
        case SplitMode::Unique:
            return "unique";
        case SplitMode::Mixed:
            return "mixed";
    }
    return "?";
}

const char* to_string(MergeKind k) {
    switch (k) {
        case MergeKind::Static:
            return "static";
        case MergeKind::DynamicInverse:
            return "dynamic-inverse";
        case MergeKind::Mixture:
            return "mixture";
    }
    return "?";
}

const char* to_string(WeightMode m) { return m == WeightMode::Balanced ? "balanced" : "uniform"; }

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid configuration:" + join(problems)), problems_(std::move(problems)) {}

std::string to_json(const RunConfig& cfg, int indent) { return to_value(cfg).dump(indent); }

RunConfig config_from_json(const std::string& text) {
    json user;
    try {
        user = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("<root>: ") + e.what()});
    }
    json merged = to_value(RunConfig{});
    std::vector<std::string> problems;
    merge_checked(merged, user, "", problems);
    RunConfig c = from_value(merged, problems);
    if (!problems.empty()) {
        throw ConfigError(std::move(problems));
    }
    validate(c);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw ConfigError({"<file>: cannot read " + path.string()});
    }
    std::stringstream ss;
    ss << is.rdbuf();
    return config_from_json(ss.str());
}

void save_config(const std::filesystem::path& path, const RunConfig& cfg) {
    std::ofstream os(path);
    if (!os) {
        throw std::runtime_error("cannot write " + path.string());
    }
    os << to_json(cfg) << '\n';
}

void validate(const RunConfig& c) {
    std::vector<std::string> p;
    auto need = [&](bool ok, const std::string& field, const std::string& msg) {
        if (!ok) {
            p.push_back(field + ": " + msg);
        }
    };
    auto prob = [&](double v, const std::string& field) {
        need(v >= 0.0 && v <= 1.0, field, "must lie in [0, 1] (got " + std::to_string(v) + ")");
    };
    try {
        SyntheticTask task(c.task);
    } catch (const std::invalid_argument& e) {
        p.push_back(std::string("task: ") + e.what());
    }
    need(c.corpus.train_count >= 1, "corpus.train_count", "must be >= 1");
    need(c.corpus.eval_count >= 1, "corpus.eval_count", "must be >= 1");
    prob(c.corpus.unique_fraction, "corpus.unique_fraction");

    prob(c.augment.scheduler.p_merge, "augment.scheduler.p_merge");
    need(c.augment.scheduler.inverse_scale >= 0.0, "augment.scheduler.inverse_scale", "must be >= 0");
    need(c.augment.scheduler.static_weight >= 0.0, "augment.scheduler.static_weight", "must be >= 0");
    need(c.augment.scheduler.dynamic_weight >= 0.0, "augment.scheduler.dynamic_weight", "must be >= 0");
    need(c.augment.scheduler.static_weight + c.augment.scheduler.dynamic_weight > 0.0,
         "augment.scheduler.static_weight", "static and dynamic weights cannot both be zero");
    need(c.augment.delete_max >= 0, "augment.delete_max", "must be >= 0");
    need(c.augment.merge_pass_cap >= 0, "augment.merge_pass_cap", "must be >= 0");
    need(c.schedule.t_floor > 0.0 && c.schedule.t_floor <= 1.0, "schedule.t_floor", "must lie in (0, 1]");

    need(c.model.d_model > 0, "model.d_model", "must be positive");
    need(c.model.n_heads > 0 && c.model.d_model % std::max(1, c.model.n_heads) == 0, "model.n_heads",
         "must be positive and divide model.d_model");
    need(c.model.n_layers >= 0, "model.n_layers", "must be >= 0");
    need(c.model.d_ff > 0, "model.d_ff", "must be positive");
    need(c.model.max_len > 0, "model.max_len", "must be positive");

    need(c.optimizer.steps >= 0, "optimizer.steps", "must be >= 0");
    need(c.optimizer.batch_size >= 1, "optimizer.batch_size", "must be >= 1");
    need(c.optimizer.lr > 0.0, "optimizer.lr", "must be > 0");
    prob(c.optimizer.warmup_frac, "optimizer.warmup_frac");
    prob(c.optimizer.min_lr_frac, "optimizer.min_lr_frac");
    need(c.optimizer.beta1 >= 0.0 && c.optimizer.beta1 < 1.0, "optimizer.beta1", "must lie in [0, 1)");
    need(c.optimizer.beta2 >= 0.0 && c.optimizer.beta2 < 1.0, "optimizer.beta2", "must lie in [0, 1)");
    need(c.optimizer.eps > 0.0, "optimizer.eps", "must be > 0");
    need(c.optimizer.grad_clip >= 0.0, "optimizer.grad_clip", "must be >= 0");

    try {
        c.generation.validate();
    } catch (const std::invalid_argument& e) {
        p.push_back(e.what());
    }
    need(!c.eval.lengths.empty(), "eval.lengths", "must not be empty");
    for (auto len : c.eval.lengths) {
        need(len >= 1 && len <= c.generation.max_len, "eval.lengths",
             "every length must lie in [1, generation.max_len] (got " + std::to_string(len) + ")");
    }
    need(c.eval.threads >= 1, "eval.threads", "must be >= 1");
    if (!p.empty()) {
        throw ConfigError(std::move(p));
    }
}

}  // namespace vlmd

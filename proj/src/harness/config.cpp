#include "pclab/harness/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pclab::harness {

using nlohmann::json;

Algorithm parse_algorithm(std::string_view name)
{
    if (name == "pc") return Algorithm::pc;
    if (name == "tp") return Algorithm::tp;
    if (name == "bp" || name == "bp_reference") return Algorithm::bp;
    throw ConfigError("unknown algorithm '" + std::string(name) + "'");
}

std::string to_string(Algorithm a)
{
    switch (a) {
    case Algorithm::pc: return "pc";
    case Algorithm::tp: return "tp";
    case Algorithm::bp: return "bp";
    }
    return "?";
}

json default_config()
{
    json lr = json::array();
    for (int k = -12; k <= 0; ++k)
        lr.push_back(k);
    return {
        {"seed", 0},
        {"model", {{"depth", 3}, {"width", 128}, {"activation", "tanh"}, {"gain", 1.0}}},
        {"data",
         {{"source", "synth"},
          {"dir", "data/fashion_mnist"},
          {"fallback_to_synth", true},
          {"task", "classification"},
          {"subset_n", 1024},
          {"test_n", 1024},
          {"batch_size", 1024},
          {"input_dim", 64},
          {"classes", 10},
          {"target_scale", 1.0},
          {"noise_std", 0.0},
          {"seed", 0}}},
        {"param", {{"preset", "mup_pc"}, {"gamma_bar_L", -1.0}, {"base_width", 128}, {"gamma_bar_hidden", json::array()}}},
        {"train",
         {{"algorithm", "pc"},
          {"epochs", 40},
          {"eta_prime", 0.01},
          {"loss", "mse"},
          {"divergence_factor", 1e3},
          {"probe_n", 256},
          {"seeds", {0}}}},
        {"optimizer", {{"name", "sgd"}}},
        {"pc",
         {{"mode", "sequential"},
          {"f_ini", true},
          {"fpa", false},
          {"nudged", false},
          {"beta", 1.0},
          {"steps", 1},
          {"gamma_prime", 1.0},
          {"incremental", false},
          {"inference_rate", 1.0}}},
        {"tp",
         {{"variant", "dtp"},
          {"feedback_mode", "analytic"},
          {"feedback_activation", "identity"},
          {"eta_hat", 0.01},
          {"mu_prime", 1e-3},
          {"tau_prime", 0.01},
          {"noise_std", -1.0},
          {"pretrain_epochs", 5},
          {"weight_decay", 1e-4}}},
        {"sweep",
         {{"widths", {128, 1024}}, {"log2_lr", lr}, {"gamma_primes", json::array()}, {"seeds", {0}},
          {"metric", "train_loss"}}},
        {"coord", {{"widths", {64, 128, 256, 512, 1024}}, {"steps", 3}, {"seeds", {0, 1, 2, 3, 4}}, {"batch", 8}}},
        {"oracle",
         {{"depths", {2, 3, 4}},
          {"widths", {8, 32, 64}},
          {"gamma_bars", {0.0, -1.0}},
          {"betas", {0.1, 1.0, 10.0}},
          {"seeds", {0, 1}},
          {"input_dim", 8},
          {"output_dim", 4},
          {"batch", 4},
          {"max_steps", 200000},
          {"tolerance", 1e-6},
          {"activation", "identity"}}},
        {"similarity",
         {{"depth", 3},
          {"input_dim", 16},
          {"output_dims", {1, 2, 5, 10}},
          {"widths", {64, 256, 1024}},
          {"gamma_bars", {0.0, -1.0}},
          {"seeds", {0, 1, 2, 3, 4}},
          {"rho", -1.0},
          {"activation", "identity"}}},
        {"scaling",
         {{"depth", 3},
          {"input_dim", 16},
          {"output_dim", 10},
          {"widths", {128, 256, 512, 1024, 2048, 4096}},
          {"gamma_bars", {0.0, -1.0}},
          {"seeds", {0, 1, 2, 3, 4}},
          {"balance", true},
          {"balance_widths", {128, 256, 512, 1024, 2048}},
          {"balance_batch", 8},
          {"balance_depth", 4},
          {"balance_gamma_bar_L", -1.0},
          {"balance_inject_layer", 2},
          {"balance_inject_value", 0.5},
          {"activation", "identity"}}},
        {"omega", {{"widths", {128, 256, 512, 1024}}, {"seeds", {0, 1, 2, 3, 4}}, {"algorithms", {"tp", "bp"}}, {"steps", 10},
                   {"preset", "mup_tp"}, {"bp_preset", "ntk_pc"}, {"eta_prime", 0.1}, {"bp_eta_prime", 0.001}}},
        {"output", {{"path", "results/out.csv"}, {"record_wall_time", false}}},
    };
}

namespace {

void merge_into(json& base, const json& patch, const std::string& prefix)
{
    if (!patch.is_object())
        throw ConfigError("configuration section '" + prefix + "' must be an object");
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!base.contains(it.key()))
            throw ConfigError("unknown configuration key '" + key + "'");
        json& slot = base[it.key()];
        if (slot.is_object())
            merge_into(slot, it.value(), key);
        else
            slot = it.value();
    }
}

}  // namespace

json merge_config(const json& file)
{
    json config = default_config();
    merge_into(config, file, "");
    return config;
}

void apply_override(json& config, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);

    json* slot = &config;
    std::stringstream parts(path);
    std::string part;
    while (std::getline(parts, part, '.')) {
        if (!slot->is_object() || !slot->contains(part))
            throw ConfigError("unknown configuration key '" + path + "'");
        slot = &(*slot)[part];
    }
    if (slot->is_object())
        throw ConfigError("'" + path + "' is a section, not a key");
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded())
        value = text;
    *slot = value;
}

json load_config_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open configuration file " + path.string());
    json j = json::parse(in, nullptr, false, true);
    if (j.is_discarded())
        throw ConfigError("configuration file " + path.string() + " is not valid JSON");
    return j;
}

namespace {

// Collects conversion failures so they can be reported together.
class Reader {
public:
    explicit Reader(const json& root) : root_(root) {}

    template <class T>
    T get(const std::string& path, T fallback = T{})
    {
        try {
            return at(path).get<T>();
        } catch (const std::exception& e) {
            errors_.push_back(path + ": " + e.what());
            return fallback;
        }
    }

    template <class T, class Fn>
    T parse(const std::string& path, Fn fn, T fallback)
    {
        try {
            return fn(at(path).get<std::string>());
        } catch (const std::exception& e) {
            errors_.push_back(path + ": " + e.what());
            return fallback;
        }
    }

    void check(bool ok, const std::string& message)
    {
        if (!ok)
            errors_.push_back(message);
    }

    const std::vector<std::string>& errors() const { return errors_; }

private:
    const json& at(const std::string& path) const
    {
        const json* node = &root_;
        std::stringstream parts(path);
        std::string part;
        while (std::getline(parts, part, '.'))
            node = &node->at(part);
        return *node;
    }

    const json& root_;
    std::vector<std::string> errors_;
};

}  // namespace

ExperimentConfig parse_config(const json& config)
{
    Reader r(config);
    ExperimentConfig c;
    c.resolved = config;
    c.seed = r.get<std::uint64_t>("seed");

    c.model.depth = r.get<std::size_t>("model.depth");
    c.model.width = r.get<std::size_t>("model.width");
    c.model.activation = r.parse<Activation>("model.activation", parse_activation, Activation::tanh);
    c.model.gain = r.get<double>("model.gain");

    c.data.source = r.get<std::string>("data.source");
    c.data.dir = r.get<std::string>("data.dir");
    c.data.fallback_to_synth = r.get<bool>("data.fallback_to_synth");
    c.data.task = r.get<std::string>("data.task");
    c.data.subset_n = r.get<std::size_t>("data.subset_n");
    c.data.test_n = r.get<std::size_t>("data.test_n");
    c.data.batch_size = r.get<std::size_t>("data.batch_size");
    c.data.input_dim = r.get<std::size_t>("data.input_dim");
    c.data.classes = r.get<std::size_t>("data.classes");
    c.data.target_scale = r.get<double>("data.target_scale");
    c.data.noise_std = r.get<double>("data.noise_std");
    c.data.seed = r.get<std::uint64_t>("data.seed");

    c.param.preset = r.parse<Preset>("param.preset", [](const std::string& s) { return parse_preset(s); },
                                     Preset::mup_pc);
    c.param.gamma_bar_L = r.get<double>("param.gamma_bar_L");
    c.param.base_width = r.get<std::size_t>("param.base_width");
    c.param.gamma_bar_hidden = r.get<std::vector<double>>("param.gamma_bar_hidden");

    c.train.algorithm = r.parse<Algorithm>("train.algorithm", parse_algorithm, Algorithm::pc);
    c.train.epochs = r.get<std::size_t>("train.epochs");
    c.train.eta_prime = r.get<double>("train.eta_prime");
    c.train.loss = r.parse<Loss>("train.loss", parse_loss, Loss::mse_sum);
    c.train.optimizer = r.parse<OptimizerKind>("optimizer.name", parse_optimizer, OptimizerKind::sgd);
    c.train.divergence_factor = r.get<double>("train.divergence_factor");
    c.train.probe_n = r.get<std::size_t>("train.probe_n");
    c.train.seeds = r.get<std::vector<std::uint64_t>>("train.seeds");

    c.pc.mode = r.parse<InferenceMode>("pc.mode", parse_inference_mode, InferenceMode::sequential);
    c.pc.f_ini = r.get<bool>("pc.f_ini");
    c.pc.fpa = r.get<bool>("pc.fpa");
    c.pc.nudged = r.get<bool>("pc.nudged");
    c.pc.beta = r.get<double>("pc.beta");
    c.pc.steps = r.get<std::size_t>("pc.steps");
    c.pc.gamma_prime = r.get<double>("pc.gamma_prime");
    c.pc.incremental = r.get<bool>("pc.incremental");
    c.pc.inference_rate = r.get<double>("pc.inference_rate");
    c.pc.loss = c.train.loss;

    c.tp.variant = r.parse<TpVariant>("tp.variant", parse_tp_variant, TpVariant::dtp);
    c.tp.feedback_mode = r.parse<FeedbackMode>("tp.feedback_mode", parse_feedback_mode, FeedbackMode::analytic);
    c.tp.feedback_activation = r.parse<Activation>("tp.feedback_activation", parse_activation, Activation::identity);
    c.tp.eta_hat = r.get<double>("tp.eta_hat");
    c.tp.mu_prime = r.get<double>("tp.mu_prime");
    c.tp.tau_prime = r.get<double>("tp.tau_prime");
    c.tp.noise_std = r.get<double>("tp.noise_std");
    c.tp.pretrain_epochs = r.get<std::size_t>("tp.pretrain_epochs");
    c.tp.weight_decay = r.get<double>("tp.weight_decay");
    c.tp.loss = c.train.loss;

    c.sweep.widths = r.get<std::vector<std::size_t>>("sweep.widths");
    c.sweep.log2_lr = r.get<std::vector<double>>("sweep.log2_lr");
    c.sweep.gamma_primes = r.get<std::vector<double>>("sweep.gamma_primes");
    c.sweep.seeds = r.get<std::vector<std::uint64_t>>("sweep.seeds");
    c.sweep.metric = r.get<std::string>("sweep.metric");

    c.coord.widths = r.get<std::vector<std::size_t>>("coord.widths");
    c.coord.steps = r.get<std::size_t>("coord.steps");
    c.coord.seeds = r.get<std::vector<std::uint64_t>>("coord.seeds");
    c.coord.batch = r.get<std::size_t>("coord.batch");

    c.oracle.depths = r.get<std::vector<std::size_t>>("oracle.depths");
    c.oracle.widths = r.get<std::vector<std::size_t>>("oracle.widths");
    c.oracle.gamma_bars = r.get<std::vector<double>>("oracle.gamma_bars");
    c.oracle.betas = r.get<std::vector<double>>("oracle.betas");
    c.oracle.seeds = r.get<std::vector<std::uint64_t>>("oracle.seeds");
    c.oracle.input_dim = r.get<std::size_t>("oracle.input_dim");
    c.oracle.output_dim = r.get<std::size_t>("oracle.output_dim");
    c.oracle.batch = r.get<std::size_t>("oracle.batch");
    c.oracle.max_steps = r.get<std::size_t>("oracle.max_steps");
    c.oracle.tolerance = r.get<double>("oracle.tolerance");
    c.oracle.activation = r.parse<Activation>("oracle.activation", parse_activation, Activation::identity);

    c.similarity.depth = r.get<std::size_t>("similarity.depth");
    c.similarity.input_dim = r.get<std::size_t>("similarity.input_dim");
    c.similarity.output_dims = r.get<std::vector<std::size_t>>("similarity.output_dims");
    c.similarity.widths = r.get<std::vector<std::size_t>>("similarity.widths");
    c.similarity.gamma_bars = r.get<std::vector<double>>("similarity.gamma_bars");
    c.similarity.seeds = r.get<std::vector<std::uint64_t>>("similarity.seeds");
    c.similarity.rho = r.get<double>("similarity.rho");
    c.similarity.activation = r.parse<Activation>("similarity.activation", parse_activation, Activation::identity);

    c.scaling.depth = r.get<std::size_t>("scaling.depth");
    c.scaling.input_dim = r.get<std::size_t>("scaling.input_dim");
    c.scaling.output_dim = r.get<std::size_t>("scaling.output_dim");
    c.scaling.widths = r.get<std::vector<std::size_t>>("scaling.widths");
    c.scaling.gamma_bars = r.get<std::vector<double>>("scaling.gamma_bars");
    c.scaling.seeds = r.get<std::vector<std::uint64_t>>("scaling.seeds");
    c.scaling.balance = r.get<bool>("scaling.balance");
    c.scaling.balance_widths = r.get<std::vector<std::size_t>>("scaling.balance_widths");
    c.scaling.balance_batch = r.get<std::size_t>("scaling.balance_batch");
    c.scaling.balance_depth = r.get<std::size_t>("scaling.balance_depth");
    c.scaling.balance_gamma_bar_L = r.get<double>("scaling.balance_gamma_bar_L");
    c.scaling.balance_inject_layer = r.get<std::size_t>("scaling.balance_inject_layer");
    c.scaling.balance_inject_value = r.get<double>("scaling.balance_inject_value");
    c.scaling.activation = r.parse<Activation>("scaling.activation", parse_activation, Activation::identity);

    c.omega.widths = r.get<std::vector<std::size_t>>("omega.widths");
    c.omega.seeds = r.get<std::vector<std::uint64_t>>("omega.seeds");
    c.omega.algorithms = r.get<std::vector<std::string>>("omega.algorithms");
    c.omega.steps = r.get<std::size_t>("omega.steps");
    c.omega.preset = r.parse<Preset>("omega.preset", [](const std::string& s) { return parse_preset(s); },
                                     Preset::mup_tp);
    c.omega.bp_preset = r.parse<Preset>("omega.bp_preset", [](const std::string& s) { return parse_preset(s); },
                                        Preset::ntk_pc);
    c.omega.eta_prime = r.get<double>("omega.eta_prime");
    c.omega.bp_eta_prime = r.get<double>("omega.bp_eta_prime");

    c.output.path = r.get<std::string>("output.path");
    c.output.record_wall_time = r.get<bool>("output.record_wall_time");

    // semantic checks
    r.check(c.model.depth >= 2, "model.depth must be at least 2");
    r.check(c.model.width >= 1, "model.width must be positive");
    r.check(c.model.gain > 0.0, "model.gain must be positive");
    r.check(c.data.source == "synth" || c.data.source == "fashion_mnist", "data.source must be synth or fashion_mnist");
    r.check(c.data.task == "classification" || c.data.task == "regression",
            "data.task must be classification or regression");
    r.check(c.data.subset_n >= 1, "data.subset_n must be positive");
    r.check(c.data.batch_size >= 1, "data.batch_size must be positive");
    r.check(c.data.input_dim >= 1, "data.input_dim must be positive");
    r.check(c.data.classes >= 2, "data.classes must be at least 2");
    r.check(c.param.gamma_bar_L <= 0.0, "param.gamma_bar_L must be <= 0");
    r.check(c.param.base_width >= 1, "param.base_width must be positive");
    r.check(c.param.gamma_bar_hidden.empty() || c.param.gamma_bar_hidden.size() + 1 == c.model.depth,
            "param.gamma_bar_hidden must list one exponent per layer below the output");
    r.check(c.train.divergence_factor > 1.0, "train.divergence_factor must exceed 1");
    r.check(c.train.eta_prime >= 0.0, "train.eta_prime must be non-negative");
    r.check(c.pc.steps >= 1, "pc.steps must be at least 1");
    r.check(!c.pc.nudged || c.pc.beta > 0.0, "pc.beta must be positive when pc.nudged is set");
    r.check(c.pc.inference_rate > 0.0, "pc.inference_rate must be positive");
    r.check(c.pc.gamma_prime >= 0.0, "pc.gamma_prime must be non-negative");
    r.check(c.tp.eta_hat > 0.0, "tp.eta_hat must be positive");
    r.check(c.tp.feedback_mode != FeedbackMode::analytic || c.tp.feedback_activation == Activation::identity,
            "analytic feedback requires tp.feedback_activation = identity");
    r.check(!c.sweep.widths.empty() && !c.sweep.log2_lr.empty() && !c.sweep.seeds.empty(),
            "sweep.widths, sweep.log2_lr and sweep.seeds must be nonempty");
    r.check(c.sweep.metric == "train_loss" || c.sweep.metric == "test_loss" || c.sweep.metric == "test_accuracy",
            "sweep.metric must be train_loss, test_loss or test_accuracy");
    r.check(c.coord.widths.size() >= 3, "coord.widths needs at least three widths");
    r.check(c.coord.steps >= 1, "coord.steps must be at least 1");
    r.check(!c.coord.seeds.empty(), "coord.seeds must be nonempty");
    r.check(c.scaling.balance_inject_layer >= 1 && c.scaling.balance_inject_layer < c.scaling.balance_depth,
            "scaling.balance_inject_layer must name a hidden layer");
    r.check(c.similarity.depth >= 2 && c.scaling.depth >= 2, "similarity.depth and scaling.depth must be at least 2");
    r.check(c.scaling.balance_depth >= 3, "scaling.balance_depth must be at least 3 to have a hidden exponent");
    for (const auto& a : c.omega.algorithms)
        r.check(a == "tp" || a == "bp", "omega.algorithms entries must be tp or bp");

    if (!r.errors().empty()) {
        std::string message = "invalid configuration:";
        for (const auto& e : r.errors())
            message += "\n  " + e;
        throw ConfigError(message);
    }
    return c;
}

ExperimentConfig build_config(const std::optional<std::filesystem::path>& file,
                              const std::vector<std::string>& overrides)
{
    json config = file ? merge_config(load_config_file(*file)) : default_config();
    for (const auto& o : overrides)
        apply_override(config, o);
    return parse_config(config);
}

std::string ExperimentConfig::hash() const
{
    // where results are written does not change them
    json content = resolved;
    content.erase("output");
    const std::string text = content.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

AbcSpec ExperimentConfig::spec() const
{
    AbcSpec s = preset(param.preset, model.depth, param.gamma_bar_L, param.base_width);
    for (std::size_t l = 0; l < param.gamma_bar_hidden.size(); ++l)
        s.gamma_bar[l] = param.gamma_bar_hidden[l];
    return s;
}

}  // namespace pclab::harness

#pragma once

#include "pclab/data.hpp"
#include "pclab/pc.hpp"
#include "pclab/tp.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pclab::harness {

enum class Algorithm { pc, tp, bp };

Algorithm parse_algorithm(std::string_view name);
std::string to_string(Algorithm a);

struct ModelConfig {
    std::size_t depth = 3;
    std::size_t width = 128;
    Activation activation = Activation::tanh;
    double gain = 1.0;
};

struct DataConfig {
    std::string source = "synth";  // synth | fashion_mnist
    std::string dir = "data/fashion_mnist";
    bool fallback_to_synth = true;
    std::string task = "classification";  // classification | regression (synth only)
    std::size_t subset_n = 1024;
    std::size_t test_n = 1024;
    std::size_t batch_size = 1024;
    std::size_t input_dim = 64;  // synth only
    std::size_t classes = 10;
    double target_scale = 1.0;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
};

struct ParamConfig {
    Preset preset = Preset::mup_pc;
    double gamma_bar_L = -1.0;
    std::size_t base_width = 128;
    /// Replaces the hidden step-size exponents γ̄_1..γ̄_{L-1} when non-empty.
    std::vector<double> gamma_bar_hidden;
};

struct TrainConfig {
    Algorithm algorithm = Algorithm::pc;
    std::size_t epochs = 40;
    double eta_prime = 0.01;
    Loss loss = Loss::mse_sum;
    OptimizerKind optimizer = OptimizerKind::sgd;
    /// A run counts as diverged once its training loss exceeds this multiple of the initial loss.
    double divergence_factor = 1e3;
    std::size_t probe_n = 256;
    std::vector<std::uint64_t> seeds{0};  // cells run by the run command
};

struct SweepConfig {
    std::vector<std::size_t> widths{128, 1024};
    std::vector<double> log2_lr;  // default 2^-12 .. 2^0
    std::vector<double> gamma_primes;  // empty: pc.gamma_prime only
    std::vector<std::uint64_t> seeds{0};
    std::string metric = "train_loss";  // train_loss | test_loss | test_accuracy
};

struct CoordConfig {
    std::vector<std::size_t> widths{64, 128, 256, 512, 1024};
    std::size_t steps = 3;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::size_t batch = 8;
};

struct OracleConfig {
    std::vector<std::size_t> depths{2, 3, 4};
    std::vector<std::size_t> widths{8, 32, 64};
    std::vector<double> gamma_bars{0.0, -1.0};
    std::vector<double> betas{0.1, 1.0, 10.0};
    std::vector<std::uint64_t> seeds{0, 1};
    std::size_t input_dim = 8;
    std::size_t output_dim = 4;
    std::size_t batch = 4;
    std::size_t max_steps = 200000;
    double tolerance = 1e-6;
    /// Must be identity: the closed form exists only for linear networks.
    Activation activation = Activation::identity;
};

struct SimilarityConfig {
    std::size_t depth = 3;
    std::size_t input_dim = 16;
    std::vector<std::size_t> output_dims{1, 2, 5, 10};
    std::vector<std::size_t> widths{64, 256, 1024};
    std::vector<double> gamma_bars{0.0, -1.0};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    /// Gauss-Newton damping; negative selects γ_{L-1}/γ_L.
    double rho = -1.0;
    Activation activation = Activation::identity;
};

struct ScalingConfig {
    std::size_t depth = 3;
    std::size_t input_dim = 16;
    std::size_t output_dim = 10;
    std::vector<std::size_t> widths{128, 256, 512, 1024, 2048, 4096};
    std::vector<double> gamma_bars{0.0, -1.0};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    bool balance = true;
    std::vector<std::size_t> balance_widths{128, 256, 512, 1024, 2048};
    std::size_t balance_batch = 8;
    std::size_t balance_depth = 4;
    double balance_gamma_bar_L = -1.0;
    /// Hidden layer whose γ̄ is set to balance_inject_value in the contrast run.
    std::size_t balance_inject_layer = 2;
    double balance_inject_value = 0.5;
    Activation activation = Activation::identity;
};

struct OmegaConfig {
    std::vector<std::size_t> widths{128, 256, 512, 1024};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::vector<std::string> algorithms{"tp", "bp"};
    std::size_t steps = 10;
    Preset preset = Preset::mup_tp;
    double eta_prime = 0.1;
    /// BP reference arm. It runs with γ̄_L = 0, where the PC presets reduce
    /// to their backprop exponents (ntk_pc gives the kernel-regime NTK rates).
    Preset bp_preset = Preset::ntk_pc;
    double bp_eta_prime = 0.001;
};

struct OutputConfig {
    std::string path = "results/out.csv";
    bool record_wall_time = false;
};

struct ExperimentConfig {
    ModelConfig model;
    DataConfig data;
    ParamConfig param;
    TrainConfig train;
    PcConfig pc;
    TpConfig tp;
    SweepConfig sweep;
    CoordConfig coord;
    OracleConfig oracle;
    SimilarityConfig similarity;
    ScalingConfig scaling;
    OmegaConfig omega;
    OutputConfig output;
    std::uint64_t seed = 0;

    /// Resolved configuration as JSON (every key present).
    nlohmann::json resolved;

    /// FNV-1a of the compact resolved JSON, as 16 hex digits.
    std::string hash() const;
    AbcSpec spec() const;
};

/// Defaults for every key, the schema against which files and overrides are checked.
nlohmann::json default_config();

/// Applies one `section.key=value` override; the value is parsed as JSON
/// when possible and as a string otherwise. Unknown keys are rejected.
void apply_override(nlohmann::json& config, const std::string& assignment);

/// Deep-merges `file` over the defaults; unknown keys are rejected.
nlohmann::json merge_config(const nlohmann::json& file);

nlohmann::json load_config_file(const std::filesystem::path& path);

/// Validates and converts; every problem found is listed in one ConfigError.
ExperimentConfig parse_config(const nlohmann::json& config);

/// Defaults, then the optional file, then overrides, then validation.
ExperimentConfig build_config(const std::optional<std::filesystem::path>& file,
                              const std::vector<std::string>& overrides);

}  // namespace pclab::harness

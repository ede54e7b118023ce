#pragma once

#include "pclab/harness/config.hpp"
#include "pclab/harness/csv.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pclab::harness {

/// Train/test split used by the training commands.
struct DataSplit {
    Dataset train;
    Dataset test;
    std::string source;  // "fashion_mnist", "synth" or "synth (fallback)"
};

/// Loads the configured data. FashionMNIST is read from data.dir; when the
/// files are missing and data.fallback_to_synth is set, synthetic
/// classification data of the configured size is returned instead.
DataSplit load_data(const ExperimentConfig& cfg);

/// One training cell, fully determined by (config, width, lr_index, seed).
struct Cell {
    std::size_t width = 0;
    int lr_index = -1;  // -1 when η′ comes from train.eta_prime
    double eta_prime = 0.0;
    double gamma_prime = 1.0;
    std::uint64_t seed = 0;
};

struct RunRecord {
    std::string config_hash;
    std::string algorithm;
    std::string preset;
    Cell cell;
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double test_accuracy = 0.0;
    std::vector<double> delta_h_rms;  // ‖h_l − h_l(init)‖_RMS on the probe set, l = 1..L
    std::vector<double> delta_u_rms;
    double free_energy = 0.0;  // final F of the epoch's last PC step; nan otherwise
    double omega_L = 0.0;
    double wall_time = 0.0;
    bool diverged = false;
};

std::vector<std::string> run_header();
std::vector<std::string> to_fields(const RunRecord& r);

/// Model, optimizer and algorithm state for one cell.
class Trainer {
public:
    Trainer(const ExperimentConfig& cfg, const Cell& cell, std::size_t input_dim, std::size_t output_dim);

    /// Trains feedback networks before the first step when TP uses trained feedback.
    void prepare(const std::vector<Batch>& batches);

    /// One training step on a batch; returns the batch loss before the update.
    double step(const Matrix& x, const Matrix& y);

    const Mlp& net() const noexcept { return net_; }
    const Mlp& initial_net() const noexcept { return init_; }
    double last_free_energy() const noexcept { return last_free_energy_; }
    Rng& rng() noexcept { return rng_; }

private:
    const ExperimentConfig& cfg_;
    Cell cell_;
    AbcSpec spec_;
    Mlp net_;
    Mlp init_;
    Optimizer opt_;
    std::vector<double> gammas_;
    FeedbackNet fb_;
    FeedbackSchedule schedule_;
    Rng rng_;
    double last_free_energy_;
};

/// Trains one cell for train.epochs epochs and returns one record per epoch,
/// starting with the untrained state at epoch 0. A diverged run ends with a
/// record whose metrics are nan.
std::vector<RunRecord> run_cell(const ExperimentConfig& cfg, const DataSplit& data, const Cell& cell);

struct SweepSummary {
    std::size_t width;
    double gamma_prime;
    int best_lr_index;  // -1 when every learning rate diverged
    double best_log2_lr;
    double best_value;
    std::size_t diverged_cells;
};

std::vector<std::string> summary_header();

struct SweepResult {
    std::vector<RunRecord> finals;  // last record of every cell
    std::vector<SweepSummary> summary;
};

/// Argmin (argmax for accuracy) over the LR grid of the seed-averaged final
/// metric per (width, γ′). Cells with a diverged seed are excluded; ties go
/// to the smaller learning rate.
std::vector<SweepSummary> summarize_sweep(const ExperimentConfig& cfg, const std::vector<RunRecord>& finals);

/// `row` receives each finished cell in execution order; may be empty.
SweepResult sweep(const ExperimentConfig& cfg, const DataSplit& data,
                  const std::function<void(const RunRecord&)>& row = {});

/// Per-layer log-log slopes of ‖Δh_l‖_RMS against width after coord.steps
/// training steps. Per-seed slopes are averaged; nan when Δh vanishes.
std::vector<LongRow> coord_check(const ExperimentConfig& cfg, const DataSplit& data);

struct OracleReport {
    std::vector<LongRow> rows;
    double max_error = 0.0;
    double max_residual = 0.0;
    bool passed = false;
};

/// Iterative synchronous inference on random linear networks against the
/// closed-form equilibrium over the configured grid, plus the scalar chain.
OracleReport oracle_check(const ExperimentConfig& cfg);

std::vector<LongRow> similarity_panel(const ExperimentConfig& cfg);

/// C_γ scaling fits per γ̄_L and, when enabled, the balance-condition slopes
/// with and without an injected hidden exponent.
std::vector<LongRow> scaling(const ExperimentConfig& cfg);

/// ω_L per algorithm, width and seed after omega.steps training steps under
/// the configured preset, with seed means per width.
std::vector<LongRow> omega(const ExperimentConfig& cfg, const DataSplit& data);

}  // namespace pclab::harness

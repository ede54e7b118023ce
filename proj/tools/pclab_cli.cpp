#include "pclab/harness/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace pclab;
using namespace pclab::harness;

struct CommonOptions {
    std::string config_file;
    std::vector<std::string> sets;
    std::string out;
    std::string param;
    std::optional<double> gamma_bar_L;
    std::string data;
    std::string data_dir;
    std::optional<std::size_t> subset_n;
    std::optional<std::size_t> batch_size;
};

void add_common(CLI::App* cmd, CommonOptions& o)
{
    cmd->add_option("--config", o.config_file, "JSON configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--set", o.sets, "Override one key, e.g. --set train.epochs=10 (repeatable)");
    cmd->add_option("--out", o.out, "Output CSV path (overrides output.path)");
    cmd->add_option("--param", o.param, "Parameterization preset (param.preset)");
    cmd->add_option("--gamma-bar-L", o.gamma_bar_L, "Output-layer step-size exponent (param.gamma_bar_L)");
    cmd->add_option("--data", o.data, "Data source: fashion_mnist or synth");
    cmd->add_option("--data-dir", o.data_dir, "Directory holding the FashionMNIST IDX files");
    cmd->add_option("--subset-n", o.subset_n, "Number of training samples");
    cmd->add_option("--batch-size", o.batch_size, "Minibatch size");
}

ExperimentConfig resolve(const CommonOptions& o)
{
    std::vector<std::string> overrides;
    auto quoted = [](const std::string& s) { return nlohmann::json(s).dump(); };
    if (!o.param.empty())
        overrides.push_back("param.preset=" + quoted(o.param));
    if (o.gamma_bar_L)
        overrides.push_back("param.gamma_bar_L=" + format_number(*o.gamma_bar_L));
    if (!o.data.empty())
        overrides.push_back("data.source=" + quoted(o.data));
    if (!o.data_dir.empty())
        overrides.push_back("data.dir=" + quoted(o.data_dir));
    if (o.subset_n)
        overrides.push_back("data.subset_n=" + std::to_string(*o.subset_n));
    if (o.batch_size)
        overrides.push_back("data.batch_size=" + std::to_string(*o.batch_size));
    if (!o.out.empty())
        overrides.push_back("output.path=" + quoted(o.out));
    overrides.insert(overrides.end(), o.sets.begin(), o.sets.end());
    std::optional<std::filesystem::path> file;
    if (!o.config_file.empty())
        file = o.config_file;
    return build_config(file, overrides);
}

std::filesystem::path sibling(const std::filesystem::path& csv, const std::string& suffix)
{
    std::filesystem::path p = csv;
    p.replace_filename(csv.stem().string() + suffix + csv.extension().string());
    return p;
}

void write_rows(const ExperimentConfig& cfg, const std::string& command, const std::vector<LongRow>& rows,
                const nlohmann::json& extra = {})
{
    CsvWriter csv(cfg.output.path, long_header());
    for (const auto& r : rows)
        write_long(csv, r);
    write_metadata(cfg.output.path, cfg.resolved, cfg.hash(), command, extra);
}

int cmd_run(const ExperimentConfig& cfg)
{
    const DataSplit data = load_data(cfg);
    CsvWriter csv(cfg.output.path, run_header());
    for (std::uint64_t seed : cfg.train.seeds) {
        const Cell cell{cfg.model.width, -1, cfg.train.eta_prime, cfg.pc.gamma_prime, seed};
        for (const RunRecord& r : run_cell(cfg, data, cell)) {
            csv.row(to_fields(r));
            std::cout << "seed " << seed << " epoch " << r.epoch << " train_loss " << format_number(r.train_loss)
                      << " test_accuracy " << format_number(r.test_accuracy) << '\n';
        }
    }
    write_metadata(cfg.output.path, cfg.resolved, cfg.hash(), "run", {{"data_source", data.source}});
    return 0;
}

int cmd_sweep(const ExperimentConfig& cfg)
{
    const DataSplit data = load_data(cfg);
    CsvWriter csv(cfg.output.path, run_header());
    const SweepResult result = sweep(cfg, data, [&](const RunRecord& r) {
        csv.row(to_fields(r));
        std::cout << "width " << r.cell.width << " log2_lr " << format_number(cfg.sweep.log2_lr[r.cell.lr_index])
                  << " seed " << r.cell.seed << " train_loss " << format_number(r.train_loss)
                  << (r.diverged ? " (diverged)" : "") << '\n';
    });
    const auto summary_path = sibling(cfg.output.path, ".summary");
    CsvWriter summary(summary_path, summary_header());
    for (const auto& s : result.summary) {
        summary.row({std::to_string(s.width), format_number(s.gamma_prime), std::to_string(s.best_lr_index),
                     format_number(s.best_log2_lr), format_number(s.best_value), std::to_string(s.diverged_cells)});
        std::cout << "width " << s.width << " gamma_prime " << format_number(s.gamma_prime) << ": best log2_lr "
                  << format_number(s.best_log2_lr) << " (" << cfg.sweep.metric << " " << format_number(s.best_value)
                  << ")\n";
    }
    write_metadata(cfg.output.path, cfg.resolved, cfg.hash(), "sweep",
                   {{"data_source", data.source}, {"summary", summary_path.string()}});
    return 0;
}

int cmd_coord(const ExperimentConfig& cfg)
{
    const DataSplit data = load_data(cfg);
    const auto rows = coord_check(cfg, data);
    for (const auto& r : rows)
        if (r.quantity == "slope")
            std::cout << "layer " << r.layer << " slope " << format_number(r.value) << '\n';
    write_rows(cfg, "coord-check", rows, {{"data_source", data.source}});
    return 0;
}

int cmd_oracle(const ExperimentConfig& cfg)
{
    const OracleReport report = oracle_check(cfg);
    write_rows(cfg, "oracle-check", report.rows);
    std::cout << "max relative error " << format_number(report.max_error) << ", max stationarity residual "
              << format_number(report.max_residual) << '\n';
    for (std::size_t i = 0; i + 3 < report.rows.size(); i += 4)
        if (report.rows[i + 3].value == 0.0)
            std::cout << "not converged: " << report.rows[i].cell << " width " << report.rows[i].width << " seed "
                      << report.rows[i].seed << '\n';
    std::cout << (report.passed ? "PASS" : "FAIL") << '\n';
    return report.passed ? 0 : 1;
}

int cmd_similarity(const ExperimentConfig& cfg)
{
    const auto rows = similarity_panel(cfg);
    for (const auto& r : rows)
        if (r.quantity == "cos_pc_bp_mean")
            std::cout << r.cell << " width " << r.width << " layer " << r.layer << " cos_pc_bp "
                      << format_number(r.value) << '\n';
    write_rows(cfg, "similarity-panel", rows);
    return 0;
}

int cmd_scaling(const ExperimentConfig& cfg)
{
    const auto rows = scaling(cfg);
    for (const auto& r : rows)
        if (r.quantity == "slope" || r.quantity == "slope_difference")
            std::cout << r.cell << " layer " << r.layer << ' ' << r.quantity << ' ' << format_number(r.value) << '\n';
    write_rows(cfg, "scaling", rows);
    return 0;
}

int cmd_omega(const ExperimentConfig& cfg)
{
    const DataSplit data = load_data(cfg);
    const auto rows = omega(cfg, data);
    for (const auto& r : rows)
        if (r.quantity == "omega_L_mean")
            std::cout << r.cell << " width " << r.width << " omega_L " << format_number(r.value) << '\n';
    write_rows(cfg, "omega", rows, {{"data_source", data.source}});
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Predictive coding and target propagation experiments under abc-parameterizations"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    struct Command {
        const char* name;
        const char* help;
        int (*fn)(const ExperimentConfig&);
    };
    const Command commands[] = {
        {"run", "Train one configuration and write per-epoch records", cmd_run},
        {"sweep", "Learning-rate by width grid with argmin summary", cmd_sweep},
        {"coord-check", "Width slopes of feature updates after a few steps", cmd_coord},
        {"oracle-check", "Iterative inference against the closed-form linear equilibrium", cmd_oracle},
        {"similarity-panel", "Cosine similarities of PC, BP and Gauss-Newton signals", cmd_similarity},
        {"scaling", "Width exponent of C_gamma and the balance-condition check", cmd_scaling},
        {"omega", "Alignment exponent of the last layer for TP and BP", cmd_omega},
    };
    std::vector<CommonOptions> options(std::size(commands));
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < std::size(commands); ++i) {
        subs.push_back(app.add_subcommand(commands[i].name, commands[i].help));
        add_common(subs.back(), options[i]);
    }
    CLI::App* defaults = app.add_subcommand("defaults", "Print the default configuration as JSON");

    CLI11_PARSE(app, argc, argv);
    if (defaults->parsed()) {
        std::cout << default_config().dump(2) << '\n';
        return 0;
    }

    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (!subs[i]->parsed())
            continue;
        try {
            const ExperimentConfig cfg = resolve(options[i]);
            return commands[i].fn(cfg);
        } catch (const ConfigError& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
    }
    return 0;
}

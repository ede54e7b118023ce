#include "pclab/harness/experiments.hpp"

#include "pclab/linear_oracle.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>

namespace pclab::harness {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

std::string kv(const std::string& key, double value) { return key + "=" + format_number(value); }

std::string kv(const std::string& key, const std::string& value) { return key + "=" + value; }

std::string join_cell(const std::vector<std::string>& parts)
{
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i)
        out += (i ? "|" : "") + parts[i];
    return out;
}

Matrix first_columns(const Matrix& x, std::size_t n)
{
    n = std::min(n, x.cols());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return x.select_columns(idx);
}

void require_linear(Activation a, const std::string& command)
{
    if (a != Activation::identity)
        throw ConfigError(command + " needs a linear model; set its activation to identity");
}

bool exists_all(const std::filesystem::path& dir, std::initializer_list<const char*> names)
{
    for (const char* n : names)
        if (!std::filesystem::exists(dir / n))
            return false;
    return true;
}

Dataset make_synth(const ExperimentConfig& cfg, std::size_t n, std::uint64_t sample_stream)
{
    const DataConfig& d = cfg.data;
    const std::uint64_t teacher = derive_seed({d.seed, 0});
    const std::uint64_t samples = derive_seed({d.seed, sample_stream});
    Dataset ds = d.task == "regression" ? synth_regression(d.input_dim, d.classes, n, teacher, samples, d.noise_std)
                                        : synth_classification(d.input_dim, d.classes, n, teacher, samples);
    ds.y *= d.target_scale;
    return ds;
}

}  // namespace

DataSplit load_data(const ExperimentConfig& cfg)
{
    const DataConfig& d = cfg.data;
    DataSplit split;
    if (d.source == "fashion_mnist") {
        const std::filesystem::path dir = d.dir;
        if (exists_all(dir, {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
                             "t10k-labels-idx1-ubyte"})) {
            split.train = load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", d.subset_n,
                                   derive_seed({d.seed, 1}), d.classes);
            split.test = load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte", d.test_n,
                                  derive_seed({d.seed, 2}), d.classes);
            split.train.y *= d.target_scale;
            split.test.y *= d.target_scale;
            split.source = "fashion_mnist";
            return split;
        }
        if (!d.fallback_to_synth)
            throw FormatError("FashionMNIST files not found in " + dir.string());
        std::cerr << "warning: FashionMNIST files not found in " << dir.string()
                  << "; using synthetic classification data\n";
        split.source = "synth (fallback)";
    } else {
        split.source = "synth";
    }
    split.train = make_synth(cfg, d.subset_n, 1);
    if (d.test_n > 0)
        split.test = make_synth(cfg, d.test_n, 2);
    return split;
}

// ---------------------------------------------------------------- records

std::vector<std::string> run_header()
{
    return {"config_hash", "algorithm", "preset",      "width",         "lr_index",    "eta_prime",
            "gamma_prime", "seed",      "epoch",       "train_loss",    "test_loss",   "test_accuracy",
            "delta_h_rms", "delta_u_rms", "free_energy", "omega_L",     "wall_time",   "diverged"};
}

std::vector<std::string> to_fields(const RunRecord& r)
{
    return {r.config_hash,
            r.algorithm,
            r.preset,
            std::to_string(r.cell.width),
            std::to_string(r.cell.lr_index),
            format_number(r.cell.eta_prime),
            format_number(r.cell.gamma_prime),
            std::to_string(r.cell.seed),
            std::to_string(r.epoch),
            format_number(r.train_loss),
            format_number(r.test_loss),
            format_number(r.test_accuracy),
            format_list(r.delta_h_rms),
            format_list(r.delta_u_rms),
            format_number(r.free_energy),
            format_number(r.omega_L),
            format_number(r.wall_time),
            r.diverged ? "1" : "0"};
}

// ---------------------------------------------------------------- trainer

Trainer::Trainer(const ExperimentConfig& cfg, const Cell& cell, std::size_t input_dim, std::size_t output_dim)
    : cfg_(cfg),
      cell_(cell),
      spec_(cfg.spec()),
      net_([&] {
          Rng init(derive_seed({cfg.seed, cell.width, cell.seed}));
          return make_mlp(input_dim, cell.width, output_dim, cfg.model.depth, cfg.model.activation, spec_,
                          cfg.model.gain, init);
      }()),
      init_(net_),
      opt_(make_optimizer(cfg.train.optimizer, spec_, cell.width, cell.eta_prime)),
      gammas_(effective_gammas(spec_, cell.width, cell.gamma_prime)),
      rng_(derive_seed({cfg.seed, cell.width, static_cast<std::uint64_t>(cell.lr_index), cell.seed})),
      last_free_energy_(nan)
{
    if (cfg.train.algorithm == Algorithm::tp) {
        cfg.tp.validate();
        schedule_ = feedback_schedule(spec_, cell.width, cfg.tp);
        if (cfg.tp.feedback_mode == FeedbackMode::trained)
            fb_ = make_feedback(net_, cfg.tp.feedback_activation, cfg.model.gain, rng_);
        else
            fb_.Q.resize(net_.depth() + 1);
        fb_.psi = cfg.tp.feedback_activation;
    } else if (cfg.train.algorithm == Algorithm::pc) {
        cfg.pc.validate();
    }
}

void Trainer::prepare(const std::vector<Batch>& batches)
{
    if (cfg_.train.algorithm != Algorithm::tp || cfg_.tp.feedback_mode != FeedbackMode::trained)
        return;
    std::vector<Matrix> xs;
    for (const Batch& b : batches)
        xs.push_back(b.x);
    pretrain_feedback(fb_, net_, xs, cfg_.tp.pretrain_epochs, cfg_.tp, schedule_, rng_);
}

double Trainer::step(const Matrix& x, const Matrix& y)
{
    switch (cfg_.train.algorithm) {
    case Algorithm::bp:
        return bp_train_step(net_, opt_, x, y, cfg_.train.loss);
    case Algorithm::tp:
        return tp_train_step(net_, fb_, opt_, x, y, cfg_.tp, schedule_, rng_).loss;
    case Algorithm::pc: {
        const PcStepResult r = pc_train_step(net_, opt_, x, y, cfg_.pc, gammas_, rng_);
        last_free_energy_ = r.free_energy.back();
        return r.loss;
    }
    }
    return nan;
}

// ---------------------------------------------------------------- run

namespace {

double mean_loss(const ExperimentConfig& cfg, const Mlp& net, const Dataset& ds)
{
    if (ds.size() == 0)
        return nan;
    return loss_value(cfg.train.loss, forward(net, ds.x).output(), ds.y) / static_cast<double>(ds.size());
}

void measure_drift(RunRecord& rec, const Trainer& t, const Matrix& probe)
{
    const ForwardCache now = forward(t.net(), probe);
    const ForwardCache init = forward(t.initial_net(), probe);
    const std::size_t L = t.net().depth();
    rec.delta_h_rms.clear();
    rec.delta_u_rms.clear();
    for (std::size_t l = 1; l <= L; ++l) {
        rec.delta_h_rms.push_back(rms_norm(now.h[l] - init.h[l]));
        rec.delta_u_rms.push_back(rms_norm(now.u[l] - init.u[l]));
    }
    try {
        rec.omega_L = omega_L(t.initial_net().W(L), now.h[L - 1] - init.h[L - 1], t.net().widths[L - 1]);
    } catch (const ZeroNormError&) {
        rec.omega_L = nan;
    }
}

}  // namespace

std::vector<RunRecord> run_cell(const ExperimentConfig& cfg, const DataSplit& data, const Cell& cell)
{
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    Trainer trainer(cfg, cell, data.train.x.rows(), data.train.y.rows());
    const Matrix probe = first_columns(data.train.x, cfg.train.probe_n);

    RunRecord base;
    base.config_hash = cfg.hash();
    base.algorithm = to_string(cfg.train.algorithm);
    base.preset = to_string(cfg.param.preset);
    base.cell = cell;

    std::vector<RunRecord> out;
    auto record = [&](std::size_t epoch) {
        RunRecord r = base;
        r.epoch = epoch;
        r.train_loss = mean_loss(cfg, trainer.net(), data.train);
        r.test_loss = mean_loss(cfg, trainer.net(), data.test);
        r.test_accuracy = data.test.size() ? accuracy(forward(trainer.net(), data.test.x).output(), data.test.y) : nan;
        measure_drift(r, trainer, probe);
        r.free_energy = trainer.last_free_energy();
        if (cfg.output.record_wall_time)
            r.wall_time = std::chrono::duration<double>(clock::now() - start).count();
        return r;
    };
    auto fail = [&](std::size_t epoch) {
        RunRecord r = base;
        r.epoch = epoch;
        r.train_loss = r.test_loss = r.test_accuracy = r.free_energy = r.omega_L = nan;
        r.diverged = true;
        if (cfg.output.record_wall_time)
            r.wall_time = std::chrono::duration<double>(clock::now() - start).count();
        out.push_back(r);
        return out;
    };

    out.push_back(record(0));
    const double initial = out.front().train_loss;
    const double limit = cfg.train.divergence_factor * std::max(initial, std::numeric_limits<double>::min());
    if (!std::isfinite(initial))
        return fail(0);

    for (std::size_t epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
        const auto batches = make_batches(data.train, cfg.data.batch_size, derive_seed({cfg.seed, cell.seed, epoch}));
        try {
            if (epoch == 1)
                trainer.prepare(batches);
            for (const Batch& b : batches) {
                const double loss = trainer.step(b.x, b.y) / static_cast<double>(b.x.cols());
                if (!std::isfinite(loss) || loss > limit)
                    return fail(epoch);
            }
        } catch (const DivergenceError&) {
            return fail(epoch);
        }
        RunRecord r = record(epoch);
        if (!std::isfinite(r.train_loss) || r.train_loss > limit)
            return fail(epoch);
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------- sweep

std::vector<std::string> summary_header()
{
    return {"width", "gamma_prime", "best_lr_index", "best_log2_lr", "best_value", "diverged_cells"};
}

std::vector<SweepSummary> summarize_sweep(const ExperimentConfig& cfg, const std::vector<RunRecord>& finals)
{
    const bool maximize = cfg.sweep.metric == "test_accuracy";
    auto metric = [&](const RunRecord& r) {
        if (cfg.sweep.metric == "test_loss") return r.test_loss;
        if (maximize) return r.test_accuracy;
        return r.train_loss;
    };

    struct Acc {
        double total = 0.0;
        std::size_t n = 0;
        bool diverged = false;
    };
    // (width, γ′) → lr_index → accumulated metric
    std::map<std::pair<std::size_t, double>, std::map<int, Acc>> groups;
    for (const RunRecord& r : finals) {
        Acc& a = groups[{r.cell.width, r.cell.gamma_prime}][r.cell.lr_index];
        const double m = metric(r);
        if (r.diverged || !std::isfinite(m)) {
            a.diverged = true;
        } else {
            a.total += m;
            ++a.n;
        }
    }

    std::vector<SweepSummary> out;
    for (const auto& [key, by_lr] : groups) {
        SweepSummary s{key.first, key.second, -1, nan, nan, 0};
        for (const auto& [idx, a] : by_lr) {
            if (a.diverged) {
                ++s.diverged_cells;
                continue;
            }
            const double value = a.total / static_cast<double>(a.n);
            const double log2_lr = cfg.sweep.log2_lr.at(static_cast<std::size_t>(idx));
            const bool better = s.best_lr_index < 0 || (maximize ? value > s.best_value : value < s.best_value)
                             || (value == s.best_value && log2_lr < s.best_log2_lr);
            if (better) {
                s.best_lr_index = idx;
                s.best_log2_lr = log2_lr;
                s.best_value = value;
            }
        }
        out.push_back(s);
    }
    return out;
}

SweepResult sweep(const ExperimentConfig& cfg, const DataSplit& data, const std::function<void(const RunRecord&)>& row)
{
    std::vector<double> gps = cfg.sweep.gamma_primes;
    if (gps.empty())
        gps.push_back(cfg.pc.gamma_prime);
    SweepResult result;
    for (std::size_t width : cfg.sweep.widths)
        for (double gp : gps)
            for (std::size_t i = 0; i < cfg.sweep.log2_lr.size(); ++i)
                for (std::uint64_t seed : cfg.sweep.seeds) {
                    const Cell cell{width, static_cast<int>(i), std::exp2(cfg.sweep.log2_lr[i]), gp, seed};
                    const auto records = run_cell(cfg, data, cell);
                    result.finals.push_back(records.back());
                    if (row)
                        row(records.back());
                }
    result.summary = summarize_sweep(cfg, result.finals);
    return result;
}

// ---------------------------------------------------------------- coordinate check

std::vector<LongRow> coord_check(const ExperimentConfig& cfg, const DataSplit& data)
{
    const CoordConfig& cc = cfg.coord;
    const std::size_t L = cfg.model.depth;
    const std::string cell = join_cell({kv("algorithm", to_string(cfg.train.algorithm)),
                                        kv("preset", to_string(cfg.param.preset)),
                                        kv("gamma_bar_L", cfg.param.gamma_bar_L), kv("eta_prime", cfg.train.eta_prime)});
    std::vector<LongRow> rows;
    // log ‖Δh_l‖ per seed, per width
    std::vector<std::vector<std::vector<double>>> logs(cc.seeds.size(),
                                                       std::vector<std::vector<double>>(L, std::vector<double>()));
    std::vector<double> log_widths;
    for (std::size_t w : cc.widths)
        log_widths.push_back(std::log(static_cast<double>(w)));

    for (std::size_t wi = 0; wi < cc.widths.size(); ++wi) {
        const std::size_t width = cc.widths[wi];
        for (std::size_t si = 0; si < cc.seeds.size(); ++si) {
            const std::uint64_t seed = cc.seeds[si];
            const Cell c{width, -1, cfg.train.eta_prime, cfg.pc.gamma_prime, seed};
            Trainer t(cfg, c, data.train.x.rows(), data.train.y.rows());
            const auto batches = make_batches(data.train, cc.batch, derive_seed({cfg.seed, seed, 0}));
            t.prepare(batches);
            std::vector<double> dh(L, nan);
            try {
                for (std::size_t s = 0; s < cc.steps; ++s)
                    t.step(batches[s % batches.size()].x, batches[s % batches.size()].y);
                const Matrix& probe = batches.front().x;
                const ForwardCache now = forward(t.net(), probe);
                const ForwardCache init = forward(t.initial_net(), probe);
                for (std::size_t l = 1; l <= L; ++l)
                    dh[l - 1] = rms_norm(now.h[l] - init.h[l]);
            } catch (const DivergenceError&) {
            }
            for (std::size_t l = 1; l <= L; ++l) {
                rows.push_back({cell, l, std::to_string(width), std::to_string(seed), "delta_h_rms", dh[l - 1]});
                logs[si][l - 1].push_back(dh[l - 1] > 0.0 ? std::log(dh[l - 1]) : nan);
            }
        }
    }

    for (std::size_t l = 1; l <= L; ++l) {
        std::vector<double> slopes;
        for (std::size_t si = 0; si < cc.seeds.size(); ++si) {
            const auto& ys = logs[si][l - 1];
            const bool finite = std::all_of(ys.begin(), ys.end(), [](double v) { return std::isfinite(v); });
            slopes.push_back(finite ? fit_slope(log_widths, ys) : nan);
        }
        const double mean = std::accumulate(slopes.begin(), slopes.end(), 0.0) / static_cast<double>(slopes.size());
        const auto [lo, hi] = std::minmax_element(slopes.begin(), slopes.end());
        rows.push_back({cell, l, "", "", "slope", mean});
        rows.push_back({cell, l, "", "", "slope_spread", std::isfinite(mean) ? *hi - *lo : nan});
    }
    return rows;
}

// ---------------------------------------------------------------- oracle check

namespace {

// Per-sample Hessian of the free energy of a linear network with respect to
// the free states; the same for every column of the batch.
Eigen::MatrixXd state_hessian(const Mlp& net, const std::vector<double>& gammas, bool nudged, double beta)
{
    const std::size_t L = net.depth();
    const std::size_t last = nudged ? L : L - 1;
    std::vector<std::size_t> offset{0};
    for (std::size_t l = 1; l <= last; ++l)
        offset.push_back(offset.back() + net.widths[l]);
    auto w = [&](std::size_t l) {
        const Matrix& m = net.W(l);
        return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            m.data(), m.rows(), m.cols());
    };
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(offset.back(), offset.back());
    for (std::size_t l = 1; l <= last; ++l) {
        const auto n = static_cast<Eigen::Index>(net.widths[l]);
        const auto o = static_cast<Eigen::Index>(offset[l - 1]);
        h.block(o, o, n, n).diagonal().array() += gammas[l - 1] + (l == L ? beta : 0.0);
        if (l < L) {
            h.block(o, o, n, n) += gammas[l] * w(l + 1).transpose() * w(l + 1);
            if (l + 1 <= last) {
                const auto m = static_cast<Eigen::Index>(net.widths[l + 1]);
                const auto o2 = static_cast<Eigen::Index>(offset[l]);
                h.block(o, o2, n, m) -= gammas[l] * w(l + 1).transpose();
                h.block(o2, o, m, n) -= gammas[l] * w(l + 1);
            }
        }
    }
    return h;
}

// Step size 2/(λ_max + λ_min), the fastest stable rate for gradient descent on a quadratic.
double optimal_rate(const Mlp& net, const std::vector<double>& gammas, bool nudged, double beta)
{
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(state_hessian(net, gammas, nudged, beta),
                                                             Eigen::EigenvaluesOnly);
    return 2.0 / (eig.eigenvalues().maxCoeff() + eig.eigenvalues().minCoeff());
}

struct OracleCell {
    double error;
    double residual;
    std::size_t steps;
    bool converged;
};

OracleCell run_oracle_cell(const Mlp& net, const Matrix& x, const Matrix& y, const std::vector<double>& gammas,
                           bool nudged, double beta, std::size_t max_steps, std::uint64_t seed)
{
    PcConfig pc;
    pc.mode = InferenceMode::synchronous;
    pc.f_ini = false;
    pc.nudged = nudged;
    pc.beta = nudged ? beta : 1.0;
    pc.inference_rate = optimal_rate(net, gammas, nudged, beta);

    const FixedPointSolution sol = nudged ? nudged_fixed_point(net, x, y, gammas, beta) : fixed_point(net, x, y, gammas);
    const double scale = std::max(1.0, max_abs_diff(sol.residual, Matrix(sol.residual.rows(), sol.residual.cols())));
    const std::size_t L = net.depth();
    const std::size_t last = nudged ? L : L - 1;

    Rng rng(seed);
    const ForwardCache cache = forward(net, x);
    PcState s = init_inference(net, cache, y, pc, gammas, rng);
    OracleCell out{nan, stationarity_residual(net, sol, y, gammas, nudged ? beta : 0.0), 0, false};
    for (; out.steps < max_steps && !out.converged; ++out.steps) {
        const std::vector<Matrix> before(s.v.begin(), s.v.end());
        inference_step(net, s, y, pc);
        double change = 0.0;
        for (std::size_t l = 1; l <= last; ++l)
            change = std::max(change, max_abs_diff(s.v[l], before[l]));
        out.converged = change / pc.inference_rate <= 1e-13 * scale;
    }
    double num = 0.0, den = 0.0;
    for (std::size_t l = 1; l <= last; ++l) {
        const double d = frobenius_norm(s.v[l] - sol.v_star[l]);
        const double n = frobenius_norm(sol.v_star[l]);
        num += d * d;
        den += n * n;
    }
    out.error = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
    return out;
}

}  // namespace

OracleReport oracle_check(const ExperimentConfig& cfg)
{
    const OracleConfig& oc = cfg.oracle;
    require_linear(oc.activation, "oracle-check");
    OracleReport report;
    auto add = [&](const std::string& cell, std::size_t width, const std::string& seed, const OracleCell& c) {
        report.rows.push_back({cell, 0, std::to_string(width), seed, "relative_error", c.error});
        report.rows.push_back({cell, 0, std::to_string(width), seed, "stationarity_residual", c.residual});
        report.rows.push_back({cell, 0, std::to_string(width), seed, "steps", static_cast<double>(c.steps)});
        report.rows.push_back({cell, 0, std::to_string(width), seed, "converged", c.converged ? 1.0 : 0.0});
        report.max_error = std::max(report.max_error, std::isfinite(c.error) && c.converged ? c.error : 1.0 / 0.0);
        report.max_residual = std::max(report.max_residual, c.residual);
    };

    {  // scalar chain W = (1, 1), x = 1, y = 0
        Mlp net({1, 1, 1}, Activation::identity);
        net.W(1) = Matrix(1, 1, 1.0);
        net.W(2) = Matrix(1, 1, 1.0);
        const Matrix x(1, 1, 1.0), y(1, 1, 0.0);
        add("scalar_chain", 1, "", run_oracle_cell(net, x, y, {1.0, 1.0}, false, 0.0, oc.max_steps, 0));
        add("scalar_chain|beta=1", 1, "", run_oracle_cell(net, x, y, {1.0, 1.0}, true, 1.0, oc.max_steps, 0));
    }

    std::vector<double> betas{0.0};  // 0 marks the plain equilibrium
    betas.insert(betas.end(), oc.betas.begin(), oc.betas.end());
    for (std::size_t depth : oc.depths)
        for (std::size_t width : oc.widths)
            for (double gbl : oc.gamma_bars)
                for (double beta : betas)
                    for (std::uint64_t seed : oc.seeds) {
                        const AbcSpec spec = preset(cfg.param.preset, depth, gbl, cfg.param.base_width);
                        Rng rng(derive_seed({cfg.seed, depth, width, seed}));
                        const Mlp net =
                            make_mlp(oc.input_dim, width, oc.output_dim, depth, Activation::identity, spec, cfg.model.gain, rng);
                        const Matrix x = gaussian_matrix(rng, oc.input_dim, oc.batch, 1.0);
                        const Matrix y = gaussian_matrix(rng, oc.output_dim, oc.batch, 1.0);
                        const auto gammas = effective_gammas(spec, width, cfg.pc.gamma_prime);
                        std::vector<std::string> parts{kv("L", static_cast<double>(depth)), kv("gamma_bar_L", gbl)};
                        if (beta > 0.0)
                            parts.push_back(kv("beta", beta));
                        add(join_cell(parts), width, std::to_string(seed),
                            run_oracle_cell(net, x, y, gammas, beta > 0.0, beta, oc.max_steps,
                                            derive_seed({cfg.seed, depth, width, seed, 1})));
                    }
    report.passed = report.max_error <= oc.tolerance && report.max_residual <= 1e-9;
    return report;
}

// ---------------------------------------------------------------- similarity panel

std::vector<LongRow> similarity_panel(const ExperimentConfig& cfg)
{
    const SimilarityConfig& sc = cfg.similarity;
    require_linear(sc.activation, "similarity-panel");
    std::vector<LongRow> rows;
    const std::size_t L = sc.depth;
    for (std::size_t ml : sc.output_dims)
        for (double gbl : sc.gamma_bars) {
            const std::string cell = join_cell({kv("M_L", static_cast<double>(ml)), kv("gamma_bar_L", gbl)});
            const AbcSpec spec = preset(cfg.param.preset, L, gbl, cfg.param.base_width);
            for (std::size_t width : sc.widths) {
                // quantity → layer → sum over seeds
                std::map<std::string, std::vector<double>> sums;
                for (std::uint64_t seed : sc.seeds) {
                    Rng rng(derive_seed({cfg.seed, ml, width, seed}));
                    const Mlp net = make_mlp(sc.input_dim, width, ml, L, Activation::identity, spec, cfg.model.gain, rng);
                    const Matrix x = gaussian_matrix(rng, sc.input_dim, 1, 1.0);
                    const Matrix y = gaussian_matrix(rng, ml, 1, 1.0);
                    const auto gammas = effective_gammas(spec, width, cfg.pc.gamma_prime);
                    const double rho = sc.rho >= 0.0 ? sc.rho : gammas[L - 2] / gammas[L - 1];
                    const auto panel = gradient_similarity_panel(net, x, y, gammas, rho);
                    const auto wcos = weight_gradient_cosines(net, x, y, gammas);
                    const std::string sd = std::to_string(seed);
                    for (const auto& p : panel) {
                        const std::pair<const char*, double> qs[] = {
                            {"cos_pc_bp", p.cos_pc_bp},
                            {"cos_pc_gnt", p.cos_pc_gnt},
                            {"cos_bp_gnt", p.cos_bp_gnt},
                            {"cos_weight_pc_bp", wcos.at(p.layer - 1)},
                        };
                        for (const auto& [q, v] : qs) {
                            rows.push_back({cell, p.layer, std::to_string(width), sd, q, v});
                            auto& acc = sums[q];
                            acc.resize(L + 1, 0.0);
                            acc[p.layer] += v;
                        }
                    }
                }
                for (const auto& [q, acc] : sums)
                    for (std::size_t l = 1; l <= L; ++l)
                        rows.push_back({cell, l, std::to_string(width), "", q + "_mean",
                                        acc[l] / static_cast<double>(sc.seeds.size())});
            }
        }
    return rows;
}

// ---------------------------------------------------------------- scaling

std::vector<LongRow> scaling(const ExperimentConfig& cfg)
{
    const ScalingConfig& sc = cfg.scaling;
    require_linear(sc.activation, "scaling");
    std::vector<LongRow> rows;
    for (double gbl : sc.gamma_bars) {
        const std::string cell = kv("gamma_bar_L", gbl);
        const AbcSpec spec = preset(cfg.param.preset, sc.depth, gbl, cfg.param.base_width);
        const ScalingFit fit =
            c_gamma_scaling_exponent(spec, sc.widths, sc.seeds, sc.input_dim, sc.output_dim, cfg.pc.gamma_prime);
        for (std::size_t i = 0; i < sc.widths.size(); ++i)
            rows.push_back({cell, 0, std::to_string(sc.widths[i]), "", "mean_log_c_gamma_rms", fit.mean_log_value[i]});
        rows.push_back({cell, 0, "", "", "slope", fit.slope});
        rows.push_back({cell, 0, "", "", "slope_spread", fit.slope_spread});
    }
    if (!sc.balance)
        return rows;

    AbcSpec spec = preset(cfg.param.preset, sc.balance_depth, sc.balance_gamma_bar_L, cfg.param.base_width);
    auto balance_rows = [&](const std::string& cell, const AbcSpec& s) {
        const auto slopes =
            balance_exponent_check(s, sc.balance_widths, sc.seeds, sc.input_dim, sc.output_dim, sc.balance_batch,
                                   cfg.pc.gamma_prime);
        for (const auto& b : slopes) {
            rows.push_back({cell, b.layer, "", "", "slope_one_sweep", b.slope_one_sweep});
            rows.push_back({cell, b.layer, "", "", "slope_fixed_point", b.slope_fixed_point});
            rows.push_back({cell, b.layer, "", "", "slope_difference", b.slope_one_sweep - b.slope_fixed_point});
        }
    };
    const std::string base = join_cell(
        {"balance", kv("L", static_cast<double>(sc.balance_depth)), kv("gamma_bar_L", sc.balance_gamma_bar_L)});
    balance_rows(base + "|inject=none", spec);
    spec.gamma_bar.at(sc.balance_inject_layer - 1) = sc.balance_inject_value;
    balance_rows(base + "|" + kv("inject_layer", static_cast<double>(sc.balance_inject_layer)) + "|"
                     + kv("inject_value", sc.balance_inject_value),
                 spec);
    return rows;
}

// ---------------------------------------------------------------- omega

std::vector<LongRow> omega(const ExperimentConfig& cfg, const DataSplit& data)
{
    const OmegaConfig& oc = cfg.omega;
    std::vector<LongRow> rows;
    for (const std::string& alg : oc.algorithms) {
        ExperimentConfig local = cfg;
        local.train.algorithm = parse_algorithm(alg);
        const bool bp = local.train.algorithm == Algorithm::bp;
        local.param.preset = bp ? oc.bp_preset : oc.preset;
        if (bp)
            local.param.gamma_bar_L = 0.0;
        const double eta_prime = bp ? oc.bp_eta_prime : oc.eta_prime;
        const std::string cell = join_cell({kv("algorithm", alg), kv("preset", to_string(local.param.preset)),
                                            kv("eta_prime", eta_prime)});
        const std::size_t L = local.model.depth;
        for (std::size_t width : oc.widths) {
            double total = 0.0;
            for (std::uint64_t seed : oc.seeds) {
                const Cell c{width, -1, eta_prime, local.pc.gamma_prime, seed};
                Trainer t(local, c, data.train.x.rows(), data.train.y.rows());
                const auto batches = make_batches(data.train, local.data.batch_size, derive_seed({cfg.seed, seed, 0}));
                t.prepare(batches);
                double w = nan;
                try {
                    for (std::size_t s = 0; s < oc.steps; ++s)
                        t.step(batches[s % batches.size()].x, batches[s % batches.size()].y);
                    const Matrix probe = first_columns(data.train.x, local.train.probe_n);
                    const Matrix dh = forward(t.net(), probe).h[L - 1] - forward(t.initial_net(), probe).h[L - 1];
                    w = omega_L(t.initial_net().W(L), dh, width);
                } catch (const DivergenceError&) {
                } catch (const ZeroNormError&) {
                }
                rows.push_back({cell, L, std::to_string(width), std::to_string(seed), "omega_L", w});
                total += w;
            }
            rows.push_back({cell, L, std::to_string(width), "", "omega_L_mean", total / static_cast<double>(oc.seeds.size())});
        }
    }
    return rows;
}

}  // namespace pclab::harness

// Acceptance suite: one PASS/FAIL line per criterion. An optional argument
// selects criteria whose name contains it, e.g. `acceptance transfer`.

#include "pclab/harness/experiments.hpp"
#include "pclab/linear_oracle.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

using namespace pclab;
using namespace pclab::harness;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

struct Criterion {
    const char* name;
    std::function<Outcome()> run;
};

std::string num(double x)
{
    std::ostringstream os;
    os.precision(4);
    os << x;
    return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig config(const std::vector<std::string>& overrides,
                        const std::optional<std::filesystem::path>& file = std::nullopt)
{
    return build_config(file, overrides);
}

std::filesystem::path scratch_dir()
{
    auto dir = std::filesystem::temp_directory_path() / "pclab_acceptance";
    std::filesystem::create_directories(dir);
    return dir;
}

// Looks up long-format rows by (cell, layer, width, quantity).
double find(const std::vector<LongRow>& rows, const std::string& cell, std::size_t layer, const std::string& width,
            const std::string& quantity)
{
    for (const auto& r : rows)
        if (r.cell == cell && r.layer == layer && r.width == width && r.seed.empty() && r.quantity == quantity)
            return r.value;
    throw Error("missing row " + cell + " layer " + std::to_string(layer) + " width " + width + " " + quantity);
}

// ---------------------------------------------------------------------------

Outcome bp_reduction()
{
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    PcConfig pc;
    pc.f_ini = true;
    pc.fpa = true;
    pc.mode = InferenceMode::sequential;
    pc.steps = 1;
    for (Loss loss : {Loss::mse_sum, Loss::cross_entropy})
        for (std::size_t width : {16u, 32u, 64u})
            for (std::uint64_t seed : {0u, 1u, 2u}) {
                Rng rng(derive_seed({seed, width}));
                const Mlp net = make_mlp(20, width, 10, 3, Activation::tanh, preset(Preset::sp, 3), 1.0, rng);
                const Matrix x = gaussian_matrix(rng, 20, 8, 1.0);
                Matrix y = gaussian_matrix(rng, 10, 8, 1.0);
                if (loss == Loss::cross_entropy)
                    y = softmax(y);
                pc.loss = loss;
                const ForwardCache cache = forward(net, x);
                PcState s = init_inference(net, cache, y, pc, {1.0, 1.0, 1.0}, rng);
                inference_step(net, s, y, pc);
                const auto g_pc = pc_gradients(net, s);
                const auto g_bp = bp_gradients(net, cache, y, loss);
                for (std::size_t l = 0; l < 3; ++l)
                    worst = std::max(worst, relative_error(g_pc[l], g_bp[l]));
            }
    const double t = seconds_since(t0);
    o.require(worst <= 1e-10, "max relative error " + num(worst) + " > 1e-10");
    o.require(t < 1.0, "runtime " + num(t) + " s >= 1 s");
    o.note("max relative error " + num(worst) + ", " + num(t) + " s");
    return o;
}

Outcome fixed_point_oracle()
{
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const OracleReport r = oracle_check(config({}));
    const double t = seconds_since(t0);
    o.require(r.max_error <= 1e-6, "max relative error " + num(r.max_error) + " > 1e-6");
    o.require(r.max_residual <= 1e-9, "stationarity residual " + num(r.max_residual) + " > 1e-9");
    o.require(t < 10.0, "runtime " + num(t) + " s >= 10 s");
    o.note("max relative error " + num(r.max_error) + ", residual " + num(r.max_residual) + ", "
           + std::to_string(r.rows.size() / 4) + " cells, " + num(t) + " s");
    return o;
}

Outcome scalar_fixtures()
{
    Outcome o;
    Mlp net({1, 1, 1}, Activation::identity);
    net.W(1) = Matrix{{1.0}};
    net.W(2) = Matrix{{1.0}};
    const Matrix x{{1.0}}, y{{0.0}};
    const double eps = 4 * std::numeric_limits<double>::epsilon();
    const FixedPointSolution plain = fixed_point(net, x, y, {1.0, 1.0});
    const FixedPointSolution nudged = nudged_fixed_point(net, x, y, {1.0, 1.0}, 1.0);
    const double v1 = plain.v_star[1](0, 0);
    const double n1 = nudged.v_star[1](0, 0), n2 = nudged.v_star[2](0, 0);
    o.require(std::abs(v1 - 0.5) <= eps, "v1* = " + num(v1));
    o.require(std::abs(n1 - 2.0 / 3.0) <= eps && std::abs(n2 - 1.0 / 3.0) <= eps,
              "nudged (v1*, v2*) = (" + num(n1) + ", " + num(n2) + ")");

    // the same equilibria reached by iterating inference
    for (bool nudge : {false, true}) {
        PcConfig pc;
        pc.mode = InferenceMode::synchronous;
        pc.f_ini = false;
        pc.nudged = nudge;
        pc.inference_rate = 0.5;
        Rng rng(1);
        PcState s = init_inference(net, forward(net, x), y, pc, {1.0, 1.0}, rng);
        for (int t = 0; t < 2000; ++t)
            inference_step(net, s, y, pc);
        const double err = nudge ? std::max(std::abs(s.v[1](0, 0) - 2.0 / 3.0), std::abs(s.v[2](0, 0) - 1.0 / 3.0))
                                 : std::abs(s.v[1](0, 0) - 0.5);
        o.require(err <= 1e-12, std::string(nudge ? "nudged" : "plain") + " iteration error " + num(err));
    }
    o.note("v1* = " + num(v1) + ", nudged (" + num(n1) + ", " + num(n2) + ")");
    return o;
}

Outcome c_gamma_scaling()
{
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const auto rows = scaling(config({"scaling.balance=false"}));
    const double t = seconds_since(t0);
    const double s0 = find(rows, "gamma_bar_L=0", 0, "", "slope");
    const double s1 = find(rows, "gamma_bar_L=-1", 0, "", "slope");
    o.require(std::abs(s0 + 1.0) <= 0.15, "slope at gamma_bar_L=0 is " + num(s0));
    o.require(std::abs(s1) <= 0.15, "slope at gamma_bar_L=-1 is " + num(s1));
    o.require(t < 60.0, "runtime " + num(t) + " s >= 60 s");
    o.note("slopes " + num(s0) + " (gamma_bar_L=0), " + num(s1) + " (gamma_bar_L=-1), " + num(t) + " s");
    return o;
}

Outcome similarity()
{
    Outcome o;
    const auto rows = similarity_panel(config({"similarity.output_dims=[1,10]", "similarity.gamma_bars=[0,-1]"}));
    double worst_unit = 0.0;
    for (const auto& r : rows)
        if (r.cell.rfind("M_L=1|", 0) == 0 && r.quantity == "cos_pc_bp" && !r.seed.empty())
            worst_unit = std::max(worst_unit, std::abs(r.value - 1.0));
    o.require(worst_unit <= 1e-8, "M_L=1 cosine deviates from 1 by " + num(worst_unit));

    std::string trend;
    for (std::size_t l = 1; l <= 3; ++l) {
        double prev = -2.0;
        for (const char* w : {"64", "256", "1024"}) {
            const double c = find(rows, "M_L=10|gamma_bar_L=0", l, w, "cos_pc_bp_mean");
            o.require(c >= prev, "layer " + std::to_string(l) + " cosine decreases at width " + w);
            prev = c;
        }
        o.require(prev >= 0.99, "layer " + std::to_string(l) + " cosine " + num(prev) + " < 0.99 at width 1024");
        trend += (l > 1 ? ", " : "") + num(prev);
    }
    o.note("M_L=1 max |cos-1| " + num(worst_unit) + ", M_L=10 cos at 1024: " + trend);
    return o;
}

Outcome balance()
{
    Outcome o;
    const ExperimentConfig cfg = config({"scaling.gamma_bars=[]"});
    const auto rows = scaling(cfg);
    const std::string base = "balance|L=" + std::to_string(cfg.scaling.balance_depth) + "|gamma_bar_L="
                           + format_number(cfg.scaling.balance_gamma_bar_L);
    const std::string none = base + "|inject=none";
    const std::string injected = base + "|inject_layer=" + std::to_string(cfg.scaling.balance_inject_layer)
                               + "|inject_value=" + format_number(cfg.scaling.balance_inject_value);
    std::string d0, d1;
    double max_injected = 0.0;
    for (std::size_t l = 1; l < cfg.scaling.balance_depth; ++l) {
        const double a = find(rows, none, l, "", "slope_difference");
        const double b = find(rows, injected, l, "", "slope_difference");
        o.require(std::abs(a) <= 0.1, "balanced layer " + std::to_string(l) + " differs by " + num(a));
        max_injected = std::max(max_injected, std::abs(b));
        d0 += (l > 1 ? ", " : "") + num(a);
        d1 += (l > 1 ? ", " : "") + num(b);
    }
    o.require(max_injected >= 0.3, "injected exponent changes slopes by at most " + num(max_injected));
    o.note("balanced differences " + d0 + "; injected " + d1);
    return o;
}

Outcome coordinate_check()
{
    Outcome o;
    const ExperimentConfig base = config({});
    const DataSplit data = load_data(base);
    auto slopes = [&](const std::vector<std::string>& overrides) {
        const auto rows = coord_check(config(overrides), data);
        std::vector<double> s;
        for (const auto& r : rows)
            if (r.quantity == "slope")
                s.push_back(r.value);
        return s;
    };
    auto list = [](const std::vector<double>& xs) {
        std::string out;
        for (double x : xs)
            out += (out.empty() ? "" : " ") + num(x);
        return out;
    };
    const auto pc = slopes({"param.preset=mup_pc", "param.gamma_bar_L=-1", "train.algorithm=pc"});
    const auto tp = slopes({"param.preset=mup_tp", "train.algorithm=tp"});
    const auto sp = slopes({"param.preset=sp", "train.algorithm=pc"});
    for (double s : pc)
        o.require(std::abs(s) <= 0.2, "mup_pc slope " + num(s));
    for (double s : tp)
        o.require(std::abs(s) <= 0.2, "mup_tp slope " + num(s));
    double sp_max = 0.0;
    for (double s : sp)
        sp_max = std::max(sp_max, std::abs(s));
    o.require(sp_max >= 0.3, "sp max |slope| " + num(sp_max));
    o.note("mup_pc [" + list(pc) + "], mup_tp [" + list(tp) + "], sp [" + list(sp) + "]");
    return o;
}

Outcome transfer()
{
    Outcome o;
    const auto fmnist = std::filesystem::path(PCLAB_SOURCE_DIR) / "data" / "fashion_mnist";
    const bool real = std::filesystem::exists(fmnist / "train-images-idx3-ubyte");
    std::vector<std::string> common;
    std::optional<std::filesystem::path> file = std::filesystem::path(PCLAB_SOURCE_DIR) / "configs" / "transfer_synth.json";
    if (real) {
        file = std::nullopt;
        common = {"data.source=fashion_mnist", "data.dir=" + nlohmann::json(fmnist.string()).dump(),
                  "data.subset_n=1024", "data.batch_size=1024",
                  "model.gain=0.5773502691896258", "pc.f_ini=false", "pc.steps=100",
                  "optimizer.name=sgd_momentum", "sweep.widths=[128,1024]", "sweep.seeds=[0]"};
    }
    struct Arm {
        const char* label;
        std::vector<std::string> overrides;
        bool transfers;
    };
    const Arm arms[] = {
        {"mup_pc", {"train.algorithm=pc", "param.preset=mup_pc", "param.gamma_bar_L=-1"}, true},
        {"mup_tp", {"train.algorithm=tp", "param.preset=mup_tp"}, true},
        {"sp", {"train.algorithm=pc", "param.preset=sp"}, false},
    };
    std::string data_source;
    for (const Arm& arm : arms) {
        auto overrides = common;
        overrides.insert(overrides.end(), arm.overrides.begin(), arm.overrides.end());
        const ExperimentConfig cfg = config(overrides, file);
        const DataSplit data = load_data(cfg);
        data_source = data.source;
        const SweepResult r = sweep(cfg, data);
        std::map<std::size_t, int> best;
        for (const auto& s : r.summary)
            best[s.width] = s.best_lr_index;
        const int a = best.at(128), b = best.at(1024);
        if (a < 0 || b < 0) {
            o.require(false, std::string(arm.label) + ": every learning rate diverged at some width");
            continue;
        }
        const int shift = std::abs(a - b);
        if (arm.transfers)
            o.require(shift <= 1, std::string(arm.label) + " argmin shifts " + std::to_string(shift) + " steps");
        else
            o.require(shift >= 2, std::string(arm.label) + " argmin shifts only " + std::to_string(shift) + " steps");
        o.note(std::string(arm.label) + " best log2 lr " + format_number(cfg.sweep.log2_lr[a]) + " -> "
               + format_number(cfg.sweep.log2_lr[b]));
    }
    o.note("data " + data_source);
    return o;
}

Outcome tp_feedback()
{
    Outcome o;
    // stationarity of the ridge solution
    Rng rng(3);
    Mlp net({6, 12, 10, 4}, Activation::tanh);
    for (std::size_t l = 1; l <= 3; ++l)
        net.W(l) = gaussian_matrix(rng, net.widths[l], net.widths[l - 1], 1.0 / std::sqrt(double(net.widths[l - 1])));
    const ForwardCache c = forward(net, gaussian_matrix(rng, 6, 16, 1.0));
    const double lambda = 1e-3;
    double worst = 0.0;
    for (std::size_t l = 2; l <= 3; ++l) {
        const Matrix q = q_star(c.h[l - 1], c.h[l], lambda * double(net.widths[l - 1]));
        worst = std::max(worst, rms_norm(reconstruction_gradient(q, net, l, c.h[l - 1], Activation::identity, lambda)));
    }
    o.require(worst <= 1e-8, "q_star gradient RMS " + num(worst));

    // trained linear feedback converges to the ridge solution
    TpConfig cfg;
    cfg.feedback_mode = FeedbackMode::trained;
    cfg.noise_std = 0.0;
    cfg.weight_decay = 0.01;
    FeedbackNet fb = make_feedback(net, Activation::identity, 1.0, rng);
    for (int t = 0; t < 20000; ++t)
        for (std::size_t l = 2; l <= 3; ++l)
            reconstruction_step(fb, net, c, l, cfg, 0.5, rng);
    double gap = 0.0;
    for (std::size_t l = 2; l <= 3; ++l)
        gap = std::max(gap, max_abs_diff(fb.Q[l], q_star(c.h[l - 1], c.h[l], cfg.weight_decay * double(net.widths[l - 1]))));
    o.require(gap <= 1e-4, "trained feedback differs from q_star by " + num(gap));

    // invertible two-layer linear network: DTP with Q* at μ → 0 follows Gauss-Newton
    double worst_cos = 1.0;
    for (std::uint64_t seed : {0u, 1u, 2u, 3u, 4u}) {
        Rng r2(derive_seed({seed, 77}));
        Mlp lin({4, 4, 4}, Activation::identity);
        lin.W(1) = gaussian_matrix(r2, 4, 4, 0.5);
        lin.W(2) = gaussian_matrix(r2, 4, 4, 0.5);
        for (std::size_t i = 0; i < 4; ++i) {
            lin.W(1)(i, i) += 1.0;
            lin.W(2)(i, i) += 1.0;
        }
        const Matrix x = gaussian_matrix(r2, 4, 1, 1.0);
        const Matrix y = gaussian_matrix(r2, 4, 1, 1.0);
        const ForwardCache cache = forward(lin, x);
        // Q* estimated from a batch of probe inputs spanning the hidden space
        const ForwardCache probe = forward(lin, gaussian_matrix(r2, 4, 16, 1.0));
        FeedbackNet f;
        f.Q.resize(3);
        f.Q[2] = q_star(probe.h[1], probe.h[2], 1e-12);
        TpConfig tc;
        const auto g_tp = tp_gradients(lin, cache, propagate_targets(f, cache, y, Loss::mse_sum, tc));
        const auto g_gnt = gnt_gradients(lin, cache, y, 1e-12);
        worst_cos = std::min(worst_cos, cosine_similarity(g_tp[0], g_gnt[0]));
    }
    o.require(worst_cos >= 0.999, "layer-1 cosine to Gauss-Newton " + num(worst_cos));
    o.note("q_star gradient RMS " + num(worst) + ", trained gap " + num(gap) + ", min GNT cosine " + num(worst_cos));
    return o;
}

Outcome omega_exponent()
{
    Outcome o;
    const ExperimentConfig cfg = config({});
    const DataSplit data = load_data(cfg);
    const auto rows = omega(cfg, data);
    std::string tp_cell = "algorithm=tp|preset=" + to_string(cfg.omega.preset) + "|eta_prime="
                        + format_number(cfg.omega.eta_prime);
    std::string bp_cell = "algorithm=bp|preset=" + to_string(cfg.omega.bp_preset) + "|eta_prime="
                        + format_number(cfg.omega.bp_eta_prime);
    std::string tp_values, bp_values;
    for (std::size_t w : cfg.omega.widths) {
        if (w < 512)
            continue;
        const std::string ws = std::to_string(w);
        const double tp = find(rows, tp_cell, cfg.model.depth, ws, "omega_L_mean");
        const double bp = find(rows, bp_cell, cfg.model.depth, ws, "omega_L_mean");
        o.require(tp >= 0.35 && tp <= 0.65, "TP omega_L " + num(tp) + " at width " + ws);
        o.require(bp >= 0.8, "BP omega_L " + num(bp) + " at width " + ws);
        tp_values += (tp_values.empty() ? "" : ", ") + num(tp);
        bp_values += (bp_values.empty() ? "" : ", ") + num(bp);
    }
    o.note("TP " + tp_values + "; BP " + bp_values + " (widths >= 512, " + std::to_string(cfg.omega.seeds.size())
           + " seeds)");
    return o;
}

std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism()
{
    Outcome o;
    const auto dir = scratch_dir() / "determinism";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const std::string small = " --subset-n 64 --batch-size 16 --set data.test_n=32 --set model.width=32"
                              " --set param.base_width=32";
    struct Command {
        const char* name;
        std::string args;
    };
    const Command commands[] = {
        {"run", small + " --set train.epochs=2 --set train.seeds=[0,1]"},
        {"sweep", small + " --set train.epochs=2 --set sweep.widths=[16,32] --set sweep.log2_lr=[-6,-4]"},
        {"coord-check", small + " --set coord.widths=[16,32,64] --set coord.seeds=[0,1]"},
        {"oracle-check", " --set oracle.depths=[2,3] --set oracle.widths=[8] --set oracle.seeds=[0]"},
        {"similarity-panel", " --set similarity.widths=[16,64] --set similarity.seeds=[0,1]"},
        {"scaling", " --set scaling.widths=[8,32,128] --set scaling.balance_widths=[8,32] --set scaling.seeds=[0,1]"},
        {"omega", small + " --set omega.widths=[16,32] --set omega.seeds=[0] --set omega.steps=2"},
    };
    std::size_t compared = 0;
    for (const Command& c : commands) {
        std::string outputs[2];
        for (int rep = 0; rep < 2; ++rep) {
            const auto csv = dir / (std::string(c.name) + "_" + std::to_string(rep) + ".csv");
            const std::string cmd = std::string(PCLAB_CLI) + " " + c.name + c.args + " --out " + csv.string()
                                  + " > /dev/null 2>&1";
            const int status = std::system(cmd.c_str());
            if (status != 0) {
                o.require(false, std::string(c.name) + " exited with status " + std::to_string(status));
                break;
            }
            outputs[rep] = read_file(csv);
            const auto summary = dir / (std::string(c.name) + "_" + std::to_string(rep) + ".summary.csv");
            if (std::filesystem::exists(summary))
                outputs[rep] += read_file(summary);
        }
        o.require(!outputs[0].empty() && outputs[0] == outputs[1], std::string(c.name) + " output differs on rerun");
        ++compared;
    }
    o.note(std::to_string(compared) + " commands rerun, CSVs compared byte for byte");
    return o;
}

}  // namespace

int main(int argc, char** argv)
{
    const std::string filter = argc > 1 ? argv[1] : "";
    const Criterion criteria[] = {
        {"bp-reduction", bp_reduction},
        {"fixed-point-oracle", fixed_point_oracle},
        {"scalar-fixtures", scalar_fixtures},
        {"c-gamma-scaling", c_gamma_scaling},
        {"similarity", similarity},
        {"balance-condition", balance},
        {"coordinate-check", coordinate_check},
        {"transfer", transfer},
        {"tp-feedback", tp_feedback},
        {"omega-exponent", omega_exponent},
        {"determinism", determinism},
    };
    int failures = 0, ran = 0;
    for (const Criterion& c : criteria) {
        if (!filter.empty() && std::string(c.name).find(filter) == std::string::npos)
            continue;
        ++ran;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail = std::string("error: ") + e.what();
        }
        failures += !out.pass;
        std::printf("%s  %-20s %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", c.name, out.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", ran - failures, ran);
    return failures == 0 ? 0 : 1;
}

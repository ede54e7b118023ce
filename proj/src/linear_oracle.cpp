#include "pclab/linear_oracle.hpp"

#include "pclab/pc.hpp"

#include <algorithm>
#include <cmath>

namespace pclab {

namespace {

void require_linear(const Mlp& net, const char* what)
{
    net.validate();
    if (net.activation != Activation::identity)
        throw Error(std::string(what) + ": requires a linear network (identity activation)");
}

void require_gammas(const Mlp& net, const std::vector<double>& gammas)
{
    if (gammas.size() != net.depth())
        throw DimensionError("need one step size per layer");
    for (double g : gammas)
        if (!(g >= 0.0))
            throw Error("step sizes must be non-negative");
}

FixedPointSolution solve(const Mlp& net, const Matrix& x, const Matrix& y, const std::vector<double>& gammas,
                         double extra_damping)
{
    require_gammas(net, gammas);
    const std::size_t L = net.depth();
    const double gL = gammas[L - 1];
    for (std::size_t l = 1; l < L; ++l)
        if (!(gammas[l - 1] > 0.0))
            throw Error("fixed_point: hidden step sizes must be positive");

    const ForwardCache cache = forward(net, x);
    if (!cache.output().same_shape(y))
        throw DimensionError("fixed_point: target shape mismatch");

    FixedPointSolution sol;
    sol.residual = y - cache.output();
    sol.c_gamma = c_gamma(net, gammas);
    Matrix a = sol.c_gamma;
    for (std::size_t i = 0; i < a.rows(); ++i)
        a(i, i) += 1.0 + extra_damping;
    const Matrix z = solve_spd(a, sol.residual);

    sol.e_star.resize(L + 1);
    sol.e_star[L] = z;
    // e*_l = (γ_L/γ_l) W_{l+1}ᵀ ... W_Lᵀ z, accumulated from the top.
    Matrix back = z;
    for (std::size_t l = L - 1; l >= 1; --l) {
        back = matmul_tn(net.W(l + 1), back);
        sol.e_star[l] = back * (gL / gammas[l - 1]);
    }
    sol.v_star.resize(L + 1);
    sol.v_star[0] = x;
    for (std::size_t l = 1; l <= L; ++l)
        sol.v_star[l] = matmul(net.W(l), sol.v_star[l - 1]) + sol.e_star[l];
    return sol;
}

}  // namespace

Matrix suffix_product(const Mlp& net, std::size_t j, std::size_t i)
{
    if (i < 1 || j > net.depth() || i > net.depth() + 1)
        throw DimensionError("suffix_product: layer range out of bounds");
    Matrix p = Matrix::identity(net.widths[i - 1]);
    for (std::size_t l = i; l <= j; ++l)
        p = matmul(net.W(l), p);
    return p;
}

Matrix c_gamma(const Mlp& net, const std::vector<double>& gammas)
{
    require_linear(net, "c_gamma");
    require_gammas(net, gammas);
    const std::size_t L = net.depth();
    const std::size_t out = net.widths[L];
    const double gL = gammas[L - 1];
    Matrix c(out, out);
    // Running suffix W_{L:i} built from i = L downwards.
    Matrix suffix = net.W(L);
    for (std::size_t i = L; i >= 2; --i) {
        if (i < L)
            suffix = matmul(suffix, net.W(i));
        const double g = gammas[i - 2];
        if (gL == 0.0)
            continue;
        if (!(g > 0.0))
            throw Error("c_gamma: step sizes below the output layer must be positive");
        c.add_scaled(matmul_nt(suffix, suffix), gL / g);
    }
    return c;
}

FixedPointSolution fixed_point(const Mlp& net, const Matrix& x, const Matrix& y, const std::vector<double>& gammas)
{
    require_linear(net, "fixed_point");
    return solve(net, x, y, gammas, 0.0);
}

FixedPointSolution nudged_fixed_point(const Mlp& net, const Matrix& x, const Matrix& y,
                                      const std::vector<double>& gammas, double beta)
{
    require_linear(net, "nudged_fixed_point");
    if (!(beta > 0.0))
        throw Error("nudged_fixed_point: beta must be positive");
    require_gammas(net, gammas);
    return solve(net, x, y, gammas, gammas.back() / beta);
}

double stationarity_residual(const Mlp& net, const FixedPointSolution& sol, const Matrix& y,
                             const std::vector<double>& gammas, double beta)
{
    require_linear(net, "stationarity_residual");
    require_gammas(net, gammas);
    const std::size_t L = net.depth();
    const bool nudged = beta > 0.0;
    std::vector<Matrix> e(L + 1);
    for (std::size_t l = 1; l < L; ++l)
        e[l] = sol.v_star[l] - matmul(net.W(l), sol.v_star[l - 1]);
    const Matrix top = matmul(net.W(L), sol.v_star[L - 1]);
    e[L] = nudged ? sol.v_star[L] - top : y - top;

    double worst = 0.0;
    auto track = [&worst](const Matrix& g) {
        for (double v : g.values())
            worst = std::max(worst, std::abs(v));
    };
    for (std::size_t l = 1; l < L; ++l) {
        Matrix g = e[l] * gammas[l - 1];
        g.add_scaled(matmul_tn(net.W(l + 1), e[l + 1]), -gammas[l]);
        track(g);
    }
    if (nudged) {
        Matrix g = e[L] * gammas[L - 1];
        g.add_scaled(sol.v_star[L] - y, beta);
        track(g);
    }
    return worst;
}

std::vector<LayerSimilarity> gradient_similarity_panel(const Mlp& net, const Matrix& x, const Matrix& y,
                                                       const std::vector<double>& gammas, double rho)
{
    const FixedPointSolution sol = fixed_point(net, x, y, gammas);
    const ForwardCache cache = forward(net, x);
    const auto bp = bp_deltas(net, cache, y, Loss::mse_sum);
    const auto gnt = gnt_deltas(net, cache, y, rho);
    std::vector<LayerSimilarity> out;
    for (std::size_t l = 1; l <= net.depth(); ++l) {
        const Matrix pc = sol.e_star[l] * -1.0;
        out.push_back({l, cosine_similarity(pc, bp[l]), cosine_similarity(pc, gnt[l]),
                       cosine_similarity(bp[l], gnt[l])});
    }
    return out;
}

std::vector<double> weight_gradient_cosines(const Mlp& net, const Matrix& x, const Matrix& y,
                                            const std::vector<double>& gammas)
{
    const FixedPointSolution sol = fixed_point(net, x, y, gammas);
    const auto bp = bp_gradients(net, forward(net, x), y, Loss::mse_sum);
    std::vector<double> out;
    for (std::size_t l = 1; l <= net.depth(); ++l) {
        const Matrix pc = matmul_nt(sol.e_star[l], sol.v_star[l - 1]) * -1.0;
        out.push_back(cosine_similarity(pc, bp[l - 1]));
    }
    return out;
}

namespace {

void require_width_range(const std::vector<std::size_t>& widths)
{
    if (widths.size() < 3)
        throw Error("scaling fit needs at least three widths");
    const auto [lo, hi] = std::minmax_element(widths.begin(), widths.end());
    if (*lo == 0 || *hi < 16 * *lo)
        throw Error("scaling fit needs widths spanning at least a factor of 16");
}

}  // namespace

ScalingFit c_gamma_scaling_exponent(const AbcSpec& spec, const std::vector<std::size_t>& widths,
                                    const std::vector<std::uint64_t>& seeds, std::size_t input_dim,
                                    std::size_t output_dim, double gamma_prime)
{
    require_width_range(widths);
    if (seeds.empty())
        throw Error("scaling fit needs at least one seed");
    std::vector<double> log_w;
    for (std::size_t m : widths)
        log_w.push_back(std::log(static_cast<double>(m)));

    ScalingFit fit;
    fit.mean_log_value.assign(widths.size(), 0.0);
    std::vector<double> slopes;
    for (std::uint64_t seed : seeds) {
        std::vector<double> log_c;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            Rng rng(derive_seed({seed, widths[k]}));
            const Mlp net = make_mlp(input_dim, widths[k], output_dim, spec.depth(), Activation::identity, spec,
                                     1.0, rng);
            const double value = rms_norm(c_gamma(net, effective_gammas(spec, widths[k], gamma_prime)));
            if (!(value > 0.0))
                throw ZeroNormError("c_gamma vanishes; the scaling exponent is undefined");
            log_c.push_back(std::log(value));
            fit.mean_log_value[k] += log_c.back() / static_cast<double>(seeds.size());
        }
        slopes.push_back(fit_slope(log_w, log_c));
    }
    double total = 0.0;
    for (double s : slopes)
        total += s;
    fit.slope = total / static_cast<double>(slopes.size());
    const auto [lo, hi] = std::minmax_element(slopes.begin(), slopes.end());
    fit.slope_spread = *hi - *lo;
    return fit;
}

std::vector<BalanceSlopes> balance_exponent_check(const AbcSpec& spec, const std::vector<std::size_t>& widths,
                                                  const std::vector<std::uint64_t>& seeds, std::size_t input_dim,
                                                  std::size_t output_dim, std::size_t batch, double gamma_prime)
{
    if (widths.size() < 2)
        throw Error("balance check needs at least two widths");
    if (seeds.empty())
        throw Error("balance check needs at least one seed");
    const std::size_t L = spec.depth();
    std::vector<double> log_w;
    for (std::size_t m : widths)
        log_w.push_back(std::log(static_cast<double>(m)));

    // mean log-norms per (hidden layer, width)
    std::vector<std::vector<double>> sweep(L, std::vector<double>(widths.size(), 0.0));
    std::vector<std::vector<double>> fixed(L, std::vector<double>(widths.size(), 0.0));
    PcConfig cfg;
    cfg.mode = InferenceMode::sequential;
    cfg.f_ini = true;
    cfg.fpa = false;
    cfg.steps = 1;
    const double weight = 1.0 / static_cast<double>(seeds.size());

    for (std::uint64_t seed : seeds) {
        for (std::size_t k = 0; k < widths.size(); ++k) {
            Rng rng(derive_seed({seed, widths[k]}));
            const Mlp net = make_mlp(input_dim, widths[k], output_dim, L, Activation::identity, spec, 1.0, rng);
            Matrix x = gaussian_matrix(rng, input_dim, batch, 1.0 / std::sqrt(static_cast<double>(input_dim)));
            const Matrix y = gaussian_matrix(rng, output_dim, batch, 1.0);
            const auto gammas = effective_gammas(spec, widths[k], gamma_prime);

            const ForwardCache cache = forward(net, x);
            PcState state = init_inference(net, cache, y, cfg, gammas, rng);
            inference_step(net, state, y, cfg);
            const FixedPointSolution sol = fixed_point(net, x, y, gammas);
            for (std::size_t l = 1; l < L; ++l) {
                sweep[l][k] += weight * std::log(rms_norm(state.e[l]));
                fixed[l][k] += weight * std::log(rms_norm(sol.e_star[l]));
            }
        }
    }
    std::vector<BalanceSlopes> out;
    for (std::size_t l = 1; l < L; ++l)
        out.push_back({l, fit_slope(log_w, sweep[l]), fit_slope(log_w, fixed[l])});
    return out;
}

}  // namespace pclab

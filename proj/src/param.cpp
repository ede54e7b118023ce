#include "pclab/param.hpp"

#include <cmath>

namespace pclab {

Preset parse_preset(std::string_view name)
{
    if (name == "sp") return Preset::sp;
    if (name == "ntk_pc") return Preset::ntk_pc;
    if (name == "mup_sgd") return Preset::mup_sgd;
    if (name == "mup_gnt") return Preset::mup_gnt;
    if (name == "mup_pc") return Preset::mup_pc;
    if (name == "mup_tp") return Preset::mup_tp;
    if (name == "mup_adam_pc") return Preset::mup_adam_pc;
    throw ConfigError("unknown parameterization preset '" + std::string(name) + "'");
}

std::string to_string(Preset p)
{
    switch (p) {
    case Preset::sp: return "sp";
    case Preset::ntk_pc: return "ntk_pc";
    case Preset::mup_sgd: return "mup_sgd";
    case Preset::mup_gnt: return "mup_gnt";
    case Preset::mup_pc: return "mup_pc";
    case Preset::mup_tp: return "mup_tp";
    case Preset::mup_adam_pc: return "mup_adam_pc";
    }
    return "?";
}

void AbcSpec::check_stability() const
{
    const std::size_t L = depth();
    if (L < 2 || a.size() != L || c.size() != L || gamma_bar.size() != L || mu_bar.size() != L
        || tau_bar.size() != L)
        throw ConfigError("AbcSpec: per-layer exponent lists have inconsistent lengths");
    constexpr double tol = 1e-12;
    if (std::abs(a[0] + b[0]) > tol)
        throw ConfigError("AbcSpec: input layer must satisfy a_1 + b_1 = 0");
    for (std::size_t l = 1; l + 1 < L; ++l)
        if (std::abs(a[l] + b[l] - 0.5) > tol)
            throw ConfigError("AbcSpec: hidden layers must satisfy a_l + b_l = 1/2");
    if (a[L - 1] + b[L - 1] < 0.5 - tol)
        throw ConfigError("AbcSpec: output layer must satisfy a_L + b_L >= 1/2");
}

namespace {

struct Row {
    double b_in, b_hid, b_out;
    double c_in, c_hid, c_out;
};

Row table_row(Preset p, double g)
{
    switch (p) {
    case Preset::sp: return {0, 0.5, 0.5, 0, 0, 0};
    case Preset::mup_sgd: return {0, 0.5, 1, -1, 0, 1};
    case Preset::mup_gnt: return {0, 0.5, 1, 0, 1, 1};
    case Preset::mup_pc: return {0, 0.5, 1, -g - 1, -g, 1};
    case Preset::mup_tp: return {0, 0.5, 0.5, 0, 1, 1};
    case Preset::ntk_pc: return {0, 0.5, 0.5, -g, 1 - g, 1};
    case Preset::mup_adam_pc: return {0, 0.5, 1, 0, 1, 1};
    }
    throw ConfigError("unknown preset");
}

double ratio(std::size_t width, std::size_t base)
{
    if (width == 0 || base == 0)
        throw ConfigError("widths must be positive");
    return static_cast<double>(width) / static_cast<double>(base);
}

void require_layer(const AbcSpec& spec, std::size_t layer)
{
    if (layer < 1 || layer > spec.depth())
        throw DimensionError("layer index " + std::to_string(layer) + " outside 1.." + std::to_string(spec.depth()));
}

}  // namespace

AbcSpec preset(Preset name, std::size_t depth, double gamma_bar_L, std::size_t base_width)
{
    if (depth < 2)
        throw ConfigError("preset: depth must be at least 2");
    if (gamma_bar_L > 0.0)
        throw ConfigError("preset: gamma_bar_L must be <= 0");
    if (base_width == 0)
        throw ConfigError("preset: base width must be positive");
    // SP keeps the output step size width-independent.
    const double g = name == Preset::sp ? 0.0 : gamma_bar_L;
    const Row row = table_row(name, g);

    AbcSpec s;
    s.name = to_string(name);
    s.base_width = base_width;
    for (std::size_t l = 1; l <= depth; ++l) {
        const bool input = l == 1;
        const bool output = l == depth;
        const double b = input ? row.b_in : output ? row.b_out : row.b_hid;
        const double c = input ? row.c_in : output ? row.c_out : row.c_hid;
        s.a.push_back(0.0);
        s.b.push_back(b);
        s.c.push_back(c);
        s.gamma_bar.push_back(output ? g : 0.0);
        s.tau_bar.push_back(output ? -2.0 * b : 0.0);
        s.mu_bar.push_back(output ? 2.0 * b - 1.0 : 0.0);
    }
    s.check_stability();
    return s;
}

AbcSpec preset(std::string_view name, std::size_t depth, double gamma_bar_L, std::size_t base_width)
{
    return preset(parse_preset(name), depth, gamma_bar_L, base_width);
}

double effective_init_std(const AbcSpec& spec, std::size_t layer, std::size_t width, double sigma_prime,
                          std::size_t input_dim)
{
    require_layer(spec, layer);
    const double b = spec.b[layer - 1];
    if (layer == 1)
        return b == 0.0 ? sigma_prime : sigma_prime * std::pow(static_cast<double>(input_dim), -b);
    return sigma_prime * std::pow(ratio(width, spec.base_width), -b);
}

double effective_lr(const AbcSpec& spec, std::size_t layer, std::size_t width, double eta_prime)
{
    require_layer(spec, layer);
    return eta_prime * std::pow(ratio(width, spec.base_width), -spec.c[layer - 1]);
}

double effective_gamma(const AbcSpec& spec, std::size_t layer, std::size_t width, double gamma_prime)
{
    require_layer(spec, layer);
    return gamma_prime * std::pow(ratio(width, spec.base_width), -spec.gamma_bar[layer - 1]);
}

std::vector<double> effective_gammas(const AbcSpec& spec, std::size_t width, double gamma_prime)
{
    std::vector<double> g;
    for (std::size_t l = 1; l <= spec.depth(); ++l)
        g.push_back(effective_gamma(spec, l, width, gamma_prime));
    return g;
}

FeedbackScales effective_feedback_scales(const AbcSpec& spec, std::size_t layer, std::size_t width,
                                         double tau_prime, double mu_prime)
{
    require_layer(spec, layer);
    const double r = ratio(width, spec.base_width);
    return {tau_prime * std::pow(r, -spec.tau_bar[layer - 1]), mu_prime * std::pow(r, -spec.mu_bar[layer - 1])};
}

void initialize(Mlp& net, const AbcSpec& spec, std::size_t width, double gain, Rng& rng)
{
    net.validate();
    if (spec.depth() != net.depth())
        throw ConfigError("initialize: parameterization depth differs from network depth");
    for (std::size_t l = 1; l <= net.depth(); ++l) {
        const double fan_in = l == 1 ? static_cast<double>(net.widths[0]) : static_cast<double>(spec.base_width);
        const double base_std = gain / std::sqrt(fan_in);
        const double std = effective_init_std(spec, l, width, base_std, net.widths[0]);
        Matrix& w = net.W(l);
        w = gaussian_matrix(rng, w.rows(), w.cols(), std);
    }
}

Mlp make_mlp(std::size_t input_dim, std::size_t width, std::size_t output_dim, std::size_t depth,
             Activation activation, const AbcSpec& spec, double gain, Rng& rng)
{
    if (depth < 2)
        throw ConfigError("make_mlp: depth must be at least 2");
    std::vector<std::size_t> widths{input_dim};
    for (std::size_t l = 1; l < depth; ++l)
        widths.push_back(width);
    widths.push_back(output_dim);
    Mlp net(std::move(widths), activation);
    initialize(net, spec, width, gain, rng);
    return net;
}

}  // namespace pclab

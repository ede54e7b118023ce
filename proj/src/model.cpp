#include "pclab/model.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace pclab {

Activation parse_activation(std::string_view name)
{
    if (name == "identity" || name == "linear")
        return Activation::identity;
    if (name == "tanh")
        return Activation::tanh;
    if (name == "relu")
        return Activation::relu;
    throw Error("unknown activation '" + std::string(name) + "'");
}

std::string to_string(Activation a)
{
    switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    }
    return "?";
}

double activate(Activation a, double x) noexcept
{
    switch (a) {
    case Activation::identity: return x;
    case Activation::tanh: return std::tanh(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
    }
    return x;
}

double activate_derivative(Activation a, double x) noexcept
{
    switch (a) {
    case Activation::identity: return 1.0;
    case Activation::tanh: {
        const double t = std::tanh(x);
        return 1.0 - t * t;
    }
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
    }
    return 1.0;
}

namespace {

using ArrayMap = Eigen::Map<Eigen::ArrayXd>;

// Vectorized tanh through exp; agrees with std::tanh to a few ulp and
// saturates to ±1 without overflow trouble.
void tanh_in_place(Matrix& x)
{
    ArrayMap a(x.data(), static_cast<Eigen::Index>(x.size()));
    a = 1.0 - 2.0 / ((2.0 * a).exp() + 1.0);
}

}  // namespace

Matrix activate(Activation a, Matrix x)
{
    if (a == Activation::tanh) {
        tanh_in_place(x);
        return x;
    }
    if (a == Activation::identity)
        return x;
    for (double& v : x.values())
        v = activate(a, v);
    return x;
}

Matrix activate_derivative(Activation a, Matrix x)
{
    if (a == Activation::tanh) {
        tanh_in_place(x);
        ArrayMap t(x.data(), static_cast<Eigen::Index>(x.size()));
        t = 1.0 - t.square();
        return x;
    }
    for (double& v : x.values())
        v = activate_derivative(a, v);
    return x;
}

void activate_with_derivative(Activation a, const Matrix& x, Matrix& value, Matrix& derivative)
{
    value = activate(a, x);
    if (a == Activation::tanh) {
        derivative = value;
        ArrayMap d(derivative.data(), static_cast<Eigen::Index>(derivative.size()));
        d = 1.0 - d.square();
    } else {
        derivative = activate_derivative(a, x);
    }
}

Loss parse_loss(std::string_view name)
{
    if (name == "mse" || name == "mse_sum")
        return Loss::mse_sum;
    if (name == "cross_entropy" || name == "ce")
        return Loss::cross_entropy;
    throw Error("unknown loss '" + std::string(name) + "'");
}

std::string to_string(Loss l)
{
    return l == Loss::mse_sum ? "mse_sum" : "cross_entropy";
}

Matrix softmax(const Matrix& f)
{
    Matrix p(f.rows(), f.cols());
    for (std::size_t c = 0; c < f.cols(); ++c) {
        double m = -INFINITY;
        for (std::size_t r = 0; r < f.rows(); ++r)
            m = std::max(m, f(r, c));
        double z = 0.0;
        for (std::size_t r = 0; r < f.rows(); ++r) {
            p(r, c) = std::exp(f(r, c) - m);
            z += p(r, c);
        }
        for (std::size_t r = 0; r < f.rows(); ++r)
            p(r, c) /= z;
    }
    return p;
}

double loss_value(Loss loss, const Matrix& f, const Matrix& y)
{
    if (!f.same_shape(y))
        throw DimensionError("loss_value: prediction and target shapes differ");
    if (loss == Loss::mse_sum) {
        const double n = frobenius_norm(f - y);
        return 0.5 * n * n;
    }
    double total = 0.0;
    for (std::size_t c = 0; c < f.cols(); ++c) {
        double m = -INFINITY;
        for (std::size_t r = 0; r < f.rows(); ++r)
            m = std::max(m, f(r, c));
        double z = 0.0;
        for (std::size_t r = 0; r < f.rows(); ++r)
            z += std::exp(f(r, c) - m);
        const double log_z = m + std::log(z);
        for (std::size_t r = 0; r < f.rows(); ++r)
            total -= y(r, c) * (f(r, c) - log_z);
    }
    return total;
}

Matrix loss_gradient(Loss loss, const Matrix& f, const Matrix& y)
{
    if (!f.same_shape(y))
        throw DimensionError("loss_gradient: prediction and target shapes differ");
    if (loss == Loss::mse_sum)
        return f - y;
    return softmax(f) - y;
}

Mlp::Mlp(std::vector<std::size_t> widths_, Activation activation_)
    : widths(std::move(widths_)), activation(activation_)
{
    if (widths.size() < 2)
        throw DimensionError("Mlp: need at least input and output widths");
    for (std::size_t l = 1; l < widths.size(); ++l)
        weights.emplace_back(widths[l], widths[l - 1]);
}

void Mlp::validate() const
{
    if (widths.size() != weights.size() + 1 || weights.empty())
        throw DimensionError("Mlp: widths and weights disagree in depth");
    for (std::size_t l = 1; l < widths.size(); ++l) {
        const Matrix& w = weights[l - 1];
        if (w.rows() != widths[l] || w.cols() != widths[l - 1])
            throw DimensionError("Mlp: weight " + std::to_string(l) + " has the wrong shape");
    }
}

ForwardCache forward(const Mlp& net, const Matrix& x)
{
    net.validate();
    if (x.rows() != net.widths.front())
        throw DimensionError("forward: input has " + std::to_string(x.rows()) + " rows, expected "
                             + std::to_string(net.widths.front()));
    const std::size_t L = net.depth();
    ForwardCache c;
    c.u.resize(L + 1);
    c.h.resize(L + 1);
    c.h[0] = x;
    for (std::size_t l = 1; l <= L; ++l) {
        c.u[l] = matmul(net.W(l), c.h[l - 1]);
        c.h[l] = l < L ? activate(net.activation, c.u[l]) : c.u[l];
    }
    return c;
}

std::vector<Matrix> bp_deltas(const Mlp& net, const ForwardCache& cache, const Matrix& y, Loss loss)
{
    const std::size_t L = net.depth();
    if (cache.h.size() != L + 1)
        throw DimensionError("bp_deltas: cache depth mismatch");
    std::vector<Matrix> delta(L + 1);
    delta[L] = loss_gradient(loss, cache.output(), y);
    for (std::size_t l = L; l > 1; --l)
        delta[l - 1] = hadamard(activate_derivative(net.activation, cache.u[l - 1]),
                                matmul_tn(net.W(l), delta[l]));
    return delta;
}

std::vector<Matrix> bp_gradients(const Mlp& net, const ForwardCache& cache, const Matrix& y, Loss loss)
{
    const auto delta = bp_deltas(net, cache, y, loss);
    std::vector<Matrix> grads;
    for (std::size_t l = 1; l <= net.depth(); ++l)
        grads.push_back(matmul_nt(delta[l], cache.h[l - 1]));
    return grads;
}

std::vector<Matrix> gnt_deltas(const Mlp& net, const ForwardCache& cache, const Matrix& y, double rho)
{
    if (!(rho > 0.0))
        throw Error("gnt_deltas: rho must be positive");
    const std::size_t L = net.depth();
    const std::size_t out = net.widths.back();
    const std::size_t n = y.cols();
    if (!cache.output().same_shape(y))
        throw DimensionError("gnt_deltas: target shape mismatch");

    std::vector<Matrix> result(L + 1);
    for (std::size_t l = 1; l <= L; ++l)
        result[l] = Matrix(net.widths[l], n);

    const Matrix residual = cache.output() - y;
    for (std::size_t s = 0; s < n; ++s) {
        // B_l = J_lᵀ, built from the output layer down: B_L = I, B_l = D_l W_{l+1}ᵀ B_{l+1}
        Matrix b = Matrix::identity(out);
        const Matrix r = residual.column(s);
        for (std::size_t l = L; l >= 1; --l) {
            if (l < L) {
                b = matmul_tn(net.W(l + 1), b);
                for (std::size_t i = 0; i < b.rows(); ++i) {
                    const double d = activate_derivative(net.activation, cache.u[l](i, s));
                    for (std::size_t j = 0; j < b.cols(); ++j)
                        b(i, j) *= d;
                }
            }
            Matrix gram = matmul_tn(b, b);
            for (std::size_t i = 0; i < out; ++i)
                gram(i, i) += rho;
            result[l].set_column(s, matmul(b, solve_spd(gram, r)));
        }
    }
    return result;
}

std::vector<Matrix> gnt_gradients(const Mlp& net, const ForwardCache& cache, const Matrix& y, double rho)
{
    const auto g = gnt_deltas(net, cache, y, rho);
    std::vector<Matrix> grads;
    for (std::size_t l = 1; l <= net.depth(); ++l)
        grads.push_back(matmul_nt(g[l], cache.h[l - 1]));
    return grads;
}

}  // namespace pclab

#include "pclab/linalg.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace pclab {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const Matrix& m) { return ConstMap(m.data(), m.rows(), m.cols()); }
MutMap view(Matrix& m) { return MutMap(m.data(), m.rows(), m.cols()); }

std::string shape(const Matrix& m)
{
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what)
{
    if (!a.same_shape(b))
        throw DimensionError(std::string(what) + ": shape " + shape(a) + " vs " + shape(b));
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill)
{
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(data.begin(), data.end())
{
    if (data_.size() != rows * cols)
        throw DimensionError("Matrix: data length does not match rows*cols");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
{
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_)
            throw DimensionError("Matrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n)
{
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        m(i, i) = 1.0;
    return m;
}

Matrix Matrix::transpose() const
{
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c)
            t(c, r) = (*this)(r, c);
    return t;
}

Matrix Matrix::column(std::size_t c) const
{
    if (c >= cols_)
        throw DimensionError("column index out of range");
    Matrix out(rows_, 1);
    for (std::size_t r = 0; r < rows_; ++r)
        out(r, 0) = (*this)(r, c);
    return out;
}

Matrix Matrix::select_columns(std::span<const std::size_t> indices) const
{
    Matrix out(rows_, indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j) {
        if (indices[j] >= cols_)
            throw DimensionError("column index out of range");
        for (std::size_t r = 0; r < rows_; ++r)
            out(r, j) = (*this)(r, indices[j]);
    }
    return out;
}

void Matrix::set_column(std::size_t c, const Matrix& column)
{
    if (c >= cols_ || column.rows() != rows_ || column.cols() != 1)
        throw DimensionError("set_column: shape mismatch");
    for (std::size_t r = 0; r < rows_; ++r)
        (*this)(r, c) = column(r, 0);
}

bool Matrix::all_finite() const noexcept
{
    for (double v : data_)
        if (!std::isfinite(v))
            return false;
    return true;
}

Matrix& Matrix::operator+=(const Matrix& other)
{
    require_same_shape(*this, other, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] += other.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other)
{
    require_same_shape(*this, other, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] -= other.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) noexcept
{
    for (double& v : data_)
        v *= s;
    return *this;
}

Matrix& Matrix::add_scaled(const Matrix& other, double s)
{
    require_same_shape(*this, other, "add_scaled");
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] += s * other.data_[i];
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }
Matrix operator-(Matrix a) { return a *= -1.0; }

Matrix hadamard(Matrix a, const Matrix& b)
{
    require_same_shape(a, b, "hadamard");
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i)
        av[i] *= bv[i];
    return a;
}

Matrix map(Matrix a, const std::function<double(double)>& fn)
{
    for (double& v : a.values())
        v = fn(v);
    return a;
}

Matrix matmul(const Matrix& a, const Matrix& b)
{
    if (a.cols() != b.rows())
        throw DimensionError("matmul: " + shape(a) + " * " + shape(b));
    Matrix out(a.rows(), b.cols());
    if (a.cols() == 0)
        return out;
    view(out).noalias() = view(a) * view(b);
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b)
{
    if (a.rows() != b.rows())
        throw DimensionError("matmul_tn: " + shape(a) + "^T * " + shape(b));
    Matrix out(a.cols(), b.cols());
    if (a.rows() == 0)
        return out;
    view(out).noalias() = view(a).transpose() * view(b);
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b)
{
    if (a.cols() != b.cols())
        throw DimensionError("matmul_nt: " + shape(a) + " * " + shape(b) + "^T");
    Matrix out(a.rows(), b.rows());
    if (a.cols() == 0)
        return out;
    view(out).noalias() = view(a) * view(b).transpose();
    return out;
}

Matrix cholesky(const Matrix& a)
{
    if (a.rows() != a.cols())
        throw DimensionError("cholesky: matrix is not square");
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k)
            d -= l(j, k) * l(j, k);
        if (!(d > 0.0))
            throw NotPositiveDefiniteError("cholesky: non-positive pivot at index " + std::to_string(j));
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k)
                s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

Matrix solve_spd(const Matrix& a, const Matrix& b)
{
    if (a.rows() != b.rows())
        throw DimensionError("solve_spd: " + shape(a) + " vs rhs " + shape(b));
    const Matrix l = cholesky(a);
    const std::size_t n = a.rows();
    Matrix x = b;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        // forward substitution L z = b, then back substitution Lᵀ x = z
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, c);
            for (std::size_t k = 0; k < i; ++k)
                s -= l(i, k) * x(k, c);
            x(i, c) = s / l(i, i);
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x(i, c);
            for (std::size_t k = i + 1; k < n; ++k)
                s -= l(k, i) * x(k, c);
            x(i, c) = s / l(i, i);
        }
    }
    return x;
}

double sum(const Matrix& x) noexcept
{
    double s = 0.0;
    for (double v : x.values())
        s += v;
    return s;
}

double dot(const Matrix& x, const Matrix& y)
{
    if (x.size() != y.size())
        throw DimensionError("dot: size mismatch");
    double s = 0.0;
    auto xv = x.values();
    auto yv = y.values();
    for (std::size_t i = 0; i < xv.size(); ++i)
        s += xv[i] * yv[i];
    return s;
}

double frobenius_norm(const Matrix& x) noexcept
{
    double s = 0.0;
    for (double v : x.values())
        s += v * v;
    return std::sqrt(s);
}

double rms_norm(const Matrix& x)
{
    if (x.empty())
        throw DimensionError("rms_norm: empty matrix");
    return frobenius_norm(x) / std::sqrt(static_cast<double>(x.size()));
}

double cosine_similarity(const Matrix& x, const Matrix& y)
{
    require_same_shape(x, y, "cosine_similarity");
    const double nx = frobenius_norm(x);
    const double ny = frobenius_norm(y);
    if (nx == 0.0 || ny == 0.0)
        throw ZeroNormError("cosine_similarity: zero-norm input");
    const double c = dot(x, y) / (nx * ny);
    return std::clamp(c, -1.0, 1.0);
}

double max_abs_diff(const Matrix& x, const Matrix& y)
{
    require_same_shape(x, y, "max_abs_diff");
    double m = 0.0;
    auto xv = x.values();
    auto yv = y.values();
    for (std::size_t i = 0; i < xv.size(); ++i)
        m = std::max(m, std::abs(xv[i] - yv[i]));
    return m;
}

double relative_error(const Matrix& x, const Matrix& y)
{
    require_same_shape(x, y, "relative_error");
    const double diff = frobenius_norm(x - y);
    const double ref = frobenius_norm(y);
    return ref == 0.0 ? diff : diff / ref;
}

Matrix hconcat(std::span<const Matrix> blocks)
{
    if (blocks.empty())
        return {};
    const std::size_t rows = blocks.front().rows();
    std::size_t cols = 0;
    for (const auto& b : blocks) {
        if (b.rows() != rows)
            throw DimensionError("hconcat: row count mismatch");
        cols += b.cols();
    }
    Matrix out(rows, cols);
    std::size_t offset = 0;
    for (const auto& b : blocks) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < b.cols(); ++c)
                out(r, offset + c) = b(r, c);
        offset += b.cols();
    }
    return out;
}

std::uint64_t mix_seed(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept
{
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (std::uint64_t p : parts)
        h = mix_seed(h ^ mix_seed(p));
    return h;
}

Rng::Rng(std::uint64_t seed) noexcept
{
    std::uint64_t x = seed;
    for (auto& s : s_) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        s = z ^ (z >> 31);
    }
}

namespace {
constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }
}  // namespace

std::uint64_t Rng::next_u64() noexcept
{
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() noexcept
{
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() noexcept
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0)
        u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::uint64_t Rng::below(std::uint64_t n) noexcept
{
    // rejection sampling on the top of the range
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit)
        x = next_u64();
    return x % n;
}

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double std)
{
    Matrix m(rows, cols);
    if (std == 0.0)
        return m;
    for (double& v : m.values())
        v = std * rng.normal();
    return m;
}

double fit_slope(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw DimensionError("fit_slope: need at least two paired points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0)
        throw DimensionError("fit_slope: x values are all equal");
    return sxy / sxx;
}

}  // namespace pclab

#pragma once

// Dense row-major matrices, a seeded generator and the handful of kernels the
// rest of the library needs. Every numeric quantity is a 64-bit double.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pclab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// Raised by the Cholesky factorization when a pivot is not strictly positive.
class NotPositiveDefiniteError : public Error {
public:
    using Error::Error;
};

/// Raised when a norm that must be nonzero is zero.
class ZeroNormError : public Error {
public:
    using Error::Error;
};

/// Raised when a computation produces NaN or Inf.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// 64-byte aligned storage. Vectorized kernels peel a prefix that depends on
/// the start address, so alignment keeps results bitwise reproducible.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept
    {
    }

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept
    {
        return true;
    }
};

class Matrix {
public:
    using Storage = std::vector<double, AlignedAllocator<double>>;

    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    /// Row-major literal, e.g. Matrix{{1, 2}, {3, 4}}.
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    Matrix transpose() const;
    Matrix column(std::size_t c) const;
    /// Columns listed in `indices`, in that order.
    Matrix select_columns(std::span<const std::size_t> indices) const;
    void set_column(std::size_t c, const Matrix& column);

    bool all_finite() const noexcept;
    bool same_shape(const Matrix& other) const noexcept
    {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s) noexcept;

    /// this += s * other
    Matrix& add_scaled(const Matrix& other, double s);

    friend bool operator==(const Matrix& a, const Matrix& b) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Storage data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);
Matrix operator-(Matrix a);

Matrix hadamard(Matrix a, const Matrix& b);
Matrix map(Matrix a, const std::function<double(double)>& fn);

/// a · b
Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ · b without forming aᵀ.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a · bᵀ without forming bᵀ.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// Lower-triangular Cholesky factor; throws NotPositiveDefiniteError.
Matrix cholesky(const Matrix& a);
/// Solves a·x = b for symmetric positive definite a (b may have many columns).
Matrix solve_spd(const Matrix& a, const Matrix& b);

double sum(const Matrix& x) noexcept;
double dot(const Matrix& x, const Matrix& y);
double frobenius_norm(const Matrix& x) noexcept;
/// sqrt(mean of squared entries).
double rms_norm(const Matrix& x);
double cosine_similarity(const Matrix& x, const Matrix& y);
double max_abs_diff(const Matrix& x, const Matrix& y);
/// ‖x − y‖_F / ‖y‖_F, or ‖x − y‖_F when y is zero.
double relative_error(const Matrix& x, const Matrix& y);

/// Horizontal concatenation (same row count).
Matrix hconcat(std::span<const Matrix> blocks);

/// Seeded pseudo-random generator: xoshiro256** with its state expanded from a
/// 64-bit seed by splitmix64. Normal deviates use the Box–Muller transform,
/// caching the second value of each pair.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept;

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    double normal() noexcept;
    /// Uniform integer in [0, n), n > 0, without modulo bias.
    std::uint64_t below(std::uint64_t n) noexcept;

private:
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// splitmix64 finalizer, used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t x) noexcept;
/// Order-sensitive combination of several integers into one seed.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept;

/// I.i.d. N(0, std²) entries; std ≥ 0.
Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double std);

/// Least-squares slope of y against x (both nonempty, equal length).
double fit_slope(std::span<const double> x, std::span<const double> y);

}  // namespace pclab

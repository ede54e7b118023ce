#include "pclab/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

namespace pclab {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t offset)
{
    return (std::uint32_t(b[offset]) << 24) | (std::uint32_t(b[offset + 1]) << 16)
         | (std::uint32_t(b[offset + 2]) << 8) | std::uint32_t(b[offset + 3]);
}

// Checks the magic number and returns the dimension sizes.
std::vector<std::uint32_t> idx_header(const std::vector<unsigned char>& bytes, std::uint32_t magic,
                                      const std::filesystem::path& path)
{
    if (bytes.size() < 4)
        throw FormatError(path.string() + ": truncated header");
    const std::uint32_t got = be32(bytes, 0);
    if (got != magic)
        throw FormatError(path.string() + ": bad magic number");
    const std::size_t ndim = magic & 0xff;
    if (bytes.size() < 4 + 4 * ndim)
        throw FormatError(path.string() + ": truncated header");
    std::vector<std::uint32_t> dims;
    std::size_t total = 1;
    for (std::size_t i = 0; i < ndim; ++i) {
        dims.push_back(be32(bytes, 4 + 4 * i));
        total *= dims.back();
    }
    if (bytes.size() < 4 + 4 * ndim + total)
        throw FormatError(path.string() + ": truncated data");
    return dims;
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> indices) const
{
    Dataset out;
    out.x = x.select_columns(indices);
    out.y = y.select_columns(indices);
    out.names = names;
    if (!labels.empty())
        for (std::size_t i : indices)
            out.labels.push_back(labels.at(i));
    return out;
}

Matrix read_idx_images(const std::filesystem::path& path)
{
    const auto bytes = read_file(path);
    const auto dims = idx_header(bytes, 0x00000803, path);
    const std::size_t n = dims[0];
    const std::size_t d = std::size_t(dims[1]) * dims[2];
    const std::size_t offset = 16;
    Matrix x(d, n);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t p = 0; p < d; ++p)
            x(p, s) = static_cast<double>(bytes[offset + s * d + p]) / 255.0;
    return x;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path)
{
    const auto bytes = read_file(path);
    const auto dims = idx_header(bytes, 0x00000801, path);
    return {bytes.begin() + 8, bytes.begin() + 8 + dims[0]};
}

Matrix one_hot(const std::vector<std::uint8_t>& labels, std::size_t classes, double scale)
{
    Matrix y(classes, labels.size());
    for (std::size_t s = 0; s < labels.size(); ++s) {
        if (labels[s] >= classes)
            throw FormatError("label " + std::to_string(labels[s]) + " out of range for "
                              + std::to_string(classes) + " classes");
        y(labels[s], s) = scale;
    }
    return y;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t subset_n, std::uint64_t seed, std::size_t classes)
{
    Dataset ds;
    ds.x = read_idx_images(images_path);
    ds.labels = read_idx_labels(labels_path);
    if (ds.labels.size() != ds.x.cols())
        throw FormatError("image and label files hold different sample counts");
    ds.y = one_hot(ds.labels, classes);
    const std::size_t n = ds.size();
    if (subset_n == 0 || subset_n >= n)
        return ds;

    // partial Fisher-Yates: the first subset_n slots are a uniform draw
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (std::size_t i = 0; i < subset_n; ++i)
        std::swap(idx[i], idx[i + rng.below(n - i)]);
    idx.resize(subset_n);
    return ds.subset(idx);
}

namespace {

Matrix unit_columns(Rng& rng, std::size_t d, std::size_t n)
{
    Matrix x = gaussian_matrix(rng, d, n, 1.0 / std::sqrt(static_cast<double>(d)));
    for (std::size_t c = 0; c < n; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < d; ++r)
            s += x(r, c) * x(r, c);
        const double inv = 1.0 / std::sqrt(s);
        for (std::size_t r = 0; r < d; ++r)
            x(r, c) *= inv;
    }
    return x;
}

}  // namespace

Dataset synth_regression(std::size_t input_dim, std::size_t output_dim, std::size_t n, std::uint64_t teacher_seed,
                         std::uint64_t sample_seed, double noise_std)
{
    if (input_dim == 0 || output_dim == 0 || n == 0)
        throw Error("synth_regression: dimensions must be positive");
    Rng teacher_rng(teacher_seed);
    const Matrix teacher = gaussian_matrix(teacher_rng, output_dim, input_dim, 1.0);
    Rng rng(sample_seed);
    Dataset ds;
    ds.x = unit_columns(rng, input_dim, n);
    ds.y = matmul(teacher, ds.x);
    if (noise_std > 0.0)
        ds.y += gaussian_matrix(rng, output_dim, n, noise_std);
    return ds;
}

Dataset synth_classification(std::size_t input_dim, std::size_t classes, std::size_t n, std::uint64_t teacher_seed,
                             std::uint64_t sample_seed)
{
    if (input_dim == 0 || classes < 2 || n == 0)
        throw Error("synth_classification: need positive dimensions and at least two classes");
    const std::size_t hidden = 4 * input_dim;
    Rng teacher_rng(teacher_seed);
    const Matrix w1 = gaussian_matrix(teacher_rng, hidden, input_dim, 1.0);
    const Matrix w2 = gaussian_matrix(teacher_rng, classes, hidden, 1.0 / std::sqrt(static_cast<double>(hidden)));
    Rng rng(sample_seed);
    Dataset ds;
    ds.x = unit_columns(rng, input_dim, n);
    Matrix hidden_act = matmul(w1, ds.x);
    for (double& v : hidden_act.values())
        v = std::tanh(v);
    const Matrix logits = matmul(w2, hidden_act);
    ds.labels.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t best = 0;
        for (std::size_t r = 1; r < classes; ++r)
            if (logits(r, c) > logits(best, c))
                best = r;
        ds.labels[c] = static_cast<std::uint8_t>(best);
    }
    ds.y = one_hot(ds.labels, classes);
    return ds;
}

std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed)
{
    if (batch_size == 0)
        throw Error("make_batches: batch size must be positive");
    const std::size_t n = ds.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i)
        std::swap(idx[i - 1], idx[rng.below(i)]);
    std::vector<Batch> out;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        std::span<const std::size_t> part(idx.data() + start, end - start);
        out.push_back({ds.x.select_columns(part), ds.y.select_columns(part)});
    }
    return out;
}

double accuracy(const Matrix& f, const Matrix& y)
{
    if (!f.same_shape(y))
        throw DimensionError("accuracy: shape mismatch");
    if (f.cols() == 0)
        return 0.0;
    std::size_t hits = 0;
    for (std::size_t c = 0; c < f.cols(); ++c) {
        std::size_t pf = 0, py = 0;
        for (std::size_t r = 1; r < f.rows(); ++r) {
            if (f(r, c) > f(pf, c)) pf = r;
            if (y(r, c) > y(py, c)) py = r;
        }
        hits += pf == py;
    }
    return static_cast<double>(hits) / static_cast<double>(f.cols());
}

}  // namespace pclab

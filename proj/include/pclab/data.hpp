#pragma once

#include "pclab/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pclab {

class FormatError : public Error {
public:
    using Error::Error;
};

/// Column-major samples: x is D × N, y is M_L × N.
struct Dataset {
    Matrix x;
    Matrix y;
    std::vector<std::uint8_t> labels;  // raw class labels, empty for regression
    std::vector<std::string> names;

    std::size_t size() const noexcept { return x.cols(); }
    Dataset subset(std::span<const std::size_t> indices) const;
};

/// Reads an uncompressed IDX image/label pair (magic 0x803 / 0x801), scales
/// pixels to [0, 1], flattens each image and one-hot encodes labels into
/// `classes` rows. subset_n = 0 or ≥ N keeps every sample in file order;
/// otherwise subset_n samples are drawn without replacement by `seed`.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t subset_n, std::uint64_t seed, std::size_t classes = 10);

/// Raw IDX readers, exposed for tests.
Matrix read_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);

Matrix one_hot(const std::vector<std::uint8_t>& labels, std::size_t classes, double scale = 1.0);

/// x columns drawn from N(0, I/D) and normalized to unit length;
/// y = T x + noise with a fixed N(0, 1) teacher T (M_L × D) drawn from teacher_seed.
Dataset synth_regression(std::size_t input_dim, std::size_t output_dim, std::size_t n, std::uint64_t teacher_seed,
                         std::uint64_t sample_seed, double noise_std);

/// Classification data from a fixed random teacher: unit-norm inputs as in
/// synth_regression, labels = argmax of a random tanh network's output, one-hot targets.
Dataset synth_classification(std::size_t input_dim, std::size_t classes, std::size_t n, std::uint64_t teacher_seed,
                             std::uint64_t sample_seed);

struct Batch {
    Matrix x;
    Matrix y;
};

/// Shuffles with `seed` and cuts consecutive batches; the final partial batch is kept.
std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed);

/// Fraction of columns whose argmax of `f` matches the argmax of `y`.
double accuracy(const Matrix& f, const Matrix& y);

}  // namespace pclab

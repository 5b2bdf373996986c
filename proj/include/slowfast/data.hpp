#pragma once

#include "slowfast/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace slowfast {

enum class DatasetKind { eight_gaussians, two_moons, checkerboard, gaussian };

std::string to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(const std::string& text);

struct Dataset2D {
    DatasetKind kind = DatasetKind::eight_gaussians;
    std::uint64_t seed = 0;
    // Used by DatasetKind::gaussian only.
    std::array<double, 2> mean = {0.0, 0.0};
    double stddev = 1.0;

    static Dataset2D eight_gaussians(std::uint64_t seed) { return {DatasetKind::eight_gaussians, seed}; }
    static Dataset2D gaussian(std::array<double, 2> mean, double stddev, std::uint64_t seed) {
        return {DatasetKind::gaussian, seed, mean, stddev};
    }

    std::size_t num_classes() const noexcept;
};

// Eight-Gaussian mixture geometry.
inline constexpr double kEightGaussiansRadius = 2.0;
inline constexpr double kEightGaussiansStddev = 0.1;
std::array<double, 2> eight_gaussians_center(int mode);

struct LabeledPoints {
    Tensor points;
    std::vector<int> classes;

    std::size_t size() const noexcept { return points.rows(); }
};

// Draws with indices [offset, offset + n) of the dataset's stream. Draw i is a
// pure function of (kind, seed, i), so shorter draws are prefixes of longer ones.
LabeledPoints sample_labeled(const Dataset2D& ds, std::size_t n, std::uint64_t offset = 0);
Tensor sample(const Dataset2D& ds, std::size_t n, std::uint64_t offset = 0);

// Fixed training subset: the first k draws of the dataset reseeded with `seed`.
struct TrainSet {
    LabeledPoints samples;
    std::size_t size() const noexcept { return samples.size(); }
};

TrainSet subset(const Dataset2D& ds, std::size_t k, std::uint64_t seed);

// CSV with header x,y,class.
void write_trainset_csv(const TrainSet& set, const std::filesystem::path& path);
TrainSet read_trainset_csv(const std::filesystem::path& path);

} // namespace slowfast

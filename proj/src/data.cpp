#include "slowfast/data.hpp"

#include "slowfast/error.hpp"
#include "slowfast/rng.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

namespace slowfast {

namespace {
// Counters reserved per draw; every generator uses at most this many.
constexpr std::uint64_t kCountersPerDraw = 8;
} // namespace

std::string to_string(DatasetKind kind) {
    switch (kind) {
    case DatasetKind::eight_gaussians:
        return "eight_gaussians";
    case DatasetKind::two_moons:
        return "two_moons";
    case DatasetKind::checkerboard:
        return "checkerboard";
    case DatasetKind::gaussian:
        return "gaussian";
    }
    return "?";
}

DatasetKind parse_dataset_kind(const std::string& text) {
    for (auto k : {DatasetKind::eight_gaussians, DatasetKind::two_moons, DatasetKind::checkerboard,
                   DatasetKind::gaussian}) {
        if (to_string(k) == text) {
            return k;
        }
    }
    throw ConfigError("unknown dataset '" + text + "'");
}

std::size_t Dataset2D::num_classes() const noexcept {
    switch (kind) {
    case DatasetKind::eight_gaussians:
    case DatasetKind::checkerboard:
        return 8;
    case DatasetKind::two_moons:
        return 2;
    case DatasetKind::gaussian:
        return 1;
    }
    return 1;
}

std::array<double, 2> eight_gaussians_center(int mode) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(mode) / 8.0;
    return {kEightGaussiansRadius * std::cos(angle), kEightGaussiansRadius * std::sin(angle)};
}

LabeledPoints sample_labeled(const Dataset2D& ds, std::size_t n, std::uint64_t offset) {
    if (n == 0) {
        throw ContractError("sample count must be at least 1");
    }
    const CounterRng rng(ds.seed, Stream::data);
    LabeledPoints out{Tensor(n, 2), std::vector<int>(n, 0)};
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t base = (offset + i) * kCountersPerDraw;
        double x = 0.0;
        double y = 0.0;
        int cls = 0;
        switch (ds.kind) {
        case DatasetKind::eight_gaussians: {
            cls = static_cast<int>(rng.bits_at(base) % 8);
            const auto c = eight_gaussians_center(cls);
            x = c[0] + kEightGaussiansStddev * rng.normal_at(base + 1);
            y = c[1] + kEightGaussiansStddev * rng.normal_at(base + 3);
            break;
        }
        case DatasetKind::two_moons: {
            cls = static_cast<int>(rng.bits_at(base) % 2);
            const double t = std::numbers::pi * rng.uniform_at(base + 1);
            const double mx = cls == 0 ? std::cos(t) : 1.0 - std::cos(t);
            const double my = cls == 0 ? std::sin(t) : 0.5 - std::sin(t);
            x = 2.0 * (mx - 0.5) + 0.1 * rng.normal_at(base + 2);
            y = 2.0 * (my - 0.25) + 0.1 * rng.normal_at(base + 4);
            break;
        }
        case DatasetKind::checkerboard: {
            const double x1 = 4.0 * rng.uniform_at(base) - 2.0;
            const double band = static_cast<double>(rng.bits_at(base + 1) % 2) * 2.0;
            const double x2 = rng.uniform_at(base + 2) - band + std::fmod(std::floor(x1) + 2.0, 2.0);
            x = x1;
            y = x2;
            const int cx = static_cast<int>(std::floor(x1)) + 2;
            const int cy = static_cast<int>(std::floor(x2)) + 2;
            cls = (cx * 4 + cy) / 2;
            break;
        }
        case DatasetKind::gaussian:
            x = ds.mean[0] + ds.stddev * rng.normal_at(base);
            y = ds.mean[1] + ds.stddev * rng.normal_at(base + 2);
            break;
        }
        out.points(i, 0) = x;
        out.points(i, 1) = y;
        out.classes[i] = cls;
    }
    return out;
}

Tensor sample(const Dataset2D& ds, std::size_t n, std::uint64_t offset) {
    return sample_labeled(ds, n, offset).points;
}

TrainSet subset(const Dataset2D& ds, std::size_t k, std::uint64_t seed) {
    if (k == 0) {
        throw ContractError("training subset needs at least one sample");
    }
    Dataset2D reseeded = ds;
    reseeded.seed = seed;
    return {sample_labeled(reseeded, k)};
}

void write_trainset_csv(const TrainSet& set, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out << "x,y,class\n";
    for (std::size_t i = 0; i < set.size(); ++i) {
        out << fmt::format("{:.17g},{:.17g},{}\n", set.samples.points(i, 0), set.samples.points(i, 1),
                           set.samples.classes[i]);
    }
}

TrainSet read_trainset_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != "x,y,class") {
        throw ConfigError(path.string() + ": expected header 'x,y,class'");
    }
    std::vector<double> coords;
    std::vector<int> classes;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream row(line);
        std::string fx, fy, fc;
        if (!std::getline(row, fx, ',') || !std::getline(row, fy, ',') || !std::getline(row, fc)) {
            throw ConfigError(path.string() + ": malformed row '" + line + "'");
        }
        try {
            coords.push_back(std::stod(fx));
            coords.push_back(std::stod(fy));
            classes.push_back(std::stoi(fc));
        } catch (const std::exception&) {
            throw ConfigError(path.string() + ": malformed row '" + line + "'");
        }
    }
    if (classes.empty()) {
        throw ConfigError(path.string() + ": no samples");
    }
    const std::size_t n = classes.size();
    return {{Tensor(n, 2, std::move(coords)), std::move(classes)}};
}

} // namespace slowfast

#pragma once

#include "slowfast/tensor.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace slowfast {

struct ScatterSeries {
    std::string label;
    const Tensor* points = nullptr;
    std::string color;
};

// 2-D scatter of one or more point sets on shared axes.
std::string scatter_svg(const std::string& title, const std::vector<ScatterSeries>& series);

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values);

// Writes to a temporary sibling then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

} // namespace slowfast

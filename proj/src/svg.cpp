#include "slowfast/svg.hpp"

#include "slowfast/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

namespace slowfast {

namespace {

constexpr double kWidth = 480.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 40.0;

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '&':
            out += "&amp;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

} // namespace

std::string scatter_svg(const std::string& title, const std::vector<ScatterSeries>& series) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& s : series) {
        for (double v : s.points->data()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!(hi > lo)) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double span = hi - lo;
    lo -= 0.05 * span;
    hi += 0.05 * span;
    const double plot = kWidth - 2.0 * kMargin;
    auto px = [&](double v) { return kMargin + (v - lo) / (hi - lo) * plot; };
    auto py = [&](double v) { return kHeight - kMargin - (v - lo) / (hi - lo) * plot; };

    std::string out = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        "<text x=\"{2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{3}</text>\n"
        "<rect x=\"{2}\" y=\"{2}\" width=\"{4}\" height=\"{4}\" fill=\"none\" stroke=\"#999\"/>\n",
        kWidth, kHeight, kMargin, escape(title), plot);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        out += fmt::format("<g fill=\"{}\" fill-opacity=\"0.5\">\n", s.color);
        for (std::size_t r = 0; r < s.points->rows(); ++r) {
            out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"1.5\"/>\n", px((*s.points)(r, 0)),
                               py((*s.points)(r, 1)));
        }
        out += "</g>\n";
        out += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{}\">{}</text>\n",
                           kWidth - 150.0, kMargin + 16.0 * static_cast<double>(k + 1), s.color, escape(s.label));
    }
    out += "</svg>\n";
    return out;
}

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values) {
    const double width = std::max(kWidth, 90.0 * static_cast<double>(values.size()) + 2.0 * kMargin);
    const double top = *std::max_element(values.begin(), values.end());
    const double scale = top > 0.0 ? (kHeight - 3.0 * kMargin) / top : 0.0;
    const double bar = (width - 2.0 * kMargin) / static_cast<double>(std::max<std::size_t>(values.size(), 1));
    std::string out = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        "<text x=\"{2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{3}</text>\n",
        width, kHeight, kMargin, escape(title));
    const double base_y = kHeight - 2.0 * kMargin;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double h = values[i] * scale;
        const double x = kMargin + bar * static_cast<double>(i);
        out += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"#4472c4\"/>\n",
                           x + 4.0, base_y - h, bar - 8.0, h);
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"10\">{:.3g}</text>\n",
                           x + 4.0, base_y - h - 4.0, values[i]);
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"10\" "
                           "transform=\"rotate(20 {:.1f} {:.1f})\">{}</text>\n",
                           x + 4.0, base_y + 14.0, x + 4.0, base_y + 14.0, escape(labels[i]));
    }
    out += "</svg>\n";
    return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot open " + tmp.string() + " for writing");
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) {
            throw Error("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

} // namespace slowfast

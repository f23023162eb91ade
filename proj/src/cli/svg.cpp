#include "dpdsr/cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dpdsr::cli {

namespace {

constexpr double kWidth = 800, kHeight = 400;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Frame {
    double x0, x1, y0, y1;
    double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void widen(double& lo, double& hi) {
    if (!(lo < hi)) {
        const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
        lo -= pad;
        hi += pad;
    }
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

void begin(std::ostringstream& out, const std::string& title) {
    out << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << kWidth << R"(" height=")" << kHeight
        << R"(" font-family="sans-serif" font-size="12">)" << '\n'
        << R"(<rect width="100%" height="100%" fill="white"/>)" << '\n'
        << R"(<text x=")" << kWidth / 2 << R"(" y="22" text-anchor="middle" font-size="15">)" << escape(title)
        << "</text>\n";
}

void axes(std::ostringstream& out, const Frame& f, const std::string& x_label, const std::string& y_label) {
    const double bx = kLeft, by = kHeight - kBottom, tx = kWidth - kRight;
    out << R"(<g stroke="black" fill="none"><rect x=")" << bx << R"(" y=")" << kTop << R"(" width=")" << tx - bx
        << R"(" height=")" << by - kTop << R"("/></g>)" << '\n';
    for (int i = 0; i <= 4; ++i) {
        const double x = f.x0 + (f.x1 - f.x0) * i / 4.0, y = f.y0 + (f.y1 - f.y0) * i / 4.0;
        out << R"(<line x1=")" << f.px(x) << R"(" y1=")" << by << R"(" x2=")" << f.px(x) << R"(" y2=")" << by + 5
            << R"(" stroke="black"/>)"
            << R"(<text x=")" << f.px(x) << R"(" y=")" << by + 18 << R"(" text-anchor="middle">)" << fmt(x)
            << "</text>\n";
        out << R"(<line x1=")" << bx - 5 << R"(" y1=")" << f.py(y) << R"(" x2=")" << bx << R"(" y2=")" << f.py(y)
            << R"(" stroke="black"/>)"
            << R"(<text x=")" << bx - 8 << R"(" y=")" << f.py(y) + 4 << R"(" text-anchor="end">)" << fmt(y)
            << "</text>\n";
    }
    out << R"(<text x=")" << (bx + tx) / 2 << R"(" y=")" << kHeight - 10 << R"(" text-anchor="middle">)"
        << escape(x_label) << "</text>\n";
    out << R"(<text x="16" y=")" << (kTop + by) / 2 << R"(" text-anchor="middle" transform="rotate(-90 16 )"
        << (kTop + by) / 2 << ")\">" << escape(y_label) << "</text>\n";
}

void legend(std::ostringstream& out, const std::vector<Series>& series) {
    double y = kTop + 14;
    for (const auto& s : series) {
        const double x = kWidth - kRight - 150;
        out << R"(<line x1=")" << x << R"(" y1=")" << y - 4 << R"(" x2=")" << x + 20 << R"(" y2=")" << y - 4
            << R"(" stroke=")" << s.color << R"(" stroke-width="2"/>)"
            << R"(<text x=")" << x + 26 << R"(" y=")" << y << R"(">)" << escape(s.label) << "</text>\n";
        y += 16;
    }
}

}  // namespace

std::string svg_line_plot(const std::string& title, const std::vector<Series>& series, const std::string& x_label,
                          const std::string& y_label) {
    if (series.empty()) throw std::invalid_argument("svg_line_plot: no series");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t n = 0;
    for (const auto& s : series) {
        n = std::max(n, s.values.size());
        for (double v : s.values)
            if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
    }
    if (!std::isfinite(lo)) lo = hi = 0.0;
    widen(lo, hi);
    Frame f{0.0, n > 1 ? static_cast<double>(n - 1) : 1.0, lo, hi};

    std::ostringstream out;
    out.precision(6);
    begin(out, title);
    axes(out, f, x_label, y_label);
    for (const auto& s : series) {
        bool open = false;
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            if (!std::isfinite(s.values[i])) {
                if (open) out << "\"/>\n";
                open = false;
                continue;
            }
            if (!open) out << R"(<polyline fill="none" stroke-width="1" stroke=")" << s.color << R"(" points=")";
            else out << ' ';
            open = true;
            out << f.px(static_cast<double>(i)) << ',' << f.py(s.values[i]);
        }
        if (open) out << "\"/>\n";
    }
    legend(out, series);
    out << "</svg>\n";
    return out.str();
}

std::string svg_histogram(const std::string& title, const std::vector<Series>& series, std::size_t bins,
                          const std::string& x_label) {
    if (series.empty()) throw std::invalid_argument("svg_histogram: no series");
    if (bins == 0) throw std::invalid_argument("svg_histogram: bins must be positive");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : series)
        for (double v : s.values)
            if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
    if (!std::isfinite(lo)) lo = hi = 0.0;
    widen(lo, hi);
    const double width = (hi - lo) / static_cast<double>(bins);

    std::vector<std::vector<double>> density;
    double top = 0.0;
    for (const auto& s : series) {
        std::vector<double> d(bins, 0.0);
        std::size_t total = 0;
        for (double v : s.values) {
            if (!std::isfinite(v)) continue;
            const auto b = std::min(bins - 1, static_cast<std::size_t>((v - lo) / width));
            d[b] += 1.0;
            ++total;
        }
        for (auto& x : d) top = std::max(top, x = total ? x / (static_cast<double>(total) * width) : 0.0);
        density.push_back(std::move(d));
    }
    Frame f{lo, hi, 0.0, top > 0.0 ? top * 1.05 : 1.0};

    std::ostringstream out;
    out.precision(6);
    begin(out, title);
    axes(out, f, x_label, "density");
    for (std::size_t k = 0; k < series.size(); ++k) {
        out << R"(<g fill=")" << series[k].color << R"(" fill-opacity="0.45" stroke=")" << series[k].color << R"(">)";
        for (std::size_t b = 0; b < bins; ++b) {
            if (density[k][b] == 0.0) continue;
            const double x = lo + static_cast<double>(b) * width;
            out << R"(<rect x=")" << f.px(x) << R"(" y=")" << f.py(density[k][b]) << R"(" width=")"
                << f.px(x + width) - f.px(x) << R"(" height=")" << f.py(0.0) - f.py(density[k][b]) << R"("/>)";
        }
        out << "</g>\n";
    }
    legend(out, series);
    out << "</svg>\n";
    return out.str();
}

}  // namespace dpdsr::cli

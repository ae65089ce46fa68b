#pragma once

// Minimal SVG 1.1 line charts (polylines over linear or log axes).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace erdlab::harness {

struct ChartSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    bool dashed = false;
};

struct ChartOptions {
    std::string title;
    std::string x_label = "t";
    std::string y_label;
    bool log_y = false;
    int width = 640;
    int height = 400;
};

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

}  // namespace detail

inline std::string line_chart_svg(const std::vector<ChartSeries>& series, const ChartOptions& opt) {
    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
    const double left = 70, right = 150, top = 40, bottom = 50;
    const double pw = opt.width - left - right, ph = opt.height - top - bottom;

    auto ty = [&](double y) { return opt.log_y ? std::log10(y) : y; };
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i]) || (opt.log_y && s.y[i] <= 0.0)) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, ty(s.y[i]));
            ymax = std::max(ymax, ty(s.y[i]));
        }
    }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return top + (1.0 - (ty(y) - ymin) / (ymax - ymin)) * ph; };

    std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(opt.width) +
           "\" height=\"" + std::to_string(opt.height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + detail::num(left) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" +
           detail::escape(opt.title) + "</text>\n";
    svg += "<rect x=\"" + detail::num(left) + "\" y=\"" + detail::num(top) + "\" width=\"" + detail::num(pw) +
           "\" height=\"" + detail::num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fx = xmin + (xmax - xmin) * k / 4.0;
        const double fy = ymin + (ymax - ymin) * k / 4.0;
        const double yval = opt.log_y ? std::pow(10.0, fy) : fy;
        svg += "<text x=\"" + detail::num(px(fx)) + "\" y=\"" + detail::num(top + ph + 16) +
               "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" + detail::tick(fx) +
               "</text>\n";
        svg += "<text x=\"" + detail::num(left - 6) + "\" y=\"" +
               detail::num(top + (1.0 - (fy - ymin) / (ymax - ymin)) * ph + 3) +
               "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" + detail::tick(yval) +
               "</text>\n";
    }
    svg += "<text x=\"" + detail::num(left + pw / 2) + "\" y=\"" + detail::num(opt.height - 12.0) +
           "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" + detail::escape(opt.x_label) +
           "</text>\n";
    if (!opt.y_label.empty()) {
        svg += "<text x=\"14\" y=\"" + detail::num(top + ph / 2) +
               "\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 " +
               detail::num(top + ph / 2) + ")\" text-anchor=\"middle\">" + detail::escape(opt.y_label) + "</text>\n";
    }
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = palette[si % 6];
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i]) || (opt.log_y && s.y[i] <= 0.0)) continue;
            pts += detail::num(px(s.x[i])) + "," + detail::num(py(s.y[i])) + " ";
        }
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\"" +
               (s.dashed ? " stroke-dasharray=\"6,4\"" : "") + " points=\"" + pts + "\"/>\n";
        const double ly = top + 14 + 18.0 * si;
        svg += "<line x1=\"" + detail::num(left + pw + 10) + "\" y1=\"" + detail::num(ly) + "\" x2=\"" +
               detail::num(left + pw + 34) + "\" y2=\"" + detail::num(ly) + "\" stroke=\"" + color +
               "\" stroke-width=\"2\"" + (s.dashed ? " stroke-dasharray=\"6,4\"" : "") + "/>\n";
        svg += "<text x=\"" + detail::num(left + pw + 40) + "\" y=\"" + detail::num(ly + 4) +
               "\" font-family=\"sans-serif\" font-size=\"11\">" + detail::escape(s.name) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace erdlab::harness

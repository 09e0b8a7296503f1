#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "csv.hpp"

namespace memlab {

struct PlotError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string svg_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace detail

/// Scatter of y against x with a polyline through the per-x means.
/// Finite points only; output is a pure function of the table.
inline std::string render_plot(const CsvTable& table, const std::string& x_column,
                               const std::string& y_column) {
    std::vector<double> xs, ys;
    try {
        xs = table.numeric_column(x_column);
        ys = table.numeric_column(y_column);
    } catch (const CsvError& e) {
        throw PlotError(e.what());
    }
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (std::isfinite(xs[i]) && std::isfinite(ys[i])) pts.emplace_back(xs[i], ys[i]);
    if (pts.empty()) throw PlotError("no finite points for " + y_column + " vs " + x_column);

    double xmin = pts[0].first, xmax = pts[0].first;
    double ymin = pts[0].second, ymax = pts[0].second;
    for (const auto& p : pts) {
        xmin = std::min(xmin, p.first);
        xmax = std::max(xmax, p.first);
        ymin = std::min(ymin, p.second);
        ymax = std::max(ymax, p.second);
    }
    if (xmax == xmin) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymax == ymin) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double xpad = 0.05 * (xmax - xmin);
    const double ypad = 0.05 * (ymax - ymin);
    xmin -= xpad;
    xmax += xpad;
    ymin -= ypad;
    ymax += ypad;

    const double W = 800, H = 560;
    const double L = 80, R = 30, Tm = 40, B = 60;
    const auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
    const auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - Tm - B); };

    std::map<double, std::pair<double, std::size_t>> groups;  // x -> (sum y, count)
    for (const auto& p : pts) {
        auto& g = groups[p.first];
        g.first += p.second;
        g.second += 1;
    }

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"560\" "
         "viewBox=\"0 0 800 560\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"560\" fill=\"white\"/>\n";
    s += "<rect x=\"" + detail::svg_num(L) + "\" y=\"" + detail::svg_num(Tm) + "\" width=\"" +
         detail::svg_num(W - L - R) + "\" height=\"" + detail::svg_num(H - Tm - B) +
         "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";

    const int nticks = 5;
    for (int t = 0; t < nticks; ++t) {
        const double fx = xmin + (xmax - xmin) * t / (nticks - 1);
        const double fy = ymin + (ymax - ymin) * t / (nticks - 1);
        const double cx = px(fx), cy = py(fy);
        s += "<line x1=\"" + detail::svg_num(cx) + "\" y1=\"" + detail::svg_num(H - B) +
             "\" x2=\"" + detail::svg_num(cx) + "\" y2=\"" + detail::svg_num(H - B + 6) +
             "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
        s += "<text x=\"" + detail::svg_num(cx) + "\" y=\"" + detail::svg_num(H - B + 22) +
             "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
             "fill=\"#333333\">" +
             detail::svg_label(fx) + "</text>\n";
        s += "<line x1=\"" + detail::svg_num(L - 6) + "\" y1=\"" + detail::svg_num(cy) +
             "\" x2=\"" + detail::svg_num(L) + "\" y2=\"" + detail::svg_num(cy) +
             "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
        s += "<text x=\"" + detail::svg_num(L - 10) + "\" y=\"" + detail::svg_num(cy + 4) +
             "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\" "
             "fill=\"#333333\">" +
             detail::svg_label(fy) + "</text>\n";
    }
    s += "<text x=\"" + detail::svg_num(L + (W - L - R) / 2) + "\" y=\"" +
         detail::svg_num(H - 18) +
         "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" "
         "fill=\"#111111\">" +
         x_column + "</text>\n";
    s += "<text x=\"20\" y=\"" + detail::svg_num(Tm + (H - Tm - B) / 2) +
         "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" "
         "fill=\"#111111\" transform=\"rotate(-90 20 " +
         detail::svg_num(Tm + (H - Tm - B) / 2) + ")\">" + y_column + "</text>\n";
    s += "<text x=\"" + detail::svg_num(L + (W - L - R) / 2) +
         "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\" "
         "fill=\"#111111\">" +
         y_column + " vs " + x_column + "</text>\n";

    for (const auto& p : pts)
        s += "<circle cx=\"" + detail::svg_num(px(p.first)) + "\" cy=\"" +
             detail::svg_num(py(p.second)) +
             "\" r=\"3.5\" fill=\"#1f77b4\" fill-opacity=\"0.6\"/>\n";

    if (groups.size() >= 2) {
        std::string poly;
        for (const auto& [gx, acc] : groups) {
            const double my = acc.first / static_cast<double>(acc.second);
            if (!poly.empty()) poly += ' ';
            poly += detail::svg_num(px(gx)) + "," + detail::svg_num(py(my));
        }
        s += "<polyline points=\"" + poly +
             "\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
    }
    for (const auto& [gx, acc] : groups) {
        const double my = acc.first / static_cast<double>(acc.second);
        s += "<circle cx=\"" + detail::svg_num(px(gx)) + "\" cy=\"" + detail::svg_num(py(my)) +
             "\" r=\"4.5\" fill=\"#d62728\"/>\n";
    }
    s += "</svg>\n";
    return s;
}

inline void emit_plot(const CsvTable& table, const std::string& x_column,
                      const std::string& y_column, const std::string& out_path) {
    const std::string svg = render_plot(table, x_column, y_column);
    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw PlotError("cannot open for writing: " + out_path);
    os << svg;
    if (!os) throw PlotError("write failed: " + out_path);
}

} // namespace memlab

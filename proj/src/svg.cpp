#include "stabman/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace stabman {

namespace {

std::string num(Real v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string label_num(Real v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// red (0) through pale yellow (0.5) to green (1)
std::string color(Real p) {
    p = std::clamp(std::isfinite(p) ? p : 0.0, 0.0, 1.0);
    const Real r0[3] = {200, 40, 40}, m[3] = {245, 235, 170}, g1[3] = {40, 160, 70};
    int c[3];
    for (int k = 0; k < 3; ++k) {
        const Real v = p < 0.5 ? r0[k] + (m[k] - r0[k]) * (p / 0.5) : m[k] + (g1[k] - m[k]) * ((p - 0.5) / 0.5);
        c[k] = static_cast<int>(std::lround(v));
    }
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
    return buf;
}

}  // namespace

std::string render_heatmap_svg(const Grid2D& g, const HeatmapOptions& opts) {
    const Real left = 60, right = 20, top = 30, bottom = 50;
    const Real pw = opts.width - left - right, ph = opts.height - top - bottom;
    const Real x0 = g.xs.front(), x1 = g.xs.back(), y0 = g.ys.front(), y1 = g.ys.back();
    auto px = [&](Real x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](Real y) { return top + ph - (y - y0) / (y1 - y0) * ph; };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(opts.width) + "\" height=\"" +
         std::to_string(opts.height) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!opts.title.empty())
        s += "<text x=\"" + num(left + pw / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
             escape(opts.title) + "</text>\n";

    // cells centred on grid nodes, clipped to the domain
    const std::size_t nx = g.xs.size(), ny = g.ys.size();
    auto edge = [](const std::vector<Real>& a, std::size_t i, bool upper) {
        if (upper) return i + 1 < a.size() ? 0.5 * (a[i] + a[i + 1]) : a[i];
        return i > 0 ? 0.5 * (a[i - 1] + a[i]) : a[i];
    };
    s += "<g shape-rendering=\"crispEdges\">\n";
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j) {
            const Real xa = px(edge(g.xs, i, false)), xb = px(edge(g.xs, i, true));
            const Real ya = py(edge(g.ys, j, true)), yb = py(edge(g.ys, j, false));
            s += "<rect x=\"" + num(xa) + "\" y=\"" + num(ya) + "\" width=\"" + num(xb - xa) + "\" height=\"" +
                 num(yb - ya) + "\" fill=\"" +
                 color(g.probability(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) + "\"/>\n";
        }
    s += "</g>\n";

    auto path = [&](const Polyline& pl) {
        std::string d;
        for (std::size_t k = 0; k < pl.size(); ++k)
            d += (k ? " L" : "M") + num(px(pl[k][0])) + "," + num(py(pl[k][1]));
        return d;
    };
    for (const auto& pl : contour_lines(g.xs, g.ys, g.probability, opts.p_th))
        s += "<path d=\"" + path(pl) + "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";

    Matrix mask(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(ny));
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j) mask(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g.in_rpi[i][j] ? 1.0 : 0.0;
    for (const auto& pl : contour_lines(g.xs, g.ys, mask, 0.5))
        s += "<path d=\"" + path(pl) + "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>\n";

    if (opts.tuned) {
        const Real cx = px((*opts.tuned)[0]), cy = py((*opts.tuned)[1]);
        std::string pts;
        for (int k = 0; k < 10; ++k) {
            const Real r = k % 2 == 0 ? 9.0 : 3.8;
            const Real a = -kPi / 2 + k * kPi / 5;
            pts += (k ? " " : "") + num(cx + r * std::cos(a)) + "," + num(cy + r * std::sin(a));
        }
        s += "<polygon points=\"" + pts + "\" fill=\"#1f4fd8\" stroke=\"white\" stroke-width=\"0.8\"/>\n";
    }

    s += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(left) + "\" y=\"" + num(top + ph + 16) + "\" font-size=\"11\">" + label_num(x0) + "</text>\n";
    s += "<text x=\"" + num(left + pw) + "\" y=\"" + num(top + ph + 16) + "\" font-size=\"11\" text-anchor=\"end\">" +
         label_num(x1) + "</text>\n";
    s += "<text x=\"" + num(left - 6) + "\" y=\"" + num(top + ph) + "\" font-size=\"11\" text-anchor=\"end\">" +
         label_num(y0) + "</text>\n";
    s += "<text x=\"" + num(left - 6) + "\" y=\"" + num(top + 10) + "\" font-size=\"11\" text-anchor=\"end\">" +
         label_num(y1) + "</text>\n";
    s += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(top + ph + 36) + "\" text-anchor=\"middle\" font-size=\"13\">" +
         escape(g.x_name) + "</text>\n";
    s += "<text x=\"16\" y=\"" + num(top + ph / 2) + "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " +
         num(top + ph / 2) + ")\">" + escape(g.y_name) + "</text>\n";
    s += "</svg>\n";
    return s;
}

}  // namespace stabman

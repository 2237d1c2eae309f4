#include <algorithm>
#include <cstdio>

#include "eduvid/eda.hpp"

namespace eduvid::eda {

namespace {

constexpr double kWidth = 480, kHeight = 320;
constexpr double kLeft = 60, kRight = 16, kTop = 36, kBottom = 48;
constexpr double kPlotW = kWidth - kLeft - kRight;
constexpr double kPlotH = kHeight - kTop - kBottom;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

std::string escape(std::string_view text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

struct Scale {
    double lo, hi, px_lo, px_hi;
    double operator()(double v) const {
        if (hi == lo) return (px_lo + px_hi) / 2;
        return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
    }
};

std::string open_svg(std::string_view title) {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
                    num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">" + escape(title) + "</text>\n";
    return s;
}

std::string axes(const Scale& xs, const Scale& ys, std::string_view x_label, std::string_view y_label) {
    std::string s;
    const double x0 = kLeft, y0 = kTop + kPlotH;
    s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0 + kPlotW) + "\" y2=\"" + num(y0) +
         "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(x0) + "\" y2=\"" + num(y0) +
         "\" stroke=\"black\"/>\n";
    auto text = [&](double x, double y, std::string_view anchor, std::string_view body) {
        s += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + std::string(anchor) +
             "\" font-family=\"sans-serif\" font-size=\"11\">" + escape(body) + "</text>\n";
    };
    text(xs.px_lo, y0 + 16, "start", label(xs.lo));
    text(xs.px_hi, y0 + 16, "end", label(xs.hi));
    text(x0 - 6, ys.px_lo, "end", label(ys.lo));
    text(x0 - 6, ys.px_hi + 10, "end", label(ys.hi));
    text(kLeft + kPlotW / 2, kHeight - 10, "middle", x_label);
    s += "<text x=\"14\" y=\"" + num(kTop + kPlotH / 2) + "\" transform=\"rotate(-90 14 " + num(kTop + kPlotH / 2) +
         ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + escape(y_label) + "</text>\n";
    return s;
}

std::string render_histogram(const Histogram& h) {
    const std::size_t peak = h.counts.empty() ? 0 : *std::max_element(h.counts.begin(), h.counts.end());
    Scale xs{h.bin_edges.front(), h.bin_edges.back(), kLeft, kLeft + kPlotW};
    Scale ys{0.0, static_cast<double>(std::max<std::size_t>(peak, 1)), kTop + kPlotH, kTop};
    std::string s = open_svg("Histogram of " + h.feature_name + " (n=" + std::to_string(h.n) + ")");
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        const double x1 = xs(h.bin_edges[i]), x2 = xs(h.bin_edges[i + 1]);
        const double top = ys(static_cast<double>(h.counts[i]));
        s += "<rect x=\"" + num(x1) + "\" y=\"" + num(top) + "\" width=\"" + num(std::max(0.0, x2 - x1 - 1)) +
             "\" height=\"" + num(kTop + kPlotH - top) + "\" fill=\"#4c78a8\"/>\n";
    }
    s += axes(xs, ys, h.feature_name, "count");
    s += "</svg>\n";
    return s;
}

std::string render_correlations(const std::vector<CorrelationResult>& correlations) {
    std::string s = open_svg("Pearson r against average_percentage_viewed");
    Scale xs{-1.0, 1.0, kLeft + 80, kLeft + kPlotW};
    const double row_h = correlations.empty() ? kPlotH : kPlotH / static_cast<double>(correlations.size());
    s += "<line x1=\"" + num(xs(0)) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(xs(0)) + "\" y2=\"" +
         num(kTop + kPlotH) + "\" stroke=\"black\"/>\n";
    for (std::size_t i = 0; i < correlations.size(); ++i) {
        const auto& c = correlations[i];
        const double y = kTop + row_h * static_cast<double>(i);
        s += "<text x=\"" + num(kLeft + 74) + "\" y=\"" + num(y + row_h / 2 + 4) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + escape(c.feature_name) +
             "</text>\n";
        if (!c.r) continue;
        const double a = xs(std::min(0.0, *c.r)), b = xs(std::max(0.0, *c.r));
        s += "<rect x=\"" + num(a) + "\" y=\"" + num(y + row_h * 0.2) + "\" width=\"" + num(b - a) + "\" height=\"" +
             num(row_h * 0.6) + "\" fill=\"" + (*c.r < 0 ? "#e45756" : "#54a24b") + "\"/>\n";
        s += "<text x=\"" + num(*c.r < 0 ? a - 4 : b + 4) + "\" y=\"" + num(y + row_h / 2 + 4) + "\" text-anchor=\"" +
             (*c.r < 0 ? "end" : "start") + "\" font-family=\"sans-serif\" font-size=\"10\">" + num(*c.r) +
             "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

std::string render_loess(const LoessCurve& c) {
    std::string s = open_svg("LOESS of average_percentage_viewed vs " + c.feature_name + " (span " + label(c.span) + ")");
    if (c.eval_x.empty()) return s + "</svg>\n";
    const auto [ylo, yhi] = std::minmax_element(c.fitted_y.begin(), c.fitted_y.end());
    Scale xs{c.eval_x.front(), c.eval_x.back(), kLeft, kLeft + kPlotW};
    Scale ys{*ylo, *yhi, kTop + kPlotH, kTop};
    s += "<polyline fill=\"none\" stroke=\"#4c78a8\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < c.eval_x.size(); ++i) {
        if (i) s.push_back(' ');
        s += num(xs(c.eval_x[i])) + "," + num(ys(c.fitted_y[i]));
    }
    s += "\"/>\n";
    for (std::size_t i = 0; i < c.eval_x.size(); ++i)
        s += "<circle cx=\"" + num(xs(c.eval_x[i])) + "\" cy=\"" + num(ys(c.fitted_y[i])) +
             "\" r=\"2.5\" fill=\"#4c78a8\"/>\n";
    s += axes(xs, ys, c.feature_name, "average_percentage_viewed");
    s += "</svg>\n";
    return s;
}

}  // namespace

std::map<std::string, std::string> render_svgs(const EDAReport& report) {
    std::map<std::string, std::string> files;
    for (const auto& h : report.histograms) files["hist_" + h.feature_name + ".svg"] = render_histogram(h);
    files["corr.svg"] = render_correlations(report.correlations);
    for (const auto& c : report.curves) files["loess_" + c.feature_name + ".svg"] = render_loess(c);
    return files;
}

}  // namespace eduvid::eda

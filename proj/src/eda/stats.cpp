#include <algorithm>
#include <cmath>
#include <numeric>

#include "eduvid/eda.hpp"
#include "eduvid/error.hpp"

namespace eduvid::eda {

namespace {

void require_finite(std::span<const double> values, std::string_view what) {
    for (double v : values)
        if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteInput, std::string(what) + " contains a non-finite value");
}

double mean(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

bool all_equal(std::span<const double> v) {
    return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

double tricube(double u) {
    const double t = 1.0 - u * u * u;
    return t * t * t;
}

}  // namespace

Histogram histogram(std::span<const double> values, std::size_t bins, std::string feature_name) {
    if (values.empty()) throw Error(ErrorKind::EmptyInput, "histogram of an empty sample", {.field = feature_name});
    if (bins == 0) throw Error(ErrorKind::ValueError, "bins must be >= 1", {.field = "bins"});
    require_finite(values, "histogram input");

    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it, hi = *hi_it;
    const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;

    Histogram h;
    h.feature_name = std::move(feature_name);
    h.n = values.size();
    h.bin_edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) h.bin_edges[i] = lo + static_cast<double>(i) * width;
    if (hi > lo) h.bin_edges.back() = hi;
    h.counts.assign(bins, 0);
    for (double x : values) {
        auto bin = static_cast<std::size_t>(std::floor((x - lo) / width));
        h.counts[std::min(bin, bins - 1)]++;
    }
    return h;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw Error(ErrorKind::LengthMismatch,
                    "x has " + std::to_string(x.size()) + " values, y has " + std::to_string(y.size()));
    if (x.size() < 2) throw Error(ErrorKind::TooFewPoints, "need at least 2 pairs");
    require_finite(x, "x");
    require_finite(y, "y");
    if (all_equal(x)) throw Error(ErrorKind::ZeroVariance, "x is constant", {.field = "x"});
    if (all_equal(y)) throw Error(ErrorKind::ZeroVariance, "y is constant", {.field = "y"});

    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::ZeroVariance, "zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::size_t loess_neighbours(double span, std::size_t n) {
    if (!(span > 0.0 && span <= 1.0))
        throw Error(ErrorKind::ValueError, "span must be in (0, 1]", {.field = "span"});
    const double target = span * static_cast<double>(n);
    if (target < 2.0 - 1e-9)
        throw Error(ErrorKind::SpanTooSmall,
                    "span * n = " + std::to_string(target) + " leaves fewer than 2 neighbours", {.field = "span"});
    const auto k = static_cast<std::size_t>(std::ceil(target - 1e-9));
    return std::clamp<std::size_t>(k, 2, n);
}

LoessCurve loess(std::span<const double> x, std::span<const double> y, double span,
                 std::optional<std::vector<double>> eval_x, std::string feature_name) {
    if (x.size() != y.size())
        throw Error(ErrorKind::LengthMismatch,
                    "x has " + std::to_string(x.size()) + " values, y has " + std::to_string(y.size()));
    const std::size_t n = x.size();
    if (n < 3) throw Error(ErrorKind::TooFewPoints, "LOESS needs at least 3 points", {.field = feature_name});
    require_finite(x, "x");
    require_finite(y, "y");
    const std::size_t k = loess_neighbours(span, n);

    LoessCurve curve;
    curve.feature_name = std::move(feature_name);
    curve.span = span;
    curve.degree = 1;
    if (eval_x) {
        curve.eval_x = std::move(*eval_x);
        require_finite(curve.eval_x, "eval_x");
        std::sort(curve.eval_x.begin(), curve.eval_x.end());
    } else {
        curve.eval_x.assign(x.begin(), x.end());
        std::sort(curve.eval_x.begin(), curve.eval_x.end());
        curve.eval_x.erase(std::unique(curve.eval_x.begin(), curve.eval_x.end()), curve.eval_x.end());
    }

    std::vector<std::size_t> order(n);
    std::vector<double> dist(n), weight(n);
    curve.fitted_y.reserve(curve.eval_x.size());
    for (double x0 : curve.eval_x) {
        for (std::size_t i = 0; i < n; ++i) dist[i] = std::abs(x[i] - x0);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
        const double dmax = dist[order[k - 1]];

        std::fill(weight.begin(), weight.end(), 0.0);
        for (std::size_t r = 0; r < k; ++r) {
            const std::size_t i = order[r];
            weight[i] = dmax > 0.0 ? tricube(dist[i] / dmax) : 1.0;
        }
        // Every neighbour sits exactly at dmax (ties far from x0): tricube gives all zeros,
        // and its limit as the bandwidth shrinks onto dmax is equal weights.
        if (std::all_of(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                        [&](std::size_t i) { return weight[i] == 0.0; }))
            for (std::size_t r = 0; r < k; ++r) weight[order[r]] = 1.0;

        double sw = 0.0, swx = 0.0, swy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sw += weight[i];
            swx += weight[i] * x[i];
            swy += weight[i] * y[i];
        }
        const double xbar = swx / sw, ybar = swy / sw;
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = x[i] - xbar;
            sxx += weight[i] * dx * dx;
            sxy += weight[i] * dx * (y[i] - ybar);
        }
        // Degenerate local design (a single weighted x value): local constant.
        const bool flat = dmax == 0.0 || sxx <= 1e-14 * sw * dmax * dmax;
        curve.fitted_y.push_back(flat ? ybar : ybar + (sxy / sxx) * (x0 - xbar));
    }
    return curve;
}

}  // namespace eduvid::eda

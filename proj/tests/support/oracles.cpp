#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace eduvid::oracle {

using real = long double;

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const real n = static_cast<real>(x.size());
    real sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += static_cast<real>(x[i]) * x[i];
        syy += static_cast<real>(y[i]) * y[i];
        sxy += static_cast<real>(x[i]) * y[i];
    }
    return static_cast<double>((n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy)));
}

double loess_at(const std::vector<double>& x, const std::vector<double>& y, double span, double x0) {
    const std::size_t n = x.size();
    std::size_t k = static_cast<std::size_t>(std::ceil(span * static_cast<double>(n) - 1e-9));
    k = std::min(std::max<std::size_t>(k, 2), n);

    std::vector<std::pair<real, std::size_t>> by_distance;
    for (std::size_t i = 0; i < n; ++i) by_distance.push_back({std::fabs(static_cast<real>(x[i]) - x0), i});
    std::sort(by_distance.begin(), by_distance.end());
    const real dmax = by_distance[k - 1].first;

    // All k neighbours at exactly dmax means every tricube weight is zero; use equal weights.
    const bool uniform = dmax == 0 || by_distance[0].first == dmax;
    real s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t i = by_distance[r].second;
        real w = 1;
        if (!uniform) {
            const real u = by_distance[r].first / dmax;
            w = std::pow(1 - u * u * u, 3);
        }
        const real dx = static_cast<real>(x[i]) - x0;
        s0 += w;
        s1 += w * dx;
        s2 += w * dx * dx;
        t0 += w * y[i];
        t1 += w * dx * y[i];
    }
    // [s0 s1; s1 s2] [a; b] = [t0; t1]; the fit at x0 is a.
    const real det = s0 * s2 - s1 * s1;
    if (std::fabs(det) <= 1e-18L * s0 * s2 || dmax == 0) return static_cast<double>(t0 / s0);
    return static_cast<double>((t0 * s2 - s1 * t1) / det);
}

std::vector<double> normal_equations(const std::vector<std::vector<double>>& X, const std::vector<double>& y) {
    const std::size_t n = X.size(), p = X.empty() ? 0 : X[0].size(), m = p + 1;
    std::vector<std::vector<real>> A(m, std::vector<real>(m + 1, 0));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<real> row(m);
        row[0] = 1;
        for (std::size_t j = 0; j < p; ++j) row[j + 1] = X[i][j];
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t b = 0; b < m; ++b) A[a][b] += row[a] * row[b];
            A[a][m] += row[a] * y[i];
        }
    }
    for (std::size_t c = 0; c < m; ++c) {
        std::size_t pivot = c;
        for (std::size_t r = c + 1; r < m; ++r)
            if (std::fabs(A[r][c]) > std::fabs(A[pivot][c])) pivot = r;
        if (A[pivot][c] == 0) throw std::runtime_error("singular normal equations");
        std::swap(A[c], A[pivot]);
        for (std::size_t r = 0; r < m; ++r) {
            if (r == c) continue;
            const real f = A[r][c] / A[c][c];
            for (std::size_t k = c; k <= m; ++k) A[r][k] -= f * A[c][k];
        }
    }
    std::vector<double> beta(m);
    for (std::size_t c = 0; c < m; ++c) beta[c] = static_cast<double>(A[c][m] / A[c][c]);
    return beta;
}

long double duration_min(std::uint64_t frames, std::uint32_t fps_num, std::uint32_t fps_den) {
    return static_cast<real>(frames) * fps_den / (static_cast<real>(fps_num) * 60);
}

}  // namespace eduvid::oracle

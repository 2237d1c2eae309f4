#pragma once

#include <cstdint>
#include <vector>

// Independent reference implementations. They share no code with the library
// and favour the textbook formula over numerical care, in long double.
namespace eduvid::oracle {

/// r = (n*Sxy - Sx*Sy) / sqrt((n*Sxx - Sx^2) * (n*Syy - Sy^2)).
double pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Local linear fit at x0 over the ceil(span*n) nearest points (ties by
/// index) with tricube weights, solved by Cramer's rule on the 2x2 weighted
/// normal equations in x0-centred coordinates.
double loess_at(const std::vector<double>& x, const std::vector<double>& y, double span, double x0);

/// Least squares [1 | X] beta = y via the normal equations and Gaussian
/// elimination with partial pivoting. Returns (intercept, w1..wp).
std::vector<double> normal_equations(const std::vector<std::vector<double>>& X, const std::vector<double>& y);

/// frames * den / (num * 60), in long double.
long double duration_min(std::uint64_t frames, std::uint32_t fps_num, std::uint32_t fps_den);

}  // namespace eduvid::oracle

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace towgame {

/// Point or displacement in R^Dim.
template <int Dim>
using Vec = std::array<double, static_cast<std::size_t>(Dim)>;

template <std::size_t N>
constexpr std::array<double, N> operator+(const std::array<double, N>& a, const std::array<double, N>& b) {
    std::array<double, N> r{};
    for (std::size_t d = 0; d < N; ++d) r[d] = a[d] + b[d];
    return r;
}

template <std::size_t N>
constexpr std::array<double, N> operator-(const std::array<double, N>& a, const std::array<double, N>& b) {
    std::array<double, N> r{};
    for (std::size_t d = 0; d < N; ++d) r[d] = a[d] - b[d];
    return r;
}

template <std::size_t N>
constexpr std::array<double, N> operator*(double s, const std::array<double, N>& a) {
    std::array<double, N> r{};
    for (std::size_t d = 0; d < N; ++d) r[d] = s * a[d];
    return r;
}

template <std::size_t N>
constexpr double dot(const std::array<double, N>& a, const std::array<double, N>& b) {
    double s = 0.0;
    for (std::size_t d = 0; d < N; ++d) s += a[d] * b[d];
    return s;
}

template <std::size_t N>
double norm(const std::array<double, N>& a) {
    return std::sqrt(dot(a, a));
}

template <std::size_t N>
double dist(const std::array<double, N>& a, const std::array<double, N>& b) {
    return norm(a - b);
}

template <int Dim>
Vec<Dim> to_vec(std::span<const double> xs) {
    Vec<Dim> r{};
    for (int d = 0; d < Dim && d < static_cast<int>(xs.size()); ++d) r[d] = xs[d];
    return r;
}

template <std::size_t N>
std::vector<double> to_std(const std::array<double, N>& a) {
    return std::vector<double>(a.begin(), a.end());
}

/// Deterministic pairwise (cascade) summation. The summation tree only
/// depends on the length of the input, never on the caller's threading.
inline double pairwise_sum(std::span<const double> xs) {
    constexpr std::size_t kBlock = 8;
    if (xs.size() <= kBlock) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace towgame

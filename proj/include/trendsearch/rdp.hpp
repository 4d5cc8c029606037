#pragma once

// Ramer-Douglas-Peucker polyline simplification over parallel x/y arrays.

#include <cmath>
#include <span>
#include <utility>
#include <vector>

namespace trendsearch {

// Distance from (px, py) to the infinite line through a and b.
inline double perpendicular_distance(double ax, double ay, double bx, double by, double px,
                                     double py) {
    const double dx = bx - ax;
    const double dy = by - ay;
    const double len = std::hypot(dx, dy);
    if (len == 0.0)
        return std::hypot(px - ax, py - ay);
    return std::abs(dx * (ay - py) - (ax - px) * dy) / len;
}

// Indices of the retained vertices, ascending, always including both ends.
// Iterative so long daily series cannot exhaust the stack.
inline std::vector<std::size_t> rdp_keep(std::span<const double> xs, std::span<const double> ys,
                                         double epsilon) {
    const std::size_t n = xs.size();
    if (n <= 2) {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i)
            all[i] = i;
        return all;
    }
    std::vector<bool> keep(n, false);
    keep.front() = keep.back() = true;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, n - 1}};
    while (!stack.empty()) {
        const auto [first, last] = stack.back();
        stack.pop_back();
        double dmax = 0.0;
        std::size_t index = first;
        for (std::size_t i = first + 1; i < last; ++i) {
            const double d = perpendicular_distance(xs[first], ys[first], xs[last], ys[last],
                                                    xs[i], ys[i]);
            if (d > dmax) {
                dmax = d;
                index = i;
            }
        }
        if (dmax > epsilon) {
            keep[index] = true;
            stack.emplace_back(first, index);
            stack.emplace_back(index, last);
        }
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i])
            out.push_back(i);
    return out;
}

}  // namespace trendsearch

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

#include "homsim/common.hpp"

namespace homsim {

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre polynomial and cached per order.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    static const GaussRule& of_order(int n) {
        static std::map<int, GaussRule> cache;
        auto it = cache.find(n);
        if (it != cache.end())
            return it->second;
        return cache.emplace(n, make(n)).first->second;
    }

    static GaussRule make(int n) {
        if (n < 1)
            throw numeric_error("gauss rule order must be >= 1");
        GaussRule r;
        r.nodes.resize(n);
        r.weights.resize(n);
        const int m = (n + 1) / 2;
        for (int i = 0; i < m; ++i) {
            double x = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1.0, p1 = 0.0;
                for (int j = 0; j < n; ++j) {
                    double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
                }
                pp = n * (x * p0 - p1) / (x * x - 1.0);
                double dx = p0 / pp;
                x -= dx;
                if (std::abs(dx) < 1e-15)
                    break;
            }
            r.nodes[i] = -x;
            r.nodes[n - 1 - i] = x;
            r.weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
            r.weights[n - 1 - i] = r.weights[i];
        }
        return r;
    }
};

struct QuadResult {
    double value = 0.0;
    double error_estimate = 0.0;
    size_t evaluations = 0;
};

namespace detail {

template <class F>
double tensor_gauss_2d(F&& f, double ax, double bx, double ay, double by, int order,
                       size_t& evals) {
    const auto& rule = GaussRule::of_order(order);
    const double cx = 0.5 * (ax + bx), mx = 0.5 * (bx - ax);
    const double cy = 0.5 * (ay + by), my = 0.5 * (by - ay);
    double sum = 0.0;
    for (int i = 0; i < order; ++i) {
        double x = cx + mx * rule.nodes[i];
        double row = 0.0;
        for (int j = 0; j < order; ++j) {
            row += rule.weights[j] * f(x, cy + my * rule.nodes[j]);
            ++evals;
        }
        sum += rule.weights[i] * row;
    }
    return sum * mx * my;
}

} // namespace detail

/// Adaptive 2D quadrature over a rectangle: per-cell tensor Gauss rules of
/// order n and 2n are compared; cells failing the tolerance are split in
/// four. rel_tol applies against the accumulated magnitude, abs_floor guards
/// near-zero integrands.
template <class F>
QuadResult integrate_2d(F&& f, double ax, double bx, double ay, double by,
                        double rel_tol = 1e-9, double abs_floor = 0.0, int order = 12,
                        int max_cells = 20000) {
    struct Cell {
        double ax, bx, ay, by;
        int depth;
    };
    std::vector<Cell> stack{{ax, bx, ay, by, 0}};
    QuadResult out;
    double scale = 0.0;
    int cells = 0;
    while (!stack.empty()) {
        Cell c = stack.back();
        stack.pop_back();
        if (++cells > max_cells)
            throw numeric_error("integrate_2d: cell budget exhausted before tolerance reached");
        double coarse = detail::tensor_gauss_2d(f, c.ax, c.bx, c.ay, c.by, order,
                                                out.evaluations);
        double fine = detail::tensor_gauss_2d(f, c.ax, c.bx, c.ay, c.by, 2 * order,
                                              out.evaluations);
        double err = std::abs(fine - coarse);
        scale = std::max(scale, std::abs(fine));
        if (err <= rel_tol * std::max(std::abs(fine), scale) + abs_floor || c.depth >= 12) {
            if (c.depth >= 12 && err > rel_tol * std::max(std::abs(fine), scale) + abs_floor)
                throw numeric_error("integrate_2d: max refinement depth reached");
            out.value += fine;
            out.error_estimate += err;
        } else {
            double mx = 0.5 * (c.ax + c.bx);
            double my = 0.5 * (c.ay + c.by);
            stack.push_back({c.ax, mx, c.ay, my, c.depth + 1});
            stack.push_back({mx, c.bx, c.ay, my, c.depth + 1});
            stack.push_back({c.ax, mx, my, c.by, c.depth + 1});
            stack.push_back({mx, c.bx, my, c.by, c.depth + 1});
        }
    }
    return out;
}

/// Fixed-order 1D Gauss-Legendre on [a, b].
template <class F>
double integrate_1d(F&& f, double a, double b, int order = 64) {
    const auto& rule = GaussRule::of_order(order);
    const double c = 0.5 * (a + b), m = 0.5 * (b - a);
    double sum = 0.0;
    for (int i = 0; i < order; ++i)
        sum += rule.weights[i] * f(c + m * rule.nodes[i]);
    return sum * m;
}

} // namespace homsim

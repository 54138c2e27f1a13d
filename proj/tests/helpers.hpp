#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "homsim/grid.hpp"
#include "homsim/model.hpp"
#include "homsim/rng.hpp"

namespace testutil {

/// Unique scratch directory under the system temp dir; removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static uint64_t counter = 0;
        path_ = (std::filesystem::temp_directory_path() /
                 ("homsim_" + tag + "_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++)))
                    .string();
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::string& path() const { return path_; }
    std::string file(const std::string& name) const {
        return (std::filesystem::path(path_) / name).string();
    }

private:
    std::string path_;
};

inline double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
    double m = mean(v);
    double s = 0;
    for (double x : v)
        s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

/// Plus-shaped raised region (the acrylic-cross analogue).
inline homsim::Grid<double> cross_depth(int w, int h, double depth_um, int arm = 3) {
    homsim::Grid<double> g(w, h, 0.0);
    int cx = w / 2, cy = h / 2;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (std::abs(x - cx) <= arm || std::abs(y - cy) <= arm)
                g(x, y) = depth_um;
    return g;
}

inline homsim::Mask cross_mask(int w, int h, bool inside, int arm = 3, int margin = 2) {
    homsim::Mask m(w, h, 0);
    int cx = w / 2, cy = h / 2;
    for (int y = margin; y < h - margin; ++y)
        for (int x = margin; x < w - margin; ++x) {
            bool in_cross = std::abs(x - cx) <= arm || std::abs(y - cy) <= arm;
            // keep a guard band between the regions
            bool near_cross = std::abs(x - cx) <= arm + 1 || std::abs(y - cy) <= arm + 1;
            if (inside ? in_cross : !near_cross)
                m(x, y) = 1;
        }
    return m;
}

/// Blocky etched glyphs (two letter-ish strokes) at a uniform depth.
inline homsim::Grid<double> glyph_depth(int w, int h, double depth_um) {
    homsim::Grid<double> g(w, h, 0.0);
    auto rect = [&](int x0, int y0, int x1, int y1) {
        for (int y = y0; y <= y1 && y < h; ++y)
            for (int x = x0; x <= x1 && x < w; ++x)
                if (x >= 0 && y >= 0)
                    g(x, y) = depth_um;
    };
    int u = std::max(1, w / 16);
    // 'U'
    rect(2 * u, 3 * u, 3 * u, 12 * u);
    rect(6 * u, 3 * u, 7 * u, 12 * u);
    rect(2 * u, 11 * u, 7 * u, 12 * u);
    // 'G'
    rect(9 * u, 3 * u, 14 * u, 4 * u);
    rect(9 * u, 3 * u, 10 * u, 12 * u);
    rect(9 * u, 11 * u, 14 * u, 12 * u);
    rect(13 * u, 8 * u, 14 * u, 12 * u);
    rect(12 * u, 8 * u, 14 * u, 9 * u);
    return g;
}

inline homsim::Mask mask_where(const homsim::Grid<double>& g, double value) {
    homsim::Mask m(g.width(), g.height(), 0);
    for (int y = 0; y < g.height(); ++y)
        for (int x = 0; x < g.width(); ++x)
            if (g(x, y) == value)
                m(x, y) = 1;
    return m;
}

} // namespace testutil

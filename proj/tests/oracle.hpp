#pragma once

// Independent brute-force evaluation of the coincidence estimator
//
//   Gamma(a, b) = (1/N) sum_l I_l(a) I_l(b) - (1/N^2) sum_{m,n} I_m(a) I_n(b)
//
// used as the oracle for the factorised accumulator. The intra term walks
// every pixel pair of every frame; the inter term enumerates every ordered
// frame pair (m, n) explicitly via the frames' click lists. Nothing here
// shares code with homsim::CoincidenceTensor.

#include <cstdint>
#include <vector>

#include "homsim/frame.hpp"
#include "homsim/grid.hpp"

namespace oracle {

struct DenseGamma {
    size_t n_pixels = 0;
    std::vector<double> values; // row-major n_pixels x n_pixels

    double at(size_t a, size_t b) const { return values[a * n_pixels + b]; }
};

inline DenseGamma literal_eq1(const std::vector<homsim::BinaryFrame>& frames) {
    const size_t n_frames = frames.size();
    const size_t n_px = static_cast<size_t>(frames.at(0).width()) * frames.at(0).height();

    std::vector<std::vector<uint32_t>> clicks(n_frames);
    for (size_t l = 0; l < n_frames; ++l)
        frames[l].active_pixels(clicks[l]);

    // intra-frame term: sum_l I_l(a) I_l(b), all ordered pairs
    std::vector<uint64_t> intra(n_px * n_px, 0);
    for (size_t l = 0; l < n_frames; ++l)
        for (uint32_t a : clicks[l])
            for (uint32_t b : clicks[l])
                intra[static_cast<size_t>(a) * n_px + b] += 1;

    // inter-frame term: sum over every ordered frame pair (m, n), including
    // m == n, of I_m(a) I_n(b)
    std::vector<uint64_t> inter(n_px * n_px, 0);
    for (size_t m = 0; m < n_frames; ++m)
        for (size_t n = 0; n < n_frames; ++n)
            for (uint32_t a : clicks[m])
                for (uint32_t b : clicks[n])
                    inter[static_cast<size_t>(a) * n_px + b] += 1;

    DenseGamma g;
    g.n_pixels = n_px;
    g.values.resize(n_px * n_px);
    const double nd = static_cast<double>(n_frames);
    for (size_t i = 0; i < n_px * n_px; ++i)
        g.values[i] = static_cast<double>(intra[i]) / nd -
                      static_cast<double>(inter[i]) / (nd * nd);
    return g;
}

} // namespace oracle

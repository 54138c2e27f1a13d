#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "homsim/common.hpp"
#include "homsim/fit.hpp"
#include "homsim/grid.hpp"

namespace homsim {

inline constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Masked image statistics
// ---------------------------------------------------------------------------

struct MaskedStats {
    size_t n = 0;
    double mean = 0.0;
    double variance = 0.0; // sample variance (n - 1)
};

inline MaskedStats masked_stats(const Image& img, const Mask& mask) {
    if (img.width() != mask.width() || img.height() != mask.height())
        throw geometry_error("masked_stats: image and mask dimensions differ");
    double sum = 0.0;
    size_t n = 0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            if (mask(x, y)) {
                sum += img(x, y);
                ++n;
            }
    if (n == 0)
        throw numeric_error("masked_stats: empty mask");
    MaskedStats s;
    s.n = n;
    s.mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            if (mask(x, y)) {
                double d = img(x, y) - s.mean;
                ss += d * d;
            }
    s.variance = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;
    return s;
}

/// Excess over shot noise: stddev(counts) / sqrt(mean(counts)) within a mask.
/// Exactly 1 for Poisson counts, 0 for a constant image.
inline double noise_ratio(const Image& img, const Mask& mask) {
    MaskedStats s = masked_stats(img, mask);
    double sd = std::sqrt(s.variance);
    if (sd == 0.0)
        return 0.0;
    if (s.mean <= 0.0)
        throw numeric_error("noise_ratio: non-positive mean count in mask");
    return sd / std::sqrt(s.mean);
}

// ---------------------------------------------------------------------------
// Coincidence -> depth inversion
// ---------------------------------------------------------------------------

enum class DipEdge { Rising, Falling };

/// Depth image over one sensor half with a per-pixel standard error;
/// unresolvable pixels hold NaN in both grids.
struct DepthImage {
    Image depth_um;
    Image stderr_um;

    bool valid(int x, int y) const { return std::isfinite(depth_um(x, y)); }

    size_t valid_count() const {
        size_t n = 0;
        for (double v : depth_um.data())
            if (std::isfinite(v))
                ++n;
        return n;
    }
};

/// Invert per-pixel coincidence counts to depth along one monotone edge of a
/// fitted dip: delta = center +/- width * sqrt(-2 ln((b - c)/(b V))), then
/// depth = operating_delay - delta. Counts outside [b(1-V), b) are masked.
/// The per-pixel error propagates Poisson counting noise through d delta/dC.
inline DepthImage invert_depth(const Image& coincidence_counts, const DipModel& dip,
                               double operating_delay_um, DipEdge edge) {
    dip.validate();
    if (dip.visibility <= 0.0)
        throw numeric_error("invert_depth: zero-visibility dip cannot be inverted");
    double off = operating_delay_um - dip.center_um;
    if (std::abs(off) > 2.0 * dip.width_um + 1e-9)
        throw numeric_error("invert_depth: operating delay " +
                            std::to_string(operating_delay_um) +
                            " um lies beyond 2 widths from the dip centre");
    if ((edge == DipEdge::Rising && off < -1e-9) || (edge == DipEdge::Falling && off > 1e-9))
        throw numeric_error("invert_depth: operating delay is not on the declared edge");

    const double sign = edge == DipEdge::Rising ? 1.0 : -1.0;
    const double b = dip.baseline;
    const double v = dip.visibility;
    DepthImage out;
    out.depth_um = Image(coincidence_counts.width(), coincidence_counts.height(), kNan);
    out.stderr_um = Image(coincidence_counts.width(), coincidence_counts.height(), kNan);
    for (int y = 0; y < coincidence_counts.height(); ++y)
        for (int x = 0; x < coincidence_counts.width(); ++x) {
            double c = coincidence_counts(x, y);
            double arg = (b - c) / (b * v);
            if (!(arg > 0.0 && arg <= 1.0))
                continue; // out of the invertible count range
            double root = std::sqrt(-2.0 * std::log(arg));
            double delta = dip.center_um + sign * dip.width_um * root;
            out.depth_um(x, y) = operating_delay_um - delta;
            double sigma_c = std::sqrt(std::max(c, 1.0));
            out.stderr_um(x, y) = root > 0.0
                                      ? dip.width_um / ((b - c) * root) * sigma_c
                                      : std::numeric_limits<double>::infinity();
        }
    return out;
}

// ---------------------------------------------------------------------------
// Per-pixel dip calibration (alternative to the global reference dip)
// ---------------------------------------------------------------------------

/// Dip parameters fitted independently at every pixel of a delay scan of
/// count images. Pixels whose fit fails (flat, one-sided, non-convergent)
/// hold NaN throughout. Per-pixel counts are usually far noisier than the
/// pooled reference scan; this exists for strongly non-uniform illumination.
struct DipMapFit {
    Image baseline;
    Image visibility;
    Image width_um;
    Image center_um;
    size_t fitted = 0;
};

inline DipMapFit fit_dip_per_pixel(const std::vector<std::pair<double, Image>>& scan) {
    if (scan.size() < 5)
        throw numeric_error("per-pixel dip fit: need at least 5 delay points");
    const int w = scan.front().second.width();
    const int h = scan.front().second.height();
    for (const auto& [d, img] : scan)
        if (img.width() != w || img.height() != h)
            throw geometry_error("per-pixel dip fit: image geometry varies across the scan");
    DipMapFit out{Image(w, h, kNan), Image(w, h, kNan), Image(w, h, kNan), Image(w, h, kNan),
                  0};
    std::vector<ScanPoint> pts(scan.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            for (size_t i = 0; i < scan.size(); ++i)
                pts[i] = {scan[i].first, scan[i].second(x, y)};
            try {
                ScanCurveFit fit = fit_scan_curve(pts, CurveSense::Dip);
                out.baseline(x, y) = fit.baseline;
                out.visibility(x, y) = fit.amplitude;
                out.width_um(x, y) = fit.width_um;
                out.center_um(x, y) = fit.center_um;
                ++out.fitted;
            } catch (const numeric_error&) {
                // leave the pixel masked
            }
        }
    return out;
}

// ---------------------------------------------------------------------------
// Minimum-variance combination of the bunching and anti-bunching channels
// ---------------------------------------------------------------------------

struct CombineResult {
    Image image;
    double scale = 0.0;  // affine map applied to the bunching channel
    double offset = 0.0; // (negative scale = contrast reversal)
    double sigma_anti = 0.0;
    double sigma_bunch = 0.0; // after rescaling
};

/// Combine the anti-bunching and bunching images with inverse-variance
/// weights. The bunching channel is first mapped affinely onto the
/// anti-bunching scale using >= 2 regions of expected constant counts (the
/// fit absorbs the contrast reversal as a negative slope); each channel's
/// noise is the pooled within-region standard deviation.
inline CombineResult combine_channels(const Image& antibunch, const Image& bunch,
                                      const std::vector<Mask>& masks) {
    if (!antibunch.same_shape(bunch))
        throw geometry_error("combine: channel dimensions differ");
    if (masks.size() < 2)
        throw numeric_error("combine: need at least two constant-count regions "
                            "to fix the affine rescaling");

    struct Region {
        MaskedStats anti, bunch;
    };
    std::vector<Region> regions;
    for (const Mask& m : masks)
        regions.push_back({masked_stats(antibunch, m), masked_stats(bunch, m)});

    // weighted least squares for bunch -> anti region means
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const Region& r : regions) {
        double w = static_cast<double>(r.anti.n);
        sw += w;
        sx += w * r.bunch.mean;
        sy += w * r.anti.mean;
        sxx += w * r.bunch.mean * r.bunch.mean;
        sxy += w * r.bunch.mean * r.anti.mean;
    }
    double det = sw * sxx - sx * sx;
    if (std::abs(det) <= 1e-12 * std::max(1.0, sw * sxx))
        throw numeric_error("combine: region means do not separate the channels "
                            "(degenerate affine rescaling)");
    double alpha = (sw * sxy - sx * sy) / det;
    double beta = (sy - alpha * sx) / sw;

    double pooled_anti = 0.0, pooled_bunch = 0.0, dof = 0.0;
    for (const Region& r : regions) {
        pooled_anti += r.anti.variance * static_cast<double>(r.anti.n - 1);
        pooled_bunch += r.bunch.variance * static_cast<double>(r.bunch.n - 1);
        dof += static_cast<double>(r.anti.n - 1);
    }
    if (dof <= 0.0)
        throw numeric_error("combine: regions too small for a noise estimate");
    double var_anti = pooled_anti / dof;
    double var_bunch = alpha * alpha * pooled_bunch / dof;
    if (var_anti <= 0.0 || var_bunch <= 0.0)
        throw numeric_error("combine: zero variance in a region gives degenerate weights");

    double wa = 1.0 / var_anti;
    double wb = 1.0 / var_bunch;
    CombineResult out;
    out.scale = alpha;
    out.offset = beta;
    out.sigma_anti = std::sqrt(var_anti);
    out.sigma_bunch = std::sqrt(var_bunch);
    out.image = Image(antibunch.width(), antibunch.height(), 0.0);
    for (int y = 0; y < antibunch.height(); ++y)
        for (int x = 0; x < antibunch.width(); ++x) {
            double rescaled = alpha * bunch(x, y) + beta;
            out.image(x, y) = (wa * antibunch(x, y) + wb * rescaled) / (wa + wb);
        }
    return out;
}

// ---------------------------------------------------------------------------
// 2x2 raster-scan super-resolution
// ---------------------------------------------------------------------------

/// Interleave four images acquired at half-pixel camera offsets
/// (0,0), (1/2,0), (0,1/2), (1/2,1/2) into a 2W x 2H grid:
/// out(2i + a, 2j + b) = image_ab(i, j).
inline Image raster_superresolve(const Image& img00, const Image& img10, const Image& img01,
                                 const Image& img11) {
    if (!img00.same_shape(img10) || !img00.same_shape(img01) || !img00.same_shape(img11))
        throw geometry_error("raster: the four images must share one geometry");
    const int w = img00.width();
    const int h = img00.height();
    Image out(2 * w, 2 * h, 0.0);
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) {
            out(2 * i, 2 * j) = img00(i, j);
            out(2 * i + 1, 2 * j) = img10(i, j);
            out(2 * i, 2 * j + 1) = img01(i, j);
            out(2 * i + 1, 2 * j + 1) = img11(i, j);
        }
    return out;
}

/// Undo raster_superresolve (exact).
inline std::array<Image, 4> raster_decimate(const Image& super) {
    if (super.width() % 2 != 0 || super.height() % 2 != 0)
        throw geometry_error("raster_decimate: dimensions must be even");
    const int w = super.width() / 2;
    const int h = super.height() / 2;
    std::array<Image, 4> out{Image(w, h), Image(w, h), Image(w, h), Image(w, h)};
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) {
            out[0](i, j) = super(2 * i, 2 * j);
            out[1](i, j) = super(2 * i + 1, 2 * j);
            out[2](i, j) = super(2 * i, 2 * j + 1);
            out[3](i, j) = super(2 * i + 1, 2 * j + 1);
        }
    return out;
}

} // namespace homsim

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "homsim/common.hpp"
#include "homsim/jpd.hpp"

namespace homsim {

// ---------------------------------------------------------------------------
// Small dense Levenberg-Marquardt solver. Models register a callback that
// fills the residual and the Jacobian row for one data point.
// ---------------------------------------------------------------------------

struct LmOptions {
    int max_iterations = 400;
    double param_tol = 1e-10; // relative step size convergence
    double lambda_init = 1e-3;
};

struct LmResult {
    std::vector<double> params;
    std::vector<double> stderrs;
    std::vector<double> covariance; // row-major n x n
    double ssr = 0.0;
    int iterations = 0;
    bool converged = false;
    bool singular = false;
};

namespace detail {

/// Solve A x = b in place (n <= 8), Gaussian elimination with partial
/// pivoting. Returns false on a singular pivot.
inline bool solve_dense(std::vector<double> a, std::vector<double> b, size_t n,
                        std::vector<double>& x) {
    for (size_t col = 0; col < n; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col]))
                piv = r;
        if (std::abs(a[piv * n + col]) < 1e-300)
            return false;
        if (piv != col) {
            for (size_t c = 0; c < n; ++c)
                std::swap(a[col * n + c], a[piv * n + c]);
            std::swap(b[col], b[piv]);
        }
        double inv = 1.0 / a[col * n + col];
        for (size_t r = col + 1; r < n; ++r) {
            double f = a[r * n + col] * inv;
            if (f == 0.0)
                continue;
            for (size_t c = col; c < n; ++c)
                a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    x.assign(n, 0.0);
    for (size_t ri = n; ri-- > 0;) {
        double s = b[ri];
        for (size_t c = ri + 1; c < n; ++c)
            s -= a[ri * n + c] * x[c];
        x[ri] = s / a[ri * n + ri];
    }
    return true;
}

inline bool invert_dense(const std::vector<double>& a, size_t n, std::vector<double>& inv) {
    inv.assign(n * n, 0.0);
    for (size_t col = 0; col < n; ++col) {
        std::vector<double> e(n, 0.0);
        e[col] = 1.0;
        std::vector<double> x;
        if (!solve_dense(a, e, n, x))
            return false;
        for (size_t r = 0; r < n; ++r)
            inv[r * n + col] = x[r];
    }
    return true;
}

} // namespace detail

/// point_fn(params, i, residual, jacobian_row): residual = model - data for
/// point i, jacobian_row holds d residual / d param.
template <class PointFn>
LmResult lm_fit(size_t n_params, size_t n_data, PointFn&& point_fn, std::vector<double> p,
                const LmOptions& opts = {}) {
    auto ssr_of = [&](const std::vector<double>& q) {
        double s = 0.0;
        std::vector<double> jrow(n_params);
        double r;
        for (size_t i = 0; i < n_data; ++i) {
            point_fn(q.data(), i, r, jrow.data());
            s += r * r;
        }
        return s;
    };

    LmResult out;
    double lambda = opts.lambda_init;
    double ssr = ssr_of(p);
    std::vector<double> jtj(n_params * n_params), jtr(n_params), jrow(n_params), step;

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        out.iterations = iter + 1;
        std::fill(jtj.begin(), jtj.end(), 0.0);
        std::fill(jtr.begin(), jtr.end(), 0.0);
        double r;
        for (size_t i = 0; i < n_data; ++i) {
            point_fn(p.data(), i, r, jrow.data());
            for (size_t a = 0; a < n_params; ++a) {
                jtr[a] += jrow[a] * r;
                for (size_t b = a; b < n_params; ++b)
                    jtj[a * n_params + b] += jrow[a] * jrow[b];
            }
        }
        for (size_t a = 0; a < n_params; ++a)
            for (size_t b = 0; b < a; ++b)
                jtj[a * n_params + b] = jtj[b * n_params + a];

        bool stepped = false;
        for (int attempt = 0; attempt < 40; ++attempt) {
            std::vector<double> damped = jtj;
            for (size_t a = 0; a < n_params; ++a) {
                double d = jtj[a * n_params + a];
                damped[a * n_params + a] = d + lambda * (d > 0 ? d : 1.0);
            }
            std::vector<double> rhs(n_params);
            for (size_t a = 0; a < n_params; ++a)
                rhs[a] = -jtr[a];
            if (!detail::solve_dense(damped, rhs, n_params, step)) {
                lambda *= 10.0;
                if (lambda > 1e14)
                    break;
                continue;
            }
            std::vector<double> q(p);
            for (size_t a = 0; a < n_params; ++a)
                q[a] += step[a];
            double new_ssr = ssr_of(q);
            if (std::isfinite(new_ssr) && new_ssr <= ssr) {
                double max_rel = 0.0;
                for (size_t a = 0; a < n_params; ++a)
                    max_rel = std::max(max_rel,
                                       std::abs(step[a]) / (std::abs(q[a]) + 1e-30));
                p = std::move(q);
                double improved = ssr - new_ssr;
                ssr = new_ssr;
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                if (max_rel < opts.param_tol || improved <= 1e-30 * (1.0 + ssr)) {
                    out.converged = true;
                }
                break;
            }
            lambda *= 8.0;
            if (lambda > 1e14)
                break;
        }
        if (out.converged || !stepped)
            break;
    }

    out.params = p;
    out.ssr = ssr;
    out.stderrs.assign(n_params, std::numeric_limits<double>::quiet_NaN());
    // linearised covariance at the optimum
    std::fill(jtj.begin(), jtj.end(), 0.0);
    double r;
    for (size_t i = 0; i < n_data; ++i) {
        point_fn(p.data(), i, r, jrow.data());
        for (size_t a = 0; a < n_params; ++a)
            for (size_t b = a; b < n_params; ++b)
                jtj[a * n_params + b] += jrow[a] * jrow[b];
    }
    for (size_t a = 0; a < n_params; ++a)
        for (size_t b = 0; b < a; ++b)
            jtj[a * n_params + b] = jtj[b * n_params + a];
    std::vector<double> inv;
    if (n_data > n_params && detail::invert_dense(jtj, n_params, inv)) {
        double s2 = ssr / static_cast<double>(n_data - n_params);
        out.covariance.resize(n_params * n_params);
        for (size_t a = 0; a < n_params * n_params; ++a)
            out.covariance[a] = inv[a] * s2;
        for (size_t a = 0; a < n_params; ++a)
            out.stderrs[a] = std::sqrt(std::max(0.0, out.covariance[a * n_params + a]));
    } else {
        out.singular = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// HOM dip / peak scan fitting
// ---------------------------------------------------------------------------

/// Gaussian dip model C(delta) = baseline * (1 - V exp(-(delta-center)^2 / (2 width^2))).
struct DipModel {
    double baseline = 0.0;
    double visibility = 0.0; // V, relative dip depth in [0, 1]
    double width_um = 0.0;   // Sigma
    double center_um = 0.0;

    double value(double delta_um) const {
        double z = (delta_um - center_um) / width_um;
        return baseline * (1.0 - visibility * std::exp(-0.5 * z * z));
    }

    void validate() const {
        if (!(baseline > 0.0))
            throw config_error("dip: baseline must be positive");
        if (!(visibility >= 0.0 && visibility <= 1.0))
            throw config_error("dip: visibility must be in [0, 1]");
        if (!(width_um > 0.0))
            throw config_error("dip: width must be positive");
    }
};

/// Interference visibility |C(inf) - C(0)| / (C(inf) + C(0)) of a fitted
/// curve; amplitude is signed (negative = peak).
inline double hom_visibility(double amplitude) {
    return std::abs(amplitude) / (2.0 - amplitude);
}

enum class CurveSense { Dip, Peak };

struct ScanPoint {
    double delay_um;
    double counts;
};

/// Result of fitting C(delta) = b (1 - a g(delta)); a > 0 for dips,
/// a < 0 for peaks (the bunching channels).
struct ScanCurveFit {
    double baseline = 0.0;
    double amplitude = 0.0; // signed a
    double width_um = 0.0;
    double center_um = 0.0;
    std::array<double, 4> stderrs{}; // baseline, amplitude, width, center
    double ssr = 0.0;
    int iterations = 0;

    double visibility() const { return hom_visibility(amplitude); }

    double visibility_stderr() const {
        // d/da |a|/(2-a): for a>0 it is 2/(2-a)^2; for a<0, |a|/(2-a) = -a/(2-a),
        // derivative magnitude 2/(2-a)^2 as well
        double d = 2.0 / ((2.0 - amplitude) * (2.0 - amplitude));
        return std::abs(d) * stderrs[1];
    }

    DipModel dip() const {
        if (amplitude < 0.0)
            throw numeric_error("fitted curve is a peak, not a dip");
        DipModel m{baseline, amplitude, std::abs(width_um), center_um};
        if (m.visibility > 1.0 + 1e-9)
            throw numeric_error("fitted visibility exceeds 1");
        m.visibility = std::min(m.visibility, 1.0);
        m.validate();
        return m;
    }
};

/// Least-squares fit of the four-parameter Gaussian bump to a delay scan,
/// with multi-start over the centre. Throws numeric_error when the scan is
/// flat (centre unidentifiable) or one-sided.
inline ScanCurveFit fit_scan_curve(std::span<const ScanPoint> scan, CurveSense sense) {
    if (scan.size() < 5)
        throw numeric_error("scan fit: need at least 5 points, got " +
                            std::to_string(scan.size()));

    double lo = scan[0].delay_um, hi = scan[0].delay_um;
    double ymin = scan[0].counts, ymax = scan[0].counts;
    size_t i_extreme = 0;
    for (size_t i = 0; i < scan.size(); ++i) {
        lo = std::min(lo, scan[i].delay_um);
        hi = std::max(hi, scan[i].delay_um);
        ymin = std::min(ymin, scan[i].counts);
        ymax = std::max(ymax, scan[i].counts);
        bool more_extreme = sense == CurveSense::Dip ? scan[i].counts < scan[i_extreme].counts
                                                     : scan[i].counts > scan[i_extreme].counts;
        if (more_extreme)
            i_extreme = i;
    }
    double span = hi - lo;
    double scale = std::max(std::abs(ymin), std::abs(ymax));
    if (ymax - ymin <= 1e-12 * std::max(1.0, scale))
        throw numeric_error("scan fit ill-posed: flat scan, centre unidentifiable");

    auto point_fn = [&](const double* p, size_t i, double& resid, double* j) {
        const double b = p[0], a = p[1], w = p[2], c = p[3];
        double z = (scan[i].delay_um - c) / w;
        double g = std::exp(-0.5 * z * z);
        resid = b * (1.0 - a * g) - scan[i].counts;
        j[0] = 1.0 - a * g;
        j[1] = -b * g;
        j[2] = -b * a * g * z * z / w;
        j[3] = -b * a * g * z / w;
    };

    double b0 = sense == CurveSense::Dip ? ymax : ymin;
    if (std::abs(b0) < 1e-12 * std::max(1.0, scale))
        b0 = sense == CurveSense::Dip ? ymax : (ymin == 0.0 ? -0.1 * (ymax - ymin) : ymin);
    double a0 = (b0 - (sense == CurveSense::Dip ? ymin : ymax)) / b0;

    LmResult best;
    double best_ssr = std::numeric_limits<double>::infinity();
    for (double c0 : {scan[i_extreme].delay_um, 0.5 * (lo + hi)})
        for (double w0 : {span / 6.0, span / 3.0}) {
            LmResult r = lm_fit(4, scan.size(), point_fn, {b0, a0, w0, c0});
            if (r.ssr < best_ssr) {
                best_ssr = r.ssr;
                best = std::move(r);
            }
        }

    if (best.params.empty() || !best.converged || best.singular) {
        double rms = best.params.empty()
                         ? std::numeric_limits<double>::quiet_NaN()
                         : std::sqrt(best.ssr / static_cast<double>(scan.size()));
        throw numeric_error("scan fit did not converge (rms residual " + std::to_string(rms) +
                            " over " + std::to_string(scan.size()) + " points)");
    }

    ScanCurveFit fit;
    fit.baseline = best.params[0];
    fit.amplitude = best.params[1];
    fit.width_um = std::abs(best.params[2]);
    fit.center_um = best.params[3];
    for (int k = 0; k < 4; ++k)
        fit.stderrs[k] = best.stderrs[k];
    fit.ssr = best.ssr;
    fit.iterations = best.iterations;

    if (std::abs(fit.amplitude) * std::abs(fit.baseline) <=
        1e-7 * std::max(1.0, std::abs(fit.baseline)))
        throw numeric_error("scan fit ill-posed: visibility indistinguishable from zero");
    if (fit.center_um < lo || fit.center_um > hi)
        throw numeric_error("scan fit ill-posed: extremum outside the scanned range "
                            "(scan covers one side only)");
    if ((sense == CurveSense::Dip && fit.amplitude < 0.0) ||
        (sense == CurveSense::Peak && fit.amplitude > 0.0))
        throw numeric_error("scan fit: bump sign does not match the requested sense");
    return fit;
}

/// Fit the HOM dip to an anti-bunching delay scan.
struct DipFit {
    DipModel model;
    std::array<double, 4> stderrs{};
    double visibility = 0.0; // |(C_inf - C_0)/(C_inf + C_0)|
    double visibility_stderr = 0.0;
    double ssr = 0.0;
};

inline DipFit fit_dip(std::span<const ScanPoint> scan) {
    ScanCurveFit f = fit_scan_curve(scan, CurveSense::Dip);
    DipFit out;
    out.model = f.dip();
    out.stderrs = f.stderrs;
    out.visibility = f.visibility();
    out.visibility_stderr = f.visibility_stderr();
    out.ssr = f.ssr;
    return out;
}

inline DipFit fit_dip(const std::vector<std::pair<double, double>>& scan) {
    std::vector<ScanPoint> pts;
    pts.reserve(scan.size());
    for (auto& [d, c] : scan)
        pts.push_back({d, c});
    return fit_dip(std::span<const ScanPoint>(pts));
}

// ---------------------------------------------------------------------------
// Minus-projection peak fit (the number-resolution-free bunching estimate)
// ---------------------------------------------------------------------------

struct PeakFit2D {
    double amplitude = 0.0; // Gaussian height above the fitted background
    double sigma_x = 0.0;
    double sigma_y = 0.0;
    double offset = 0.0;
    double amplitude_stderr = 0.0;
    double rms_residual = 0.0;
};

/// Fit a centred 2D Gaussian plus constant background to the minus-coordinate
/// projection, skipping the excluded k = 0 bin, and return the interpolated
/// central amplitude. window_radius limits the fit to |kx|,|ky| <= radius.
inline PeakFit2D fit_bunch_peak(const Projection& proj, int window_radius = 8) {
    if (proj.kind != ProjectionKind::Minus)
        throw config_error("fit_bunch_peak: expects a minus-coordinate projection");
    if (!proj.center_excluded)
        throw config_error("fit_bunch_peak: projection must carry the excluded k=0 bin");

    const int cx = proj.center_x();
    const int cy = proj.center_y();
    struct Bin {
        double kx, ky, v;
    };
    std::vector<Bin> bins;
    double vmax = -std::numeric_limits<double>::infinity();
    double vmin = std::numeric_limits<double>::infinity();
    for (int y = std::max(0, cy - window_radius);
         y <= std::min(proj.values.height() - 1, cy + window_radius); ++y)
        for (int x = std::max(0, cx - window_radius);
             x <= std::min(proj.values.width() - 1, cx + window_radius); ++x) {
            double v = proj.values(x, y);
            if (std::isnan(v))
                continue;
            bins.push_back({static_cast<double>(x - cx), static_cast<double>(y - cy), v});
            vmax = std::max(vmax, v);
            vmin = std::min(vmin, v);
        }
    if (bins.size() < 6)
        throw numeric_error("fit_bunch_peak: too few usable bins");
    if (vmax == vmin)
        return PeakFit2D{0.0, 0.0, 0.0, vmax, 0.0, 0.0}; // flat (e.g. all-zero) projection

    auto point_fn = [&](const double* p, size_t i, double& resid, double* j) {
        const double amp = p[0], sx = p[1], sy = p[2], c = p[3];
        const Bin& b = bins[i];
        double gx = b.kx / sx;
        double gy = b.ky / sy;
        double g = std::exp(-0.5 * (gx * gx + gy * gy));
        resid = amp * g + c - b.v;
        j[0] = g;
        j[1] = amp * g * gx * gx / sx;
        j[2] = amp * g * gy * gy / sy;
        j[3] = 1.0;
    };

    // median-ish background from the window edge
    double c0 = 0.0;
    int n_edge = 0;
    for (const Bin& b : bins)
        if (std::abs(b.kx) >= window_radius - 1 || std::abs(b.ky) >= window_radius - 1) {
            c0 += b.v;
            ++n_edge;
        }
    c0 = n_edge ? c0 / n_edge : vmin;
    double near = -std::numeric_limits<double>::infinity();
    for (const Bin& b : bins)
        if (std::abs(b.kx) <= 1.5 && std::abs(b.ky) <= 1.5)
            near = std::max(near, b.v);
    if (!std::isfinite(near))
        near = vmax;

    LmResult best;
    double best_ssr = std::numeric_limits<double>::infinity();
    for (double s0 : {0.8, 1.5, 3.0}) {
        LmResult r = lm_fit(4, bins.size(), point_fn, {near - c0, s0, s0, c0});
        if (r.ssr < best_ssr) {
            best_ssr = r.ssr;
            best = std::move(r);
        }
    }
    double rms = std::sqrt(best.ssr / static_cast<double>(bins.size()));
    if (!best.converged || best.singular)
        throw numeric_error("fit_bunch_peak did not converge (rms residual " +
                            std::to_string(rms) + ")");
    PeakFit2D out;
    out.amplitude = best.params[0];
    out.sigma_x = std::abs(best.params[1]);
    out.sigma_y = std::abs(best.params[2]);
    out.offset = best.params[3];
    out.amplitude_stderr = best.stderrs[0];
    out.rms_residual = rms;
    return out;
}

} // namespace homsim

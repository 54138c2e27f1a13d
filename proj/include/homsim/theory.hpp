#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "homsim/common.hpp"
#include "homsim/model.hpp"
#include "homsim/quadrature.hpp"

namespace homsim {

/// Parameters of the 1D two-mode visibility model: an equal superposition of
/// the fundamental and first-order transverse modes, pixel-integrated with a
/// dead-zone loss rate. Predicts dip visibility versus the pixel-to-
/// correlation-width ratio R without free parameters.
struct TheoryParams {
    double pump_wavenumber_rad_per_nm = kTwoPi / 347.0;
    double crystal_length_mm = 0.5;
    double diffraction_scale = 1.0 / 25.0; // beta
    double pump_width_mm = 0.192;          // w; default keeps w/beta at the array width
    double pixel_size_um = 150.0;          // Delta L
    double array_width_um = 4800.0;        // L, one half = 32 pixels by default
    double loss_rate = 0.93;               // gamma = 1 - fill * QE
    double dip_width_um = 20.0;            // Sigma

    double pump_wavenumber_rad_per_um() const { return pump_wavenumber_rad_per_nm * 1000.0; }

    double sigma_corr_um() const {
        return SourceModel::correlation_width_from_optics_um(
            crystal_length_mm, diffraction_scale,
            kTwoPi / pump_wavenumber_rad_per_nm);
    }

    /// R = pixel width over correlation FWHM-equivalent.
    double pixel_ratio() const { return pixel_size_um / (fwhm_from_sigma(1.0) * sigma_corr_um()); }

    int pixel_count() const {
        return static_cast<int>(std::floor(array_width_um / pixel_size_um + 0.5));
    }

    void validate() const {
        if (pump_wavenumber_rad_per_nm <= 0 || crystal_length_mm <= 0 ||
            diffraction_scale <= 0 || pump_width_mm <= 0 || pixel_size_um <= 0 ||
            array_width_um <= 0 || dip_width_um <= 0)
            throw config_error("theory: all lengths and scales must be positive");
        if (!(loss_rate >= 0.0 && loss_rate <= 1.0))
            throw config_error("theory: loss_rate must be in [0, 1]");
        if (pixel_count() < 1)
            throw config_error("theory: array narrower than one pixel");
    }

    static TheoryParams reference_setup() { return TheoryParams{}; }
};

enum class ModeSign { Plus, Minus };

/// Evaluator with the normalisation constant fixed so that each of psi_+ and
/// psi_- carries total probability 1/2. The constant is determined by
/// quadrature (the separable closed form exists; tests cross-check it).
class TheoryModel {
public:
    explicit TheoryModel(const TheoryParams& p) : p_(p) {
        p_.validate();
        sigma_ = p_.sigma_corr_um();
        sigma_m_ = 0.5 * p_.pump_width_mm * 1000.0 / p_.diffraction_scale; // w / (2 beta)
        norm_ = normalisation();
    }

    const TheoryParams& params() const { return p_; }
    double norm() const { return norm_; }
    double sigma_corr_um() const { return sigma_; }

    /// psi_+/- at positions x1, x2 (um) on the two detector halves.
    double psi(double x1_um, double x2_um, ModeSign sign) const {
        double s = x1_um + x2_um;
        double m = x1_um - x2_um;
        double g = std::exp(-s * s / (2.0 * sigma_ * sigma_)) *
                   std::exp(-m * m / (4.0 * sigma_m_ * sigma_m_));
        double bracket = std::sqrt(2.0) / sigma_ * s;
        return sign == ModeSign::Plus ? norm_ * g * (1.0 + bracket)
                                      : -norm_ * g * (1.0 - bracket);
    }

    /// Cross-half coincidence probability density at delay delta.
    double coincidence_probability(double x1_um, double x2_um, double delta_um) const {
        double pp = psi(x1_um, x2_um, ModeSign::Plus);
        double pm = psi(x1_um, x2_um, ModeSign::Minus);
        double eta = std::exp(-delta_um * delta_um / (2.0 * p_.dip_width_um * p_.dip_width_um));
        return pp * pp + pm * pm + 2.0 * pp * pm * eta;
    }

    /// Active (photosensitive) interval of pixel i; the loss rate shrinks
    /// each pixel symmetrically.
    std::pair<double, double> pixel_interval(int i) const {
        double lo = -0.5 * p_.array_width_um + (i + 0.5 * p_.loss_rate) * p_.pixel_size_um;
        double hi = -0.5 * p_.array_width_um + (i + 1.0 - 0.5 * p_.loss_rate) * p_.pixel_size_um;
        return {lo, hi};
    }

    /// Coincidence probability between pixels i and j at delay delta
    /// (adaptive quadrature, relative tolerance rel_tol).
    double pixel_pair_probability(int i, int j, double delta_um, double rel_tol = 1e-9) const {
        check_pixel(i);
        check_pixel(j);
        auto [ax, bx] = pixel_interval(i);
        auto [ay, by] = pixel_interval(j);
        if (ax >= bx || ay >= by)
            return 0.0; // fully dead pixel
        auto f = [&](double x1, double x2) { return coincidence_probability(x1, x2, delta_um); };
        return integrate_2d(f, ax, bx, ay, by, rel_tol).value;
    }

    /// Same integral with a single fixed-order tensor rule; used for
    /// convergence self-checks.
    double pixel_pair_probability_fixed(int i, int j, double delta_um, int order) const {
        check_pixel(i);
        check_pixel(j);
        auto [ax, bx] = pixel_interval(i);
        auto [ay, by] = pixel_interval(j);
        if (ax >= bx || ay >= by)
            return 0.0;
        size_t evals = 0;
        return detail::tensor_gauss_2d(
            [&](double x1, double x2) { return coincidence_probability(x1, x2, delta_um); }, ax,
            bx, ay, by, order, evals);
    }

    /// Total coincidence probability split into the delay-independent part
    /// and the interference coefficient: P(delta) = base + eta(delta) * cross.
    struct TotalTerms {
        double base = 0.0;  // sum of psi_+^2 + psi_-^2
        double cross = 0.0; // sum of 2 psi_+ psi_-
    };

    TotalTerms total_terms() const {
        // psi_+^2 + psi_-^2  = 2 N^2 G^2 (1 + kappa^2 s^2)
        // 2 psi_+ psi_-      = -2 N^2 G^2 (1 - kappa^2 s^2)
        const int n = p_.pixel_count();
        const double kappa2 = 2.0 / (sigma_ * sigma_);
        TotalTerms total;
        for (int i = 0; i < n; ++i) {
            auto [ax, bx] = pixel_interval(i);
            if (ax >= bx)
                continue;
            for (int j = 0; j < n; ++j) {
                auto [ay, by] = pixel_interval(j);
                if (ay >= by)
                    continue;
                double s_center = 0.5 * (ax + bx) + 0.5 * (ay + by);
                double reach = (bx - ax) + (by - ay);
                if (std::abs(s_center) - reach > 12.0 * sigma_)
                    continue; // beyond correlation support
                double m_center = 0.5 * (ax + bx) - 0.5 * (ay + by);
                if (std::abs(m_center) - reach > 14.0 * sigma_m_)
                    continue; // beyond illumination envelope
                auto uw = integrate_pair(ax, bx, ay, by, kappa2);
                total.base += 2.0 * norm_ * norm_ * (uw[0] + uw[1]);
                total.cross += -2.0 * norm_ * norm_ * (uw[0] - uw[1]);
            }
        }
        return total;
    }

    double total_coincidence(double delta_um, const TotalTerms& t) const {
        double eta = std::exp(-delta_um * delta_um / (2.0 * p_.dip_width_um * p_.dip_width_um));
        return t.base + eta * t.cross;
    }

    /// Dip visibility |(P(inf) - P(0)) / (P(inf) + P(0))|; the far-delay
    /// baseline is evaluated at 20 dip widths where the interference term is
    /// below e^-200.
    double visibility() const {
        TotalTerms t = total_terms();
        double p_far = total_coincidence(20.0 * p_.dip_width_um, t);
        double p_zero = total_coincidence(0.0, t);
        if (p_far + p_zero <= 0.0)
            throw numeric_error("theory: vanishing total coincidence probability");
        return std::abs((p_far - p_zero) / (p_far + p_zero));
    }

private:
    void check_pixel(int i) const {
        if (i < 0 || i >= p_.pixel_count())
            throw std::out_of_range("theory: pixel index " + std::to_string(i) +
                                    " outside array of " + std::to_string(p_.pixel_count()));
    }

    /// Adaptive integral of (G^2, G^2 kappa^2 s^2) over a pixel-pair
    /// rectangle; the two components share quadrature points.
    std::array<double, 2> integrate_pair(double ax, double bx, double ay, double by,
                                         double kappa2) const {
        struct Cell {
            double ax, bx, ay, by;
            int depth;
        };
        auto g2 = [&](double x1, double x2) {
            double s = x1 + x2;
            double m = x1 - x2;
            return std::exp(-s * s / (sigma_ * sigma_)) *
                   std::exp(-m * m / (2.0 * sigma_m_ * sigma_m_));
        };
        auto eval = [&](double cax, double cbx, double cay, double cby,
                        int order) -> std::array<double, 2> {
            const auto& rule = GaussRule::of_order(order);
            const double cx = 0.5 * (cax + cbx), mx = 0.5 * (cbx - cax);
            const double cy = 0.5 * (cay + cby), my = 0.5 * (cby - cay);
            std::array<double, 2> sum{0.0, 0.0};
            for (int i = 0; i < order; ++i) {
                double x1 = cx + mx * rule.nodes[i];
                std::array<double, 2> row{0.0, 0.0};
                for (int j = 0; j < order; ++j) {
                    double x2 = cy + my * rule.nodes[j];
                    double v = g2(x1, x2);
                    double s = x1 + x2;
                    row[0] += rule.weights[j] * v;
                    row[1] += rule.weights[j] * v * kappa2 * s * s;
                }
                sum[0] += rule.weights[i] * row[0];
                sum[1] += rule.weights[i] * row[1];
            }
            return {sum[0] * mx * my, sum[1] * mx * my};
        };

        std::vector<Cell> stack{{ax, bx, ay, by, 0}};
        std::array<double, 2> out{0.0, 0.0};
        std::array<double, 2> scale{0.0, 0.0};
        int cells = 0;
        while (!stack.empty()) {
            Cell c = stack.back();
            stack.pop_back();
            if (++cells > 20000)
                throw numeric_error("theory: quadrature cell budget exhausted");
            auto coarse = eval(c.ax, c.bx, c.ay, c.by, 12);
            auto fine = eval(c.ax, c.bx, c.ay, c.by, 24);
            bool ok = true;
            for (int k = 0; k < 2; ++k) {
                scale[k] = std::max(scale[k], std::abs(fine[k]));
                double err = std::abs(fine[k] - coarse[k]);
                if (err > 1e-9 * std::max(std::abs(fine[k]), scale[k]) + 1e-300)
                    ok = false;
            }
            if (ok || c.depth >= 12) {
                if (!ok)
                    throw numeric_error("theory: quadrature tolerance not reached");
                out[0] += fine[0];
                out[1] += fine[1];
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

    double normalisation() const {
        // integral of psi^2 separates in (s, m); Jacobian dx1 dx2 = ds dm / 2
        double kappa = std::sqrt(2.0) / sigma_;
        double is = integrate_1d(
            [&](double s) {
                double b = 1.0 + kappa * s;
                return std::exp(-s * s / (sigma_ * sigma_)) * b * b;
            },
            -12.0 * sigma_, 12.0 * sigma_, 96);
        double im = integrate_1d(
            [&](double m) { return std::exp(-m * m / (2.0 * sigma_m_ * sigma_m_)); },
            -12.0 * sigma_m_, 12.0 * sigma_m_, 96);
        double total = 0.5 * is * im; // = integral of (psi_+/N)^2
        return std::sqrt(0.5 / total);
    }

    TheoryParams p_;
    double sigma_;
    double sigma_m_;
    double norm_;
};

// Free-function forms of the model operations.

inline double psi_pm(double x1_um, double x2_um, ModeSign sign, const TheoryParams& p) {
    return TheoryModel(p).psi(x1_um, x2_um, sign);
}

inline double coincidence_probability(double x1_um, double x2_um, double delta_um,
                                      const TheoryParams& p) {
    return TheoryModel(p).coincidence_probability(x1_um, x2_um, delta_um);
}

inline double pixel_pair_probability(int i, int j, double delta_um, const TheoryParams& p) {
    return TheoryModel(p).pixel_pair_probability(i, j, delta_um);
}

struct VisibilityPoint {
    double pixel_ratio;     // R
    double visibility;      // V
    double focal_length_mm; // f0 on the experimental axis, R = (f0/300)^2
    double sigma_corr_um;
};

/// Sweep the correlation width at constant illumination area (w/beta fixed)
/// and evaluate the dip visibility at each requested R. The focal-length
/// column uses the experimental mapping R = (f0 / 300 mm)^2, anchored where
/// the correlation FWHM equals the pixel pitch.
inline std::vector<VisibilityPoint> visibility_curve(const TheoryParams& base,
                                                     const std::vector<double>& pixel_ratios) {
    base.validate();
    const double w_over_beta = base.pump_width_mm / base.diffraction_scale;
    const double kp_um = base.pump_wavenumber_rad_per_um();
    const double lc_um = base.crystal_length_mm * 1000.0;
    std::vector<VisibilityPoint> out;
    out.reserve(pixel_ratios.size());
    for (double r : pixel_ratios) {
        if (r <= 0.0)
            throw config_error("visibility_curve: R values must be positive");
        TheoryParams p = base;
        double sigma = base.pixel_size_um / (fwhm_from_sigma(1.0) * r);
        p.diffraction_scale = std::sqrt(lc_um / kp_um) / sigma;
        p.pump_width_mm = w_over_beta * p.diffraction_scale;
        TheoryModel model(p);
        out.push_back({r, model.visibility(), 300.0 * std::sqrt(r), model.sigma_corr_um()});
    }
    return out;
}

} // namespace homsim

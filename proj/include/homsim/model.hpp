#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "homsim/common.hpp"
#include "homsim/grid.hpp"

namespace homsim {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// FWHM of a Gaussian with standard deviation sigma.
inline double fwhm_from_sigma(double sigma) { return 2.0 * std::sqrt(2.0 * std::log(2.0)) * sigma; }
inline double sigma_from_fwhm(double fwhm) { return fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0))); }

/// SPAD camera geometry and detection parameters. The sensor is two equal
/// halves side by side along the width; each half images one output port of
/// the interferometer.
struct CameraModel {
    int width_px = 64;
    int height_px = 32;
    double pixel_pitch_um = 150.0;
    double fill_factor = 0.78;
    double quantum_efficiency = 0.09;
    double dark_count_rate_cps = 0.14; // counts per pixel per second
    double exposure_s = 10e-6;         // per frame
    double frame_rate_fps = 96000.0;

    int half_width_px() const { return width_px / 2; }
    double dark_click_probability() const { return dark_count_rate_cps * exposure_s; }

    void validate() const {
        if (width_px <= 0 || height_px <= 0)
            throw config_error("camera: dimensions must be positive");
        if (width_px % 2 != 0)
            throw config_error("camera: width_px must be even (two sensor halves)");
        if (pixel_pitch_um <= 0.0)
            throw config_error("camera: pixel_pitch_um must be positive");
        if (!(fill_factor > 0.0 && fill_factor <= 1.0))
            throw config_error("camera: fill_factor must be in (0, 1]");
        if (!(quantum_efficiency > 0.0 && quantum_efficiency <= 1.0))
            throw config_error("camera: quantum_efficiency must be in (0, 1]");
        if (dark_count_rate_cps < 0.0)
            throw config_error("camera: dark_count_rate_cps must be >= 0");
        if (exposure_s <= 0.0 || frame_rate_fps <= 0.0)
            throw config_error("camera: exposure_s and frame_rate_fps must be positive");
        if (exposure_s * frame_rate_fps > 1.0 + 1e-12)
            throw config_error("camera: exposure_s * frame_rate_fps must not exceed 1");
        if (dark_click_probability() >= 1.0)
            throw config_error("camera: dark click probability per frame must be < 1");
    }

    /// 32x64 SPC3 with the detection figures quoted alongside the camera
    /// specification (78% fill, 9% QE).
    static CameraModel spc3_methods() { return CameraModel{}; }

    /// Same sensor with the nominal figures (80% fill, 6% QE).
    static CameraModel spc3_nominal() {
        CameraModel c;
        c.fill_factor = 0.80;
        c.quantum_efficiency = 0.06;
        return c;
    }
};

/// Effective loss rate of a SPAD pixel: 1 - fill_factor * quantum_efficiency.
inline double loss_rate(const CameraModel& camera) {
    return 1.0 - camera.fill_factor * camera.quantum_efficiency;
}

enum class EnvelopeShape { Gaussian, Flat };

/// Photon-pair source and interferometer parameters.
///
/// correlation_width_um is the Gaussian sigma of the two-photon correlation;
/// the transverse offset between the photons of a pair has this standard
/// deviation per axis (FWHM = 2*sqrt(2 ln 2) * sigma). It can be derived from
/// the crystal optics as sqrt(L_c / (beta^2 k_p)).
struct SourceModel {
    double pump_wavelength_nm = 347.0;
    double crystal_length_mm = 0.5;
    double diffraction_scale = 0.0; // beta; 0 = unset, correlation width given directly
    double correlation_width_um = 63.69; // sigma_corr; default puts FWHM at one 150 um pixel
    double dip_width_um = 20.0;          // Sigma, Gaussian delay half-width of the dip
    double pair_rate_per_frame = 7.0;
    double intrinsic_visibility = 0.95;

    // Illumination envelope on one sensor half. Not fixed by the physics
    // inputs above; free configuration.
    EnvelopeShape envelope_shape = EnvelopeShape::Gaussian;
    double envelope_sigma_um = 1200.0;

    // Optional transverse-mode distinguishability scale: pairs whose photons
    // separate by |offset| interfere with visibility reduced by
    // exp(-|offset|^2 / (2 w^2)). 0 disables the effect (offset-independent
    // branching).
    double distinguishability_width_um = 0.0;

    double pump_wavenumber_rad_per_um() const { return kTwoPi * 1000.0 / pump_wavelength_nm; }

    /// sigma_corr in um from (L_c, beta, k_p).
    static double correlation_width_from_optics_um(double crystal_length_mm, double beta,
                                                   double pump_wavelength_nm) {
        double lc_um = crystal_length_mm * 1000.0;
        double kp = kTwoPi * 1000.0 / pump_wavelength_nm;
        return std::sqrt(lc_um / (beta * beta * kp));
    }

    static SourceModel from_optics(double pump_wavelength_nm, double crystal_length_mm,
                                   double beta) {
        SourceModel s;
        s.pump_wavelength_nm = pump_wavelength_nm;
        s.crystal_length_mm = crystal_length_mm;
        s.diffraction_scale = beta;
        s.correlation_width_um =
            correlation_width_from_optics_um(crystal_length_mm, beta, pump_wavelength_nm);
        return s;
    }

    void validate() const {
        if (pump_wavelength_nm <= 0.0)
            throw config_error("source: pump_wavelength_nm must be positive");
        if (correlation_width_um < 0.0)
            throw config_error("source: correlation_width_um must be >= 0");
        if (dip_width_um <= 0.0)
            throw config_error("source: dip_width_um must be positive");
        if (pair_rate_per_frame < 0.0)
            throw config_error("source: pair_rate_per_frame must be >= 0");
        if (!(intrinsic_visibility >= 0.0 && intrinsic_visibility <= 1.0))
            throw config_error("source: intrinsic_visibility must be in [0, 1]");
        if (envelope_sigma_um <= 0.0)
            throw config_error("source: envelope_sigma_um must be positive");
        if (distinguishability_width_um < 0.0)
            throw config_error("source: distinguishability_width_um must be >= 0");
        if (diffraction_scale > 0.0 && crystal_length_mm > 0.0) {
            double derived = correlation_width_from_optics_um(crystal_length_mm,
                                                              diffraction_scale,
                                                              pump_wavelength_nm);
            if (std::abs(derived - correlation_width_um) >
                1e-9 * std::max(std::abs(derived), std::abs(correlation_width_um)))
                throw config_error(
                    "source: correlation_width_um inconsistent with crystal optics "
                    "(expected " + std::to_string(derived) + " um)");
        }
    }
};

/// Transparent sample plus the global interferometer delay.
///
/// depth_map stores group-delay-equivalent optical thickness in um (already
/// multiplied by n_g - 1); visibility_map models local distinguishability loss
/// (e.g. edge diffraction). Both grids cover one camera half, optionally at a
/// finer resolution: supersample k means the grids are k*(W/2) x k*H and a
/// photon at continuous half coordinate (x, y) px reads cell
/// (floor((x+0.5)k), floor((y+0.5)k)).
struct SceneModel {
    Grid<double> depth_map_um;
    std::optional<Grid<double>> visibility_map;
    double stage_delay_um = 0.0;
    int supersample = 1;

    static SceneModel flat(int half_width_px, int height_px, double depth_um = 0.0) {
        SceneModel s;
        s.depth_map_um = Grid<double>(half_width_px, height_px, depth_um);
        return s;
    }

    void validate(const CameraModel& camera) const {
        if (supersample < 1)
            throw config_error("scene: supersample must be >= 1");
        if (depth_map_um.empty())
            throw config_error("scene: depth_map is required");
        int ew = camera.half_width_px() * supersample;
        int eh = camera.height_px * supersample;
        if (depth_map_um.width() != ew || depth_map_um.height() != eh)
            throw config_error("scene: depth_map must be " + std::to_string(ew) + "x" +
                               std::to_string(eh) + " (half sensor x supersample), got " +
                               std::to_string(depth_map_um.width()) + "x" +
                               std::to_string(depth_map_um.height()));
        if (visibility_map) {
            if (visibility_map->width() != ew || visibility_map->height() != eh)
                throw config_error("scene: visibility_map dimensions must match depth_map");
            for (double v : visibility_map->data())
                if (!(v >= 0.0 && v <= 1.0))
                    throw config_error("scene: visibility_map entries must be in [0, 1]");
        }
    }

    /// Fine-grid cell index for a continuous half coordinate in pixel units.
    int cell_index(double coord_px, int cells) const {
        int i = static_cast<int>(std::floor((coord_px + 0.5) * supersample));
        return std::clamp(i, 0, cells - 1);
    }

    double depth_at(double x_px, double y_px) const {
        int ix = cell_index(x_px, depth_map_um.width());
        int iy = cell_index(y_px, depth_map_um.height());
        return depth_map_um(ix, iy);
    }

    double visibility_at(double x_px, double y_px) const {
        if (!visibility_map)
            return 1.0;
        int ix = cell_index(x_px, visibility_map->width());
        int iy = cell_index(y_px, visibility_map->height());
        return (*visibility_map)(ix, iy);
    }
};

/// Local interferometer delay seen by a pair whose signal photon crosses the
/// sample at the given scene cell. Thicker sample shifts the local dip centre
/// toward larger stage delay.
inline double effective_delay(const SceneModel& scene, int scene_x, int scene_y) {
    return scene.stage_delay_um - scene.depth_map_um.at(scene_x, scene_y);
}

/// Delay-stage scan: ordered stage positions plus the per-position frame
/// budget and the master seed.
struct ScanPlan {
    std::vector<double> delays_um;
    uint64_t frames_per_delay = 0;
    uint64_t seed = 0;

    void validate() const {
        if (frames_per_delay == 0)
            throw config_error("scan: frames_per_delay must be positive");
        for (size_t i = 1; i < delays_um.size(); ++i) {
            double d = delays_um[i] - delays_um[i - 1];
            double d0 = delays_um[1] - delays_um[0];
            if (d == 0.0 || (d > 0) != (d0 > 0))
                throw config_error("scan: delays must be strictly monotonic");
        }
    }
};

} // namespace homsim

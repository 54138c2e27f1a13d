#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "homsim/common.hpp"
#include "homsim/frame.hpp"
#include "homsim/model.hpp"
#include "homsim/rng.hpp"

namespace homsim {

enum class Branch { Bunched, AntiBunched };

/// Probability that a pair with effective delay `delta_um` exits opposite
/// beam-splitter ports: (1 - V_eff * exp(-delta^2 / (2 Sigma^2))) / 2.
inline double antibunch_probability(double delta_um, double dip_width_um, double v_eff) {
    double g = std::exp(-(delta_um * delta_um) / (2.0 * dip_width_um * dip_width_um));
    return 0.5 * (1.0 - v_eff * g);
}

/// Sample the beam-splitter branch for one pair. local_visibility multiplies
/// the source's intrinsic visibility (per-pixel distinguishability loss).
inline Branch branch_hom(double delta_um, const SourceModel& source, double local_visibility,
                         Rng& rng) {
    double p = antibunch_probability(delta_um, source.dip_width_um,
                                     source.intrinsic_visibility * local_visibility);
    return rng.next_double() < p ? Branch::AntiBunched : Branch::Bunched;
}

/// Continuous positions of the two photons of a pair, in half-sensor pixel
/// units. The pair centre follows the illumination envelope; the transverse
/// offset between the photons is Gaussian with per-axis standard deviation
/// equal to the correlation width.
struct PairPositions {
    double signal_x, signal_y; // signal = sample-arm photon
    double idler_x, idler_y;
    double offset_x, offset_y; // signal - idler
};

inline PairPositions sample_pair_positions_continuous(const SourceModel& source,
                                                      const CameraModel& camera, Rng& rng) {
    const double hw = camera.half_width_px();
    const double h = camera.height_px;
    double cx, cy;
    if (source.envelope_shape == EnvelopeShape::Flat) {
        cx = rng.next_double() * hw - 0.5;
        cy = rng.next_double() * h - 0.5;
    } else {
        double s = source.envelope_sigma_um / camera.pixel_pitch_um;
        cx = 0.5 * (hw - 1.0) + s * rng.next_gauss();
        cy = 0.5 * (h - 1.0) + s * rng.next_gauss();
    }
    double s_off = source.correlation_width_um / camera.pixel_pitch_um;
    PairPositions p;
    p.offset_x = s_off * rng.next_gauss();
    p.offset_y = s_off * rng.next_gauss();
    p.signal_x = cx + 0.5 * p.offset_x;
    p.signal_y = cy + 0.5 * p.offset_y;
    p.idler_x = cx - 0.5 * p.offset_x;
    p.idler_y = cy - 0.5 * p.offset_y;
    return p;
}

/// Pair positions quantised to the half-sensor pixel grid. Indices may fall
/// outside [0, W/2) x [0, H); such photons are lost at detection.
inline std::pair<std::pair<int, int>, std::pair<int, int>>
sample_pair_positions(const SourceModel& source, const CameraModel& camera, Rng& rng) {
    PairPositions p = sample_pair_positions_continuous(source, camera, rng);
    auto q = [](double v) { return static_cast<int>(std::lround(v)); };
    return {{q(p.signal_x), q(p.signal_y)}, {q(p.idler_x), q(p.idler_y)}};
}

/// Simulation knobs that are not part of the physical model.
struct SimOptions {
    // Camera raster offset in pixel units (the sample stays put).
    double camera_shift_x_px = 0.0;
    double camera_shift_y_px = 0.0;
    // Force every pair onto one branch; test/diagnostic hook.
    enum class ForceBranch { None, Bunched, AntiBunched } force_branch = ForceBranch::None;
};

namespace detail {

/// Place one photon on the raw (pre-rotation) sensor. half_b selects the
/// right half. The pixel aperture is modelled geometrically: the active area
/// is a centred box of side sqrt(fill_factor), so a uniformly placed photon
/// is kept with probability fill_factor * quantum_efficiency overall.
inline void detect_photon(BinaryFrame& frame, const CameraModel& camera, bool half_b,
                          double x_px, double y_px, const SimOptions& opts, Rng& rng) {
    double dx = x_px - opts.camera_shift_x_px;
    double dy = y_px - opts.camera_shift_y_px;
    double fx = std::floor(dx + 0.5);
    double fy = std::floor(dy + 0.5);
    int px = static_cast<int>(fx);
    int py = static_cast<int>(fy);
    if (px < 0 || px >= camera.half_width_px() || py < 0 || py >= camera.height_px)
        return; // off sensor
    double half_active = 0.5 * std::sqrt(camera.fill_factor);
    if (std::abs(dx - fx) > half_active || std::abs(dy - fy) > half_active)
        return; // dead zone between active areas
    if (rng.next_double() >= camera.quantum_efficiency)
        return;
    frame.set(half_b ? camera.half_width_px() + px : px, py);
}

} // namespace detail

/// Synthesise one raw camera frame: Poisson pair count, correlated positions,
/// beam-splitter branching against the local sample delay, geometric and
/// electronic detection loss, and uniform dark clicks. Multiple photons on a
/// pixel still give one click.
inline BinaryFrame synthesize_frame(const SceneModel& scene, const SourceModel& source,
                                    const CameraModel& camera, Rng& rng,
                                    const SimOptions& opts = {}) {
    BinaryFrame frame(camera.width_px, camera.height_px);
    uint64_t n_pairs = rng.next_poisson(source.pair_rate_per_frame);
    for (uint64_t n = 0; n < n_pairs; ++n) {
        PairPositions pos = sample_pair_positions_continuous(source, camera, rng);
        double delta = scene.stage_delay_um - scene.depth_at(pos.signal_x, pos.signal_y);
        double local_v = scene.visibility_at(pos.signal_x, pos.signal_y);
        if (source.distinguishability_width_um > 0.0) {
            double r2 = pos.offset_x * pos.offset_x + pos.offset_y * pos.offset_y;
            double w_px = source.distinguishability_width_um / camera.pixel_pitch_um;
            local_v *= std::exp(-r2 / (2.0 * w_px * w_px));
        }
        Branch br;
        switch (opts.force_branch) {
        case SimOptions::ForceBranch::Bunched:
            br = Branch::Bunched;
            break;
        case SimOptions::ForceBranch::AntiBunched:
            br = Branch::AntiBunched;
            break;
        default:
            br = branch_hom(delta, source, local_v, rng);
        }
        if (br == Branch::AntiBunched) {
            bool signal_to_b = rng.next_bool();
            detail::detect_photon(frame, camera, signal_to_b, pos.signal_x, pos.signal_y, opts,
                                  rng);
            detail::detect_photon(frame, camera, !signal_to_b, pos.idler_x, pos.idler_y, opts,
                                  rng);
        } else {
            bool half_b = rng.next_bool();
            detail::detect_photon(frame, camera, half_b, pos.signal_x, pos.signal_y, opts, rng);
            detail::detect_photon(frame, camera, half_b, pos.idler_x, pos.idler_y, opts, rng);
        }
    }
    double p_dark = camera.dark_click_probability();
    if (p_dark > 0.0) {
        uint64_t n_px = static_cast<uint64_t>(camera.width_px) * camera.height_px;
        uint64_t i = rng.next_geometric_gap(p_dark);
        while (i < n_px) {
            frame.set_index(static_cast<uint32_t>(i));
            i += 1 + rng.next_geometric_gap(p_dark);
        }
    }
    return frame;
}

/// Deterministic delay scan. Frame randomness derives from
/// (seed, delay index, frame index) only, so any evaluation order or thread
/// schedule produces identical frames.
inline void run_scan_streaming(
    const ScanPlan& plan, SceneModel scene, const SourceModel& source,
    const CameraModel& camera,
    const std::function<void(size_t delay_index, uint64_t frame_index, const BinaryFrame&)>& sink,
    const SimOptions& opts = {}) {
    plan.validate();
    camera.validate();
    source.validate();
    scene.validate(camera);
    for (size_t d = 0; d < plan.delays_um.size(); ++d) {
        scene.stage_delay_um = plan.delays_um[d];
        for (uint64_t f = 0; f < plan.frames_per_delay; ++f) {
            Rng rng = Rng::for_frame(plan.seed, d, f);
            sink(d, f, synthesize_frame(scene, source, camera, rng, opts));
        }
    }
}

inline std::vector<FrameStream> run_scan(const ScanPlan& plan, const SceneModel& scene,
                                         const SourceModel& source, const CameraModel& camera,
                                         const SimOptions& opts = {}) {
    std::vector<FrameStream> streams(plan.delays_um.size());
    for (size_t d = 0; d < plan.delays_um.size(); ++d) {
        streams[d].header = FrameStreamHeader{static_cast<uint16_t>(camera.width_px),
                                              static_cast<uint16_t>(camera.height_px),
                                              plan.frames_per_delay, plan.seed,
                                              plan.delays_um[d]};
        streams[d].frames.reserve(plan.frames_per_delay);
    }
    run_scan_streaming(
        plan, scene, source, camera,
        [&](size_t d, uint64_t, const BinaryFrame& f) { streams[d].frames.push_back(f); }, opts);
    return streams;
}

} // namespace homsim

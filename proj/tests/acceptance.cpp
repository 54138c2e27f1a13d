// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// hard criterion fails. Criterion 9 (throughput) downgrades to a warning.
//
// Everything is seeded; reruns are bit-identical.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "homsim/analysis.hpp"
#include "homsim/cli.hpp"
#include "homsim/fit.hpp"
#include "homsim/frame.hpp"
#include "homsim/io.hpp"
#include "homsim/jpd.hpp"
#include "homsim/model.hpp"
#include "homsim/simulate.hpp"
#include "homsim/theory.hpp"

#include "helpers.hpp"
#include "oracle.hpp"

using namespace homsim;

namespace {

uint64_t g_frame_scale = 1; // divisor for --quick development runs

struct Result {
    bool pass = false;
    bool warn_only = false;
    std::string detail;
};

double now_s() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// shared simulation drivers
// ---------------------------------------------------------------------------

CameraModel camera_16x32_lossy() {
    CameraModel cam;
    cam.width_px = 32;
    cam.height_px = 32; // two 16x32 halves
    cam.pixel_pitch_um = 150.0;
    cam.fill_factor = 0.78;
    cam.quantum_efficiency = 0.09;
    cam.dark_count_rate_cps = 0.14;
    cam.exposure_s = 10e-6;
    cam.frame_rate_fps = 60000.0;
    return cam;
}

CameraModel camera_32x32_lossy() {
    CameraModel cam = camera_16x32_lossy();
    cam.width_px = 64; // two 32x32 halves
    return cam;
}

CoincidenceTensor accumulate_run(const SceneModel& scene, const SourceModel& source,
                                 const CameraModel& camera, uint64_t n_frames, uint64_t seed,
                                 uint64_t delay_index, const SimOptions& opts = {}) {
    RotatingAccumulator acc(camera.width_px, camera.height_px);
    for (uint64_t f = 0; f < n_frames; ++f) {
        Rng rng = Rng::for_frame(seed, delay_index, f);
        acc.add(synthesize_frame(scene, source, camera, rng, opts));
    }
    return acc.take();
}

struct ScanScalars {
    std::vector<ScanPoint> anti, adjacent, peak;
};

ScanScalars scan_scalars(const std::vector<double>& delays, const SceneModel& base_scene,
                         const SourceModel& source, const CameraModel& camera,
                         uint64_t frames_per_delay, uint64_t seed) {
    ScanScalars out;
    for (size_t d = 0; d < delays.size(); ++d) {
        SceneModel scene = base_scene;
        scene.stage_delay_um = delays[d];
        CoincidenceTensor t = accumulate_run(scene, source, camera, frames_per_delay, seed, d);
        Image anti = antibunch_map(t, 1);
        Image adj = bunch_map_adjacent(t);
        double s_anti = std::accumulate(anti.data().begin(), anti.data().end(), 0.0);
        double s_adj = std::accumulate(adj.data().begin(), adj.data().end(), 0.0);
        out.anti.push_back({delays[d], s_anti});
        out.adjacent.push_back({delays[d], s_adj});
        Projection minus = project(t, ProjectionKind::Minus);
        double amp = fit_bunch_peak(minus, 8).amplitude * static_cast<double>(t.n_frames());
        out.peak.push_back({delays[d], amp});
    }
    return out;
}

/// Mean per-pixel anti-bunch counts over the half, per delay; used to
/// calibrate a global dip for depth inversion.
std::vector<ScanPoint> reference_dip_scan(const std::vector<double>& delays,
                                          const SceneModel& flat_scene,
                                          const SourceModel& source, const CameraModel& camera,
                                          uint64_t frames_per_delay, uint64_t seed) {
    std::vector<ScanPoint> out;
    for (size_t d = 0; d < delays.size(); ++d) {
        SceneModel scene = flat_scene;
        scene.stage_delay_um = delays[d];
        CoincidenceTensor t = accumulate_run(scene, source, camera, frames_per_delay, seed, d);
        Image anti = antibunch_map(t, 1);
        double mean = std::accumulate(anti.data().begin(), anti.data().end(), 0.0) /
                      static_cast<double>(anti.size());
        out.push_back({delays[d], mean});
    }
    return out;
}

Mask erode(const Mask& m) {
    Mask out(m.width(), m.height(), 0);
    for (int y = 1; y < m.height() - 1; ++y)
        for (int x = 1; x < m.width() - 1; ++x)
            out(x, y) = m(x, y) && m(x - 1, y) && m(x + 1, y) && m(x, y - 1) && m(x, y + 1);
    return out;
}

// ---------------------------------------------------------------------------
// criterion 1: the factorised accumulator against the literal estimator
// ---------------------------------------------------------------------------

Result criterion_1() {
    double t0 = now_s();
    CameraModel cam;
    cam.width_px = 8;
    cam.height_px = 8;
    cam.pixel_pitch_um = 150.0;
    cam.fill_factor = 0.9;
    cam.quantum_efficiency = 0.8;
    cam.dark_count_rate_cps = 2000.0; // visible dark fraction at 10 us
    cam.exposure_s = 10e-6;
    cam.frame_rate_fps = 60000.0;
    SourceModel src;
    src.pair_rate_per_frame = 2.0;
    src.correlation_width_um = 150.0;
    src.envelope_sigma_um = 450.0;
    SceneModel scene = SceneModel::flat(4, 8, 0.0);
    scene.stage_delay_um = 6.0;

    double worst = 0.0;
    for (uint64_t stream = 0; stream < 20; ++stream) {
        std::vector<BinaryFrame> frames;
        CoincidenceTensor t(8, 8);
        std::vector<uint32_t> scratch;
        for (uint64_t f = 0; f < 1000; ++f) {
            Rng rng = Rng::for_frame(1000 + stream, 0, f);
            BinaryFrame frame = transform_halves(synthesize_frame(scene, src, cam, rng));
            t.add_frame(frame, scratch);
            frames.push_back(std::move(frame));
        }
        oracle::DenseGamma g = oracle::literal_eq1(frames);
        for (size_t a = 0; a < t.pixel_count(); ++a)
            for (size_t b = 0; b < t.pixel_count(); ++b)
                worst = std::max(worst, std::abs(t.gamma(a, b) - g.at(a, b)));
    }
    double dt = now_s() - t0;
    Result r;
    r.pass = worst <= 1e-12 && dt < 10.0;
    r.detail = fmt("max |factorised - literal| = %.3g (limit 1e-12), %.1f s (limit 10 s)",
                   worst, dt);
    return r;
}

// ---------------------------------------------------------------------------
// criterion 2: chunked determinism
// ---------------------------------------------------------------------------

Result criterion_2() {
    double t0 = now_s();
    testutil::TempDir tmp("acc2");
    CameraModel cam = CameraModel::spc3_methods(); // 64 x 32
    SourceModel src;
    src.pair_rate_per_frame = 7.0;
    src.correlation_width_um = 90.0;
    src.envelope_sigma_um = 900.0;
    SceneModel scene = SceneModel::flat(32, 32, 0.0);
    scene.stage_delay_um = 8.0;

    const uint64_t n = 100000 / g_frame_scale;
    std::string path = tmp.file("s.homf");
    {
        HomfWriter w(path, {64, 32, n, 2, 8.0});
        for (uint64_t f = 0; f < n; ++f) {
            Rng rng = Rng::for_frame(2, 0, f);
            w.write(synthesize_frame(scene, src, cam, rng));
        }
        w.close();
    }
    CoincidenceTensor single = accumulate_file(path, 1);
    CoincidenceTensor four = accumulate_file(path, 4);
    CoincidenceTensor sixteen = accumulate_file(path, 16);

    // shuffled merge order over 16 hand-cut chunks
    std::vector<CoincidenceTensor> chunks;
    for (int k = 0; k < 16; ++k) {
        HomfReader reader(path);
        uint64_t begin = n * k / 16, end = n * (k + 1) / 16;
        reader.seek(begin);
        RotatingAccumulator acc(64, 32);
        BinaryFrame f;
        for (uint64_t i = begin; i < end; ++i) {
            reader.next(f);
            acc.add(f);
        }
        chunks.push_back(acc.take());
    }
    std::vector<int> order{11, 3, 14, 0, 7, 9, 1, 15, 5, 12, 2, 8, 13, 4, 10, 6};
    CoincidenceTensor shuffled(64, 32);
    for (int k : order)
        shuffled = merge(shuffled, chunks[k]);

    double dt = now_s() - t0;
    bool equal = four == single && sixteen == single && shuffled == single;
    Result r;
    r.pass = equal && dt < 30.0;
    r.detail = fmt("%llu frames: 4-chunk %s, 16-chunk %s, shuffled-merge %s, %.1f s (limit 30 s)",
                   static_cast<unsigned long long>(n), four == single ? "identical" : "DIFFERS",
                   sixteen == single ? "identical" : "DIFFERS",
                   shuffled == single ? "identical" : "DIFFERS", dt);
    return r;
}

// ---------------------------------------------------------------------------
// criterion 3: visibility reproduction and estimator ordering
// ---------------------------------------------------------------------------

Result criterion_3() {
    SourceModel src;
    src.pair_rate_per_frame = 7.0;
    src.correlation_width_um = 90.0;
    src.dip_width_um = 20.0;
    src.intrinsic_visibility = 0.95;
    src.envelope_sigma_um = 600.0;
    src.distinguishability_width_um = 135.0; // adjacent pixels see other modes

    std::vector<double> delays;
    for (int i = 0; i < 21; ++i)
        delays.push_back(-40.0 + 4.0 * i);
    const uint64_t frames = 2'000'000 / g_frame_scale;
    SceneModel flat = SceneModel::flat(16, 32, 0.0);

    CameraModel lossy = camera_16x32_lossy();
    ScanScalars s_lossy = scan_scalars(delays, flat, src, lossy, frames, 3);

    CameraModel lossless = lossy;
    lossless.fill_factor = 1.0;
    lossless.quantum_efficiency = 1.0;
    lossless.dark_count_rate_cps = 0.0;
    ScanScalars s_lossless = scan_scalars(delays, flat, src, lossless, frames, 3);

    ScanCurveFit anti_lossy = fit_scan_curve(s_lossy.anti, CurveSense::Dip);
    ScanCurveFit anti_lossless = fit_scan_curve(s_lossless.anti, CurveSense::Dip);
    ScanCurveFit adj_lossy = fit_scan_curve(s_lossy.adjacent, CurveSense::Peak);
    ScanCurveFit peak_lossy = fit_scan_curve(s_lossy.peak, CurveSense::Peak);

    double v_anti = anti_lossy.visibility();
    double v_anti_ll = anti_lossless.visibility();
    double v_adj = adj_lossy.visibility();
    double v_peak = peak_lossy.visibility();

    bool match = std::abs(v_anti - v_anti_ll) <= 0.05;
    bool order = v_anti > v_peak && v_peak > v_adj;
    Result r;
    r.pass = match && order;
    r.detail = fmt("anti %.3f (lossless %.3f, |diff| %.3f <= 0.05 %s); "
                   "ordering anti %.3f > peak-fit %.3f > adjacent %.3f %s",
                   v_anti, v_anti_ll, std::abs(v_anti - v_anti_ll), match ? "ok" : "FAIL",
                   v_anti, v_peak, v_adj, order ? "ok" : "FAIL");
    return r;
}

// ---------------------------------------------------------------------------
// criterion 4: theory curve shape and quadrature convergence
// ---------------------------------------------------------------------------

Result criterion_4() {
    double t0 = now_s();
    TheoryParams base = TheoryParams::reference_setup();
    std::vector<double> rs;
    for (double x = 0.2; x <= 4.0001; x += 0.1)
        rs.push_back(x);
    auto curve = visibility_curve(base, rs);

    size_t imax = 0;
    for (size_t i = 0; i < curve.size(); ++i)
        if (curve[i].visibility > curve[imax].visibility)
            imax = i;
    double r_at_max = curve[imax].pixel_ratio;
    bool interior = imax > 0 && imax + 1 < curve.size();
    bool in_window = r_at_max >= 0.7 && r_at_max <= 1.5;
    // single interior maximum: monotone rise then fall, within a small
    // numerical tolerance on the flat tails
    bool unimodal = true;
    for (size_t i = 1; i < curve.size(); ++i) {
        if (i <= imax && curve[i].visibility < curve[i - 1].visibility - 0.01)
            unimodal = false;
        if (i > imax && curve[i].visibility > curve[i - 1].visibility + 0.01)
            unimodal = false;
    }

    // quadrature convergence on near-diagonal pixel pairs
    TheoryModel model(base);
    int n = base.pixel_count();
    double worst_rel = 0.0;
    for (int i : {n / 2 - 1, n / 2, n / 2 + 2}) {
        int j = n - 1 - i;
        double lo = model.pixel_pair_probability_fixed(i, j, 5.0, 24);
        double hi = model.pixel_pair_probability_fixed(i, j, 5.0, 48);
        worst_rel = std::max(worst_rel, std::abs(hi - lo) / std::abs(hi));
    }
    double dt = now_s() - t0;
    Result r;
    r.pass = interior && in_window && unimodal && worst_rel < 1e-8 && dt < 60.0;
    r.detail = fmt("argmax R = %.2f (V = %.3f) in [0.7, 1.5] %s, unimodal %s, "
                   "order-doubling rel change %.1e (<1e-8), %.1f s (limit 60 s)",
                   r_at_max, curve[imax].visibility, in_window ? "ok" : "FAIL",
                   unimodal ? "ok" : "FAIL", worst_rel, dt);
    return r;
}

// ---------------------------------------------------------------------------
// criterion 5: depth round trips (etched glyphs and acrylic cross)
// criterion 8 reuses the cross acquisition, so it is cached
// ---------------------------------------------------------------------------

struct CrossRun {
    Image anti_counts;
    Mask outside;
    DipModel dip;
    double operating_delay = 0.0;
};

std::optional<CrossRun> g_cross;

const CrossRun& cross_run() {
    if (g_cross)
        return *g_cross;
    CameraModel cam = camera_32x32_lossy();
    SourceModel src;
    src.pair_rate_per_frame = 7.0;
    src.correlation_width_um = 90.0;
    src.dip_width_um = 20.0;
    src.intrinsic_visibility = 0.95;
    src.envelope_shape = EnvelopeShape::Flat;

    // reference dip from a bare-substrate delay scan (a tenth of the frame
    // budget per point; counts rescale linearly with the frame count)
    std::vector<double> delays;
    for (int i = 0; i < 21; ++i)
        delays.push_back(-40.0 + 4.0 * i);
    const uint64_t ref_frames = 200'000 / g_frame_scale;
    const uint64_t op_frames = 2'000'000 / g_frame_scale;
    SceneModel flat = SceneModel::flat(32, 32, 0.0);
    auto ref = reference_dip_scan(delays, flat, src, cam, ref_frames, 51);
    DipFit fit = fit_dip(ref);
    DipModel dip = fit.model;
    dip.baseline *= static_cast<double>(op_frames) / static_cast<double>(ref_frames);

    SceneModel cross = flat;
    cross.depth_map_um = testutil::cross_depth(32, 32, 12.9, 4);
    cross.stage_delay_um = 24.0;
    CoincidenceTensor t = accumulate_run(cross, src, cam, op_frames, 52, 0);

    CrossRun run;
    run.anti_counts = antibunch_map(t, 1);
    run.outside = testutil::cross_mask(32, 32, false, 4, 2);
    run.dip = dip;
    run.operating_delay = 24.0;
    g_cross = std::move(run);
    return *g_cross;
}

Result criterion_5() {
    // etched glyphs at 8.36 um: narrow dip for slope, tight correlation
    CameraModel cam = camera_32x32_lossy();
    SourceModel src;
    src.pair_rate_per_frame = 7.0;
    src.correlation_width_um = 20.0;
    src.dip_width_um = 10.0;
    src.intrinsic_visibility = 0.95;
    src.envelope_shape = EnvelopeShape::Flat;

    std::vector<double> delays;
    for (int i = 0; i < 21; ++i)
        delays.push_back(-20.0 + 2.0 * i);
    const uint64_t ref_frames = 200'000 / g_frame_scale;
    const uint64_t op_frames = 2'000'000 / g_frame_scale;
    SceneModel flat = SceneModel::flat(32, 32, 0.0);
    auto ref = reference_dip_scan(delays, flat, src, cam, ref_frames, 41);
    DipFit fit = fit_dip(ref);
    DipModel dip = fit.model;
    dip.baseline *= static_cast<double>(op_frames) / static_cast<double>(ref_frames);

    SceneModel glyphs = flat;
    glyphs.depth_map_um = testutil::glyph_depth(32, 32, 8.36);
    glyphs.stage_delay_um = 14.0;
    CoincidenceTensor t = accumulate_run(glyphs, src, cam, op_frames, 42, 0);
    DepthImage depth = invert_depth(antibunch_map(t, 1), dip, 14.0, DipEdge::Rising);

    Mask inside = erode(testutil::mask_where(glyphs.depth_map_um, 8.36));
    double sum = 0.0;
    size_t nv = 0;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            if (inside(x, y) && depth.valid(x, y)) {
                sum += depth.depth_um(x, y);
                ++nv;
            }
    double glyph_mean = sum / std::max<size_t>(nv, 1);
    bool glyph_ok = nv > 20 && std::abs(glyph_mean - 8.36) <= 1.2;

    // acrylic cross at 12.9 um (acquisition shared with criterion 8)
    const CrossRun& cross = cross_run();
    DepthImage cdepth =
        invert_depth(cross.anti_counts, cross.dip, cross.operating_delay, DipEdge::Rising);
    Mask cinside = erode(testutil::cross_mask(32, 32, true, 4, 2));
    double csum = 0.0;
    size_t cnv = 0;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            if (cinside(x, y) && cdepth.valid(x, y)) {
                csum += cdepth.depth_um(x, y);
                ++cnv;
            }
    double cross_mean = csum / std::max<size_t>(cnv, 1);
    bool cross_ok = cnv > 50 && std::abs(cross_mean - 12.9) <= 6.0;

    Result r;
    r.pass = glyph_ok && cross_ok;
    r.detail = fmt("glyphs: mean %.2f um vs 8.36 (|err| %.2f <= 1.2, %zu px) %s; "
                   "cross: mean %.2f um vs 12.9 (|err| %.2f <= 6.0, %zu px) %s",
                   glyph_mean, std::abs(glyph_mean - 8.36), nv, glyph_ok ? "ok" : "FAIL",
                   cross_mean, std::abs(cross_mean - 12.9), cnv, cross_ok ? "ok" : "FAIL");
    return r;
}

// ---------------------------------------------------------------------------
// criterion 6: minimum-variance channel combination
// ---------------------------------------------------------------------------

Result criterion_6() {
    CameraModel cam = camera_16x32_lossy();
    SourceModel src;
    src.pair_rate_per_frame = 25.0;
    src.correlation_width_um = 135.0; // spreads bunching onto adjacent pixels
    src.dip_width_um = 10.0;
    src.intrinsic_visibility = 0.95;
    src.envelope_shape = EnvelopeShape::Flat;

    SceneModel cross = SceneModel::flat(16, 32, 0.0);
    cross.depth_map_um = testutil::cross_depth(16, 32, 12.9, 3);
    cross.stage_delay_um = 13.0; // cross region sits at its dip bottom
    const uint64_t frames = 2'000'000 / g_frame_scale;
    CoincidenceTensor t = accumulate_run(cross, src, cam, frames, 61, 0);
    // the wider correlation peak needs the matching window radius
    Image anti = antibunch_map(t, 2);
    Image bunch = bunch_map_adjacent(t);

    Mask inside = erode(testutil::cross_mask(16, 32, true, 3, 2));
    Mask outside = testutil::cross_mask(16, 32, false, 3, 2);
    CombineResult comb = combine_channels(anti, bunch, {inside, outside});

    MaskedStats va = masked_stats(anti, inside);
    MaskedStats vc = masked_stats(comb.image, inside);
    Image rescaled(bunch.width(), bunch.height(), 0.0);
    for (int y = 0; y < bunch.height(); ++y)
        for (int x = 0; x < bunch.width(); ++x)
            rescaled(x, y) = comb.scale * bunch(x, y) + comb.offset;
    MaskedStats vb = masked_stats(rescaled, inside);

    double reduction = va.variance / vc.variance;
    double better = std::min(va.variance, vb.variance);
    double tol = 5.0 * std::sqrt(2.0 / static_cast<double>(va.n - 1));
    bool not_worse = vc.variance <= better * (1.0 + tol);
    Result r;
    r.pass = reduction >= 1.2 && not_worse;
    r.detail = fmt("cross-region variance: anti %.1f, bunch(rescaled) %.1f, combined %.1f "
                   "(x%.2f reduction, need >= 1.2) %s; <= better channel within 5 sigma %s",
                   va.variance, vb.variance, vc.variance, reduction,
                   reduction >= 1.2 ? "ok" : "FAIL", not_worse ? "ok" : "FAIL");
    return r;
}

// ---------------------------------------------------------------------------
// criterion 7: 2x2 raster super-resolution on a 1-pixel-period bar target
// ---------------------------------------------------------------------------

/// Michelson contrast between the two bar phases: odd versus even column
/// means over a window. A grid that cannot resolve the pattern sees the same
/// value in both classes.
double column_contrast(const Image& img, int x0, int x1, int y0, int y1) {
    double m[2] = {0.0, 0.0};
    int n[2] = {0, 0};
    for (int x = x0; x <= x1; ++x)
        for (int y = y0; y <= y1; ++y) {
            m[x & 1] += img(x, y);
            ++n[x & 1];
        }
    m[0] /= n[0];
    m[1] /= n[1];
    return std::abs(m[1] - m[0]) / (m[0] + m[1]);
}

Result criterion_7() {
    CameraModel cam;
    cam.width_px = 32;
    cam.height_px = 16; // two 16x16 halves
    cam.pixel_pitch_um = 150.0;
    cam.fill_factor = 0.2; // aperture narrower than the bar width
    cam.quantum_efficiency = 0.9;
    cam.dark_count_rate_cps = 0.0;
    cam.exposure_s = 10e-6;
    cam.frame_rate_fps = 60000.0;

    SourceModel src;
    src.pair_rate_per_frame = 1.5; // sparse frames keep accidentals low
    src.correlation_width_um = 15.0; // sharp correlation PSF
    src.dip_width_um = 20.0;
    src.intrinsic_visibility = 1.0;
    src.envelope_shape = EnvelopeShape::Flat;

    // visibility bars with a 1-pixel period: half-pixel stripes alternate
    // between strongly interfering and fully distinguishable. Stripe centres
    // align with the native and half-shifted aperture positions, so the
    // pattern is phased on quarter-pixel cells (supersample 4, fine x mod 4
    // in {1, 2} centres a stripe on each native pixel).
    SceneModel scene;
    scene.supersample = 4;
    scene.depth_map_um = Grid<double>(64, 64, 0.0);
    Grid<double> vmap(64, 64, 1.0);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            vmap(x, y) = (x % 4 == 1 || x % 4 == 2) ? 0.8 : 0.0;
    scene.visibility_map = vmap;
    scene.stage_delay_um = 0.0; // dip bottom: interfering stripes go dim

    const uint64_t frames = 2'000'000 / g_frame_scale;
    auto acquire = [&](double sx, double sy, uint64_t seed) {
        SimOptions opts;
        opts.camera_shift_x_px = sx;
        opts.camera_shift_y_px = sy;
        CoincidenceTensor t = accumulate_run(scene, src, cam, frames, seed, 0, opts);
        return antibunch_map(t, 1);
    };
    Image i00 = acquire(0.0, 0.0, 71);
    Image i10 = acquire(0.5, 0.0, 72);
    Image i01 = acquire(0.0, 0.5, 73);
    Image i11 = acquire(0.5, 0.5, 74);

    Image super = raster_superresolve(i00, i10, i01, i11);
    auto back = raster_decimate(super);
    bool lossless = back[0] == i00 && back[1] == i10 && back[2] == i01 && back[3] == i11;

    // central window, away from the half edges
    double native = column_contrast(i00, 3, 12, 3, 12);
    double resolved = column_contrast(super, 6, 25, 6, 25);
    Result r;
    r.pass = native < 0.1 && resolved > 0.5 && lossless;
    r.detail = fmt("native contrast %.3f (< 0.1 %s), super-resolved %.3f (> 0.5 %s), "
                   "decimation lossless %s",
                   native, native < 0.1 ? "ok" : "FAIL", resolved,
                   resolved > 0.5 ? "ok" : "FAIL", lossless ? "ok" : "FAIL");
    return r;
}

// ---------------------------------------------------------------------------
// criterion 8: noise-ratio metric
// ---------------------------------------------------------------------------

Result criterion_8() {
    // Poisson synthetic counts over 200 pixels
    Rng rng(101);
    Image img(20, 10, 0.0);
    Mask all(20, 10, 1);
    for (double& v : img.data())
        v = static_cast<double>(rng.next_poisson(500.0));
    double poisson_ratio = noise_ratio(img, all);
    bool poisson_ok = std::abs(poisson_ratio - 1.0) <= 0.05;

    // simulated reconstruction at the reference flux (cross acquisition)
    const CrossRun& cross = cross_run();
    double sim_ratio = noise_ratio(cross.anti_counts, cross.outside);
    bool sim_ok = sim_ratio >= 1.0 && sim_ratio <= 1.6;

    Result r;
    r.pass = poisson_ok && sim_ok;
    r.detail = fmt("poisson ratio %.3f (1.00 +- 0.05) %s; reconstruction ratio %.3f "
                   "(in [1.0, 1.6]) %s",
                   poisson_ratio, poisson_ok ? "ok" : "FAIL", sim_ratio,
                   sim_ok ? "ok" : "FAIL");
    return r;
}

// ---------------------------------------------------------------------------
// criterion 9 (soft): accumulation throughput via the reconstruct command
// ---------------------------------------------------------------------------

Result criterion_9() {
    testutil::TempDir tmp("acc9");
    CameraModel cam = CameraModel::spc3_methods();
    SourceModel src;
    src.pair_rate_per_frame = 7.0;
    src.correlation_width_um = 90.0;
    src.envelope_sigma_um = 900.0;
    SceneModel scene = SceneModel::flat(32, 32, 0.0);
    scene.stage_delay_um = 8.0;
    const uint64_t n = 200000 / g_frame_scale;
    std::string path = tmp.file("tp.homf");
    {
        HomfWriter w(path, {64, 32, n, 9, 8.0});
        for (uint64_t f = 0; f < n; ++f) {
            Rng rng = Rng::for_frame(9, 0, f);
            w.write(synthesize_frame(scene, src, cam, rng));
        }
        w.close();
    }

    // capture the throughput report printed by the reconstruct command
    std::ostringstream captured;
    std::streambuf* old = std::cout.rdbuf(captured.rdbuf());
    std::string out_dir = tmp.path();
    std::vector<const char*> argv{"homsim", "reconstruct",      path.c_str(),
                                  "--checkpoint-only", "--output", out_dir.c_str()};
    int rc = homsim::cli::run(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(old);

    // line format: "<path>: N frames in T s (F frames/s, P pair-updates/s)"
    double fps = 0.0;
    std::string text = captured.str();
    auto pos = text.find("s (");
    if (pos != std::string::npos)
        fps = std::strtod(text.c_str() + pos + 3, nullptr);

    Result r;
    r.warn_only = true;
    r.pass = rc == 0 && fps >= 1e5;
    r.detail = fmt("cmd_reconstruct reported %.3g frames/s (soft target 1e5)%s", fps,
                   r.pass ? "" : " - performance regression warning");
    return r;
}

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--quick") == 0)
            g_frame_scale = 10;
        else if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc)
            only = std::atoi(argv[++i]);
    }
    if (g_frame_scale != 1)
        std::printf("note: --quick runs at 1/%llu of the frame budget; results are "
                    "not acceptance-grade\n",
                    static_cast<unsigned long long>(g_frame_scale));

    struct Entry {
        int id;
        const char* name;
        std::function<Result()> fn;
    };
    std::vector<Entry> criteria = {
        {1, "factorised accumulator matches the literal estimator", criterion_1},
        {2, "chunked accumulation is bit-deterministic", criterion_2},
        {3, "dip visibility reproduction and estimator ordering", criterion_3},
        {4, "visibility-vs-R theory curve peaks near R = 1", criterion_4},
        {5, "depth round trip on etched glyphs and acrylic cross", criterion_5},
        {6, "bunch/anti-bunch combination reduces variance", criterion_6},
        {7, "2x2 raster super-resolution resolves 1-pixel-period bars", criterion_7},
        {8, "noise ratio metric at and above the shot-noise limit", criterion_8},
        {9, "accumulation throughput (soft target)", criterion_9},
    };

    bool any_fail = false;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only)
            continue;
        double t0 = now_s();
        Result res;
        try {
            res = c.fn();
        } catch (const std::exception& e) {
            res.pass = false;
            res.detail = std::string("exception: ") + e.what();
        }
        double dt = now_s() - t0;
        const char* tag = res.pass ? "PASS" : (res.warn_only ? "WARN" : "FAIL");
        std::printf("[%s] %d. %s - %s (%.1f s)\n", tag, c.id, c.name, res.detail.c_str(), dt);
        std::fflush(stdout);
        if (!res.pass && !res.warn_only)
            any_fail = true;
    }
    return any_fail ? 1 : 0;
}

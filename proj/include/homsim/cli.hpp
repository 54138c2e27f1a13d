#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "homsim/analysis.hpp"
#include "homsim/common.hpp"
#include "homsim/fit.hpp"
#include "homsim/frame.hpp"
#include "homsim/io.hpp"
#include "homsim/jpd.hpp"
#include "homsim/model.hpp"
#include "homsim/simulate.hpp"
#include "homsim/theory.hpp"

namespace homsim::cli {

namespace fs = std::filesystem;

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

inline std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw io_error("cannot create output directory " + dir + ": " + ec.message());
}

inline void emit_image(const std::string& dir, const std::string& stem, const Image& img,
                       const std::vector<std::pair<std::string, std::string>>& meta = {}) {
    write_csv_grid(join_path(dir, stem + ".csv"), img);
    PgmScale scale = pgm_scale_for(img);
    std::string pgm = join_path(dir, stem + ".pgm");
    write_pgm16(pgm, img, scale);
    write_sidecar(pgm, scale, meta);
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string config;
    std::string output = ".";
    std::string prefix = "scan";
    uint64_t seed = 0;
    bool have_seed = false;
};

inline int cmd_simulate(const SimulateArgs& a) {
    Config cfg = Config::parse_file(a.config);
    CameraModel camera = load_camera(cfg);
    SourceModel source = load_source(cfg);
    SceneModel scene = load_scene(cfg, camera);
    ScanPlan plan = load_scan(cfg, a.seed, a.have_seed);
    cfg.reject_unknown();
    ensure_dir(a.output);

    std::string manifest_path = join_path(a.output, a.prefix + "_manifest.csv");
    std::ofstream manifest(manifest_path);
    if (!manifest)
        throw io_error("cannot open for writing: " + manifest_path);
    manifest << "index,stage_delay_um,frames,mean_clicks_per_frame,path\n";
    manifest.precision(17);

    for (size_t d = 0; d < plan.delays_um.size(); ++d) {
        char name[128];
        std::snprintf(name, sizeof name, "%s_%03zu.homf", a.prefix.c_str(), d);
        std::string path = join_path(a.output, name);
        FrameStreamHeader header{static_cast<uint16_t>(camera.width_px),
                                 static_cast<uint16_t>(camera.height_px),
                                 plan.frames_per_delay, plan.seed, plan.delays_um[d]};
        HomfWriter writer(path, header);
        uint64_t clicks = 0;
        SceneModel local = scene;
        local.stage_delay_um = plan.delays_um[d];
        for (uint64_t f = 0; f < plan.frames_per_delay; ++f) {
            Rng rng = Rng::for_frame(plan.seed, d, f);
            BinaryFrame frame = synthesize_frame(local, source, camera, rng);
            clicks += frame.popcount();
            writer.write(frame);
        }
        writer.close();
        double mean_clicks = static_cast<double>(clicks) /
                             static_cast<double>(plan.frames_per_delay);
        std::cout << "delay " << plan.delays_um[d] << " um: " << plan.frames_per_delay
                  << " frames, " << mean_clicks << " clicks/frame -> " << path << "\n";
        manifest << d << "," << plan.delays_um[d] << "," << plan.frames_per_delay << ","
                 << mean_clicks << "," << name << "\n";
    }
    if (!manifest)
        throw io_error("write failed: " + manifest_path);
    return exit_ok;
}

// ---------------------------------------------------------------------------
// reconstruct
// ---------------------------------------------------------------------------

struct ReconstructArgs {
    std::vector<std::string> inputs;
    std::string output = ".";
    std::string resume;
    int threads = 1;
    int radius = 1;
    bool checkpoint_only = false;
    bool no_rotate = false;
};

inline void write_projection_csv(const std::string& path, const Projection& p) {
    write_csv_grid(path, p.values);
}

inline int cmd_reconstruct(const ReconstructArgs& a) {
    if (a.inputs.empty())
        throw config_error("reconstruct: no input files");
    if (!a.resume.empty() && a.inputs.size() != 1)
        throw config_error("reconstruct: --resume requires exactly one input file");
    ensure_dir(a.output);

    for (const std::string& input : a.inputs) {
        Timer timer;
        CoincidenceTensor t = [&] {
            if (input == "-") { // standard input: single-threaded streaming
                HomfReader reader(std::cin, "stdin");
                return accumulate_stream(reader, !a.no_rotate);
            }
            return accumulate_file(input, a.threads, !a.no_rotate);
        }();
        double secs = timer.seconds();
        if (!a.resume.empty()) {
            CoincidenceTensor prev = load_checkpoint(a.resume);
            t = merge(prev, t);
        }
        std::string stem = input == "-" ? "stdin" : fs::path(input).stem().string();
        save_checkpoint(t, join_path(a.output, stem + ".homt"));
        if (!a.checkpoint_only) {
            write_projection_csv(join_path(a.output, stem + "_sum.csv"),
                                 project(t, ProjectionKind::Sum));
            write_projection_csv(join_path(a.output, stem + "_minus.csv"),
                                 project(t, ProjectionKind::Minus));
            emit_image(a.output, stem + "_antibunch", antibunch_map(t, a.radius));
            emit_image(a.output, stem + "_bunch_adjacent", bunch_map_adjacent(t));
        }
        double fps = static_cast<double>(t.n_frames()) / std::max(secs, 1e-9);
        double pps = static_cast<double>(t.pair_updates()) / std::max(secs, 1e-9);
        std::cout << input << ": " << t.n_frames() << " frames in " << secs << " s ("
                  << static_cast<uint64_t>(fps) << " frames/s, "
                  << static_cast<uint64_t>(pps) << " pair-updates/s)\n";
    }
    return exit_ok;
}

// ---------------------------------------------------------------------------
// scan-analyze
// ---------------------------------------------------------------------------

struct ScanAnalyzeArgs {
    std::vector<std::string> inputs;
    std::string output = ".";
    int threads = 1;
    int radius = 1;
    int peak_window = 8;
    bool per_pixel = false;
};

struct EstimatorScan {
    std::string name;
    CurveSense sense;
    std::vector<ScanPoint> points;
};

inline void write_fit_csv(const std::string& path, const EstimatorScan& scan,
                          const ScanCurveFit* fit) {
    std::ofstream os(path);
    if (!os)
        throw io_error("cannot open for writing: " + path);
    os.precision(17);
    os << "delay_um,counts,fit_residual\n";
    for (const ScanPoint& p : scan.points) {
        double resid = std::numeric_limits<double>::quiet_NaN();
        if (fit) {
            double z = (p.delay_um - fit->center_um) / fit->width_um;
            resid = fit->baseline * (1.0 - fit->amplitude * std::exp(-0.5 * z * z)) - p.counts;
        }
        os << p.delay_um << "," << p.counts << "," << resid << "\n";
    }
    if (fit) {
        os << "# baseline = " << fit->baseline << " +- " << fit->stderrs[0] << "\n";
        os << "# amplitude = " << fit->amplitude << " +- " << fit->stderrs[1] << "\n";
        os << "# width_um = " << fit->width_um << " +- " << fit->stderrs[2] << "\n";
        os << "# center_um = " << fit->center_um << " +- " << fit->stderrs[3] << "\n";
        os << "# visibility = " << fit->visibility() << " +- " << fit->visibility_stderr()
           << "\n";
    } else {
        os << "# fit failed\n";
    }
    if (!os)
        throw io_error("write failed: " + path);
}

inline int cmd_scan_analyze(const ScanAnalyzeArgs& a) {
    if (a.inputs.size() < 5)
        throw config_error("scan-analyze: need at least 5 delay files, got " +
                           std::to_string(a.inputs.size()));
    ensure_dir(a.output);

    struct DelayRow {
        double delay;
        double anti, bunch_adjacent, bunch_peak;
    };
    std::vector<DelayRow> rows;
    std::vector<std::pair<double, Image>> anti_maps; // kept for --per-pixel
    for (const std::string& input : a.inputs) {
        CoincidenceTensor t = accumulate_file(input, a.threads);
        HomfReader probe(input);
        double delay = probe.header().stage_delay_um;
        Image anti = antibunch_map(t, a.radius);
        Image bunch = bunch_map_adjacent(t);
        if (a.per_pixel)
            anti_maps.push_back({delay, anti});
        double anti_sum = 0.0, bunch_sum = 0.0;
        for (double v : anti.data())
            anti_sum += v;
        for (double v : bunch.data())
            bunch_sum += v;
        double peak = 0.0;
        try {
            Projection minus = project(t, ProjectionKind::Minus);
            peak = fit_bunch_peak(minus, a.peak_window).amplitude *
                   static_cast<double>(t.n_frames());
        } catch (const numeric_error& e) {
            std::cout << input << ": bunch-peak fit failed (" << e.what() << ")\n";
            peak = std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back({delay, anti_sum, bunch_sum, peak});
    }
    std::sort(rows.begin(), rows.end(),
              [](const DelayRow& x, const DelayRow& y) { return x.delay < y.delay; });

    std::string curves_path = join_path(a.output, "scan_curves.csv");
    {
        std::ofstream os(curves_path);
        if (!os)
            throw io_error("cannot open for writing: " + curves_path);
        os.precision(17);
        os << "delay_um,antibunch_counts,bunch_adjacent_counts,bunch_peak_counts\n";
        for (const DelayRow& r : rows)
            os << r.delay << "," << r.anti << "," << r.bunch_adjacent << "," << r.bunch_peak
               << "\n";
    }

    EstimatorScan scans[3] = {
        {"antibunch", CurveSense::Dip, {}},
        {"bunch_adjacent", CurveSense::Peak, {}},
        {"bunch_peak", CurveSense::Peak, {}},
    };
    for (const DelayRow& r : rows) {
        scans[0].points.push_back({r.delay, r.anti});
        scans[1].points.push_back({r.delay, r.bunch_adjacent});
        if (std::isfinite(r.bunch_peak))
            scans[2].points.push_back({r.delay, r.bunch_peak});
    }

    for (const EstimatorScan& scan : scans) {
        std::string fit_path = join_path(a.output, "scan_fit_" + scan.name + ".csv");
        try {
            ScanCurveFit fit = fit_scan_curve(scan.points, scan.sense);
            write_fit_csv(fit_path, scan, &fit);
            std::cout << scan.name << ": visibility " << fit.visibility() << " +- "
                      << fit.visibility_stderr() << " (width " << fit.width_um << " um, centre "
                      << fit.center_um << " um)\n";
        } catch (const numeric_error& e) {
            write_fit_csv(fit_path, scan, nullptr);
            std::cout << scan.name << ": visibility 0 (fit failed: " << e.what() << ")\n";
        }
    }

    if (a.per_pixel) {
        std::sort(anti_maps.begin(), anti_maps.end(),
                  [](const auto& x, const auto& y) { return x.first < y.first; });
        DipMapFit maps = fit_dip_per_pixel(anti_maps);
        write_csv_grid(join_path(a.output, "dip_baseline.csv"), maps.baseline);
        write_csv_grid(join_path(a.output, "dip_visibility.csv"), maps.visibility);
        write_csv_grid(join_path(a.output, "dip_width_um.csv"), maps.width_um);
        write_csv_grid(join_path(a.output, "dip_center_um.csv"), maps.center_um);
        std::cout << "per-pixel dips: " << maps.fitted << " / " << maps.baseline.size()
                  << " pixels fitted\n";
    }
    return exit_ok;
}

// ---------------------------------------------------------------------------
// depth
// ---------------------------------------------------------------------------

struct DepthArgs {
    std::string map;
    std::string output = ".";
    std::string region;
    double baseline = 0.0;
    double visibility = 0.0;
    double width_um = 0.0;
    double center_um = 0.0;
    double operating_delay_um = 0.0;
    std::string edge = "rising";
};

inline int cmd_depth(const DepthArgs& a) {
    Image counts = read_csv_grid(a.map);
    DipModel dip{a.baseline, a.visibility, a.width_um, a.center_um};
    DipEdge edge;
    if (a.edge == "rising")
        edge = DipEdge::Rising;
    else if (a.edge == "falling")
        edge = DipEdge::Falling;
    else
        throw config_error("depth: --edge must be rising or falling");
    ensure_dir(a.output);
    DepthImage depth = invert_depth(counts, dip, a.operating_delay_um, edge);
    emit_image(a.output, "depth",
               depth.depth_um, {{"quantity", "depth_um"}, {"source_map", a.map}});
    write_csv_grid(join_path(a.output, "depth_stderr.csv"), depth.stderr_um);
    size_t valid = depth.valid_count();
    std::cout << "inverted " << valid << " / " << depth.depth_um.size() << " pixels\n";
    if (!a.region.empty()) {
        Mask region = read_mask(a.region);
        double sum = 0.0, sum2 = 0.0;
        size_t n = 0;
        for (int y = 0; y < depth.depth_um.height(); ++y)
            for (int x = 0; x < depth.depth_um.width(); ++x)
                if (region.at(x, y) && depth.valid(x, y)) {
                    sum += depth.depth_um(x, y);
                    sum2 += depth.depth_um(x, y) * depth.depth_um(x, y);
                    ++n;
                }
        if (n == 0)
            throw numeric_error("depth: no valid pixels inside the region mask");
        double mean = sum / static_cast<double>(n);
        double sd = n > 1 ? std::sqrt((sum2 - sum * mean) / static_cast<double>(n - 1)) : 0.0;
        std::cout << "region mean depth " << mean << " um, sd " << sd << " um over " << n
                  << " pixels\n";
    }
    return exit_ok;
}

// ---------------------------------------------------------------------------
// combine
// ---------------------------------------------------------------------------

struct CombineArgs {
    std::string anti;
    std::string bunch;
    std::vector<std::string> masks;
    std::string output = ".";
};

inline int cmd_combine(const CombineArgs& a) {
    Image anti = read_csv_grid(a.anti);
    Image bunch = read_csv_grid(a.bunch);
    std::vector<Mask> masks;
    for (const std::string& m : a.masks)
        masks.push_back(read_mask(m));
    ensure_dir(a.output);
    CombineResult res = combine_channels(anti, bunch, masks);
    std::vector<std::pair<std::string, std::string>> meta = {
        {"bunch_scale", std::to_string(res.scale)},
        {"bunch_offset", std::to_string(res.offset)},
        {"sigma_anti", std::to_string(res.sigma_anti)},
        {"sigma_bunch_rescaled", std::to_string(res.sigma_bunch)},
    };
    for (size_t i = 0; i < a.masks.size(); ++i)
        meta.push_back({"mask_" + std::to_string(i), a.masks[i]});
    emit_image(a.output, "combined", res.image, meta);
    std::cout << "bunch -> anti affine: scale " << res.scale << ", offset " << res.offset
              << "\n";
    std::cout << "sigma_anti " << res.sigma_anti << ", sigma_bunch(rescaled) " << res.sigma_bunch
              << "\n";
    for (size_t i = 0; i < masks.size(); ++i) {
        MaskedStats before = masked_stats(anti, masks[i]);
        MaskedStats after = masked_stats(res.image, masks[i]);
        std::cout << "mask " << i << ": variance " << before.variance << " -> " << after.variance
                  << " (x" << (after.variance > 0 ? before.variance / after.variance : 0.0)
                  << " reduction)\n";
    }
    return exit_ok;
}

// ---------------------------------------------------------------------------
// raster
// ---------------------------------------------------------------------------

struct RasterArgs {
    std::vector<std::string> inputs; // i00 i10 i01 i11
    std::string output = ".";
};

inline int cmd_raster(const RasterArgs& a) {
    if (a.inputs.size() != 4)
        throw config_error("raster: expected 4 images (offsets 00, 10, 01, 11)");
    Image i00 = read_csv_grid(a.inputs[0]);
    Image i10 = read_csv_grid(a.inputs[1]);
    Image i01 = read_csv_grid(a.inputs[2]);
    Image i11 = read_csv_grid(a.inputs[3]);
    ensure_dir(a.output);
    Image super = raster_superresolve(i00, i10, i01, i11);
    std::vector<std::pair<std::string, std::string>> meta;
    for (size_t i = 0; i < 4; ++i)
        meta.push_back({"input_" + std::to_string(i), a.inputs[i]});
    emit_image(a.output, "superres", super, meta);
    std::cout << "super-resolved " << i00.width() << "x" << i00.height() << " -> "
              << super.width() << "x" << super.height() << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------------------
// theory
// ---------------------------------------------------------------------------

struct TheoryArgs {
    std::string output = ".";
    double r_min = 0.2;
    double r_max = 4.0;
    int points = 25;
    TheoryParams params = TheoryParams::reference_setup();
};

inline int cmd_theory(const TheoryArgs& a) {
    if (a.points < 2 || a.r_min <= 0 || a.r_max <= a.r_min)
        throw config_error("theory: need r_max > r_min > 0 and at least 2 points");
    std::vector<double> rs;
    for (int i = 0; i < a.points; ++i)
        rs.push_back(a.r_min + (a.r_max - a.r_min) * i / (a.points - 1));
    auto curve = visibility_curve(a.params, rs);
    ensure_dir(a.output);
    std::string path = join_path(a.output, "theory_visibility.csv");
    std::ofstream os(path);
    if (!os)
        throw io_error("cannot open for writing: " + path);
    os.precision(17);
    os << "R,visibility,f0_mm,sigma_corr_um\n";
    for (const auto& p : curve)
        os << p.pixel_ratio << "," << p.visibility << "," << p.focal_length_mm << ","
           << p.sigma_corr_um << "\n";
    if (!os)
        throw io_error("write failed: " + path);
    std::cout << "wrote " << curve.size() << " points -> " << path << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv) {
    CLI::App app{"Full-field Hong-Ou-Mandel microscopy: SPAD-frame simulator and "
                 "coincidence reconstruction toolkit"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "synthesise SPAD frame streams for a delay scan");
    c_sim->add_option("--config", sim.config, "model configuration file")->required();
    c_sim->add_option("--output", sim.output, "output directory");
    c_sim->add_option("--prefix", sim.prefix, "output file prefix");
    auto* seed_opt = c_sim->add_option("--seed", sim.seed, "override scan.seed");

    ReconstructArgs rec;
    auto* c_rec = app.add_subcommand("reconstruct", "accumulate coincidence tensors from HOMF files");
    c_rec->add_option("files", rec.inputs, "HOMF inputs")->required();
    c_rec->add_option("--output", rec.output, "output directory");
    c_rec->add_option("--threads", rec.threads, "worker threads");
    c_rec->add_option("--radius", rec.radius, "anti-bunch neighbourhood radius (px)");
    c_rec->add_option("--resume", rec.resume, "merge into an existing checkpoint");
    c_rec->add_flag("--checkpoint-only", rec.checkpoint_only, "skip projections and maps");
    c_rec->add_flag("--raw-coordinates", rec.no_rotate,
                    "do not apply the half rotation before accumulating");

    ScanAnalyzeArgs scan;
    auto* c_scan = app.add_subcommand("scan-analyze", "fit dip/peak curves over a delay scan");
    c_scan->add_option("files", scan.inputs, "per-delay HOMF inputs")->required();
    c_scan->add_option("--output", scan.output, "output directory");
    c_scan->add_option("--threads", scan.threads, "worker threads");
    c_scan->add_option("--radius", scan.radius, "anti-bunch neighbourhood radius (px)");
    c_scan->add_option("--peak-window", scan.peak_window, "bunch peak fit window (px)");
    c_scan->add_flag("--per-pixel", scan.per_pixel,
                     "also fit a dip at every pixel of the anti-bunch maps");

    DepthArgs depth;
    auto* c_depth = app.add_subcommand("depth", "invert a coincidence map to a depth image");
    c_depth->add_option("--map", depth.map, "coincidence map CSV")->required();
    c_depth->add_option("--baseline", depth.baseline, "dip baseline (counts)")->required();
    c_depth->add_option("--visibility", depth.visibility, "dip visibility parameter")->required();
    c_depth->add_option("--width-um", depth.width_um, "dip width (um)")->required();
    c_depth->add_option("--center-um", depth.center_um, "dip centre (um)");
    c_depth->add_option("--operating-delay-um", depth.operating_delay_um,
                        "stage delay of the acquisition")->required();
    c_depth->add_option("--edge", depth.edge, "rising | falling");
    c_depth->add_option("--region", depth.region, "mask for a region summary");
    c_depth->add_option("--output", depth.output, "output directory");

    CombineArgs comb;
    auto* c_comb = app.add_subcommand("combine", "minimum-variance channel combination");
    c_comb->add_option("--anti", comb.anti, "anti-bunching map CSV")->required();
    c_comb->add_option("--bunch", comb.bunch, "bunching map CSV")->required();
    c_comb->add_option("--mask", comb.masks, "constant-count region mask (repeat >= 2)")
        ->required();
    c_comb->add_option("--output", comb.output, "output directory");

    RasterArgs raster;
    auto* c_raster = app.add_subcommand("raster", "2x2 shift-and-add super-resolution");
    c_raster->add_option("files", raster.inputs,
                         "four maps at offsets (0,0) (1/2,0) (0,1/2) (1/2,1/2)")
        ->required();
    c_raster->add_option("--output", raster.output, "output directory");

    TheoryArgs theory;
    auto* c_theory = app.add_subcommand("theory", "visibility-vs-R model curve");
    c_theory->add_option("--r-min", theory.r_min, "lowest pixel ratio R");
    c_theory->add_option("--r-max", theory.r_max, "highest pixel ratio R");
    c_theory->add_option("--points", theory.points, "number of sweep points");
    c_theory->add_option("--gamma", theory.params.loss_rate, "pixel loss rate");
    c_theory->add_option("--pixel-um", theory.params.pixel_size_um, "pixel size (um)");
    c_theory->add_option("--array-um", theory.params.array_width_um, "half-array width (um)");
    c_theory->add_option("--dip-width-um", theory.params.dip_width_um, "dip width Sigma (um)");
    c_theory->add_option("--crystal-mm", theory.params.crystal_length_mm, "crystal length (mm)");
    c_theory->add_option("--pump-nm", [&theory](const std::vector<std::string>& v) {
        theory.params.pump_wavenumber_rad_per_nm = kTwoPi / std::stod(v[0]);
        return true;
    }, "pump wavelength (nm)");
    c_theory->add_option("--output", theory.output, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        sim.have_seed = seed_opt->count() > 0;
        if (c_sim->parsed())
            return cmd_simulate(sim);
        if (c_rec->parsed())
            return cmd_reconstruct(rec);
        if (c_scan->parsed())
            return cmd_scan_analyze(scan);
        if (c_depth->parsed())
            return cmd_depth(depth);
        if (c_comb->parsed())
            return cmd_combine(comb);
        if (c_raster->parsed())
            return cmd_raster(raster);
        if (c_theory->parsed())
            return cmd_theory(theory);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return exit_io;
    } catch (const numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return exit_numeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    }
    return exit_usage;
}

} // namespace homsim::cli

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "homsim/common.hpp"
#include "homsim/grid.hpp"
#include "homsim/model.hpp"

namespace homsim {

// ---------------------------------------------------------------------------
// Plain-text key = value configuration. Keys are dotted and carry units in
// their names (pixel_pitch_um, exposure_s, ...); '#' starts a comment.
// Unknown keys are rejected so typos cannot silently fall back to defaults.
// ---------------------------------------------------------------------------

class Config {
public:
    static Config parse_file(const std::string& path) {
        std::ifstream is(path);
        if (!is)
            throw io_error("cannot open config: " + path);
        Config c;
        c.base_dir_ = std::filesystem::path(path).parent_path().string();
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            auto hash = line.find('#');
            if (hash != std::string::npos)
                line.erase(hash);
            std::string trimmed = trim(line);
            if (trimmed.empty())
                continue;
            auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw config_error(path + ":" + std::to_string(lineno) +
                                   ": expected key = value");
            std::string key = trim(trimmed.substr(0, eq));
            std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw config_error(path + ":" + std::to_string(lineno) + ": empty key");
            if (!c.values_.emplace(key, value).second)
                throw config_error(path + ":" + std::to_string(lineno) + ": duplicate key " +
                                   key);
        }
        return c;
    }

    static Config from_pairs(std::map<std::string, std::string> values) {
        Config c;
        c.values_ = std::move(values);
        return c;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        if (it == values_.end())
            return fallback;
        consumed_.insert(key);
        return it->second;
    }

    std::string require_string(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end())
            throw config_error("missing required config key: " + key);
        consumed_.insert(key);
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end())
            return fallback;
        consumed_.insert(key);
        return parse_double(it->second, key);
    }

    int64_t get_int(const std::string& key, int64_t fallback) const {
        auto it = values_.find(key);
        if (it == values_.end())
            return fallback;
        consumed_.insert(key);
        try {
            size_t pos = 0;
            int64_t v = std::stoll(it->second, &pos);
            if (pos != it->second.size())
                throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw config_error("config key " + key + ": not an integer: " + it->second);
        }
    }

    uint64_t get_u64(const std::string& key, uint64_t fallback) const {
        auto it = values_.find(key);
        if (it == values_.end())
            return fallback;
        consumed_.insert(key);
        try {
            size_t pos = 0;
            uint64_t v = std::stoull(it->second, &pos);
            if (pos != it->second.size())
                throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw config_error("config key " + key + ": not an unsigned integer: " + it->second);
        }
    }

    /// Delay list: comma-separated values, start:step:count, or empty.
    std::vector<double> get_delays(const std::string& key) const {
        std::string raw = require_string(key);
        std::vector<double> out;
        if (raw.empty())
            return out;
        if (raw.find(':') != std::string::npos) {
            auto parts = split(raw, ':');
            if (parts.size() != 3)
                throw config_error(key + ": expected start:step:count");
            double start = parse_double(parts[0], key);
            double step = parse_double(parts[1], key);
            int64_t count = 0;
            try {
                count = std::stoll(parts[2]);
            } catch (const std::exception&) {
                throw config_error(key + ": bad count in start:step:count");
            }
            if (count <= 0 || step == 0.0)
                throw config_error(key + ": count must be > 0 and step nonzero");
            for (int64_t i = 0; i < count; ++i)
                out.push_back(start + step * static_cast<double>(i));
        } else {
            for (const std::string& tok : split(raw, ','))
                out.push_back(parse_double(trim(tok), key));
        }
        return out;
    }

    /// Resolve a path relative to the config file location.
    std::string resolve_path(const std::string& p) const {
        std::filesystem::path fp(p);
        if (fp.is_absolute() || base_dir_.empty())
            return p;
        return (std::filesystem::path(base_dir_) / fp).string();
    }

    /// Throw if any key was never consumed (catches typos).
    void reject_unknown() const {
        for (const auto& [k, v] : values_)
            if (!consumed_.count(k))
                throw config_error("unknown config key: " + k);
    }

private:
    static std::string trim(const std::string& s) {
        size_t b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos)
            return "";
        size_t e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static std::vector<std::string> split(const std::string& s, char sep) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, sep))
            out.push_back(tok);
        return out;
    }

    static double parse_double(const std::string& s, const std::string& key) {
        try {
            size_t pos = 0;
            double v = std::stod(s, &pos);
            if (pos != s.size())
                throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw config_error("config key " + key + ": not a number: " + s);
        }
    }

    std::map<std::string, std::string> values_;
    mutable std::set<std::string> consumed_;
    std::string base_dir_;
};

// ---------------------------------------------------------------------------
// CSV grids
// ---------------------------------------------------------------------------

inline void write_csv_grid(const std::string& path, const Image& img) {
    std::ofstream os(path);
    if (!os)
        throw io_error("cannot open for writing: " + path);
    os.precision(17);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x)
            os << (x ? "," : "") << img(x, y);
        os << '\n';
    }
    if (!os)
        throw io_error("write failed: " + path);
}

inline Image read_csv_grid(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw io_error("cannot open: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#')
            continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw io_error(path + ":" + std::to_string(lineno) + ": bad number '" + cell +
                               "'");
            }
        }
        if (!row.empty())
            rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw io_error(path + ": empty grid");
    size_t w = rows[0].size();
    for (size_t r = 1; r < rows.size(); ++r)
        if (rows[r].size() != w)
            throw io_error(path + ": ragged rows (row " + std::to_string(r + 1) + " has " +
                           std::to_string(rows[r].size()) + " cells, expected " +
                           std::to_string(w) + ")");
    Image img(static_cast<int>(w), static_cast<int>(rows.size()));
    for (size_t y = 0; y < rows.size(); ++y)
        for (size_t x = 0; x < w; ++x)
            img(static_cast<int>(x), static_cast<int>(y)) = rows[y][x];
    return img;
}

// ---------------------------------------------------------------------------
// 16-bit PGM (P5, maxval 65535, big-endian samples) plus a text sidecar
// recording the physical scale.
// ---------------------------------------------------------------------------

struct PgmScale {
    double units_per_level = 1.0;
    double offset = 0.0; // physical value of level 0
};

inline void write_pgm16(const std::string& path, const Image& img, const PgmScale& scale) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw io_error("cannot open for writing: " + path);
    os << "P5\n" << img.width() << " " << img.height() << "\n65535\n";
    std::vector<uint8_t> buf(static_cast<size_t>(img.width()) * img.height() * 2);
    size_t k = 0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            double v = img(x, y);
            double level = std::isfinite(v) ? (v - scale.offset) / scale.units_per_level : 0.0;
            uint16_t q = static_cast<uint16_t>(std::clamp(std::lround(level), 0l, 65535l));
            buf[k++] = static_cast<uint8_t>(q >> 8);
            buf[k++] = static_cast<uint8_t>(q & 0xFF);
        }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os)
        throw io_error("write failed: " + path);
}

/// Choose a scale that spans the finite values of an image.
inline PgmScale pgm_scale_for(const Image& img) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : img.data())
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!(hi > lo))
        return PgmScale{1.0, std::isfinite(lo) ? lo : 0.0};
    return PgmScale{(hi - lo) / 65535.0, lo};
}

inline Image read_pgm16(const std::string& path, const PgmScale& scale) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw io_error("cannot open: " + path);
    std::string magic;
    is >> magic;
    if (magic != "P5")
        throw io_error(path + ": not a P5 PGM");
    auto next_int = [&]() {
        // skip whitespace and comments
        for (;;) {
            int ch = is.peek();
            if (ch == '#') {
                std::string junk;
                std::getline(is, junk);
            } else if (std::isspace(ch)) {
                is.get();
            } else {
                break;
            }
        }
        long v;
        is >> v;
        if (!is)
            throw io_error(path + ": bad PGM header");
        return v;
    };
    long w = next_int();
    long h = next_int();
    long maxval = next_int();
    if (maxval != 65535)
        throw io_error(path + ": expected 16-bit PGM (maxval 65535), got " +
                       std::to_string(maxval));
    is.get(); // single whitespace after maxval
    std::vector<uint8_t> buf(static_cast<size_t>(w) * h * 2);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is)
        throw io_error(path + ": truncated PGM data");
    Image img(static_cast<int>(w), static_cast<int>(h));
    size_t k = 0;
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
            uint16_t q = static_cast<uint16_t>((buf[k] << 8) | buf[k + 1]);
            k += 2;
            img(static_cast<int>(x), static_cast<int>(y)) =
                scale.offset + scale.units_per_level * q;
        }
    return img;
}

/// Sidecar text next to an emitted image; records the scale and any
/// mask/source provenance lines the caller adds.
inline void write_sidecar(const std::string& image_path, const PgmScale& scale,
                          const std::vector<std::pair<std::string, std::string>>& extra = {}) {
    std::string path = image_path + ".meta.txt";
    std::ofstream os(path);
    if (!os)
        throw io_error("cannot open for writing: " + path);
    os.precision(17);
    os << "units_per_level = " << scale.units_per_level << "\n";
    os << "offset = " << scale.offset << "\n";
    for (const auto& [k, v] : extra)
        os << k << " = " << v << "\n";
    if (!os)
        throw io_error("write failed: " + path);
}

/// Load a mask grid: CSV or PGM by extension; any nonzero cell is inside.
inline Mask read_mask(const std::string& path) {
    Image img;
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".pgm")
        img = read_pgm16(path, PgmScale{1.0, 0.0});
    else
        img = read_csv_grid(path);
    Mask m(img.width(), img.height(), 0);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            m(x, y) = img(x, y) != 0.0 ? 1 : 0;
    return m;
}

// ---------------------------------------------------------------------------
// Model loading from config
// ---------------------------------------------------------------------------

inline CameraModel load_camera(const Config& cfg) {
    CameraModel cam;
    std::string preset = cfg.get_string("camera.preset", "spc3_methods");
    if (preset == "spc3_methods")
        cam = CameraModel::spc3_methods();
    else if (preset == "spc3_nominal")
        cam = CameraModel::spc3_nominal();
    else
        throw config_error("camera.preset: unknown preset '" + preset +
                           "' (spc3_methods | spc3_nominal)");
    cam.width_px = static_cast<int>(cfg.get_int("camera.width_px", cam.width_px));
    cam.height_px = static_cast<int>(cfg.get_int("camera.height_px", cam.height_px));
    cam.pixel_pitch_um = cfg.get_double("camera.pixel_pitch_um", cam.pixel_pitch_um);
    cam.fill_factor = cfg.get_double("camera.fill_factor", cam.fill_factor);
    cam.quantum_efficiency = cfg.get_double("camera.quantum_efficiency", cam.quantum_efficiency);
    cam.dark_count_rate_cps = cfg.get_double("camera.dark_count_rate_cps", cam.dark_count_rate_cps);
    cam.exposure_s = cfg.get_double("camera.exposure_s", cam.exposure_s);
    cam.frame_rate_fps = cfg.get_double("camera.frame_rate_fps", cam.frame_rate_fps);
    cam.validate();
    return cam;
}

inline SourceModel load_source(const Config& cfg) {
    SourceModel src;
    src.pump_wavelength_nm = cfg.get_double("source.pump_wavelength_nm", src.pump_wavelength_nm);
    src.crystal_length_mm = cfg.get_double("source.crystal_length_mm", src.crystal_length_mm);
    src.diffraction_scale = cfg.get_double("source.diffraction_scale", src.diffraction_scale);
    if (cfg.has("source.correlation_width_um")) {
        src.correlation_width_um =
            cfg.get_double("source.correlation_width_um", src.correlation_width_um);
    } else if (src.diffraction_scale > 0.0) {
        src.correlation_width_um = SourceModel::correlation_width_from_optics_um(
            src.crystal_length_mm, src.diffraction_scale, src.pump_wavelength_nm);
    }
    src.dip_width_um = cfg.get_double("source.dip_width_um", src.dip_width_um);
    src.pair_rate_per_frame = cfg.get_double("source.pair_rate_per_frame",
                                             src.pair_rate_per_frame);
    src.intrinsic_visibility = cfg.get_double("source.intrinsic_visibility",
                                              src.intrinsic_visibility);
    std::string env = cfg.get_string("source.envelope_shape", "gaussian");
    if (env == "gaussian")
        src.envelope_shape = EnvelopeShape::Gaussian;
    else if (env == "flat")
        src.envelope_shape = EnvelopeShape::Flat;
    else
        throw config_error("source.envelope_shape: expected gaussian | flat, got '" + env + "'");
    src.envelope_sigma_um = cfg.get_double("source.envelope_sigma_um", src.envelope_sigma_um);
    src.distinguishability_width_um =
        cfg.get_double("source.distinguishability_width_um", src.distinguishability_width_um);
    src.validate();
    return src;
}

inline SceneModel load_scene(const Config& cfg, const CameraModel& camera) {
    SceneModel scene;
    scene.supersample = static_cast<int>(cfg.get_int("scene.supersample", 1));
    scene.stage_delay_um = cfg.get_double("scene.stage_delay_um", 0.0);
    if (cfg.has("scene.depth_map")) {
        std::string path = cfg.resolve_path(cfg.require_string("scene.depth_map"));
        if (path.size() >= 4 && path.substr(path.size() - 4) == ".pgm") {
            PgmScale s;
            s.units_per_level = cfg.get_double("scene.depth_um_per_level", 1.0);
            s.offset = cfg.get_double("scene.depth_offset_um", 0.0);
            scene.depth_map_um = read_pgm16(path, s);
        } else {
            scene.depth_map_um = read_csv_grid(path);
        }
    } else {
        double flat = cfg.get_double("scene.flat_depth_um", 0.0);
        scene.depth_map_um = Grid<double>(camera.half_width_px() * scene.supersample,
                                          camera.height_px * scene.supersample, flat);
    }
    if (cfg.has("scene.visibility_map")) {
        std::string path = cfg.resolve_path(cfg.require_string("scene.visibility_map"));
        if (path.size() >= 4 && path.substr(path.size() - 4) == ".pgm")
            scene.visibility_map = read_pgm16(path, PgmScale{1.0 / 65535.0, 0.0});
        else
            scene.visibility_map = read_csv_grid(path);
    }
    scene.validate(camera);
    return scene;
}

inline ScanPlan load_scan(const Config& cfg, uint64_t seed_override = 0,
                          bool have_override = false) {
    ScanPlan plan;
    plan.delays_um = cfg.has("scan.delays_um") ? cfg.get_delays("scan.delays_um")
                                               : std::vector<double>{};
    plan.frames_per_delay = cfg.get_u64("scan.frames_per_delay", 1000);
    plan.seed = have_override ? seed_override : cfg.get_u64("scan.seed", 1);
    plan.validate();
    return plan;
}

} // namespace homsim

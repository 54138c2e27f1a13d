#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "homsim/common.hpp"
#include "homsim/frame.hpp"
#include "homsim/grid.hpp"

namespace homsim {

/// Exact-integer accumulators for the joint probability distribution
/// estimator
///
///   Gamma(a, b) = A(a, b) / N - S(a) S(b) / N^2
///
/// where A(a, b) counts frames with clicks on both pixels and S(a) counts
/// clicks on a. The inter-frame accidental term factorises as S(a) S(b), so a
/// stream pass costs O(clicks^2) per frame instead of O(frames^2). Integer
/// storage makes chunked accumulation and merging bit-deterministic; A is
/// kept symmetric-packed (a <= b).
class CoincidenceTensor {
public:
    CoincidenceTensor() = default;
    CoincidenceTensor(int width, int height)
        : w_(width), h_(height), marginal_(pixel_count(), 0),
          intra_(packed_size(pixel_count()), 0) {
        if (width <= 0 || height <= 0)
            throw config_error("tensor dimensions must be positive");
    }

    int width() const { return w_; }
    int height() const { return h_; }
    size_t pixel_count() const { return static_cast<size_t>(w_) * h_; }
    uint64_t n_frames() const { return n_frames_; }
    const std::vector<uint64_t>& marginal() const { return marginal_; }
    const std::vector<uint64_t>& intra_packed() const { return intra_; }

    static size_t packed_size(size_t n_pixels) { return n_pixels * (n_pixels + 1) / 2; }

    size_t pack_index(size_t a, size_t b) const {
        if (a > b)
            std::swap(a, b);
        return a * pixel_count() - a * (a - 1) / 2 + (b - a);
    }

    uint64_t intra_at(size_t a, size_t b) const { return intra_[pack_index(a, b)]; }
    uint64_t singles(size_t a) const { return marginal_[a]; }

    /// Genuine-coincidence estimate per frame (Eq. above).
    double gamma(size_t a, size_t b) const {
        double n = static_cast<double>(n_frames_);
        return static_cast<double>(intra_at(a, b)) / n -
               static_cast<double>(marginal_[a]) * static_cast<double>(marginal_[b]) / (n * n);
    }

    /// Gamma scaled by the frame count: net coincidence counts above
    /// accidentals. This is the natural unit for count-based maps.
    double gamma_counts(size_t a, size_t b) const {
        double n = static_cast<double>(n_frames_);
        return static_cast<double>(intra_at(a, b)) -
               static_cast<double>(marginal_[a]) * static_cast<double>(marginal_[b]) / n;
    }

    void add_frame(const BinaryFrame& frame, std::vector<uint32_t>& scratch) {
        check_geometry(frame.width(), frame.height());
        scratch.clear();
        frame.active_pixels(scratch);
        add_active(scratch);
    }

    void add_frame(const BinaryFrame& frame) {
        std::vector<uint32_t> scratch;
        add_frame(frame, scratch);
    }

    /// Accumulate a frame given its active pixel list (already transformed to
    /// the rotated coordinate convention).
    void add_active(std::span<const uint32_t> active) {
        uint64_t* intra = intra_.data();
        const size_t p = pixel_count();
        for (size_t i = 0; i < active.size(); ++i) {
            const size_t a = active[i];
            marginal_[a] += 1;
            uint64_t* row = intra + (a * p - a * (a - 1) / 2 - a);
            for (size_t j = i; j < active.size(); ++j)
                row[active[j]] += 1; // active lists are sorted ascending
        }
        ++n_frames_;
        pair_updates_ += active.size() * (active.size() + 1) / 2;
    }

    /// Total A increments so far; a throughput diagnostic.
    uint64_t pair_updates() const { return pair_updates_; }

    void check_geometry(int w, int h) const {
        if (w != w_ || h != h_)
            throw geometry_error("tensor geometry " + std::to_string(w_) + "x" +
                                 std::to_string(h_) + " does not match frame " +
                                 std::to_string(w) + "x" + std::to_string(h));
    }

    friend bool operator==(const CoincidenceTensor& a, const CoincidenceTensor& b) {
        return a.w_ == b.w_ && a.h_ == b.h_ && a.n_frames_ == b.n_frames_ &&
               a.marginal_ == b.marginal_ && a.intra_ == b.intra_;
    }

    friend CoincidenceTensor merge(const CoincidenceTensor& a, const CoincidenceTensor& b) {
        if (a.w_ != b.w_ || a.h_ != b.h_)
            throw geometry_error("merge: tensor geometry mismatch");
        CoincidenceTensor out = a;
        out.n_frames_ += b.n_frames_;
        out.pair_updates_ += b.pair_updates_;
        for (size_t i = 0; i < out.marginal_.size(); ++i)
            out.marginal_[i] += b.marginal_[i];
        for (size_t i = 0; i < out.intra_.size(); ++i)
            out.intra_[i] += b.intra_[i];
        return out;
    }

private:
    int w_ = 0;
    int h_ = 0;
    uint64_t n_frames_ = 0;
    uint64_t pair_updates_ = 0;
    std::vector<uint64_t> marginal_;
    std::vector<uint64_t> intra_;

    friend struct TensorCheckpointAccess;
};

/// Accumulate an in-memory stream; frames must already carry the half
/// rotation (see transform_halves).
inline CoincidenceTensor accumulate(const FrameStream& stream) {
    if (stream.frames.empty())
        throw io_error("accumulate: empty stream");
    CoincidenceTensor t(stream.header.width_px, stream.header.height_px);
    std::vector<uint32_t> scratch;
    for (const auto& f : stream.frames)
        t.add_frame(f, scratch);
    return t;
}

/// Accumulate raw frames, applying the half rotation on the fly via an index
/// remap (cheaper than rebuilding each frame). The remapped active list is
/// re-sorted because rotation reverses the right-half ordering.
class RotatingAccumulator {
public:
    RotatingAccumulator(int width, int height, bool apply_rotation = true)
        : tensor_(width, height), rotate_(apply_rotation) {
        if (rotate_)
            table_ = half_rotation_table(width, height);
    }

    void add(const BinaryFrame& frame) {
        tensor_.check_geometry(frame.width(), frame.height());
        scratch_.clear();
        frame.active_pixels(scratch_);
        if (rotate_) {
            for (auto& idx : scratch_)
                idx = table_[idx];
            std::sort(scratch_.begin(), scratch_.end());
        }
        tensor_.add_active(scratch_);
    }

    CoincidenceTensor take() { return std::move(tensor_); }
    const CoincidenceTensor& tensor() const { return tensor_; }

private:
    CoincidenceTensor tensor_;
    bool rotate_;
    std::vector<uint32_t> table_;
    std::vector<uint32_t> scratch_;
};

/// Drain a reader (file or stdin) into a tensor.
inline CoincidenceTensor accumulate_stream(HomfReader& reader, bool apply_rotation = true) {
    if (reader.header().frame_count == 0)
        throw io_error("accumulate: empty stream");
    RotatingAccumulator acc(reader.header().width_px, reader.header().height_px, apply_rotation);
    BinaryFrame f;
    while (reader.next(f))
        acc.add(f);
    return acc.take();
}

/// Accumulate a HOMF file with optional chunked parallelism. Each worker owns
/// a contiguous frame range and a private tensor; merging integer tensors is
/// exact, so the result is identical for any thread count.
inline CoincidenceTensor accumulate_file(const std::string& path, int threads = 1,
                                         bool apply_rotation = true) {
    HomfReader probe(path);
    const auto header = probe.header();
    if (header.frame_count == 0)
        throw io_error("accumulate: no frames in " + path);
    uint64_t n = header.frame_count;
    int nt = std::max(1, std::min<int>(threads, static_cast<int>(std::min<uint64_t>(n, 64))));

    std::vector<CoincidenceTensor> parts(nt);
    auto work = [&](int k) {
        uint64_t begin = n * k / nt;
        uint64_t end = n * (k + 1) / nt;
        HomfReader reader(path);
        reader.seek(begin);
        RotatingAccumulator acc(header.width_px, header.height_px, apply_rotation);
        BinaryFrame f;
        for (uint64_t i = begin; i < end; ++i) {
            reader.next(f);
            acc.add(f);
        }
        parts[k] = acc.take();
    };
    if (nt == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nt);
        for (int k = 0; k < nt; ++k)
            pool.emplace_back(work, k);
        for (auto& th : pool)
            th.join();
    }
    CoincidenceTensor total = std::move(parts[0]);
    for (int k = 1; k < nt; ++k)
        total = merge(total, parts[k]);
    return total;
}

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

enum class ProjectionKind { Sum, Minus };

/// Projection of Gamma onto sum or minus coordinates over the full sensor.
/// Sum: P(k) = sum_r Gamma(r, k - r), k in [0, 2W-2] x [0, 2H-2].
/// Minus: P(k) = sum_r Gamma(r, r + k), k in [-(W-1), W-1] x ..., stored with
/// the zero offset at the grid centre. The minus k = 0 bin aggregates the
/// Gamma diagonal, which a non-number-resolving camera cannot measure; it is
/// stored as NaN and flagged.
struct Projection {
    ProjectionKind kind = ProjectionKind::Sum;
    Image values;
    bool center_excluded = false;

    int center_x() const { return values.width() / 2; }
    int center_y() const { return values.height() / 2; }
};

inline Projection project(const CoincidenceTensor& t, ProjectionKind kind) {
    const int w = t.width();
    const int h = t.height();
    Projection proj;
    proj.kind = kind;
    proj.values = Image(2 * w - 1, 2 * h - 1, 0.0);
    const double n = static_cast<double>(t.n_frames());
    if (n == 0)
        throw io_error("project: tensor holds no frames");

    for (int ay = 0; ay < h; ++ay)
        for (int ax = 0; ax < w; ++ax) {
            size_t a = static_cast<size_t>(ay) * w + ax;
            for (int by = 0; by < h; ++by)
                for (int bx = 0; bx < w; ++bx) {
                    size_t b = static_cast<size_t>(by) * w + bx;
                    if (b < a)
                        continue;
                    double g = t.gamma(a, b);
                    if (kind == ProjectionKind::Sum) {
                        // (a,b) and (b,a) land in the same sum bin
                        proj.values(ax + bx, ay + by) += (a == b) ? g : 2.0 * g;
                    } else {
                        proj.values((bx - ax) + (w - 1), (by - ay) + (h - 1)) += g;
                        if (a != b)
                            proj.values((ax - bx) + (w - 1), (ay - by) + (h - 1)) += g;
                    }
                }
        }
    if (kind == ProjectionKind::Minus) {
        proj.values(w - 1, h - 1) = std::numeric_limits<double>::quiet_NaN();
        proj.center_excluded = true;
    }
    return proj;
}

// ---------------------------------------------------------------------------
// Per-pixel coincidence maps over the reference (left) half
// ---------------------------------------------------------------------------

/// Conjugate of a left-half pixel: its point reflection through the half
/// centre, expressed in full-sensor coordinates on the right half
/// (post-rotation convention).
inline std::pair<int, int> conjugate_pixel(int half_width, int height, int x, int y) {
    return {half_width + (half_width - 1 - x), height - 1 - y};
}

/// Anti-bunching image: for each left-half pixel, the net coincidence counts
/// with right-half pixels within a square window (Chebyshev radius) around
/// its conjugate. Units: counts above accidentals (Gamma * N).
inline Image antibunch_map(const CoincidenceTensor& t, int neighborhood_radius = 1) {
    if (neighborhood_radius < 0)
        throw config_error("antibunch_map: radius must be >= 0");
    if (t.width() % 2 != 0)
        throw geometry_error("antibunch_map: sensor width must be even");
    const int hw = t.width() / 2;
    const int h = t.height();
    Image img(hw, h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < hw; ++x) {
            auto [cx, cy] = conjugate_pixel(hw, h, x, y);
            double sum = 0.0;
            for (int dy = -neighborhood_radius; dy <= neighborhood_radius; ++dy)
                for (int dx = -neighborhood_radius; dx <= neighborhood_radius; ++dx) {
                    int bx = cx + dx;
                    int by = cy + dy;
                    if (bx < hw || bx >= t.width() || by < 0 || by >= h)
                        continue; // stay on the right half
                    size_t a = static_cast<size_t>(y) * t.width() + x;
                    size_t b = static_cast<size_t>(by) * t.width() + bx;
                    sum += t.gamma_counts(a, b);
                }
            img(x, y) = sum;
        }
    return img;
}

/// Bunching image from adjacent pixels: for each left-half pixel, the mean of
/// the net coincidence counts with its four nearest neighbours in the same
/// half (the same-pixel bin cannot be measured without number resolution).
inline Image bunch_map_adjacent(const CoincidenceTensor& t) {
    if (t.width() % 2 != 0)
        throw geometry_error("bunch_map_adjacent: sensor width must be even");
    const int hw = t.width() / 2;
    const int h = t.height();
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    Image img(hw, h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < hw; ++x) {
            double sum = 0.0;
            int used = 0;
            for (int k = 0; k < 4; ++k) {
                int nx = x + dx[k];
                int ny = y + dy[k];
                if (nx < 0 || nx >= hw || ny < 0 || ny >= h)
                    continue;
                size_t a = static_cast<size_t>(y) * t.width() + x;
                size_t b = static_cast<size_t>(ny) * t.width() + nx;
                sum += t.gamma_counts(a, b);
                ++used;
            }
            img(x, y) = used ? sum / used : 0.0;
        }
    return img;
}

// ---------------------------------------------------------------------------
// Checkpoint format: "HOMT" magic, u16 version, u16 width, u16 height,
// u64 n_frames, u64 pair_updates, then marginal (P u64) and packed intra
// (P(P+1)/2 u64), little-endian.
// ---------------------------------------------------------------------------

struct TensorCheckpointAccess {
    static void save(const CoincidenceTensor& t, const std::string& path) {
        std::ofstream os(path, std::ios::binary);
        if (!os)
            throw io_error("cannot open for writing: " + path);
        uint8_t head[26];
        head[0] = 'H';
        head[1] = 'O';
        head[2] = 'M';
        head[3] = 'T';
        detail::put_le<uint16_t>(head + 4, 1);
        detail::put_le<uint16_t>(head + 6, static_cast<uint16_t>(t.width()));
        detail::put_le<uint16_t>(head + 8, static_cast<uint16_t>(t.height()));
        detail::put_le<uint64_t>(head + 10, t.n_frames());
        detail::put_le<uint64_t>(head + 18, t.pair_updates());
        os.write(reinterpret_cast<const char*>(head), sizeof head);
        write_u64s(os, t.marginal());
        write_u64s(os, t.intra_packed());
        os.close();
        if (!os)
            throw io_error("write failed: " + path);
    }

    static CoincidenceTensor load(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is)
            throw io_error("cannot open: " + path);
        uint8_t head[26];
        is.read(reinterpret_cast<char*>(head), sizeof head);
        if (!is || head[0] != 'H' || head[1] != 'O' || head[2] != 'M' || head[3] != 'T')
            throw io_error("checkpoint " + path + ": bad magic");
        if (detail::get_le<uint16_t>(head + 4) != 1)
            throw io_error("checkpoint " + path + ": unsupported version");
        int w = detail::get_le<uint16_t>(head + 6);
        int h = detail::get_le<uint16_t>(head + 8);
        CoincidenceTensor t(w, h);
        t.n_frames_ = detail::get_le<uint64_t>(head + 10);
        t.pair_updates_ = detail::get_le<uint64_t>(head + 18);
        read_u64s(is, t.marginal_, path);
        read_u64s(is, t.intra_, path);
        return t;
    }

private:
    static void write_u64s(std::ofstream& os, const std::vector<uint64_t>& v) {
        std::vector<uint8_t> buf(v.size() * 8);
        for (size_t i = 0; i < v.size(); ++i)
            detail::put_le<uint64_t>(buf.data() + 8 * i, v[i]);
        os.write(reinterpret_cast<const char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size()));
    }

    static void read_u64s(std::ifstream& is, std::vector<uint64_t>& v, const std::string& path) {
        std::vector<uint8_t> buf(v.size() * 8);
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!is)
            throw io_error("checkpoint " + path + ": truncated");
        for (size_t i = 0; i < v.size(); ++i)
            v[i] = detail::get_le<uint64_t>(buf.data() + 8 * i);
    }
};

inline void save_checkpoint(const CoincidenceTensor& t, const std::string& path) {
    TensorCheckpointAccess::save(t, path);
}

inline CoincidenceTensor load_checkpoint(const std::string& path) {
    return TensorCheckpointAccess::load(path);
}

} // namespace homsim

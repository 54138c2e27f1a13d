#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "homsim/common.hpp"

namespace homsim {

/// One camera exposure: a bit-packed W x H click mask. Rows are packed
/// MSB-first, ceil(W/8) bytes per row, pad bits zero.
class BinaryFrame {
public:
    BinaryFrame() = default;
    BinaryFrame(int width, int height)
        : w_(width), h_(height), stride_(bytes_per_row(width)),
          bytes_(static_cast<size_t>(stride_) * height, 0) {
        if (width <= 0 || height <= 0)
            throw config_error("frame dimensions must be positive");
    }

    static int bytes_per_row(int width) { return (width + 7) / 8; }

    int width() const { return w_; }
    int height() const { return h_; }
    int row_stride() const { return stride_; }
    size_t byte_size() const { return bytes_.size(); }
    std::vector<uint8_t>& bytes() { return bytes_; }
    const std::vector<uint8_t>& bytes() const { return bytes_; }

    void clear() { std::memset(bytes_.data(), 0, bytes_.size()); }

    bool get(int x, int y) const {
        return (bytes_[static_cast<size_t>(y) * stride_ + (x >> 3)] >> (7 - (x & 7))) & 1u;
    }

    void set(int x, int y) {
        bytes_[static_cast<size_t>(y) * stride_ + (x >> 3)] |=
            static_cast<uint8_t>(0x80u >> (x & 7));
    }

    /// Set by flat pixel index (y * width + x).
    void set_index(uint32_t idx) { set(static_cast<int>(idx % w_), static_cast<int>(idx / w_)); }

    uint64_t popcount() const {
        uint64_t n = 0;
        for (uint8_t b : bytes_)
            n += std::popcount(b);
        return n;
    }

    /// Append the flat indices (y * width + x) of all set pixels. Zero bytes
    /// are skipped eight at a time; frames are sparse in normal operation.
    void active_pixels(std::vector<uint32_t>& out) const {
        for (int y = 0; y < h_; ++y) {
            const uint8_t* row = bytes_.data() + static_cast<size_t>(y) * stride_;
            uint32_t base = static_cast<uint32_t>(y) * static_cast<uint32_t>(w_);
            int bx = 0;
            for (; bx + 8 <= stride_; bx += 8) {
                uint64_t word;
                std::memcpy(&word, row + bx, 8);
                if (word == 0)
                    continue;
                scan_bytes(row, bx, bx + 8, base, out);
            }
            if (bx < stride_)
                scan_bytes(row, bx, stride_, base, out);
        }
    }

    friend bool operator==(const BinaryFrame& a, const BinaryFrame& b) {
        return a.w_ == b.w_ && a.h_ == b.h_ && a.bytes_ == b.bytes_;
    }

private:
    static void scan_bytes(const uint8_t* row, int from, int to, uint32_t base,
                           std::vector<uint32_t>& out) {
        for (int bx = from; bx < to; ++bx) {
            uint8_t b = row[bx];
            while (b) {
                int bit = std::countl_zero(b); // uint8_t: counts within 8 bits
                out.push_back(base + static_cast<uint32_t>(bx * 8 + bit));
                b = static_cast<uint8_t>(b & ~(0x80u >> bit));
            }
        }
    }

    int w_ = 0;
    int h_ = 0;
    int stride_ = 0;
    std::vector<uint8_t> bytes_;
};

/// Rotate the right sensor half by 180 degrees (point reflection through the
/// half centre), leaving the left half untouched. After this transform,
/// bunched pairs are spatially correlated and anti-bunched pairs sit at
/// conjugate positions whose sum coordinate is the half centre. Involution.
inline BinaryFrame transform_halves(const BinaryFrame& in) {
    if (in.width() % 2 != 0)
        throw geometry_error("transform_halves: frame width must be even");
    const int hw = in.width() / 2;
    const int h = in.height();
    BinaryFrame out(in.width(), in.height());
    std::vector<uint32_t> active;
    in.active_pixels(active);
    for (uint32_t idx : active) {
        int x = static_cast<int>(idx) % in.width();
        int y = static_cast<int>(idx) / in.width();
        if (x < hw)
            out.set(x, y);
        else
            out.set(hw + (hw - 1 - (x - hw)), h - 1 - y);
    }
    return out;
}

/// Flat-index remap table equivalent to transform_halves; lets the
/// accumulator rotate click coordinates without rebuilding frames.
inline std::vector<uint32_t> half_rotation_table(int width, int height) {
    if (width % 2 != 0)
        throw geometry_error("half_rotation_table: width must be even");
    const int hw = width / 2;
    std::vector<uint32_t> t(static_cast<size_t>(width) * height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            uint32_t src = static_cast<uint32_t>(y * width + x);
            if (x < hw)
                t[src] = src;
            else
                t[src] = static_cast<uint32_t>((height - 1 - y) * width + hw +
                                               (hw - 1 - (x - hw)));
        }
    return t;
}

/// Stream header: geometry plus the provenance of a simulated acquisition.
struct FrameStreamHeader {
    uint16_t width_px = 0;
    uint16_t height_px = 0;
    uint64_t frame_count = 0;
    uint64_t seed = 0;
    double stage_delay_um = 0.0;
};

/// In-memory frame sequence.
struct FrameStream {
    FrameStreamHeader header;
    std::vector<BinaryFrame> frames;
};

// ---------------------------------------------------------------------------
// HOMF container: "HOMF" magic, u16 version, u16 width, u16 height,
// u64 frame_count, u64 seed, f64 stage_delay_um, all little-endian, then
// frame_count frames of ceil(W/8)*H bytes, row-major, MSB-first in each byte.
// ---------------------------------------------------------------------------

inline constexpr size_t kHomfHeaderBytes = 34;
inline constexpr uint16_t kHomfVersion = 1;

namespace detail {

template <class T>
void put_le(uint8_t* p, T v) {
    for (size_t i = 0; i < sizeof(T); ++i)
        p[i] = static_cast<uint8_t>(v >> (8 * i));
}

template <class T>
T get_le(const uint8_t* p) {
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<T>(p[i]) << (8 * i);
    return v;
}

inline void put_le_f64(uint8_t* p, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_le(p, bits);
}

inline double get_le_f64(const uint8_t* p) {
    uint64_t bits = get_le<uint64_t>(p);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace detail

inline void write_homf_header(std::ostream& os, const FrameStreamHeader& h) {
    uint8_t buf[kHomfHeaderBytes];
    buf[0] = 'H';
    buf[1] = 'O';
    buf[2] = 'M';
    buf[3] = 'F';
    detail::put_le(buf + 4, kHomfVersion);
    detail::put_le(buf + 6, h.width_px);
    detail::put_le(buf + 8, h.height_px);
    detail::put_le(buf + 10, h.frame_count);
    detail::put_le(buf + 18, h.seed);
    detail::put_le_f64(buf + 26, h.stage_delay_um);
    os.write(reinterpret_cast<const char*>(buf), sizeof buf);
}

inline FrameStreamHeader read_homf_header(std::istream& is, const std::string& what = "stream") {
    uint8_t buf[kHomfHeaderBytes];
    is.read(reinterpret_cast<char*>(buf), sizeof buf);
    if (!is)
        throw io_error("HOMF " + what + ": truncated header");
    if (buf[0] != 'H' || buf[1] != 'O' || buf[2] != 'M' || buf[3] != 'F')
        throw io_error("HOMF " + what + ": bad magic");
    uint16_t version = detail::get_le<uint16_t>(buf + 4);
    if (version != kHomfVersion)
        throw io_error("HOMF " + what + ": unsupported version " + std::to_string(version));
    FrameStreamHeader h;
    h.width_px = detail::get_le<uint16_t>(buf + 6);
    h.height_px = detail::get_le<uint16_t>(buf + 8);
    h.frame_count = detail::get_le<uint64_t>(buf + 10);
    h.seed = detail::get_le<uint64_t>(buf + 18);
    h.stage_delay_um = detail::get_le_f64(buf + 26);
    if (h.width_px == 0 || h.height_px == 0)
        throw io_error("HOMF " + what + ": zero geometry");
    return h;
}

/// Streaming writer; the frame count is declared up front in the header.
class HomfWriter {
public:
    HomfWriter(const std::string& path, const FrameStreamHeader& header)
        : os_(path, std::ios::binary), header_(header), path_(path) {
        if (!os_)
            throw io_error("cannot open for writing: " + path);
        write_homf_header(os_, header_);
    }

    void write(const BinaryFrame& f) {
        if (f.width() != header_.width_px || f.height() != header_.height_px)
            throw geometry_error("HOMF write: frame geometry mismatch in " + path_);
        os_.write(reinterpret_cast<const char*>(f.bytes().data()),
                  static_cast<std::streamsize>(f.byte_size()));
        ++written_;
    }

    void close() {
        if (written_ != header_.frame_count)
            throw io_error("HOMF write: frame count mismatch in " + path_ + " (declared " +
                           std::to_string(header_.frame_count) + ", wrote " +
                           std::to_string(written_) + ")");
        os_.close();
        if (!os_)
            throw io_error("write failed: " + path_);
    }

private:
    std::ofstream os_;
    FrameStreamHeader header_;
    std::string path_;
    uint64_t written_ = 0;
};

/// Streaming reader over a HOMF file or any istream (e.g. stdin).
class HomfReader {
public:
    explicit HomfReader(const std::string& path)
        : file_(std::make_unique<std::ifstream>(path, std::ios::binary)), is_(file_.get()),
          path_(path) {
        if (!*file_)
            throw io_error("cannot open: " + path);
        header_ = read_homf_header(*is_, path);
    }

    explicit HomfReader(std::istream& is, const std::string& what = "stream")
        : is_(&is), path_(what) {
        header_ = read_homf_header(*is_, what);
    }

    const FrameStreamHeader& header() const { return header_; }
    uint64_t frames_read() const { return read_; }

    size_t frame_bytes() const {
        return static_cast<size_t>(BinaryFrame::bytes_per_row(header_.width_px)) *
               header_.height_px;
    }

    /// Read the next frame into f; returns false at the declared end.
    bool next(BinaryFrame& f) {
        if (read_ >= header_.frame_count)
            return false;
        if (f.width() != header_.width_px || f.height() != header_.height_px)
            f = BinaryFrame(header_.width_px, header_.height_px);
        is_->read(reinterpret_cast<char*>(f.bytes().data()),
                  static_cast<std::streamsize>(f.byte_size()));
        if (!*is_)
            throw io_error("HOMF " + path_ + ": truncated at frame " + std::to_string(read_) +
                           " of " + std::to_string(header_.frame_count));
        ++read_;
        return true;
    }

    /// Seek to a frame index (file-backed readers only).
    void seek(uint64_t frame_index) {
        if (!file_)
            throw io_error("HOMF " + path_ + ": seek on non-seekable stream");
        file_->clear();
        file_->seekg(static_cast<std::streamoff>(kHomfHeaderBytes + frame_index * frame_bytes()));
        read_ = frame_index;
    }

    FrameStream read_all() {
        FrameStream s;
        s.header = header_;
        s.frames.reserve(header_.frame_count);
        BinaryFrame f;
        while (next(f))
            s.frames.push_back(f);
        return s;
    }

private:
    std::unique_ptr<std::ifstream> file_;
    std::istream* is_ = nullptr;
    std::string path_;
    FrameStreamHeader header_;
    uint64_t read_ = 0;
};

inline void write_homf(const std::string& path, const FrameStream& stream) {
    FrameStreamHeader h = stream.header;
    h.frame_count = stream.frames.size();
    HomfWriter w(path, h);
    for (const auto& f : stream.frames)
        w.write(f);
    w.close();
}

} // namespace homsim

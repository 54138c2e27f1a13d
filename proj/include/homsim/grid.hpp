#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "homsim/common.hpp"

namespace homsim {

/// Dense row-major 2D array. Used for depth maps, coincidence images,
/// projections and masks.
template <class T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, T init = T{})
        : w_(width), h_(height), data_(static_cast<size_t>(width) * height, init) {
        if (width <= 0 || height <= 0)
            throw config_error("grid dimensions must be positive");
    }

    int width() const { return w_; }
    int height() const { return h_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& operator()(int x, int y) { return data_[static_cast<size_t>(y) * w_ + x]; }
    const T& operator()(int x, int y) const { return data_[static_cast<size_t>(y) * w_ + x]; }

    T& at(int x, int y) {
        check(x, y);
        return (*this)(x, y);
    }
    const T& at(int x, int y) const {
        check(x, y);
        return (*this)(x, y);
    }

    bool in_bounds(int x, int y) const { return x >= 0 && x < w_ && y >= 0 && y < h_; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Grid& other) const { return w_ == other.w_ && h_ == other.h_; }

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.w_ == b.w_ && a.h_ == b.h_ && a.data_ == b.data_;
    }

private:
    void check(int x, int y) const {
        if (!in_bounds(x, y))
            throw std::out_of_range("grid index (" + std::to_string(x) + "," +
                                    std::to_string(y) + ") outside " + std::to_string(w_) +
                                    "x" + std::to_string(h_));
    }

    int w_ = 0;
    int h_ = 0;
    std::vector<T> data_;
};

using Image = Grid<double>;
using Mask = Grid<uint8_t>;

} // namespace homsim

#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <vector>

namespace vpr {

// Dense row-major tensor of doubles. Rank is almost always 1 or 2 here
// ([batch, dim] activations, [in, out] weight matrices, [dim] vectors).
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int64_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        assert(static_cast<int64_t>(data.size()) == count(shape));
    }

    static int64_t count(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t v : s) n *= v;
        return n;
    }

    static Tensor zeros(std::vector<int64_t> s) {
        int64_t n = count(s);
        return Tensor(std::move(s), std::vector<double>(static_cast<size_t>(n), 0.0));
    }
    static Tensor full(std::vector<int64_t> s, double v) {
        int64_t n = count(s);
        return Tensor(std::move(s), std::vector<double>(static_cast<size_t>(n), v));
    }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    // Rows/cols under the [batch, dim] convention; rank-1 tensors are one row.
    int64_t rows() const { return rank() == 2 ? shape[0] : 1; }
    int64_t cols() const { return rank() == 2 ? shape[1] : (rank() == 1 ? shape[0] : 1); }

    double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
    double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

}  // namespace vpr

#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace gazelab {

// Dense row-major tensor of 64-bit floats. Images are [H,W,C], warp map
// planes are [H,W], feature vectors are [N].
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(numel_of(shape), 0.0) {}
    Tensor(std::vector<int> s, std::vector<double> data);

    static std::size_t numel_of(const std::vector<int>& s);
    static Tensor full(std::vector<int> s, double value);

    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    std::size_t numel() const { return v.size(); }

    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }

    // [H,W,C] access
    double& at(int y, int x, int c) {
        return v[(static_cast<std::size_t>(y) * shape[1] + x) * shape[2] + c];
    }
    const double& at(int y, int x, int c) const {
        return v[(static_cast<std::size_t>(y) * shape[1] + x) * shape[2] + c];
    }
    // [H,W] access
    double& at(int y, int x) { return v[static_cast<std::size_t>(y) * shape[1] + x]; }
    const double& at(int y, int x) const { return v[static_cast<std::size_t>(y) * shape[1] + x]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
    bool bit_equal(const Tensor& o) const;
};

std::string shape_str(const std::vector<int>& s);

// Throws std::invalid_argument naming both shapes when they differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

inline double mean_abs_diff(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += std::fabs(a.v[i] - b.v[i]);
    return a.numel() ? s / static_cast<double>(a.numel()) : 0.0;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a.v[i] - b.v[i]));
    return m;
}

}  // namespace gazelab

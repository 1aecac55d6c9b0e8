#include "gazelab/tensor.hpp"

#include <cstring>
#include <stdexcept>

namespace gazelab {

std::size_t Tensor::numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d <= 0) throw std::invalid_argument("tensor dimension must be positive, got " + shape_str(s));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> s, std::vector<double> data) : shape(std::move(s)), v(std::move(data)) {
    if (v.size() != numel_of(shape))
        throw std::invalid_argument("tensor data length " + std::to_string(v.size()) +
                                    " does not match shape " + shape_str(shape));
}

Tensor Tensor::full(std::vector<int> s, double value) {
    Tensor t(std::move(s));
    for (double& x : t.v) x = value;
    return t;
}

bool Tensor::all_finite() const {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

bool Tensor::bit_equal(const Tensor& o) const {
    if (shape != o.shape) return false;
    return std::memcmp(v.data(), o.v.data(), v.size() * sizeof(double)) == 0;
}

std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_str(a.shape) +
                                    " vs " + shape_str(b.shape));
}

}  // namespace gazelab

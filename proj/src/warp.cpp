#include "gazelab/warp.hpp"

#include <cmath>
#include <stdexcept>

namespace gazelab {

namespace {

void require_field(const Tensor& image, const WarpField& field, const char* what) {
    if (image.rank() != 3)
        throw std::invalid_argument(std::string(what) + ": image " + shape_str(image.shape) +
                                    " must be [H,W,C]");
    if (field.mx.rank() != 2 || !field.mx.same_shape(field.my))
        throw std::invalid_argument(std::string(what) + ": field planes " + shape_str(field.mx.shape) +
                                    " vs " + shape_str(field.my.shape) + " must be equal [H,W]");
    if (field.mx.dim(0) != image.dim(0) || field.mx.dim(1) != image.dim(1))
        throw std::invalid_argument(std::string(what) + ": field " + shape_str(field.mx.shape) +
                                    " does not match image " + shape_str(image.shape));
}

}  // namespace

WarpField identity_field(int h, int w) {
    if (h < 1 || w < 1) throw std::invalid_argument("identity_field: extents must be >= 1");
    WarpField f{Tensor({h, w}), Tensor({h, w})};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            f.mx.at(y, x) = static_cast<double>(x);
            f.my.at(y, x) = static_cast<double>(y);
        }
    return f;
}

Tensor sample_bilinear(const Tensor& image, const WarpField& field) {
    require_field(image, field, "sample_bilinear");
    const int H = image.dim(0), W = image.dim(1), C = image.dim(2);
    Tensor out({H, W, C});
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double mx = field.mx.at(y, x);
            const double my = field.my.at(y, x);
            const int fx = static_cast<int>(std::floor(mx));
            const int fy = static_cast<int>(std::floor(my));
            const double dx = mx - fx;
            const double dy = my - fy;
            const bool x0 = fx >= 0 && fx < W, x1 = fx + 1 >= 0 && fx + 1 < W;
            const bool y0 = fy >= 0 && fy < H, y1 = fy + 1 >= 0 && fy + 1 < H;
            const double w00 = (1.0 - dx) * (1.0 - dy);
            const double w10 = dx * (1.0 - dy);
            const double w01 = (1.0 - dx) * dy;
            const double w11 = dx * dy;
            double* dst = &out.at(y, x, 0);
            for (int c = 0; c < C; ++c) {
                const double v00 = (x0 && y0) ? image.at(fy, fx, c) : 0.0;
                const double v10 = (x1 && y0) ? image.at(fy, fx + 1, c) : 0.0;
                const double v01 = (x0 && y1) ? image.at(fy + 1, fx, c) : 0.0;
                const double v11 = (x1 && y1) ? image.at(fy + 1, fx + 1, c) : 0.0;
                dst[c] = w00 * v00 + w10 * v10 + w01 * v01 + w11 * v11;
            }
        }
    }
    return out;
}

SampleGrads sample_bilinear_backward(const Tensor& image, const WarpField& field,
                                     const Tensor& grad_out) {
    require_field(image, field, "sample_bilinear_backward");
    require_same_shape(image, grad_out, "sample_bilinear_backward grad_out");
    const int H = image.dim(0), W = image.dim(1), C = image.dim(2);
    SampleGrads g{Tensor({H, W, C}), Tensor({H, W}), Tensor({H, W})};
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double mx = field.mx.at(y, x);
            const double my = field.my.at(y, x);
            const int fx = static_cast<int>(std::floor(mx));
            const int fy = static_cast<int>(std::floor(my));
            const double dx = mx - fx;
            const double dy = my - fy;
            const bool x0 = fx >= 0 && fx < W, x1 = fx + 1 >= 0 && fx + 1 < W;
            const bool y0 = fy >= 0 && fy < H, y1 = fy + 1 >= 0 && fy + 1 < H;
            const double w00 = (1.0 - dx) * (1.0 - dy);
            const double w10 = dx * (1.0 - dy);
            const double w01 = (1.0 - dx) * dy;
            const double w11 = dx * dy;
            const double* go = &grad_out.at(y, x, 0);
            double gmx = 0.0, gmy = 0.0;
            for (int c = 0; c < C; ++c) {
                const double v00 = (x0 && y0) ? image.at(fy, fx, c) : 0.0;
                const double v10 = (x1 && y0) ? image.at(fy, fx + 1, c) : 0.0;
                const double v01 = (x0 && y1) ? image.at(fy + 1, fx, c) : 0.0;
                const double v11 = (x1 && y1) ? image.at(fy + 1, fx + 1, c) : 0.0;
                const double gc = go[c];
                if (x0 && y0) g.image.at(fy, fx, c) += gc * w00;
                if (x1 && y0) g.image.at(fy, fx + 1, c) += gc * w10;
                if (x0 && y1) g.image.at(fy + 1, fx, c) += gc * w01;
                if (x1 && y1) g.image.at(fy + 1, fx + 1, c) += gc * w11;
                gmx += gc * ((1.0 - dy) * (v10 - v00) + dy * (v11 - v01));
                gmy += gc * ((1.0 - dx) * (v01 - v00) + dx * (v11 - v10));
            }
            g.mx.at(y, x) = gmx;
            g.my.at(y, x) = gmy;
        }
    }
    return g;
}

}  // namespace gazelab

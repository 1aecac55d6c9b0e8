#pragma once

#include <string>

#include "gazelab/tensor.hpp"

namespace gazelab {

// 8-bit binary PGM (P5). Images quantize round(v*255) and dequantize v/255.
// Segmentation maps store class indices {0,1,2} with maxval 2.

void write_pgm(const std::string& path, const Tensor& image);
Tensor read_pgm(const std::string& path);

void write_seg_pgm(const std::string& path, const Tensor& seg);
Tensor read_seg_pgm(const std::string& path);

}  // namespace gazelab

#pragma once

#include <string>
#include <vector>

#include "gazelab/params.hpp"

namespace gazelab {

// Weights container, little-endian binary:
//   magic "GZR1" | u32 version | u32 branch_count
//   per branch: u32 name_len, name bytes (UTF-8), u32 tensor_count,
//   per tensor: u32 rank, u32 dims[rank], f64 payload[]
// Round-trips bit-exactly.

inline constexpr std::uint32_t kWeightsVersion = 1;

void save_params(const ParamSet& params, const std::string& path);

struct RawBranch {
    std::string name;
    std::vector<Tensor> tensors;
};

std::vector<RawBranch> load_raw_params(const std::string& path);

// Pours tensors from `path` into an architecture skeleton with matching
// branch names, tensor counts and shapes. Throws DataError on any mismatch.
void load_params_into(ParamSet& params, const std::string& path);

}  // namespace gazelab

#include "gazelab/serialize.hpp"

#include <cstring>
#include <fstream>

#include "gazelab/errors.hpp"

namespace gazelab {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError(path + ": truncated weights file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is, const std::string& path) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw DataError(path + ": truncated weights file");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

void put_tensor(std::ostream& os, const Tensor& t) {
    put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape) put_u32(os, static_cast<std::uint32_t>(d));
    for (double x : t.v) put_f64(os, x);
}

Tensor get_tensor(std::istream& is, const std::string& path) {
    const std::uint32_t rank = get_u32(is, path);
    if (rank > 8) throw DataError(path + ": implausible tensor rank " + std::to_string(rank));
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(get_u32(is, path));
    Tensor t(shape);
    for (double& x : t.v) x = get_f64(is, path);
    return t;
}

}  // namespace

void save_params(const ParamSet& params, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError(path + ": cannot open for writing");
    os.write("GZR1", 4);
    put_u32(os, kWeightsVersion);
    put_u32(os, static_cast<std::uint32_t>(params.branches.size()));
    for (const auto& b : params.branches) {
        put_u32(os, static_cast<std::uint32_t>(b.name.size()));
        os.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
        std::uint32_t count = 0;
        for (const auto& l : b.layers) count += static_cast<std::uint32_t>(l.params.size());
        put_u32(os, count);
        for (const auto& l : b.layers)
            for (const auto& t : l.params) put_tensor(os, t);
    }
    if (!os) throw DataError(path + ": write failed");
}

std::vector<RawBranch> load_raw_params(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError(path + ": cannot open");
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "GZR1", 4) != 0)
        throw DataError(path + ": not a GZR1 weights file");
    const std::uint32_t version = get_u32(is, path);
    if (version != kWeightsVersion)
        throw DataError(path + ": unsupported weights version " + std::to_string(version));
    const std::uint32_t nbranches = get_u32(is, path);
    std::vector<RawBranch> out;
    out.reserve(nbranches);
    for (std::uint32_t i = 0; i < nbranches; ++i) {
        RawBranch rb;
        const std::uint32_t len = get_u32(is, path);
        rb.name.resize(len);
        if (!is.read(rb.name.data(), len)) throw DataError(path + ": truncated weights file");
        const std::uint32_t count = get_u32(is, path);
        for (std::uint32_t j = 0; j < count; ++j) rb.tensors.push_back(get_tensor(is, path));
        out.push_back(std::move(rb));
    }
    return out;
}

void load_params_into(ParamSet& params, const std::string& path) {
    auto raw = load_raw_params(path);
    if (raw.size() != params.branches.size())
        throw DataError(path + ": expected " + std::to_string(params.branches.size()) +
                        " branches, file has " + std::to_string(raw.size()));
    for (std::size_t i = 0; i < raw.size(); ++i) {
        Branch& b = params.branches[i];
        if (raw[i].name != b.name)
            throw DataError(path + ": branch '" + raw[i].name + "' where '" + b.name + "' expected");
        std::size_t idx = 0;
        for (auto& l : b.layers)
            for (auto& t : l.params) {
                if (idx >= raw[i].tensors.size())
                    throw DataError(path + ": branch '" + b.name + "' has too few tensors");
                Tensor& src = raw[i].tensors[idx++];
                if (src.shape != t.shape)
                    throw DataError(path + ": tensor shape " + shape_str(src.shape) +
                                    " does not match expected " + shape_str(t.shape));
                t = std::move(src);
            }
        if (idx != raw[i].tensors.size())
            throw DataError(path + ": branch '" + b.name + "' has extra tensors");
    }
}

}  // namespace gazelab

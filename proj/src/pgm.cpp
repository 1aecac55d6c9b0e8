#include "gazelab/pgm.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "gazelab/errors.hpp"

namespace gazelab {

namespace {

void write_header(std::ofstream& os, int w, int h, int maxval) {
    os << "P5\n" << w << " " << h << "\n" << maxval << "\n";
}

struct PgmData {
    int w = 0, h = 0, maxval = 0;
    std::string bytes;
};

PgmData read_p5(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError(path + ": cannot open");
    std::string magic;
    is >> magic;
    if (magic != "P5") throw DataError(path + ": not a binary PGM (P5) file");
    PgmData d;
    is >> d.w >> d.h >> d.maxval;
    if (!is || d.w <= 0 || d.h <= 0 || d.maxval <= 0 || d.maxval > 255)
        throw DataError(path + ": malformed PGM header");
    is.get();  // single whitespace after maxval
    d.bytes.resize(static_cast<std::size_t>(d.w) * d.h);
    if (!is.read(d.bytes.data(), static_cast<std::streamsize>(d.bytes.size())))
        throw DataError(path + ": truncated PGM payload");
    return d;
}

}  // namespace

void write_pgm(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || image.dim(2) != 1)
        throw std::invalid_argument("write_pgm: image " + shape_str(image.shape) + " must be [H,W,1]");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError(path + ": cannot open for writing");
    write_header(os, image.dim(1), image.dim(0), 255);
    std::string bytes(image.numel(), '\0');
    for (std::size_t i = 0; i < image.numel(); ++i) {
        const double q = std::round(std::clamp(image.v[i], 0.0, 1.0) * 255.0);
        bytes[i] = static_cast<char>(static_cast<unsigned char>(q));
    }
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw DataError(path + ": write failed");
}

Tensor read_pgm(const std::string& path) {
    const PgmData d = read_p5(path);
    Tensor img({d.h, d.w, 1});
    for (std::size_t i = 0; i < img.numel(); ++i)
        img.v[i] = static_cast<unsigned char>(d.bytes[i]) / static_cast<double>(d.maxval);
    return img;
}

void write_seg_pgm(const std::string& path, const Tensor& seg) {
    if (seg.rank() != 3 || seg.dim(2) != 3)
        throw std::invalid_argument("write_seg_pgm: seg " + shape_str(seg.shape) + " must be [H,W,3]");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError(path + ": cannot open for writing");
    write_header(os, seg.dim(1), seg.dim(0), 2);
    std::string bytes(static_cast<std::size_t>(seg.dim(0)) * seg.dim(1), '\0');
    std::size_t i = 0;
    for (int r = 0; r < seg.dim(0); ++r)
        for (int c = 0; c < seg.dim(1); ++c, ++i) {
            int cls = 0;
            for (int k = 1; k < 3; ++k)
                if (seg.at(r, c, k) > seg.at(r, c, cls)) cls = k;
            bytes[i] = static_cast<char>(cls);
        }
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw DataError(path + ": write failed");
}

Tensor read_seg_pgm(const std::string& path) {
    const PgmData d = read_p5(path);
    Tensor seg({d.h, d.w, 3});
    std::size_t i = 0;
    for (int r = 0; r < d.h; ++r)
        for (int c = 0; c < d.w; ++c, ++i) {
            const int cls = static_cast<unsigned char>(d.bytes[i]);
            if (cls > 2) throw DataError(path + ": segmentation class out of range");
            seg.at(r, c, cls) = 1.0;
        }
    return seg;
}

}  // namespace gazelab

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "gazelab/dataset.hpp"
#include "gazelab/errors.hpp"
#include "gazelab/eyesim.hpp"
#include "gazelab/pgm.hpp"
#include "gazelab/rng.hpp"

using namespace gazelab;
namespace fs = std::filesystem;

namespace {

PersonProfile fixed_profile() {
    PersonProfile p;
    p.id = 1;
    p.skin_albedo = 0.55;
    p.sclera_albedo = 0.9;
    p.iris_albedo = 0.2;
    p.eyeball_radius_px = 20.0;
    p.aperture = 0.8;
    return p;
}

IllumParams flat_illum() { return {0, 1.0, 0.0, 0.0}; }

int count_class(const Tensor& seg, int cls) {
    int n = 0;
    for (int r = 0; r < seg.dim(0); ++r)
        for (int c = 0; c < seg.dim(1); ++c)
            if (seg.at(r, c, cls) > 0.5) ++n;
    return n;
}

// Independent even-odd scanline rasterizer counting pixel centers inside a
// polygon; the oracle for the convex-fit iris region.
int scanline_count(const std::vector<Point>& poly, int h, int w) {
    int count = 0;
    const int n = static_cast<int>(poly.size());
    for (int r = 0; r < h; ++r) {
        const double y = r + 0.5;
        std::vector<double> xs;
        for (int i = 0; i < n; ++i) {
            const Point& a = poly[i];
            const Point& b = poly[(i + 1) % n];
            if ((a.y <= y && b.y > y) || (b.y <= y && a.y > y))
                xs.push_back(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t i = 0; i + 1 < xs.size(); i += 2)
            for (int c = 0; c < w; ++c) {
                const double x = c + 0.5;
                if (x >= xs[i] && x <= xs[i + 1]) ++count;
            }
    }
    return count;
}

std::vector<Point> octagon(Point center, double radius) {
    std::vector<Point> pts;
    for (int k = 0; k < 8; ++k) {
        const double th = 2.0 * kPi * k / 8.0;
        pts.push_back({center.x + radius * std::cos(th), center.y + radius * std::sin(th)});
    }
    return pts;
}

std::vector<Point> wide_open_upper() {
    // corners + 4 points on a tall parabola, apex rows well clear of center
    std::vector<Point> pts = {{4, 16}};
    for (int j = 1; j <= 4; ++j) {
        const double x = 4 + j * 56.0 / 5.0;
        const double t = (x - 32.0) / 28.0;
        pts.push_back({x, 16.0 + (3.0 - 16.0) * (1.0 - t * t)});
    }
    pts.push_back({60, 16});
    return pts;
}

std::vector<Point> wide_open_lower() {
    std::vector<Point> pts = {{4, 16}};
    for (int j = 1; j <= 4; ++j) {
        const double x = 4 + j * 56.0 / 5.0;
        const double t = (x - 32.0) / 28.0;
        pts.push_back({x, 16.0 + (29.0 - 16.0) * (1.0 - t * t)});
    }
    pts.push_back({60, 16});
    return pts;
}

}  // namespace

TEST_CASE("centered gaze puts the iris centroid at the image middle") {
    const EyeSample s = render(fixed_profile(), {0, 0}, {0, 0}, flat_illum(), Domain::Synthetic, 1);
    const Point c = seg_iris_centroid(s.seg);
    CHECK(std::fabs(c.x - 32.0) < 1.0);
    CHECK(std::fabs(c.y - 16.0) < 1.0);
}

TEST_CASE("render is deterministic") {
    const auto go = [] {
        return render(fixed_profile(), {0.05, -0.1}, {0.1, 0.2}, make_illum(3, 9), Domain::PseudoReal, 42);
    };
    const EyeSample a = go();
    const EyeSample b = go();
    CHECK(a.image.bit_equal(b.image));
    CHECK(a.seg.bit_equal(b.seg));
    CHECK(a.gaze.pitch == b.gaze.pitch);
    for (int i = 0; i < 8; ++i) {
        CHECK(a.landmarks.iris[i].x == b.landmarks.iris[i].x);
        CHECK(a.landmarks.iris[i].y == b.landmarks.iris[i].y);
    }
}

TEST_CASE("iris centroid x is strictly increasing over a yaw sweep") {
    double prev_x = -1e9;
    for (int deg = -20; deg <= 20; deg += 5) {
        const EyeSample s =
            render(fixed_profile(), {0, 0}, {0, deg_to_rad(deg)}, flat_illum(), Domain::Synthetic, 1);
        const Point c = seg_iris_centroid(s.seg);
        CHECK(c.x > prev_x);
        prev_x = c.x;
    }
}

TEST_CASE("label equals optical gaze plus kappa exactly") {
    PersonProfile p = fixed_profile();
    p.kappa = {deg_to_rad(1.5), deg_to_rad(-0.75)};
    const GazeAngles opt{0.1, -0.2};
    const EyeSample s = render(p, {0, 0}, opt, flat_illum(), Domain::Synthetic, 1);
    CHECK(s.gaze.pitch == opt.pitch + p.kappa.pitch);
    CHECK(s.gaze.yaw == opt.yaw + p.kappa.yaw);
    CHECK(s.optical.pitch == opt.pitch);
}

TEST_CASE("segmentation classes partition the pixel grid") {
    Rng rng(5);
    for (int rep = 0; rep < 5; ++rep) {
        const PersonProfile p = sample_profile(rep, 77, true);
        const EyeSample s = render(p, {0.05, -0.05}, {rng.uniform(-0.2, 0.2), rng.uniform(-0.3, 0.3)},
                                   make_illum(rep, 7), Domain::Synthetic, 3);
        for (int r = 0; r < s.seg.dim(0); ++r)
            for (int c = 0; c < s.seg.dim(1); ++c) {
                const double sum =
                    s.seg.at(r, c, 0) + s.seg.at(r, c, 1) + s.seg.at(r, c, 2);
                CHECK(sum == 1.0);
                for (int k = 0; k < 3; ++k)
                    CHECK((s.seg.at(r, c, k) == 0.0 || s.seg.at(r, c, k) == 1.0));
            }
    }
}

TEST_CASE("iris polygon fully inside the opening matches the rasterization oracle") {
    const auto iris = octagon({32, 16}, 5.0);
    const auto upper = wide_open_upper();
    const auto lower = wide_open_lower();
    const Tensor seg = segmentation_of(iris, upper, lower, 32, 64);
    const int got = count_class(seg, kSegIris);
    const int want = scanline_count(iris, 32, 64);
    CHECK(std::abs(got - want) <= 8);  // ties on polygon edges only
    CHECK(got > 50);
}

TEST_CASE("closed lids give zero sclera and zero iris") {
    // aperture -> 0 fixture: lid curves collapse toward the corner line
    const double a = 0.001;
    std::vector<Point> upper = {{4, 16}}, lower = {{4, 16}};
    for (int j = 1; j <= 4; ++j) {
        const double x = 4 + j * 56.0 / 5.0;
        const double t = (x - 32.0) / 28.0;
        upper.push_back({x, 16.0 - 9.0 * a * (1.0 - t * t)});
        lower.push_back({x, 16.0 + 6.0 * a * (1.0 - t * t)});
    }
    upper.push_back({60, 16});
    lower.push_back({60, 16});
    const Tensor seg = segmentation_of(octagon({32, 16}, 8.0), upper, lower, 32, 64);
    CHECK(count_class(seg, kSegSclera) == 0);
    CHECK(count_class(seg, kSegIris) == 0);
    CHECK(count_class(seg, kSegBackground) == 32 * 64);
}

TEST_CASE("degenerate landmark sets are rejected") {
    const std::vector<Point> line = {{4, 16}, {20, 16}, {40, 16}, {60, 16}};
    CHECK_THROWS_AS(segmentation_of(line, wide_open_upper(), wide_open_lower(), 32, 64),
                    std::invalid_argument);
    CHECK_THROWS_AS(segmentation_of(octagon({32, 16}, 5.0), line, line, 32, 64),
                    std::invalid_argument);
    const std::vector<Point> two = {{1, 1}, {2, 2}};
    CHECK_THROWS_AS(segmentation_of(two, wide_open_upper(), wide_open_lower(), 32, 64),
                    std::invalid_argument);
}

TEST_CASE("an iris projected fully outside the opening is rejected") {
    CHECK_THROWS_AS(render(fixed_profile(), {kPi / 4.0, 0}, {-kPi / 3.0, 0}, flat_illum(),
                           Domain::Synthetic, 1),
                    DataError);
}

TEST_CASE("angle and profile ranges are enforced") {
    CHECK_THROWS_AS(render(fixed_profile(), {0, 0}, {kPi, 0}, flat_illum(), Domain::Synthetic, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(render(fixed_profile(), {kPi / 2.0, 0}, {0, 0}, flat_illum(), Domain::Synthetic, 1),
                    std::invalid_argument);
    PersonProfile bad = fixed_profile();
    bad.aperture = 0.1;
    CHECK_THROWS_AS(render(bad, {0, 0}, {0, 0}, flat_illum(), Domain::Synthetic, 1),
                    std::invalid_argument);
}

TEST_CASE("landmark coordinates stay inside the image bounds") {
    Rng rng(6);
    for (int rep = 0; rep < 10; ++rep) {
        const PersonProfile p = sample_profile(rep, 11, true);
        try {
            const EyeSample s =
                render(p, {rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15)},
                       {rng.uniform(-0.35, 0.35), rng.uniform(-0.42, 0.42)}, make_illum(rep, 5),
                       Domain::Synthetic, 2);
            for (const Point& q : s.landmarks.iris) {
                CHECK(q.x >= 0.0);
                CHECK(q.x <= 64.0);
                CHECK(q.y >= 0.0);
                CHECK(q.y <= 32.0);
            }
            for (const Point& q : s.landmarks.lids) {
                CHECK(q.x >= 0.0);
                CHECK(q.x <= 64.0);
                CHECK(q.y >= 0.0);
                CHECK(q.y <= 32.0);
            }
            for (double v : s.image.v) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        } catch (const DataError&) {
            // extreme draw; rejection is the documented behavior
        }
    }
}

TEST_CASE("group samples share person, head and illumination metadata") {
    const PersonProfile p = fixed_profile();
    const std::vector<GazeAngles> gazes = {{0, -0.2}, {0, 0}, {0.1, 0.2}};
    const AlignedGroup g = make_group(p, {0.02, -0.03}, make_illum(1, 4), gazes, Domain::Synthetic, 9);
    REQUIRE(g.samples.size() == 3);
    for (const EyeSample& s : g.samples) {
        CHECK(s.person_id == p.id);
        CHECK(s.illum_id == 1);
        CHECK(s.head.pitch == 0.02);
        CHECK(s.domain == Domain::Synthetic);
    }
    CHECK_THROWS_AS(make_group(p, {0, 0}, flat_illum(), std::vector<GazeAngles>{{0, 0}},
                               Domain::Synthetic, 1),
                    std::invalid_argument);
}

TEST_CASE("within a group, images differ only at gaze-dependent pixels") {
    // gaze-dependent mask: pixels whose segmentation class changed, plus the
    // iris+pupil region of either sample (the pupil disc moves inside the
    // class), dilated by one pixel
    Rng rng(13);
    for (int rep = 0; rep < 10; ++rep) {
        const PersonProfile p = sample_profile(rep + 100, 21, true);
        const HeadPose head{rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
        std::vector<GazeAngles> gazes;
        for (int i = 0; i < 2; ++i)
            gazes.push_back({rng.uniform(-0.2, 0.2), rng.uniform(-0.3, 0.3)});
        AlignedGroup g;
        try {
            g = make_group(p, head, make_illum(rep, 31), gazes, Domain::Synthetic, rep);
        } catch (const DataError&) {
            continue;
        }
        const EyeSample& a = g.samples[0];
        const EyeSample& b = g.samples[1];
        const int H = a.image.dim(0), W = a.image.dim(1);
        std::vector<char> mask(static_cast<std::size_t>(H) * W, 0);
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) {
                bool dep = a.seg.at(r, c, kSegIris) > 0.5 || b.seg.at(r, c, kSegIris) > 0.5;
                for (int k = 0; k < 3 && !dep; ++k)
                    if (a.seg.at(r, c, k) != b.seg.at(r, c, k)) dep = true;
                if (dep) mask[static_cast<std::size_t>(r) * W + c] = 1;
            }
        std::vector<char> dilated = mask;
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c)
                if (mask[static_cast<std::size_t>(r) * W + c])
                    for (int dr = -1; dr <= 1; ++dr)
                        for (int dc = -1; dc <= 1; ++dc) {
                            const int rr = r + dr, cc = c + dc;
                            if (rr >= 0 && rr < H && cc >= 0 && cc < W)
                                dilated[static_cast<std::size_t>(rr) * W + cc] = 1;
                        }
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c)
                if (std::fabs(a.image.at(r, c, 0) - b.image.at(r, c, 0)) > 1e-12)
                    CHECK(dilated[static_cast<std::size_t>(r) * W + c] == 1);
    }
}

TEST_CASE("pair dataset bookkeeping") {
    PairDatasetConfig cfg;
    cfg.group_count = 5;
    cfg.k = 10;
    cfg.pairs_per_group = 90;  // all ordered pairs
    const PairDataset ds = build_pair_dataset(cfg, 17);
    CHECK(ds.pairs.size() == 5 * 90);
    std::set<std::pair<int, std::pair<int, int>>> seen;
    for (const TrainPair& p : ds.pairs) {
        CHECK(p.src != p.dst);
        seen.insert({p.group, {p.src, p.dst}});
        const GazeOffset want = ds.dst_of(p).gaze - ds.src_of(p).gaze;
        CHECK(p.dg.pitch == want.pitch);
        CHECK(p.dg.yaw == want.yaw);
    }
    CHECK(seen.size() == ds.pairs.size());

    SUBCASE("k=2 yields two ordered pairs") {
        PairDatasetConfig c2;
        c2.group_count = 1;
        c2.k = 2;
        c2.pairs_per_group = 2;
        CHECK(build_pair_dataset(c2, 3).pairs.size() == 2);
    }
    SUBCASE("invalid configs are rejected") {
        PairDatasetConfig bad = cfg;
        bad.group_count = 0;
        CHECK_THROWS_AS(build_pair_dataset(bad, 1), std::invalid_argument);
        bad = cfg;
        bad.pairs_per_group = 91;
        CHECK_THROWS_AS(build_pair_dataset(bad, 1), std::invalid_argument);
    }
}

TEST_CASE("same seed produces byte-identical dataset directories") {
    PairDatasetConfig cfg;
    cfg.group_count = 2;
    cfg.k = 3;
    cfg.pairs_per_group = 4;
    const fs::path dir1 = fs::temp_directory_path() / "gazelab_ds_a";
    const fs::path dir2 = fs::temp_directory_path() / "gazelab_ds_b";
    fs::remove_all(dir1);
    fs::remove_all(dir2);
    save_pair_dataset(build_pair_dataset(cfg, 23), dir1.string(), 23);
    save_pair_dataset(build_pair_dataset(cfg, 23), dir2.string(), 23);
    const auto slurp = [](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    };
    int files = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir1)) {
        if (!e.is_regular_file()) continue;
        ++files;
        const fs::path rel = fs::relative(e.path(), dir1);
        CHECK(slurp(e.path()) == slurp(dir2 / rel));
    }
    CHECK(files == 1 + 2 * 2 * 3);

    SUBCASE("load reconstructs the manifest contents") {
        const PairDataset ds = load_pair_dataset(dir1.string());
        CHECK(ds.groups.size() == 2);
        CHECK(ds.pairs.size() == 8);
        CHECK(ds.k == 3);
        const PairDataset orig = build_pair_dataset(cfg, 23);
        CHECK(ds.pairs[0].dg.pitch == orig.pairs[0].dg.pitch);
        // images round-trip through 8-bit quantization
        CHECK(max_abs_diff(ds.groups[0].samples[0].image, orig.groups[0].samples[0].image) <=
              0.5 / 255.0 + 1e-12);
        CHECK(ds.groups[0].samples[0].seg.bit_equal(orig.groups[0].samples[0].seg));
    }
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("person dataset splits and kappa bookkeeping") {
    PersonDatasetConfig cfg;
    cfg.persons = 3;
    cfg.samples_per_person = 14;
    cfg.pool_size = 9;
    cfg.with_kappa = true;
    cfg.domain = Domain::PseudoReal;
    const PersonDataset ds = build_person_dataset(cfg, 5);
    REQUIRE(ds.persons.size() == 3);
    for (const PersonData& pd : ds.persons) {
        CHECK(pd.pool.size() == 9);
        CHECK(pd.test.size() == 5);
        double mp = 0, my = 0;
        for (const EyeSample& s : pd.pool) {
            CHECK(s.gaze.pitch == s.optical.pitch + pd.profile.kappa.pitch);
            mp += s.gaze.pitch - s.optical.pitch;
            my += s.gaze.yaw - s.optical.yaw;
        }
        CHECK(std::fabs(mp / 9 - pd.profile.kappa.pitch) < 1e-12);
        CHECK(std::fabs(my / 9 - pd.profile.kappa.yaw) < 1e-12);
    }

    SUBCASE("kappa off means labels equal the optical axis") {
        PersonDatasetConfig c2 = cfg;
        c2.with_kappa = false;
        const PersonDataset d2 = build_person_dataset(c2, 5);
        for (const EyeSample& s : d2.persons[0].pool) {
            CHECK(s.gaze.pitch == s.optical.pitch);
            CHECK(s.gaze.yaw == s.optical.yaw);
        }
    }
    SUBCASE("too few samples per person is rejected") {
        PersonDatasetConfig bad = cfg;
        bad.samples_per_person = 9;
        CHECK_THROWS_AS(build_person_dataset(bad, 1), std::invalid_argument);
    }
}

TEST_CASE("pseudo-real and synthetic domains differ photometrically only") {
    const PersonProfile p = fixed_profile();
    const EyeSample a = render(p, {0, 0}, {0.05, -0.1}, make_illum(2, 6), Domain::Synthetic, 99);
    const EyeSample b = render(p, {0, 0}, {0.05, -0.1}, make_illum(2, 6), Domain::PseudoReal, 99);
    CHECK(mean_abs_diff(a.image, b.image) > 0.01);
    CHECK(a.seg.bit_equal(b.seg));
    for (int i = 0; i < 10; ++i) {
        CHECK(a.landmarks.lids[i].x == b.landmarks.lids[i].x);
        CHECK(a.landmarks.lids[i].y == b.landmarks.lids[i].y);
    }
}

TEST_CASE("pgm round-trips") {
    Rng rng(8);
    Tensor img({6, 9, 1});
    for (double& v : img.v) v = rng.uniform(0, 1);
    const fs::path dir = fs::temp_directory_path() / "gazelab_pgm";
    fs::create_directories(dir);
    const std::string f = (dir / "x.pgm").string();
    write_pgm(f, img);
    const Tensor back = read_pgm(f);
    CHECK(back.shape == img.shape);
    CHECK(max_abs_diff(back, img) <= 0.5 / 255.0 + 1e-12);
    write_pgm(f, back);  // quantization is idempotent
    CHECK(read_pgm(f).bit_equal(back));

    const EyeSample s = render(fixed_profile(), {0, 0}, {0, 0}, flat_illum(), Domain::Synthetic, 1);
    const std::string fs_ = (dir / "s.pgm").string();
    write_seg_pgm(fs_, s.seg);
    CHECK(read_seg_pgm(fs_).bit_equal(s.seg));
    fs::remove_all(dir);
}

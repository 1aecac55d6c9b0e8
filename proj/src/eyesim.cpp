#include "gazelab/eyesim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gazelab/errors.hpp"
#include "gazelab/rng.hpp"

namespace gazelab {

namespace {

constexpr double kPupilAlbedo = 0.02;
constexpr double kPupilRadiusFraction = 0.45;
constexpr double kCornerInset = 4.0;

struct Quadratic {
    double a = 0, b = 0, c = 0;  // y(x) = a x^2 + b x + c
    double operator()(double x) const { return (a * x + b) * x + c; }
};

// Least-squares quadratic through the points; exact when they lie on one.
Quadratic fit_quadratic(std::span<const Point> pts) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    double t0 = 0, t1 = 0, t2 = 0;
    for (const Point& p : pts) {
        const double x = p.x, x2 = x * x;
        s0 += 1;
        s1 += x;
        s2 += x2;
        s3 += x2 * x;
        s4 += x2 * x2;
        t0 += p.y;
        t1 += p.y * x;
        t2 += p.y * x2;
    }
    // normal equations, unknowns (c, b, a)
    double m[3][4] = {{s0, s1, s2, t0}, {s1, s2, s3, t1}, {s2, s3, s4, t2}};
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(m[r][col]) > std::fabs(m[piv][col])) piv = r;
        std::swap(m[col], m[piv]);
        if (std::fabs(m[col][col]) < 1e-12)
            throw std::invalid_argument("segmentation_of: degenerate eyelid landmarks");
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            for (int cc = col; cc < 4; ++cc) m[r][cc] -= f * m[col][cc];
        }
    }
    return {m[2][3] / m[2][2], m[1][3] / m[1][1], m[0][3] / m[0][0]};
}

double polygon_area2(std::span<const Point> pts) {
    double a = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Point& p = pts[i];
        const Point& q = pts[(i + 1) % pts.size()];
        a += p.x * q.y - q.x * p.y;
    }
    return std::fabs(a);
}

bool collinear(std::span<const Point> pts) {
    if (pts.size() < 3) return true;
    const Point& a = pts[0];
    const Point& b = pts[1];
    for (std::size_t i = 2; i < pts.size(); ++i) {
        const double cross = (b.x - a.x) * (pts[i].y - a.y) - (b.y - a.y) * (pts[i].x - a.x);
        if (std::fabs(cross) > 1e-9) return false;
    }
    return true;
}

// Andrew monotone chain, counter-clockwise in (x, y-down) image coords.
std::vector<Point> convex_hull(std::vector<Point> pts) {
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        return a.x != b.x ? a.x < b.x : a.y < b.y;
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Point& a, const Point& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    const auto cross = [](const Point& o, const Point& a, const Point& b) {
        return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    };
    const int n = static_cast<int>(pts.size());
    if (n < 3) return {};
    std::vector<Point> hull(2 * n);
    int k = 0;
    for (int i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    const int lower = k + 1;
    for (int i = n - 2; i >= 0; --i) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

bool point_in_convex(std::span<const Point> hull, double x, double y) {
    const int n = static_cast<int>(hull.size());
    for (int i = 0; i < n; ++i) {
        const Point& p = hull[i];
        const Point& q = hull[(i + 1) % n];
        const double cross = (q.x - p.x) * (y - p.y) - (q.y - p.y) * (x - p.x);
        if (cross < -1e-12) return false;
    }
    return true;
}

Point clamp_point(Point p, int h, int w) {
    return {std::clamp(p.x, 0.0, static_cast<double>(w)), std::clamp(p.y, 0.0, static_cast<double>(h))};
}

void validate_angles(HeadPose head, GazeAngles gaze) {
    const double gmax = kPi / 3.0 + 1e-12, hmax = kPi / 4.0 + 1e-12;
    if (std::fabs(gaze.pitch) > gmax || std::fabs(gaze.yaw) > gmax)
        throw std::invalid_argument("render: gaze angle outside +-pi/3");
    if (std::fabs(head.pitch) > hmax || std::fabs(head.yaw) > hmax)
        throw std::invalid_argument("render: head pose outside +-pi/4");
}

void validate_profile(const PersonProfile& p) {
    const bool ok = p.skin_albedo >= 0.35 && p.skin_albedo <= 0.75 && p.sclera_albedo >= 0.80 &&
                    p.sclera_albedo <= 0.95 && p.iris_albedo >= 0.05 && p.iris_albedo <= 0.45 &&
                    p.eyeball_radius_px >= 18 && p.eyeball_radius_px <= 26 && p.aperture >= 0.55 &&
                    p.aperture <= 1.0 && std::fabs(p.kappa.pitch) <= deg_to_rad(2.0) + 1e-12 &&
                    std::fabs(p.kappa.yaw) <= deg_to_rad(2.0) + 1e-12;
    if (!ok) throw std::invalid_argument("render: person profile field out of range");
}

struct EyeGeometry {
    double cx, cy, ri;
    double apex_upper, apex_lower;
};

EyeGeometry geometry(const PersonProfile& prof, HeadPose head, GazeAngles optical, int h, int w) {
    const double ep = optical.pitch - head.pitch;
    const double ey = optical.yaw - head.yaw;
    const double r = prof.eyeball_radius_px;
    EyeGeometry g;
    g.cx = w / 2.0 + r * std::sin(ey);
    g.cy = h / 2.0 - r * std::sin(ep);
    g.ri = 0.42 * r * std::sqrt(std::max(0.05, std::cos(ey) * std::cos(ep)));
    g.apex_upper = std::clamp(h / 2.0 - 9.0 * prof.aperture * (1.0 + 0.35 * std::sin(ep)), 0.0,
                              static_cast<double>(h));
    g.apex_lower = std::clamp(h / 2.0 + 6.0 * prof.aperture * (1.0 - 0.25 * std::sin(ep)), 0.0,
                              static_cast<double>(h));
    return g;
}

Landmarks make_landmarks(const EyeGeometry& g, int h, int w) {
    Landmarks lm;
    for (int k = 0; k < 8; ++k) {
        const double th = 2.0 * kPi * k / 8.0;
        lm.iris[k] = clamp_point({g.cx + g.ri * std::cos(th), g.cy + g.ri * std::sin(th)}, h, w);
    }
    const double x0 = kCornerInset, x1 = w - kCornerInset;
    const double mid = h / 2.0;
    lm.lids[0] = {x0, mid};
    lm.lids[5] = {x1, mid};
    const auto parabola = [&](double apex, double x) {
        const double t = (x - w / 2.0) / (w / 2.0 - kCornerInset);
        return mid + (apex - mid) * (1.0 - t * t);
    };
    for (int j = 1; j <= 4; ++j) {
        const double x = x0 + j * (x1 - x0) / 5.0;
        lm.lids[j] = clamp_point({x, parabola(g.apex_upper, x)}, h, w);
        lm.lids[5 + j] = clamp_point({x, parabola(g.apex_lower, x)}, h, w);
    }
    return lm;
}

}  // namespace

std::vector<Point> Landmarks::upper_curve() const {
    return {lids[0], lids[1], lids[2], lids[3], lids[4], lids[5]};
}

std::vector<Point> Landmarks::lower_curve() const {
    return {lids[0], lids[6], lids[7], lids[8], lids[9], lids[5]};
}

IllumParams make_illum(int id, std::uint64_t seed) {
    Rng rng = stream_rng(seed, {hash_str("illum"), static_cast<std::uint64_t>(id)});
    IllumParams p;
    p.id = id;
    p.gain = rng.uniform(0.7, 1.3);
    p.grad_x = rng.uniform(-0.25, 0.25);
    p.grad_y = rng.uniform(-0.25, 0.25);
    return p;
}

PersonProfile sample_profile(int id, std::uint64_t seed, bool with_kappa) {
    Rng rng = stream_rng(seed, {hash_str("profile"), static_cast<std::uint64_t>(id)});
    PersonProfile p;
    p.id = id;
    p.skin_albedo = rng.uniform(0.35, 0.75);
    p.sclera_albedo = rng.uniform(0.80, 0.95);
    p.iris_albedo = rng.uniform(0.05, 0.45);
    p.eyeball_radius_px = rng.uniform(18.0, 26.0);
    p.aperture = rng.uniform(0.55, 1.0);
    const double kmax = deg_to_rad(2.0);
    const double kp = rng.uniform(-kmax, kmax);
    const double ky = rng.uniform(-kmax, kmax);
    if (with_kappa) p.kappa = {kp, ky};
    return p;
}

Tensor segmentation_of(std::span<const Point> iris_pts, std::span<const Point> upper_lid,
                       std::span<const Point> lower_lid, int height, int width) {
    if (iris_pts.size() < 3 || upper_lid.size() < 3 || lower_lid.size() < 3)
        throw std::invalid_argument("segmentation_of: need >=3 points per landmark set");
    if (collinear(iris_pts)) throw std::invalid_argument("segmentation_of: collinear iris landmarks");
    std::vector<Point> all_lids(upper_lid.begin(), upper_lid.end());
    all_lids.insert(all_lids.end(), lower_lid.begin(), lower_lid.end());
    if (collinear(all_lids)) throw std::invalid_argument("segmentation_of: collinear eyelid landmarks");

    const Quadratic up = fit_quadratic(upper_lid);
    const Quadratic lo = fit_quadratic(lower_lid);
    double cx0 = upper_lid[0].x, cx1 = upper_lid[0].x;
    for (const Point& p : upper_lid) {
        cx0 = std::min(cx0, p.x);
        cx1 = std::max(cx1, p.x);
    }
    const std::vector<Point> hull = convex_hull({iris_pts.begin(), iris_pts.end()});
    if (hull.size() < 3) throw std::invalid_argument("segmentation_of: collinear iris landmarks");

    Tensor seg({height, width, 3});
    for (int r = 0; r < height; ++r) {
        const double y = r + 0.5;
        for (int c = 0; c < width; ++c) {
            const double x = c + 0.5;
            const bool open = x >= cx0 && x <= cx1 && y >= up(x) && y <= lo(x);
            int cls = kSegBackground;
            if (open) cls = point_in_convex(hull, x, y) ? kSegIris : kSegSclera;
            seg.at(r, c, cls) = 1.0;
        }
    }
    return seg;
}

Tensor segmentation_of(const Landmarks& lm, int height, int width) {
    const auto upper = lm.upper_curve();
    const auto lower = lm.lower_curve();
    return segmentation_of(std::span<const Point>(lm.iris.data(), lm.iris.size()), upper, lower,
                           height, width);
}

Point iris_center(const PersonProfile& profile, HeadPose head, GazeAngles optical, int height,
                  int width) {
    const EyeGeometry g = geometry(profile, head, optical, height, width);
    return {g.cx, g.cy};
}

double iris_radius(const PersonProfile& profile, HeadPose head, GazeAngles optical) {
    return geometry(profile, head, optical, kEyeHeight, kEyeWidth).ri;
}

Point seg_iris_centroid(const Tensor& seg) {
    double sx = 0, sy = 0, n = 0;
    for (int r = 0; r < seg.dim(0); ++r)
        for (int c = 0; c < seg.dim(1); ++c)
            if (seg.at(r, c, kSegIris) > 0.5) {
                sx += c + 0.5;
                sy += r + 0.5;
                n += 1;
            }
    if (n == 0) return {-1, -1};
    return {sx / n, sy / n};
}

EyeSample render(const PersonProfile& profile, HeadPose head, GazeAngles optical_gaze,
                 const IllumParams& illum, Domain domain, std::uint64_t seed) {
    validate_angles(head, optical_gaze);
    validate_profile(profile);
    const int H = kEyeHeight, W = kEyeWidth;

    const EyeGeometry geo = geometry(profile, head, optical_gaze, H, W);
    EyeSample s;
    s.landmarks = make_landmarks(geo, H, W);
    try {
        s.seg = segmentation_of(s.landmarks, H, W);
    } catch (const std::invalid_argument&) {
        // clamping collapsed the landmarks: the eye geometry left the image
        throw DataError("render: iris fully outside the eye opening (gaze/head combination)");
    }

    bool iris_visible = false;
    for (int r = 0; r < H && !iris_visible; ++r)
        for (int c = 0; c < W; ++c)
            if (s.seg.at(r, c, kSegIris) > 0.5) {
                iris_visible = true;
                break;
            }
    if (!iris_visible)
        throw DataError("render: iris fully outside the eye opening (gaze/head combination)");

    Tensor img({H, W, 1});
    const double pupil_r2 = kPupilRadiusFraction * geo.ri * kPupilRadiusFraction * geo.ri;
    for (int r = 0; r < H; ++r) {
        const double y = r + 0.5;
        for (int c = 0; c < W; ++c) {
            const double x = c + 0.5;
            double albedo = profile.skin_albedo;
            if (s.seg.at(r, c, kSegSclera) > 0.5) {
                albedo = profile.sclera_albedo;
            } else if (s.seg.at(r, c, kSegIris) > 0.5) {
                const double dx = x - geo.cx, dy = y - geo.cy;
                albedo = dx * dx + dy * dy < pupil_r2 ? kPupilAlbedo : profile.iris_albedo;
            }
            const double shade =
                illum.gain * (albedo + illum.grad_x * (x / W - 0.5) + illum.grad_y * (y / H - 0.5));
            img.at(r, c, 0) = std::clamp(shade, 0.0, 1.0);
        }
    }

    if (domain == Domain::PseudoReal) {
        Rng rng = stream_rng(seed, {hash_str("pseudo-real")});
        Tensor blurred({H, W, 1});
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) {
                double acc = 0;
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int rr = std::clamp(r + dr, 0, H - 1);
                        const int cc = std::clamp(c + dc, 0, W - 1);
                        acc += img.at(rr, cc, 0);
                    }
                blurred.at(r, c, 0) = acc / 9.0;
            }
        for (double& v : blurred.v) v = std::clamp(v + 0.02 * rng.normal(), 0.0, 1.0);
        const double gamma = rng.uniform(0.8, 1.25);
        for (double& v : blurred.v) v = std::pow(v, gamma);
        const double cx = W / 2.0, cy = H / 2.0;
        const double corner2 = cx * cx + cy * cy;
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) {
                const double dx = c + 0.5 - cx, dy = r + 0.5 - cy;
                blurred.at(r, c, 0) *= 1.0 - 0.10 * (dx * dx + dy * dy) / corner2;
            }
        for (double& v : blurred.v) v = std::clamp(v, 0.0, 1.0);
        img = std::move(blurred);
    }

    s.image = std::move(img);
    s.optical = optical_gaze;
    s.gaze = optical_gaze + profile.kappa;
    s.head = head;
    s.person_id = profile.id;
    s.illum_id = illum.id;
    s.domain = domain;
    return s;
}

AlignedGroup make_group(const PersonProfile& profile, HeadPose head, const IllumParams& illum,
                        std::span<const GazeAngles> gazes, Domain domain, std::uint64_t seed) {
    if (gazes.size() < 2) throw std::invalid_argument("make_group: need k >= 2 gazes");
    AlignedGroup g{profile, head, illum, domain, {}};
    g.samples.reserve(gazes.size());
    for (std::size_t i = 0; i < gazes.size(); ++i)
        g.samples.push_back(render(profile, head, gazes[i], illum, domain, hash_combine(seed, i)));
    return g;
}

}  // namespace gazelab

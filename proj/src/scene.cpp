#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "segstereo/data_io.hpp"

namespace segstereo {

namespace {

uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Hash-based uniform in [0,1) for random texture access.
double unit(uint64_t seed, int plane, int k, int y, int c) {
    uint64_t h = mix(seed ^ mix(uint64_t(plane) << 48 ^ uint64_t(uint32_t(k)) << 16 ^
                                uint64_t(uint32_t(y))) ^
                     mix(uint64_t(c) + 11));
    return double(h >> 11) * 0x1.0p-53;
}

struct Plane {
    double d;              // constant disparity
    int x0, y0, x1, y1;    // half-open rectangle in left-view coordinates
    int cls;
    double cell;           // texture scale
    bool contains(double x, double y) const {
        return x >= x0 && x < x1 && y >= y0 && y < y1;
    }
};

// Texture node value at half-integer x position k+0.5; the continuous
// texture is the linear interpolation between neighboring nodes, so a
// bilinear resample at an integer offset of +-0.5 is exact.
double node(const SceneConfig& cfg, const Plane& p, int plane_idx, int k, int y, int c) {
    switch (cfg.texture) {
        case TextureKind::Noise:
            return 255.0 * unit(cfg.seed, plane_idx, k, y, c);
        case TextureKind::Checker: {
            const int cell = std::max(2, int(p.cell));
            const int par = ((k / cell) + (y / cell) + 400000 / cell) & 1;
            const double lo = 40.0 + 30.0 * unit(cfg.seed, plane_idx, 0, -1, c);
            const double hi = 160.0 + 60.0 * unit(cfg.seed, plane_idx, 0, -2, c);
            return par ? hi : lo;
        }
        case TextureKind::Gradient: {
            // gentle slopes keep warp residuals of several pixels under the
            // photometric threshold, so self-supervision has a wide basin
            const double a = 0.1 + 0.3 * unit(cfg.seed, plane_idx, 0, -3, c);
            const double b = 0.1 + 0.3 * unit(cfg.seed, plane_idx, 0, -4, c);
            const double base = 40.0 + 80.0 * unit(cfg.seed, plane_idx, 0, -5, c);
            double v = base + a * k + b * y;
            return std::fmod(std::fabs(v), 256.0);
        }
    }
    return 0.0;
}

// Continuous texture T_p(x, y, c), piecewise linear in x with nodes at
// half-integer coordinates.
double texture(const SceneConfig& cfg, const Plane& p, int plane_idx, double x, int y,
               int c) {
    const double xk = x - 0.5;
    const int k = int(std::floor(xk));
    const double f = xk - k;
    const double a = node(cfg, p, plane_idx, k, y, c);
    const double b = node(cfg, p, plane_idx, k + 1, y, c);
    return a + f * (b - a);
}

// Frontmost (largest-disparity) plane covering left-view point (x, y).
int visible(const std::vector<Plane>& planes, double x, double y) {
    int best = -1;
    for (int i = 0; i < int(planes.size()); ++i)
        if (planes[i].contains(x, y) && (best < 0 || planes[i].d > planes[best].d))
            best = i;
    return best;
}

// Plane visible at right-view pixel column xr: candidates are planes whose
// left-view extent covers their own projection source xr + d.
int visible_right(const std::vector<Plane>& planes, double xr, double y) {
    int best = -1;
    for (int i = 0; i < int(planes.size()); ++i)
        if (planes[i].contains(xr + planes[i].d, y) &&
            (best < 0 || planes[i].d > planes[best].d))
            best = i;
    return best;
}

}  // namespace

StereoSample gen_scene(const SceneConfig& cfg) {
    if (cfg.h < 8 || cfg.w < 8) throw std::invalid_argument("gen_scene: frame too small");
    if (cfg.num_planes < 1) throw std::invalid_argument("gen_scene: need >= 1 plane");
    if (cfg.num_planes > cfg.num_classes)
        throw std::invalid_argument("gen_scene: more planes than classes");
    if (cfg.disp_lo < 0.0 || cfg.disp_hi < cfg.disp_lo)
        throw std::invalid_argument("gen_scene: bad disparity range");
    // disparities live on the half-integer grid in [lo, hi]
    std::vector<double> grid;
    for (double d = std::ceil(cfg.disp_lo * 2.0) / 2.0; d <= cfg.disp_hi + 1e-12; d += 0.5)
        grid.push_back(d);
    if (int(grid.size()) < cfg.num_planes)
        throw std::invalid_argument("gen_scene: disparity range too narrow for plane count");

    std::mt19937_64 rng(mix(cfg.seed));
    std::shuffle(grid.begin(), grid.end(), rng);
    std::vector<double> ds(grid.begin(), grid.begin() + cfg.num_planes);
    std::sort(ds.begin(), ds.end());  // plane 0 = farthest = background

    std::vector<Plane> planes;
    for (int i = 0; i < cfg.num_planes; ++i) {
        Plane p;
        p.d = ds[i];
        p.cls = i;
        p.cell = 3.0 + double(rng() % 5);
        if (i == 0) {
            p.x0 = -1000;
            p.y0 = -1000;
            p.x1 = cfg.w + 1000;
            p.y1 = cfg.h + 1000;
        } else {
            const int rw = cfg.w / 4 + int(rng() % std::max(1, cfg.w / 3));
            const int rh = cfg.h / 4 + int(rng() % std::max(1, cfg.h / 3));
            p.x0 = int(rng() % std::max<uint64_t>(1, cfg.w - rw));
            p.y0 = int(rng() % std::max<uint64_t>(1, cfg.h - rh));
            p.x1 = p.x0 + rw;
            p.y1 = p.y0 + rh;
        }
        planes.push_back(p);
    }

    StereoSample s;
    s.left = create({1, 3, cfg.h, cfg.w}, Fill::zeros());
    s.right = create({1, 3, cfg.h, cfg.w}, Fill::zeros());
    s.gt_disparity = create({1, 1, cfg.h, cfg.w}, Fill::zeros());
    s.gt_valid = create({1, 1, cfg.h, cfg.w}, Fill::constant(1.0));
    s.left_labels = create({1, 1, cfg.h, cfg.w}, Fill::zeros());
    s.noc_mask = create({1, 1, cfg.h, cfg.w}, Fill::zeros());

    for (int y = 0; y < cfg.h; ++y) {
        for (int x = 0; x < cfg.w; ++x) {
            const int pl = visible(planes, x, y);
            const Plane& p = planes[pl];
            (*s.gt_disparity->data)[s.gt_disparity->index(0, 0, y, x)] = p.d;
            (*s.left_labels->data)[s.left_labels->index(0, 0, y, x)] = double(p.cls);
            for (int c = 0; c < 3; ++c)
                (*s.left.data)[s.left.index(0, c, y, x)] = texture(cfg, p, pl, x, y, c);

            // non-occluded iff both right pixels the warp will read
            // show this plane and lie in frame
            const double xr = x - p.d;
            const int r0 = int(std::floor(xr));
            const int r1 = int(std::ceil(xr));
            const bool ok = xr >= 0.0 && r1 <= cfg.w - 1 &&
                            visible_right(planes, r0, y) == pl &&
                            visible_right(planes, r1, y) == pl;
            (*s.noc_mask->data)[s.noc_mask->index(0, 0, y, x)] = ok ? 1.0 : 0.0;
        }
        for (int xr = 0; xr < cfg.w; ++xr) {
            const int pl = visible_right(planes, xr, y);
            const Plane& p = planes[pl];
            for (int c = 0; c < 3; ++c)
                (*s.right.data)[s.right.index(0, c, y, xr)] =
                    texture(cfg, p, pl, xr + p.d, y, c);
        }
    }
    return s;
}

}  // namespace segstereo

#include "touchlab/hand_sim.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

namespace touchlab::sim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double quantize_px(double v) { return std::round(v * 256.0) / 256.0; }

Vec3 local_dir(double azimuth_deg, double flex_deg) {
    const double az = deg2rad(azimuth_deg);
    const double fl = deg2rad(flex_deg);
    return {std::cos(fl) * std::cos(az), std::cos(fl) * std::sin(az), -std::sin(fl)};
}

struct Capsule {
    Vec3 a, b;
    double r;
};

struct Palm {
    Vec3 origin, f, l, n;
    Vec3 center;  // local
    Vec3 core;    // half extents minus rounding
    double rounding;
};

Vec3 to_local(const Palm& p, const Vec3& w) {
    const Vec3 d = w - p.origin;
    return {d.dot(p.f), d.dot(p.l), d.dot(p.n)};
}

double palm_sdf(const Palm& p, const Vec3& w) {
    const Vec3 q0 = to_local(p, w) - p.center;
    const Vec3 q{std::abs(q0.x) - p.core.x, std::abs(q0.y) - p.core.y, std::abs(q0.z) - p.core.z};
    const Vec3 pos{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
    return pos.norm() + std::min(std::max({q.x, q.y, q.z}), 0.0) - p.rounding;
}

std::array<Vec3, 8> palm_corners(const Palm& p) {
    std::array<Vec3, 8> out;
    const Vec3 h = p.core + Vec3{p.rounding, p.rounding, p.rounding};
    for (int i = 0; i < 8; ++i) {
        const Vec3 loc{p.center.x + ((i & 1) ? h.x : -h.x), p.center.y + ((i & 2) ? h.y : -h.y),
                       p.center.z + ((i & 4) ? h.z : -h.z)};
        out[i] = p.origin + p.f * loc.x + p.l * loc.y + p.n * loc.z;
    }
    return out;
}

double lowest_capsule(double x, double y, const Capsule& c) {
    double best = kInf;
    const double r2 = c.r * c.r;
    for (const Vec3* e : {&c.a, &c.b}) {
        const double d2 = (x - e->x) * (x - e->x) + (y - e->y) * (y - e->y);
        if (d2 <= r2) best = std::min(best, e->z - std::sqrt(r2 - d2));
    }
    const Vec3 d = c.b - c.a;
    const double l2 = d.dot(d);
    if (l2 <= 0.0) return best;
    const Vec3 w{x - c.a.x, y - c.a.y, -c.a.z};
    const double ed = d.z;
    const double wd = w.dot(d);
    const Vec3 e_perp = Vec3{0.0, 0.0, 1.0} - d * (ed / l2);
    const Vec3 w_perp = w - d * (wd / l2);
    const double qa = e_perp.dot(e_perp);
    if (qa < 1e-12) return best;
    const double qb = w_perp.dot(e_perp);
    const double qc = w_perp.dot(w_perp) - r2;
    const double disc = qb * qb - qa * qc;
    if (disc < 0.0) return best;
    const double sq = std::sqrt(disc);
    double lo = (-qb - sq) / qa;
    double hi = (-qb + sq) / qa;
    if (std::abs(ed) < 1e-12) {
        const double u = wd / l2;
        if (u < 0.0 || u > 1.0) return best;
    } else {
        const double t0 = -wd / ed;
        const double t1 = (l2 - wd) / ed;
        lo = std::max(lo, std::min(t0, t1));
        hi = std::min(hi, std::max(t0, t1));
    }
    if (lo <= hi) best = std::min(best, lo);
    return best;
}

double lowest_palm(double x, double y, const Palm& p, double zmin, double zmax) {
    double t = zmin - 1.0;
    for (int i = 0; i < 200 && t <= zmax + 1.0; ++i) {
        const double d = palm_sdf(p, {x, y, t});
        if (d < 1e-3) return t;
        t += d;
    }
    return kInf;
}

struct HandShape {
    std::vector<Capsule> capsules;
    Palm palm;
};

HandShape build_shape(const HandGeometry& g, const Kinematics& k) {
    HandShape s;
    for (int f = 0; f < kFingerCount; ++f) {
        for (int j = 0; j < 3; ++j)
            s.capsules.push_back({k.joints_mm[f * 4 + j], k.joints_mm[f * 4 + j + 1], g.radius[f]});
    }
    s.capsules.push_back({k.wrist, k.forearm_end, g.forearm_radius});
    const double r = g.palm_rounding;
    s.palm = {k.wrist,
              k.forward,
              k.lateral,
              k.normal,
              {g.palm_length / 2.0, 0.0, 0.0},
              {g.palm_length / 2.0 - r, g.palm_width / 2.0 - r, g.palm_thickness / 2.0 - r},
              r};
    return s;
}

struct PxBox {
    int x0, y0, x1, y1;
};

PxBox px_box(double minx, double miny, double maxx, double maxy, double s, int w, int h) {
    return {std::max(0, static_cast<int>(std::floor(minx / s))), std::max(0, static_cast<int>(std::floor(miny / s))),
            std::min(w - 1, static_cast<int>(std::ceil(maxx / s))),
            std::min(h - 1, static_cast<int>(std::ceil(maxy / s)))};
}

// Lowest underside height of everything except the listed touching fingers.
double lowest_non_touching(const Kinematics& k, const HandGeometry& g, const std::array<bool, kFingerCount>& touch) {
    double low = std::min(k.wrist.z, k.forearm_end.z) - g.forearm_radius;
    const Palm palm = build_shape(g, k).palm;
    // Lowest point of a rounded box: a core corner minus the rounding radius.
    for (int i = 0; i < 8; ++i) {
        const Vec3 loc{palm.center.x + ((i & 1) ? palm.core.x : -palm.core.x),
                       palm.center.y + ((i & 2) ? palm.core.y : -palm.core.y),
                       palm.center.z + ((i & 4) ? palm.core.z : -palm.core.z)};
        const Vec3 w = palm.origin + palm.f * loc.x + palm.l * loc.y + palm.n * loc.z;
        low = std::min(low, w.z - palm.rounding);
    }
    for (int f = 0; f < kFingerCount; ++f) {
        if (touch[f]) continue;
        for (int j = 0; j < 4; ++j) low = std::min(low, k.joints_mm[f * 4 + j].z - g.radius[f]);
    }
    return low;
}

}  // namespace

void HandPoseParams::validate() const {
    if (wrist_height_mm < 0.0 || wrist_height_mm > 300.0)
        throw Error(ErrorCode::InvalidArgument, "wrist_height must be in [0, 300] mm");
    for (const auto& f : fingers) {
        if (f.spread_deg < -30.0 || f.spread_deg > 30.0)
            throw Error(ErrorCode::InvalidArgument, "spread must be in [-30, 30] deg");
        for (double a : f.flex_deg) {
            if (a < -10.0 || a > 110.0) throw Error(ErrorCode::InvalidArgument, "flexion must be in [-10, 110] deg");
        }
    }
}

void SceneConfig::validate() const {
    if (!(mm_per_px > 0.0)) throw Error(ErrorCode::ConfigError, "mm_per_px must be > 0");
    if (width <= 0 || height <= 0) throw Error(ErrorCode::ConfigError, "frame size must be positive");
    if (!(camera_height > 0.0 && camera_height < kMaxDepthMm))
        throw Error(ErrorCode::ConfigError, "camera_height must be in (0, 10000) mm");
}

void NoiseModel::validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(edge_dropout_prob) || !prob(speckle_invalid_prob))
        throw Error(ErrorCode::ConfigError, "noise probabilities must be in [0, 1]");
    if (sigma_depth < 0.0) throw Error(ErrorCode::ConfigError, "sigma_depth must be >= 0");
    if (!(quantization_step > 0.0)) throw Error(ErrorCode::ConfigError, "quantization_step must be > 0");
    if (edge_dropout_radius < 0) throw Error(ErrorCode::ConfigError, "edge_dropout_radius must be >= 0");
}

Kinematics forward_kinematics(const HandPoseParams& pose, const HandGeometry& g) {
    const double th = deg2rad(pose.yaw_deg);
    const double p = deg2rad(pose.pitch_deg);
    const double r = deg2rad(pose.roll_deg);
    const double side = pose.hand_side == HandSide::Right ? 1.0 : -1.0;

    const Vec3 f0{std::sin(th), -std::cos(th), 0.0};
    const Vec3 l0{std::cos(th), std::sin(th), 0.0};
    const Vec3 n0{0.0, 0.0, 1.0};
    const Vec3 f1 = f0 * std::cos(p) - n0 * std::sin(p);
    const Vec3 n1 = f0 * std::sin(p) + n0 * std::cos(p);
    const Vec3 l2 = l0 * std::cos(r) + n1 * std::sin(r);
    const Vec3 n2 = l0 * (-std::sin(r)) + n1 * std::cos(r);

    Kinematics k;
    k.wrist = {pose.wrist_mm.x, pose.wrist_mm.y, pose.wrist_height_mm};
    k.forward = f1;
    k.lateral = l2 * side;
    k.normal = n2;
    k.forearm_end = k.wrist - f1 * g.forearm_length;

    auto world = [&](const Vec3& loc) { return k.wrist + k.forward * loc.x + k.lateral * loc.y + k.normal * loc.z; };
    for (int f = 0; f < kFingerCount; ++f) {
        const auto& fp = pose.fingers[f];
        const double az = g.rest_azimuth_deg[f] + fp.spread_deg;
        Vec3 loc{g.base_forward[f], g.base_lateral[f], -(g.palm_thickness / 2.0 - g.radius[f])};
        k.joints_mm[f * 4] = world(loc);
        double flex = 0.0;
        for (int j = 0; j < 3; ++j) {
            flex += fp.flex_deg[j];
            loc = loc + local_dir(az, flex) * g.segment_lengths[f][j];
            k.joints_mm[f * 4 + j + 1] = world(loc);
        }
    }
    return k;
}

RenderResult render_scene(std::span<const HandPoseParams> poses, const SceneConfig& scene) {
    scene.validate();
    const int w = scene.width;
    const int h = scene.height;
    const double s = scene.mm_per_px;
    const auto& g = scene.geometry;
    Image<double> gap(w, h, kInf);

    RenderResult out;
    out.frame = DepthFrame(w, h, static_cast<std::uint16_t>(std::lround(scene.surface_depth())));
    out.frame.mm_per_px = s;

    for (const auto& pose : poses) {
        pose.validate();
        const auto k = forward_kinematics(pose, g);
        const auto shape = build_shape(g, k);
        Image<double> own(w, h, kInf);

        for (const auto& c : shape.capsules) {
            const auto box = px_box(std::min(c.a.x, c.b.x) - c.r, std::min(c.a.y, c.b.y) - c.r,
                                    std::max(c.a.x, c.b.x) + c.r, std::max(c.a.y, c.b.y) + c.r, s, w, h);
            for (int y = box.y0; y <= box.y1; ++y) {
                for (int x = box.x0; x <= box.x1; ++x) {
                    const double z = lowest_capsule(x * s, y * s, c);
                    if (z < own(x, y)) own(x, y) = z;
                }
            }
        }
        {
            const auto corners = palm_corners(shape.palm);
            double minx = kInf, miny = kInf, maxx = -kInf, maxy = -kInf, zmin = kInf, zmax = -kInf;
            for (const auto& c : corners) {
                minx = std::min(minx, c.x);
                miny = std::min(miny, c.y);
                maxx = std::max(maxx, c.x);
                maxy = std::max(maxy, c.y);
                zmin = std::min(zmin, c.z);
                zmax = std::max(zmax, c.z);
            }
            const auto box = px_box(minx, miny, maxx, maxy, s, w, h);
            for (int y = box.y0; y <= box.y1; ++y) {
                for (int x = box.x0; x <= box.x1; ++x) {
                    const double z = lowest_palm(x * s, y * s, shape.palm, zmin, zmax);
                    if (z < own(x, y)) own(x, y) = z;
                }
            }
        }

        GroundTruth t;
        t.hand_side = pose.hand_side;
        t.hand_mask = Mask(w, h, 0);
        std::size_t visible = 0;
        for (std::size_t i = 0; i < own.size(); ++i) {
            if (own[i] == kInf) continue;
            t.hand_mask[i] = 1;
            ++visible;
            gap[i] = std::min(gap[i], own[i]);
        }
        if (!visible) throw Error(ErrorCode::PoseOutOfBounds, "hand lies entirely outside the frame");
        for (int j = 0; j < kJointCount; ++j) {
            const auto& m = k.joints_mm[j];
            t.joints[j] = {quantize_px(m.x / s), quantize_px(m.y / s), m.z};
        }
        for (int f = 0; f < kFingerCount; ++f) {
            t.tip_height[f] = k.joints_mm[tip_index(f)].z - g.radius[f];
            t.touching[f] = t.tip_height[f] <= scene.contact_eps;
        }
        out.truths.push_back(std::move(t));
    }

    const double plane = scene.surface_depth();
    for (std::size_t i = 0; i < gap.size(); ++i) {
        if (gap[i] == kInf) continue;
        const double height = std::max(1.0, std::ceil(gap[i]));
        out.frame.depth[i] = static_cast<std::uint16_t>(std::max(1.0, plane - height));
    }
    return out;
}

std::pair<DepthFrame, GroundTruth> render_depth(const HandPoseParams& pose, const SceneConfig& scene) {
    auto r = render_scene(std::span<const HandPoseParams>(&pose, 1), scene);
    return {std::move(r.frame), std::move(r.truths.front())};
}

DepthFrame apply_noise(const DepthFrame& frame, const NoiseModel& noise) {
    noise.validate();
    const int w = frame.width();
    const int h = frame.height();
    DepthFrame out = frame;
    std::mt19937_64 rng(noise.rng_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int rad = noise.edge_dropout_radius;
    const bool edges = noise.edge_dropout_prob > 0.0 && rad > 0;

    auto near_jump = [&](int x, int y) {
        const int d = frame.depth(x, y);
        for (int dy = -rad; dy <= rad; ++dy) {
            for (int dx = -rad; dx <= rad; ++dx) {
                const int nx = x + dx, ny = y + dy;
                if (!frame.depth.in_bounds(nx, ny)) continue;
                const int o = frame.depth(nx, ny);
                if (o == kInvalidDepth) continue;
                if (std::abs(o - d) > noise.edge_depth_jump) return true;
            }
        }
        return false;
    };

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::uint16_t d = frame.depth(x, y);
            if (d == kInvalidDepth) continue;
            double v = d;
            if (noise.sigma_depth > 0.0) v += noise.sigma_depth * gauss(rng);
            v = std::round(v / noise.quantization_step) * noise.quantization_step;
            v = std::clamp(v, 1.0, static_cast<double>(kMaxDepthMm - 1));
            std::uint16_t q = static_cast<std::uint16_t>(v);
            if (edges && near_jump(x, y) && unif(rng) < noise.edge_dropout_prob) q = kInvalidDepth;
            if (noise.speckle_invalid_prob > 0.0 && unif(rng) < noise.speckle_invalid_prob) q = kInvalidDepth;
            out.depth(x, y) = q;
        }
    }
    return out;
}

std::vector<DepthFrame> empty_frames(const SceneConfig& scene, const NoiseModel& noise, int count) {
    std::vector<DepthFrame> frames;
    frames.reserve(count);
    DepthFrame plane(scene.width, scene.height, static_cast<std::uint16_t>(std::lround(scene.surface_depth())));
    plane.mm_per_px = scene.mm_per_px;
    for (int i = 0; i < count; ++i) {
        NoiseModel n = noise;
        n.rng_seed = derive_seed(noise.rng_seed, static_cast<std::uint64_t>(i));
        frames.push_back(apply_noise(plane, n));
        frames.back().frame_id = static_cast<std::uint64_t>(i);
        frames.back().timestamp_ms = static_cast<std::int64_t>(i) * 33;
    }
    return frames;
}

FingerPose curled_finger() { return {0.0, {70.0, 90.0, 40.0}}; }
FingerPose extended_finger() { return {0.0, {0.0, 10.0, 10.0}}; }

HandPoseParams make_contact_pose(HandPoseParams pose, const ContactSpec& spec, const HandGeometry& g) {
    pose.wrist_height_mm = 0.0;
    const auto k0 = forward_kinematics(pose, g);
    pose.wrist_height_mm = spec.clearance_mm - lowest_non_touching(k0, g, spec.touch);
    if (pose.wrist_height_mm < 0.0 || pose.wrist_height_mm > 300.0)
        throw Error(ErrorCode::InvalidArgument, "contact pose needs an out-of-range wrist height");

    for (int f = 0; f < kFingerCount; ++f) {
        if (!spec.touch[f]) continue;
        auto tip_gap = [&](double mcp) {
            HandPoseParams p = pose;
            p.fingers[f].flex_deg[0] = mcp;
            return forward_kinematics(p, g).joints_mm[tip_index(f)].z - g.radius[f] - spec.lift_mm;
        };
        // First 1-degree step at which the tip reaches the target, then bisect within it.
        double lo = -10.0, hi = -10.0;
        if (tip_gap(lo) > 0.0) {
            while (hi < 100.0 && tip_gap(hi) > 0.0) {
                lo = hi;
                hi += 1.0;
            }
            if (tip_gap(hi) > 0.0)
                throw Error(ErrorCode::InvalidArgument, "requested fingertip cannot reach the surface");
        }
        for (int it = 0; it < 50 && hi > lo; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (tip_gap(mid) > 0.0)
                lo = mid;
            else
                hi = mid;
        }
        pose.fingers[f].flex_deg[0] = hi;
    }
    return pose;
}

HandPoseParams place_tip(HandPoseParams pose, int finger, Vec2 target_mm, const HandGeometry& g) {
    const auto k = forward_kinematics(pose, g);
    const Vec2 tip = k.joints_mm[tip_index(finger)].xy();
    pose.wrist_mm = pose.wrist_mm + (target_mm - tip);
    return pose;
}

// --- datasets -------------------------------------------------------------------------------

std::uint64_t PoseGrid::cardinality() const {
    if (yaw < 1 || tilt < 1 || wrist < 1 || finger < 1) return 0;
    return static_cast<std::uint64_t>(yaw) * tilt * wrist * finger;
}

namespace {

struct Preset {
    std::array<bool, kFingerCount> touch;
    std::array<double, kFingerCount> spread;
    bool relaxed;  // non-touching fingers half-curled instead of fully curled
};

const std::array<Preset, kFingerPresetCount>& presets() {
    static const std::array<Preset, kFingerPresetCount> table{{
        {{true, true, true, true, true}, {0, -6, -2, 2, 6}, false},
        {{false, true, false, false, false}, {0, 0, 0, 0, 0}, false},
        {{false, false, true, false, false}, {0, 0, 0, 0, 0}, false},
        {{false, false, false, true, false}, {0, 0, 0, 0, 0}, false},
        {{false, false, false, false, true}, {0, 0, 0, 0, 0}, false},
        {{true, false, false, false, false}, {0, 0, 0, 0, 0}, false},
        {{false, true, true, false, false}, {0, -4, 4, 0, 0}, false},
        {{false, true, true, true, false}, {0, -5, 0, 5, 0}, false},
        {{false, true, true, true, true}, {0, -6, -2, 2, 6}, false},
        {{true, true, true, true, true}, {10, -10, -3, 4, 12}, false},
        {{false, false, false, false, false}, {0, -4, 0, 4, 8}, true},
        {{false, false, false, false, false}, {0, 0, 0, 0, 0}, false},
        {{false, true, true, false, false}, {0, 2, -2, 0, 0}, false},
        {{true, true, false, false, false}, {15, -5, 0, 0, 0}, false},
    }};
    return table;
}

// Short fingers cannot reach the surface under a high palm; lower the clearance, then level the
// roll, until the requested contacts are reachable.
HandPoseParams grid_contact_pose(HandPoseParams p, ContactSpec spec, const HandGeometry& g) {
    for (;;) {
        try {
            return make_contact_pose(p, spec, g);
        } catch (const Error&) {
            if (spec.clearance_mm > 2.0) {
                spec.clearance_mm = std::max(2.0, spec.clearance_mm - 2.0);
            } else if (p.roll_deg != 0.0) {
                p.roll_deg = std::abs(p.roll_deg) <= 2.0 ? 0.0 : p.roll_deg - std::copysign(2.0, p.roll_deg);
            } else {
                throw;
            }
        }
    }
}

}  // namespace

FingerPose finger_preset(int preset, int finger) {
    const auto& p = presets()[static_cast<std::size_t>(preset % kFingerPresetCount)];
    FingerPose fp = p.touch[finger] ? extended_finger() : curled_finger();
    if (!p.touch[finger] && p.relaxed) fp.flex_deg = {20.0, 30.0, 15.0};
    fp.spread_deg = p.spread[finger];
    return fp;
}

std::array<bool, kFingerCount> preset_touching(int preset) {
    return presets()[static_cast<std::size_t>(preset % kFingerPresetCount)].touch;
}

std::vector<HandPoseParams> enumerate_grid(const PoseGrid& grid, const SceneConfig& scene) {
    if (grid.cardinality() == 0) throw Error(ErrorCode::EmptyGrid, "every grid axis needs at least one value");
    auto lerp = [](double a, double b, int k, int n) { return n == 1 ? 0.5 * (a + b) : a + (b - a) * k / (n - 1); };
    const Vec2 center{scene.width * scene.mm_per_px / 2.0, scene.height * scene.mm_per_px / 2.0};

    std::vector<HandPoseParams> out;
    out.reserve(grid.cardinality());
    for (int a = 0; a < grid.yaw; ++a) {
        for (int b = 0; b < grid.tilt; ++b) {
            for (int c = 0; c < grid.wrist; ++c) {
                for (int d = 0; d < grid.finger; ++d) {
                    HandPoseParams p;
                    p.yaw_deg = grid.yaw == 1 ? 0.0 : lerp(-30.0, 30.0, a, grid.yaw);
                    p.pitch_deg = lerp(8.0, 22.0, b, grid.tilt);
                    p.roll_deg = grid.tilt == 1 ? 0.0 : 12.0 * std::sin(2.0 * kPi * b / grid.tilt);
                    const int preset = d % kFingerPresetCount;
                    for (int f = 0; f < kFingerCount; ++f) p.fingers[f] = finger_preset(preset, f);
                    ContactSpec spec;
                    spec.touch = preset_touching(preset);
                    spec.clearance_mm = lerp(6.0, 30.0, c, grid.wrist);
                    if (preset == 10) spec.clearance_mm += 20.0;
                    p = grid_contact_pose(p, spec, scene.geometry);
                    // Middle fingertip lands near the frame centre, shifted per wrist index.
                    const Vec2 shift{lerp(-60.0, 60.0, c, grid.wrist), (c % 2 ? 20.0 : -20.0)};
                    p = place_tip(p, static_cast<int>(Finger::Middle), center + shift, scene.geometry);
                    out.push_back(p);
                }
            }
        }
    }
    return out;
}

Sample flip_sample(const Sample& s) {
    Sample o = s;
    auto flip_img = [](auto& img) {
        const int w = img.width();
        for (int y = 0; y < img.height(); ++y) {
            for (int x = 0; x < w / 2; ++x) std::swap(img(x, y), img(w - 1 - x, y));
        }
    };
    flip_img(o.noisy.depth);
    flip_img(o.clean.depth);
    flip_img(o.truth.hand_mask);
    const double wmax = s.clean.width() - 1;
    for (auto& j : o.truth.joints) j.x = wmax - j.x;
    o.truth.hand_side = flipped(s.truth.hand_side);
    o.pose.hand_side = flipped(s.pose.hand_side);
    o.pose.wrist_mm.x = wmax * s.clean.mm_per_px - s.pose.wrist_mm.x;
    o.pose.yaw_deg = -s.pose.yaw_deg;
    o.pose.roll_deg = -s.pose.roll_deg;
    const std::string suffix = "_L";
    if (s.id.size() > suffix.size() && s.id.compare(s.id.size() - suffix.size(), suffix.size(), suffix) == 0)
        o.id = s.id.substr(0, s.id.size() - suffix.size());
    else
        o.id = s.id + suffix;
    return o;
}

nlohmann::json to_json(const HandPoseParams& p) {
    nlohmann::json fingers = nlohmann::json::array();
    for (const auto& f : p.fingers)
        fingers.push_back({{"spread", f.spread_deg}, {"flex", {f.flex_deg[0], f.flex_deg[1], f.flex_deg[2]}}});
    return {
        {"hand_side", std::string(to_string(p.hand_side))},
        {"wrist_mm", {p.wrist_mm.x, p.wrist_mm.y}},
        {"wrist_height_mm", p.wrist_height_mm},
        {"yaw", p.yaw_deg},
        {"pitch", p.pitch_deg},
        {"roll", p.roll_deg},
        {"fingers", fingers},
    };
}

HandPoseParams pose_from_json(const nlohmann::json& j) {
    HandPoseParams p;
    try {
        if (j.contains("hand_side")) p.hand_side = hand_side_from_string(j.at("hand_side").get<std::string>());
        if (j.contains("wrist_mm")) p.wrist_mm = {j.at("wrist_mm").at(0).get<double>(), j.at("wrist_mm").at(1).get<double>()};
        p.wrist_height_mm = j.value("wrist_height_mm", p.wrist_height_mm);
        p.yaw_deg = j.value("yaw", p.yaw_deg);
        p.pitch_deg = j.value("pitch", p.pitch_deg);
        p.roll_deg = j.value("roll", p.roll_deg);
        if (j.contains("fingers")) {
            const auto& fs = j.at("fingers");
            if (fs.size() != kFingerCount) throw Error(ErrorCode::InvalidArgument, "pose needs 5 fingers");
            for (int f = 0; f < kFingerCount; ++f) {
                p.fingers[f].spread_deg = fs[f].value("spread", 0.0);
                if (fs[f].contains("flex")) {
                    for (int k = 0; k < 3; ++k) p.fingers[f].flex_deg[k] = fs[f].at("flex").at(k).get<double>();
                }
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad pose: ") + e.what());
    }
    return p;
}

nlohmann::json to_json(const GroundTruth& t) {
    nlohmann::json joints = nlohmann::json::array();
    for (const auto& j : t.joints) joints.push_back({j.x, j.y, j.z});
    return {
        {"hand_side", std::string(to_string(t.hand_side))},
        {"joints", joints},
        {"touching", t.touching},
        {"tip_height", t.tip_height},
    };
}

GroundTruth truth_from_json(const nlohmann::json& j) {
    GroundTruth t;
    try {
        t.hand_side = hand_side_from_string(j.at("hand_side").get<std::string>());
        const auto& js = j.at("joints");
        if (js.size() != kJointCount) throw Error(ErrorCode::InvalidArgument, "truth needs 20 joints");
        for (int i = 0; i < kJointCount; ++i)
            t.joints[i] = {js[i].at(0).get<double>(), js[i].at(1).get<double>(), js[i].at(2).get<double>()};
        t.touching = j.at("touching").get<std::array<bool, kFingerCount>>();
        if (j.contains("tip_height")) t.tip_height = j.at("tip_height").get<std::array<double, kFingerCount>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad truth: ") + e.what());
    }
    return t;
}

void save_sample(const std::filesystem::path& dir, const Sample& s) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
    save_frame(dir / "depth.pgm", s.noisy);
    write_pgm16(dir / "clean.pgm", s.clean.depth);
    Mask m = s.truth.hand_mask;
    for (auto& v : m.pixels()) v = v ? 255 : 0;
    write_pgm8(dir / "mask.pgm", m);
    nlohmann::json j = {{"id", s.id}, {"truth", to_json(s.truth)}, {"pose", to_json(s.pose)}};
    std::ofstream out(dir / "truth.json");
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / "truth.json").string());
    out << j.dump(2) << '\n';
}

Sample load_sample(const std::filesystem::path& dir) {
    Sample s;
    s.noisy = load_frame(dir / "depth.pgm");
    s.clean = s.noisy;
    s.clean.depth = read_pgm16(dir / "clean.pgm");
    std::ifstream in(dir / "truth.json");
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + (dir / "truth.json").string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::IoError, (dir / "truth.json").string() + ": " + e.what());
    }
    s.id = j.value("id", dir.filename().string());
    s.truth = truth_from_json(j.at("truth"));
    s.pose = pose_from_json(j.at("pose"));
    s.truth.hand_mask = read_pgm8(dir / "mask.pgm");
    for (auto& v : s.truth.hand_mask.pixels()) v = v ? 1 : 0;
    return s;
}

DatasetManifest generate_dataset(const PoseGrid& grid, const SceneConfig& scene, const NoiseModel& noise,
                                 const std::filesystem::path& out_dir) {
    const auto poses = enumerate_grid(grid, scene);
    DatasetManifest m;
    m.root = out_dir;
    m.right_count = poses.size();
    nlohmann::json samples = nlohmann::json::array();
    std::vector<Sample> right;
    for (std::size_t i = 0; i < poses.size(); ++i) {
        Sample s;
        char id[32];
        std::snprintf(id, sizeof id, "s%06zu", i);
        s.id = id;
        s.pose = poses[i];
        auto [clean, truth] = render_depth(poses[i], scene);
        clean.frame_id = i;
        s.clean = clean;
        NoiseModel n = noise;
        n.rng_seed = derive_seed(noise.rng_seed, i);
        s.noisy = apply_noise(clean, n);
        s.truth = std::move(truth);
        save_sample(out_dir / s.id, s);
        samples.push_back({{"id", s.id}, {"pose", to_json(s.pose)}});
        m.sample_ids.push_back(s.id);

        const Sample l = flip_sample(s);
        save_sample(out_dir / l.id, l);
        samples.push_back({{"id", l.id}, {"pose", to_json(l.pose)}});
        m.sample_ids.push_back(l.id);
    }
    nlohmann::json manifest = {
        {"grid", {grid.yaw, grid.tilt, grid.wrist, grid.finger}},
        {"right_count", m.right_count},
        {"total", m.sample_ids.size()},
        {"width", scene.width},
        {"height", scene.height},
        {"mm_per_px", scene.mm_per_px},
        {"samples", samples},
    };
    std::ofstream out(out_dir / "manifest.json");
    if (!out) throw Error(ErrorCode::IoError, "cannot write manifest in " + out_dir.string());
    out << manifest.dump(1) << '\n';
    return m;
}

// --- trajectories ---------------------------------------------------------------------------

std::string_view to_string(TaskKind k) {
    switch (k) {
        case TaskKind::Cross: return "cross";
        case TaskKind::HLine: return "hline";
        case TaskKind::VLine: return "vline";
        case TaskKind::Circle: return "circle";
    }
    return "cross";
}

TaskKind task_from_string(std::string_view s) {
    if (s == "cross") return TaskKind::Cross;
    if (s == "hline") return TaskKind::HLine;
    if (s == "vline") return TaskKind::VLine;
    if (s == "circle") return TaskKind::Circle;
    throw Error(ErrorCode::InvalidArgument, "unknown task '" + std::string(s) + "'");
}

double TaskGeometry::distance(Vec2 p) const {
    switch (kind) {
        case TaskKind::Cross: return touchlab::distance(p, center);
        case TaskKind::HLine:
        case TaskKind::VLine: {
            const Vec2 d = b - a;
            const double l2 = d.dot(d);
            const double t = l2 > 0.0 ? std::clamp((p - a).dot(d) / l2, 0.0, 1.0) : 0.0;
            return touchlab::distance(p, a + d * t);
        }
        case TaskKind::Circle: return std::abs(touchlab::distance(p, center) - radius);
    }
    return 0.0;
}

HandPoseParams pointing_pose(const HandGeometry& g) {
    HandPoseParams p;
    p.pitch_deg = 5.0;
    // Pad contact: the index lies nearly flat while the other fingers stay lifted.
    constexpr std::array<double, kFingerCount> kSpread{0.0, 0.0, 4.0, 6.0, 8.0};
    for (int f = 0; f < kFingerCount; ++f) p.fingers[f] = {kSpread[f], {-10.0, 0.0, 0.0}};
    p.fingers[static_cast<int>(Finger::Index)] = {0.0, {0.0, 0.0, 0.0}};
    ContactSpec spec;
    spec.touch[static_cast<int>(Finger::Index)] = true;
    return make_contact_pose(p, spec, g);
}

Trajectory script_trajectory(TaskKind task, const TrajectoryJitter& jitter, const SceneConfig& scene,
                             const TrajectoryConfig& cfg) {
    scene.validate();
    Trajectory tr;
    tr.geometry.kind = task;
    const Vec2 c{scene.width / 2.0, scene.height / 2.0};
    tr.geometry.center = c;
    const double half = cfg.line_length_px / 2.0;
    constexpr double kMargin = 10.0;
    Rect need;
    switch (task) {
        case TaskKind::Cross:
            need = {static_cast<int>(c.x), static_cast<int>(c.y), static_cast<int>(c.x), static_cast<int>(c.y)};
            break;
        case TaskKind::HLine:
            tr.geometry.a = {c.x - half, c.y};
            tr.geometry.b = {c.x + half, c.y};
            need = {static_cast<int>(std::floor(c.x - half)), static_cast<int>(c.y), static_cast<int>(std::ceil(c.x + half)),
                    static_cast<int>(c.y)};
            break;
        case TaskKind::VLine:
            tr.geometry.a = {c.x, c.y - half};
            tr.geometry.b = {c.x, c.y + half};
            need = {static_cast<int>(c.x), static_cast<int>(std::floor(c.y - half)), static_cast<int>(c.x),
                    static_cast<int>(std::ceil(c.y + half))};
            break;
        case TaskKind::Circle: {
            const double r = cfg.circle_radius_px;
            tr.geometry.radius = r;
            need = {static_cast<int>(std::floor(c.x - r)), static_cast<int>(std::floor(c.y - r)),
                    static_cast<int>(std::ceil(c.x + r)), static_cast<int>(std::ceil(c.y + r))};
            break;
        }
    }
    if (need.x0 < kMargin || need.y0 < kMargin || need.x1 > scene.width - 1 - kMargin ||
        need.y1 > scene.height - 1 - kMargin)
        throw Error(ErrorCode::GeometryOutOfFrame, "task geometry does not fit the frame");

    const auto& g = scene.geometry;
    HandPoseParams touch = cfg.base;
    bool custom = false;
    for (const auto& f : cfg.base.fingers) custom |= f.flex_deg != std::array<double, 3>{};
    if (!custom) {
        touch = pointing_pose(g);
        touch.yaw_deg = cfg.base.yaw_deg;
    }
    const int index = static_cast<int>(Finger::Index);
    ContactSpec lift_spec;
    lift_spec.touch[index] = true;
    lift_spec.lift_mm = 30.0;
    const HandPoseParams lifted = make_contact_pose(touch, lift_spec, g);

    std::mt19937_64 rng(derive_seed(jitter.seed, 0x7a5c));
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto add = [&](const HandPoseParams& base, Vec2 target_px, bool contact) {
        TrajectoryFrame f;
        f.tip_target_px = target_px;
        f.contact = contact;
        f.pose = place_tip(base, index, scene.to_mm(target_px), g);
        tr.frames.push_back(f);
    };

    if (task == TaskKind::Cross) {
        for (int k = 0; k < cfg.cross_repetitions; ++k) {
            const Vec2 off{jitter.placement_sigma_px * gauss(rng), jitter.placement_sigma_px * gauss(rng)};
            add(lifted, c + off, false);
            add(touch, c + off, true);
        }
        return tr;
    }
    const int n = task == TaskKind::Circle ? cfg.circle_frames : cfg.path_frames;
    for (int k = 0; k < n; ++k) {
        Vec2 p, normal;
        if (task == TaskKind::Circle) {
            const double a = 2.0 * kPi * k / n;
            normal = {std::cos(a), std::sin(a)};
            p = c + normal * tr.geometry.radius;
        } else {
            const double t = n == 1 ? 0.5 : static_cast<double>(k) / (n - 1);
            p = tr.geometry.a + (tr.geometry.b - tr.geometry.a) * t;
            normal = task == TaskKind::HLine ? Vec2{0.0, 1.0} : Vec2{1.0, 0.0};
        }
        HandPoseParams pose = touch;
        // The finger points at the circle centre so the arm always enters from outside the circle.
        if (task == TaskKind::Circle) pose.yaw_deg = rad2deg(std::atan2(normal.y, normal.x)) - 90.0;
        add(pose, p + normal * (jitter.lateral_sigma_px * gauss(rng)), true);
    }
    return tr;
}

}  // namespace touchlab::sim

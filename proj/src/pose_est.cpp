#include "touchlab/pose_est.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

namespace touchlab::pose {

namespace {

double wrap_deg(double a) {
    a = std::fmod(a + 180.0, 360.0);
    if (a < 0.0) a += 360.0;
    return a - 180.0;
}

double turning_deg(Vec2 a, Vec2 b) {
    const double na = a.norm(), nb = b.norm();
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    const double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
    return rad2deg(std::acos(c));
}

float swap_float(float v) {
    auto u = std::bit_cast<std::uint32_t>(v);
    u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
    return std::bit_cast<float>(u);
}

}  // namespace

HandCrop preprocess(const DepthFrame& frame, const surface::HandRegion& region, const surface::BackgroundModel& model,
                    const PreprocessConfig& cfg) {
    if (region.component.pixels.empty() || region.crop.size <= 0)
        throw Error(ErrorCode::EmptyRegion, "hand region has no pixels");
    if (!model.surface_depth.same_shape(frame.width(), frame.height()))
        throw Error(ErrorCode::DimensionMismatch, "frame and background model differ in size");
    const int n = cfg.crop_px;
    HandCrop crop;
    crop.window = region.crop;
    crop.scale = static_cast<double>(n) / region.crop.size;
    crop.values = Image<float>(n, n, -1.0f);
    crop.invalid = Mask(n, n, 0);
    const double top = cfg.hand_max_height;
    for (int j = 0; j < n; ++j) {
        const int sy = region.crop.y + static_cast<int>((j + 0.5) * region.crop.size / n);
        for (int i = 0; i < n; ++i) {
            const int sx = region.crop.x + static_cast<int>((i + 0.5) * region.crop.size / n);
            if (!frame.depth.in_bounds(sx, sy) || frame.depth(sx, sy) == kInvalidDepth) {
                crop.invalid(i, j) = 1;
                continue;
            }
            const double hgt = model.surface_depth(sx, sy) - frame.depth(sx, sy);
            crop.values(i, j) = static_cast<float>(std::clamp(2.0 * hgt / top - 1.0, -1.0, 1.0));
        }
    }
    return crop;
}

HandCrop lcn(const HandCrop& crop, int window, double eps) {
    const int w = crop.values.width();
    const int h = crop.values.height();
    const int r = window / 2;
    const double sigma = window / 4.0;
    std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
    for (int i = -r; i <= r; ++i) k[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));

    HandCrop out = crop;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // Deviations from the centre value keep constant input exactly zero.
            const double v0 = crop.values(x, y);
            double sw = 0.0, s1 = 0.0, s2 = 0.0;
            for (int dy = -r; dy <= r; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= h) continue;
                for (int dx = -r; dx <= r; ++dx) {
                    const int xx = x + dx;
                    if (xx < 0 || xx >= w) continue;
                    const double wt = k[dx + r] * k[dy + r];
                    const double d = crop.values(xx, yy) - v0;
                    sw += wt;
                    s1 += wt * d;
                    s2 += wt * d * d;
                }
            }
            const double mean = s1 / sw;
            const double var = std::max(0.0, s2 / sw - mean * mean);
            const double v = (0.0 - mean) / std::max(std::sqrt(var), eps);
            out.values(x, y) = static_cast<float>(std::clamp(v, -3.0, 3.0));
        }
    }
    return out;
}

Vec2 HeatmapStack::to_map(Vec2 p) const {
    const double sx = static_cast<double>(window.size) / width;
    const double sy = static_cast<double>(window.size) / height;
    return {(p.x - window.x + 0.5) / sx - 0.5, (p.y - window.y + 0.5) / sy - 0.5};
}

Vec2 HeatmapStack::to_frame(Vec2 m) const {
    const double sx = static_cast<double>(window.size) / width;
    const double sy = static_cast<double>(window.size) / height;
    return {(m.x + 0.5) * sx + window.x - 0.5, (m.y + 0.5) * sy + window.y - 0.5};
}

HeatmapStack make_target_heatmaps(const sim::GroundTruth& truth, const CropWindow& window, double sigma, int joints,
                                  int size) {
    if (joints != kJointCount && joints != kFingerCount)
        throw Error(ErrorCode::InvalidArgument, "heatmap stacks hold 5 or 20 joints");
    if (window.size <= 0 || size <= 0) throw Error(ErrorCode::InvalidArgument, "empty heatmap window");
    HeatmapStack st;
    st.joints = joints;
    st.width = st.height = size;
    st.window = window;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    const double ws = window.size;
    for (int k = 0; k < joints; ++k) {
        const Vec3& jt = truth.joints[joints == kJointCount ? k : tip_index(k)];
        // Offsets are formed as ((i + 0.5) * size - a * N) / size so mirrored inputs give exactly negated values.
        const double ax = jt.x - window.x + 0.5;
        const double ay = jt.y - window.y + 0.5;
        Image<float> map(size, size, 0.0f);
        const bool inside = ax >= 0.0 && ay >= 0.0 && ax <= ws && ay <= ws;
        if (inside) {
            std::vector<double> gx(size), gy(size);
            for (int i = 0; i < size; ++i) {
                const double dx = ((i + 0.5) * ws - ax * size) / ws;
                const double dy = ((i + 0.5) * ws - ay * size) / ws;
                gx[i] = dx * dx;
                gy[i] = dy * dy;
            }
            for (int y = 0; y < size; ++y) {
                for (int x = 0; x < size; ++x) map(x, y) = static_cast<float>(std::exp(-(gx[x] + gy[y]) * inv2s2));
            }
        }
        st.maps.push_back(std::move(map));
        st.empty.push_back(!inside);
    }
    return st;
}

DecodedJoint decode_heatmap(const Image<float>& map, const HeatmapStack& prov) {
    const int w = map.width();
    const int h = map.height();
    std::size_t best = 0;
    for (std::size_t i = 1; i < map.size(); ++i) {
        if (map[i] > map[best]) best = i;
    }
    if (map.empty() || !(map[best] > 0.0f)) throw Error(ErrorCode::EmptyHeatmap, "heatmap has no positive value");
    const int ix = static_cast<int>(best % w);
    const int iy = static_cast<int>(best / w);
    const double m0 = map[best];

    auto refine = [&](double mm, double mp) {
        if (mm <= 0.0 || mp <= 0.0) return 0.0;
        const double lm = std::log(mm), lp = std::log(mp), l0 = std::log(m0);
        const double denom = 2.0 * (lm + lp - 2.0 * l0);
        if (!(denom < 0.0)) return 0.0;
        return std::clamp((lm - lp) / denom, -0.5, 0.5);
    };

    DecodedJoint d;
    d.confidence = std::clamp(m0, 0.0, 1.0);
    double dx = 0.0, dy = 0.0;
    const bool border = ix == 0 || iy == 0 || ix == w - 1 || iy == h - 1;
    if (!border) {
        dx = refine(map(ix - 1, iy), map(ix + 1, iy));
        dy = refine(map(ix, iy - 1), map(ix, iy + 1));
    }
    d.map = {ix + dx, iy + dy};
    d.frame = prov.to_frame(d.map);
    return d;
}

std::string heatmap_stem(std::uint64_t frame_id, int region) {
    return "hm_" + std::to_string(frame_id) + "_" + std::to_string(region);
}

void write_heatmaps(const std::filesystem::path& stem, const HeatmapStack& st) {
    const auto base = stem.string();
    nlohmann::json hdr = {
        {"v", 1},
        {"J", st.joints},
        {"h", st.height},
        {"w", st.width},
        {"crop_window", {{"x", st.window.x}, {"y", st.window.y}, {"size", st.window.size}}},
        {"frame_id", st.frame_id},
        {"empty", st.empty},
        {"dtype", "float32-le"},
    };
    {
        std::ofstream out(base + ".json");
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + base + ".json");
        out << hdr.dump(2) << '\n';
    }
    std::ofstream out(base + ".f32", std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + base + ".f32");
    for (const auto& m : st.maps) {
        if constexpr (std::endian::native == std::endian::little) {
            out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
        } else {
            for (float v : m.pixels()) {
                const float s = swap_float(v);
                out.write(reinterpret_cast<const char*>(&s), sizeof s);
            }
        }
    }
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + base + ".f32");
}

HeatmapStack read_heatmaps(const std::filesystem::path& stem) {
    const auto base = stem.string();
    std::ifstream hin(base + ".json");
    std::ifstream din(base + ".f32", std::ios::binary);
    if (!hin || !din) throw Error(ErrorCode::MissingHeatmapFile, "no heatmap stack at " + base);
    HeatmapStack st;
    try {
        nlohmann::json hdr;
        hin >> hdr;
        st.joints = hdr.at("J").get<int>();
        st.height = hdr.at("h").get<int>();
        st.width = hdr.at("w").get<int>();
        const auto& cw = hdr.at("crop_window");
        st.window = {cw.at("x").get<int>(), cw.at("y").get<int>(), cw.at("size").get<int>()};
        st.frame_id = hdr.value("frame_id", std::uint64_t{0});
        if (hdr.contains("empty")) st.empty = hdr.at("empty").get<std::vector<bool>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::IoError, base + ".json: " + e.what());
    }
    if ((st.joints != kJointCount && st.joints != kFingerCount) || st.width <= 0 || st.height <= 0)
        throw Error(ErrorCode::IoError, base + ".json: bad dimensions");
    st.empty.resize(st.joints, false);
    for (int k = 0; k < st.joints; ++k) {
        Image<float> m(st.width, st.height);
        din.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
        if (!din) throw Error(ErrorCode::IoError, base + ".f32: truncated");
        if constexpr (std::endian::native != std::endian::little) {
            for (auto& v : m.pixels()) v = swap_float(v);
        }
        st.maps.push_back(std::move(m));
    }
    return st;
}

std::array<Joint, kFingerCount> HandSkeleton::fingertips() const {
    std::array<Joint, kFingerCount> out;
    for (int f = 0; f < kFingerCount; ++f) out[f] = joints[tip_index(f)];
    return out;
}

bool HandSkeleton::full() const {
    return std::all_of(joints.begin(), joints.end(), [](const Joint& j) { return j.present; });
}

HandSkeleton skeleton_from_truth(const sim::GroundTruth& truth, double mm_per_px) {
    HandSkeleton s;
    s.hand_side = truth.hand_side;
    s.mm_per_px = mm_per_px;
    for (int j = 0; j < kJointCount; ++j) s.joints[j] = {truth.joints[j].xy(), 1.0, true, truth.joints[j].z};
    return s;
}

void AngleLimits::validate() const {
    for (const auto* r : {&mcp, &pip, &dip, &spread}) {
        if (!((*r)[0] < (*r)[1])) throw Error(ErrorCode::ConfigError, "angle limits need min < max");
    }
    if (penalty_rate < 0.0) throw Error(ErrorCode::ConfigError, "penalty_rate must be >= 0");
}

std::array<FingerAngles, kFingerCount> finger_angles(const HandSkeleton& skel, const AngleLimits& limits) {
    const bool three_d = std::all_of(skel.joints.begin(), skel.joints.end(), [](const Joint& j) { return j.z_mm.has_value(); });
    auto P = [&](int j) {
        const auto& jt = skel.joints[j];
        return Vec3{jt.px.x * skel.mm_per_px, jt.px.y * skel.mm_per_px, three_d ? *jt.z_mm : 0.0};
    };
    const double side = skel.hand_side == HandSide::Right ? 1.0 : -1.0;
    const Vec3 index_mcp = P(joint_index(Finger::Index, JointKind::Mcp));
    const Vec3 ring_mcp = P(joint_index(Finger::Ring, JointKind::Mcp));
    const Vec3 thumb_mcp = P(joint_index(Finger::Thumb, JointKind::Mcp));
    const Vec3 ul = (ring_mcp - index_mcp).normalized();
    const Vec3 n = (ring_mcp - index_mcp).cross(thumb_mcp - index_mcp).normalized() * side;
    const Vec3 uf = ul.cross(n) * side;

    std::array<FingerAngles, kFingerCount> out{};
    for (int f = 0; f < kFingerCount; ++f) {
        std::array<Vec3, 3> d;
        for (int k = 0; k < 3; ++k) d[k] = P(f * 4 + k + 1) - P(f * 4 + k);
        const double rest = limits.rest_azimuth_deg[f];

        // Azimuth from the segment with the longest in-plane projection, folded toward the rest direction.
        double az = rest, best = -1.0;
        for (const auto& seg : d) {
            const double pf = seg.dot(uf), pl = seg.dot(ul);
            const double len = std::hypot(pf, pl);
            if (len <= best || len <= 0.0) continue;
            double a = rad2deg(std::atan2(pl, pf));
            if (std::abs(wrap_deg(a - rest)) > 90.0) a = wrap_deg(a + 180.0);
            az = a;
            best = len;
        }
        out[f].spread = wrap_deg(az - rest);
        const Vec3 uaz = uf * std::cos(deg2rad(az)) + ul * std::sin(deg2rad(az));

        if (three_d) {
            std::array<double, 3> th;
            for (int k = 0; k < 3; ++k) th[k] = rad2deg(std::atan2(-d[k].dot(n), d[k].dot(uaz)));
            out[f].mcp = th[0];
            out[f].pip = wrap_deg(th[1] - th[0]);
            out[f].dip = wrap_deg(th[2] - th[1]);
        } else {
            const Vec2 a{uaz.x, uaz.y};
            out[f].mcp = turning_deg(a, d[0].xy());
            out[f].pip = turning_deg(d[0].xy(), d[1].xy());
            out[f].dip = turning_deg(d[1].xy(), d[2].xy());
        }
    }
    return out;
}

double violation_penalty(double value, const std::array<double, 2>& range, double rate, double tolerance) {
    double v = 0.0;
    if (value < range[0]) v = range[0] - value;
    if (value > range[1]) v = value - range[1];
    if (v <= tolerance) return 0.0;
    return std::exp(rate * v) - 1.0;
}

Fitness angle_fitness(const HandSkeleton& skel, const AngleLimits& limits, bool require_full) {
    limits.validate();
    if (!skel.full()) {
        if (require_full) throw Error(ErrorCode::MissingJoints, "angle fitness needs all 20 joints");
        return {0.0, false};
    }
    const auto angles = finger_angles(skel, limits);
    Fitness fit{0.0, true};
    const double k = limits.penalty_rate;
    const double tol = limits.tolerance_deg;
    for (const auto& a : angles) {
        fit.score += violation_penalty(a.mcp, limits.mcp, k, tol);
        fit.score += violation_penalty(a.pip, limits.pip, k, tol);
        fit.score += violation_penalty(a.dip, limits.dip, k, tol);
        fit.score += violation_penalty(a.spread, limits.spread, k, tol);
    }
    return fit;
}

std::optional<double> joint_depth(const DepthFrame& frame, Vec2 px) {
    const int x = static_cast<int>(std::lround(px.x));
    const int y = static_cast<int>(std::lround(px.y));
    if (!frame.depth.in_bounds(x, y)) return std::nullopt;
    if (frame.depth(x, y) != kInvalidDepth) return static_cast<double>(frame.depth(x, y));
    std::vector<std::uint16_t> v;
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            if (frame.depth.in_bounds(x + dx, y + dy) && frame.depth(x + dx, y + dy) != kInvalidDepth)
                v.push_back(frame.depth(x + dx, y + dy));
        }
    }
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? static_cast<double>(v[m]) : 0.5 * (v[m - 1] + v[m]);
}

int match_truth(const surface::HandRegion& region, std::span<const sim::GroundTruth> truths) {
    int best = -1;
    std::size_t best_overlap = 0;
    for (std::size_t t = 0; t < truths.size(); ++t) {
        const auto& mask = truths[t].hand_mask;
        std::size_t overlap = 0;
        if (mask.empty()) {
            // Annotations loaded from disk carry no mask; count joints inside the region's box.
            for (const auto& j : truths[t].joints) overlap += region.component.bbox.contains(j.x, j.y);
        }
        for (auto p : region.component.pixels) {
            if (static_cast<std::size_t>(p) < mask.size() && mask[static_cast<std::size_t>(p)]) ++overlap;
        }
        if (overlap > best_overlap) {
            best_overlap = overlap;
            best = static_cast<int>(t);
        }
    }
    return best;
}

HandSkeleton OraclePoser::estimate(const PoseInput& in) const {
    const int t = match_truth(in.region, in.truths);
    if (t < 0) throw Error(ErrorCode::MissingJoints, "no annotated hand overlaps the region");
    HandSkeleton s = skeleton_from_truth(in.truths[t], in.frame.mm_per_px);
    s.region_id = in.region.id;
    if (sigma_ > 0.0) {
        std::mt19937_64 rng(derive_seed(seed_, in.frame.frame_id * 16 + static_cast<std::uint64_t>(t)));
        std::normal_distribution<double> g(0.0, sigma_);
        for (auto& j : s.joints) {
            j.px.x += g(rng);
            j.px.y += g(rng);
        }
    }
    s.fitness_applicable = true;
    return s;
}

HandSkeleton skeleton_from_heatmaps(const HeatmapStack& st, HandSide side, double mm_per_px, double threshold,
                                    const AngleLimits& limits) {
    HandSkeleton s;
    s.hand_side = side;
    s.mm_per_px = mm_per_px;
    for (int k = 0; k < st.joints; ++k) {
        if (k < static_cast<int>(st.empty.size()) && st.empty[k]) continue;
        const auto d = decode_heatmap(st.maps[k], st);
        const int j = st.joints == kJointCount ? k : tip_index(k);
        s.joints[j] = {d.frame, d.confidence, true, std::nullopt};
    }
    const auto fit = angle_fitness(s, limits);
    s.fitness_score = fit.score;
    s.fitness_applicable = fit.applicable;
    s.low_confidence = fit.applicable && fit.score > threshold;
    return s;
}

HandSkeleton HeatmapFilePoser::estimate(const PoseInput& in) const {
    const auto st = read_heatmaps(dir_ / heatmap_stem(in.frame.frame_id, in.region.id));
    // Handedness is not encoded in the maps; take it from the thumb's side of the index-little line.
    HandSkeleton s = skeleton_from_heatmaps(st, HandSide::Right, in.frame.mm_per_px, threshold_, limits_);
    if (s.full()) {
        const Vec2 i = s.joints[joint_index(Finger::Index, JointKind::Mcp)].px;
        const Vec2 r = s.joints[joint_index(Finger::Ring, JointKind::Mcp)].px;
        const Vec2 t = s.joints[joint_index(Finger::Thumb, JointKind::Mcp)].px;
        const double cross = (r.x - i.x) * (t.y - i.y) - (r.y - i.y) * (t.x - i.x);
        if (cross < 0.0) {
            s = skeleton_from_heatmaps(st, HandSide::Left, in.frame.mm_per_px, threshold_, limits_);
        }
    }
    s.region_id = in.region.id;
    return s;
}

HandSkeleton HeatmapRoundTripPoser::estimate(const PoseInput& in) const {
    const int t = match_truth(in.region, in.truths);
    if (t < 0) throw Error(ErrorCode::MissingJoints, "no annotated hand overlaps the region");
    auto st = make_target_heatmaps(in.truths[t], in.region.crop, sigma_);
    st.frame_id = in.frame.frame_id;
    HandSkeleton s = skeleton_from_heatmaps(st, in.truths[t].hand_side, in.frame.mm_per_px, threshold_);
    s.region_id = in.region.id;
    return s;
}

}  // namespace touchlab::pose

#include "touchlab/surface_model.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <fstream>

#include <nlohmann/json.hpp>

namespace touchlab::surface {

namespace {

constexpr int kMaxSamples = 256;

// Scales used to store float maps in 16-bit PGMs.
constexpr double kSurfaceScale = 16.0;
constexpr double kNoiseScale = 256.0;

struct PixelEstimate {
    bool valid = false;
    float surface = 0.0f;
    float noise = 0.0f;
};

PixelEstimate estimate_pixel(std::span<const int> diffs, int reference, double window) {
    PixelEstimate est;
    const int n = static_cast<int>(diffs.size());
    if (n == 0) return est;

    std::array<int, kMaxSamples> sorted{};
    std::copy(diffs.begin(), diffs.end(), sorted.begin());
    std::sort(sorted.begin(), sorted.begin() + n);

    // Modal 1 mm bin; scanning ascending keeps the smaller difference on ties.
    int mode = sorted[0], best = 0;
    for (int i = 0; i < n;) {
        int j = i;
        while (j < n && sorted[j] == sorted[i]) ++j;
        if (j - i > best) {
            best = j - i;
            mode = sorted[i];
        }
        i = j;
    }

    double sum = 0.0;
    int m = 0;
    for (int i = 0; i < n; ++i) {
        if (std::abs(sorted[i] - mode) <= window) {
            sum += sorted[i];
            ++m;
        }
    }
    const double mean = sum / m;
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
        if (std::abs(sorted[i] - mode) <= window) ss += (sorted[i] - mean) * (sorted[i] - mean);
    }
    est.valid = true;
    est.surface = static_cast<float>(reference + mean);
    est.noise = m > 1 ? static_cast<float>(std::sqrt(ss / (m - 1))) : 0.0f;
    return est;
}

float median_of(std::vector<float>& v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    float med = v[mid];
    if (v.size() % 2 == 0) {
        const float lo = *std::max_element(v.begin(), v.begin() + mid);
        med = 0.5f * (med + lo);
    }
    return med;
}

void fill_invalid(BackgroundModel& model, Mask& filled) {
    const int w = model.width();
    const int h = model.height();
    std::vector<float> depths, noises;
    std::vector<std::pair<std::size_t, std::pair<float, float>>> updates;
    for (;;) {
        updates.clear();
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (filled(x, y)) continue;
                depths.clear();
                noises.clear();
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (!dx && !dy) continue;
                        const int nx = x + dx, ny = y + dy;
                        if (!filled.in_bounds(nx, ny) || !filled(nx, ny)) continue;
                        depths.push_back(model.surface_depth(nx, ny));
                        noises.push_back(model.per_pixel_noise(nx, ny));
                    }
                }
                if (depths.empty()) continue;
                updates.push_back({static_cast<std::size_t>(y) * w + x, {median_of(depths), median_of(noises)}});
            }
        }
        if (updates.empty()) break;
        for (const auto& [idx, v] : updates) {
            model.surface_depth[idx] = v.first;
            model.per_pixel_noise[idx] = v.second;
            filled[idx] = 1;
        }
    }
}

}  // namespace

BackgroundModel build_background(std::span<const DepthFrame> frames, const BackgroundBuildConfig& cfg) {
    if (cfg.frame_count < 1 || cfg.frame_count > kMaxSamples)
        throw Error(ErrorCode::InvalidArgument, "frame_count must be in [1, 256]");
    if (static_cast<int>(frames.size()) < cfg.frame_count)
        throw Error(ErrorCode::InsufficientFrames, "need " + std::to_string(cfg.frame_count) + " frames, got " +
                                                       std::to_string(frames.size()));
    const auto used = frames.first(static_cast<std::size_t>(cfg.frame_count));
    const int w = used[0].width();
    const int h = used[0].height();
    for (const auto& f : used) {
        if (f.width() != w || f.height() != h)
            throw Error(ErrorCode::DimensionMismatch, "background frames differ in size");
    }

    BackgroundModel model;
    model.surface_depth = Image<float>(w, h, 0.0f);
    model.per_pixel_noise = Image<float>(w, h, 0.0f);
    model.frames_used = cfg.frame_count;
    model.reference_frame_id = used[0].frame_id;
    model.mm_per_px = used[0].mm_per_px;

    Mask filled(w, h, 0);
    std::size_t any_valid = 0;
    std::array<int, kMaxSamples> diffs{};
    const std::size_t npx = static_cast<std::size_t>(w) * h;
    for (std::size_t i = 0; i < npx; ++i) {
        // Reference is the first frame; where it is invalid, the first valid sample stands in.
        int reference = 0;
        for (const auto& f : used) {
            if (f.depth[i] != kInvalidDepth) {
                reference = f.depth[i];
                break;
            }
        }
        int n = 0;
        for (const auto& f : used) {
            if (f.depth[i] != kInvalidDepth) diffs[n++] = static_cast<int>(f.depth[i]) - reference;
        }
        const auto est = estimate_pixel(std::span<const int>(diffs.data(), n), reference, cfg.inlier_window_mm);
        if (!est.valid) continue;
        model.surface_depth[i] = est.surface;
        model.per_pixel_noise[i] = est.noise;
        filled[i] = 1;
        ++any_valid;
    }
    if (!any_valid) throw Error(ErrorCode::AllPixelsInvalid, "no valid sample in any background frame");
    if (any_valid < npx) fill_invalid(model, filled);
    return model;
}

BackgroundModel flat_background(int width, int height, double depth_mm, double mm_per_px) {
    BackgroundModel m;
    m.surface_depth = Image<float>(width, height, static_cast<float>(depth_mm));
    m.per_pixel_noise = Image<float>(width, height, 0.0f);
    m.frames_used = 0;
    m.mm_per_px = mm_per_px;
    return m;
}

void save_background(const std::filesystem::path& stem, const BackgroundModel& model) {
    auto encode = [](const Image<float>& src, double scale) {
        Image<std::uint16_t> out(src.width(), src.height());
        for (std::size_t i = 0; i < src.size(); ++i)
            out[i] = static_cast<std::uint16_t>(std::clamp(std::lround(src[i] * scale), 0L, 65535L));
        return out;
    };
    auto base = stem.string();
    write_pgm16(base + ".surface.pgm", encode(model.surface_depth, kSurfaceScale));
    write_pgm16(base + ".noise.pgm", encode(model.per_pixel_noise, kNoiseScale));
    nlohmann::json meta = {
        {"frames_used", model.frames_used},
        {"reference_frame_id", model.reference_frame_id},
        {"mm_per_px", model.mm_per_px},
        {"surface_scale", kSurfaceScale},
        {"noise_scale", kNoiseScale},
    };
    std::ofstream out(base + ".json");
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + base + ".json");
    out << meta.dump(2) << '\n';
}

BackgroundModel load_background(const std::filesystem::path& stem) {
    const auto base = stem.string();
    std::ifstream in(base + ".json");
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + base + ".json");
    nlohmann::json meta;
    try {
        in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::IoError, base + ".json: " + e.what());
    }
    auto decode = [](const Image<std::uint16_t>& src, double scale) {
        Image<float> out(src.width(), src.height());
        for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<float>(src[i] / scale);
        return out;
    };
    BackgroundModel m;
    m.surface_depth = decode(read_pgm16(base + ".surface.pgm"), meta.value("surface_scale", kSurfaceScale));
    m.per_pixel_noise = decode(read_pgm16(base + ".noise.pgm"), meta.value("noise_scale", kNoiseScale));
    if (!m.surface_depth.same_shape(m.per_pixel_noise))
        throw Error(ErrorCode::DimensionMismatch, "surface and noise maps differ in size");
    m.frames_used = meta.value("frames_used", 0);
    m.reference_frame_id = meta.value("reference_frame_id", std::uint64_t{0});
    m.mm_per_px = meta.value("mm_per_px", 1.5);
    return m;
}

HeightMap height_map(const DepthFrame& frame, const BackgroundModel& model) {
    if (frame.width() != model.width() || frame.height() != model.height())
        throw Error(ErrorCode::DimensionMismatch, "frame and background model differ in size");
    HeightMap hm{Image<float>(frame.width(), frame.height())};
    const std::size_t n = hm.height.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint16_t d = frame.depth[i];
        hm.height[i] = d == kInvalidDepth ? kInvalidHeight : model.surface_depth[i] - static_cast<float>(d);
    }
    return hm;
}

void SliceConfig::validate() const {
    if (!(touch_min_height >= 0.0 && touch_min_height < touch_max_height && touch_max_height < hand_max_height))
        throw Error(ErrorCode::ConfigError, "slice heights must satisfy 0 <= touch_min < touch_max < hand_max");
    if (noise_k < 0.0) throw Error(ErrorCode::ConfigError, "noise_k must be >= 0");
}

SliceMasks slice_masks(const HeightMap& hm, const SliceConfig& cfg, const BackgroundModel& model) {
    cfg.validate();
    if (hm.height.width() != model.width() || hm.height.height() != model.height())
        throw Error(ErrorCode::DimensionMismatch, "height map and background model differ in size");
    const int w = hm.height.width();
    const int h = hm.height.height();
    SliceMasks out{Mask(w, h, 0), Mask(w, h, 0)};
    const float touch_max = static_cast<float>(cfg.touch_max_height);
    const float hand_max = static_cast<float>(cfg.hand_max_height);
    const float touch_min = static_cast<float>(cfg.touch_min_height);
    const float k = static_cast<float>(cfg.noise_k);
    for (std::size_t i = 0; i < hm.height.size(); ++i) {
        const float v = hm.height[i];
        if (!height_valid(v)) continue;
        if (v > touch_max) {
            if (v <= hand_max) out.hand[i] = 1;
            continue;
        }
        const float floor = std::max(touch_min, k * model.per_pixel_noise[i]);
        if (v > floor) out.touch[i] = 1;
    }
    return out;
}

CropWindow clamp_crop(Vec2 center, int size, int width, int height) {
    size = std::min({size, width, height});
    CropWindow c;
    c.size = size;
    c.x = static_cast<int>(std::lround(center.x)) - size / 2;
    c.y = static_cast<int>(std::lround(center.y)) - size / 2;
    c.x = std::clamp(c.x, 0, width - size);
    c.y = std::clamp(c.y, 0, height - size);
    return c;
}

std::string entry_edges_string(std::uint8_t edges) {
    std::string s;
    auto add = [&](std::uint8_t bit, const char* name) {
        if (!(edges & bit)) return;
        if (!s.empty()) s += ',';
        s += name;
    };
    add(kEdgeLeft, "left");
    add(kEdgeRight, "right");
    add(kEdgeTop, "top");
    add(kEdgeBottom, "bottom");
    return s.empty() ? "none" : s;
}

HandRegions localize_hand_regions(const Mask& hand_mask, const RegionConfig& cfg) {
    const int w = hand_mask.width();
    const int h = hand_mask.height();
    auto lab = label_components(hand_mask);
    HandRegions out;
    out.labels = Image<std::int32_t>(w, h, 0);

    std::vector<std::int32_t> dist;
    std::deque<std::int32_t> queue;
    for (auto& comp : lab.components) {
        if (comp.area() < cfg.min_area) {
            if (comp.area() >= cfg.fragment_min_area) {
                out.fragments.push_back(std::move(comp));
                const auto tag = -static_cast<std::int32_t>(out.fragments.size());
                for (auto p : out.fragments.back().pixels) out.labels[p] = tag;
            }
            continue;
        }
        HandRegion region;
        region.id = static_cast<int>(out.regions.size());

        std::uint8_t edges = kEdgeNone;
        queue.clear();
        for (auto p : comp.pixels) {
            const int x = p % w, y = p / w;
            std::uint8_t e = kEdgeNone;
            if (x == 0) e |= kEdgeLeft;
            if (x == w - 1) e |= kEdgeRight;
            if (y == 0) e |= kEdgeTop;
            if (y == h - 1) e |= kEdgeBottom;
            if (e) queue.push_back(p);
            edges |= e;
        }
        region.entry_edges = edges;

        if (queue.empty()) {
            region.far_point = comp.centroid;
        } else {
            // Breadth-first geodesic distance from the border pixels, 8-connected steps.
            dist.assign(static_cast<std::size_t>(w) * h, -1);
            for (auto p : queue) dist[p] = 0;
            std::int32_t far = queue.front();
            while (!queue.empty()) {
                const std::int32_t p = queue.front();
                queue.pop_front();
                if (dist[p] > dist[far]) far = p;
                const int x = p % w, y = p / w;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx, ny = y + dy;
                        if ((!dx && !dy) || nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        const std::int32_t q = ny * w + nx;
                        if (dist[q] >= 0 || lab.labels[q] != comp.label) continue;
                        dist[q] = dist[p] + 1;
                        queue.push_back(q);
                    }
                }
            }
            region.far_point = {static_cast<double>(far % w), static_cast<double>(far / w)};
        }
        region.crop = clamp_crop(region.far_point, cfg.hand_crop_px, w, h);
        for (auto p : comp.pixels) out.labels[p] = region.id + 1;
        region.component = std::move(comp);
        out.regions.push_back(std::move(region));
    }
    return out;
}

}  // namespace touchlab::surface

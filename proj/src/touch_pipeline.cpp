#include "touchlab/touch_pipeline.hpp"

#include <chrono>
#include <limits>

#include <nlohmann/json.hpp>

#include "touchlab/hungarian.hpp"

namespace touchlab::touch {

namespace {

constexpr int kMaxFragmentGap = 40;

double rect_distance(const Rect& r, Vec2 p) {
    const double dx = std::max({r.x0 - p.x, 0.0, p.x - r.x1});
    const double dy = std::max({r.y0 - p.y, 0.0, p.y - r.y1});
    return std::hypot(dx, dy);
}

Rect rect_union(Rect a, const Rect& b) {
    if (b.empty()) return a;
    a.include(b.x0, b.y0);
    a.include(b.x1, b.y1);
    return a;
}

Vec2 clamp_to(const Rect& r, Vec2 p) {
    return {std::clamp(p.x, static_cast<double>(r.x0), static_cast<double>(r.x1)),
            std::clamp(p.y, static_cast<double>(r.y0), static_cast<double>(r.y1))};
}

class Stopwatch {
public:
    explicit Stopwatch(std::vector<StageTiming>& out) : out_(out), t_(std::chrono::steady_clock::now()) {}
    void lap(const char* stage) {
        const auto now = std::chrono::steady_clock::now();
        out_.push_back({stage, std::chrono::duration_cast<std::chrono::microseconds>(now - t_).count()});
        t_ = now;
    }

private:
    std::vector<StageTiming>& out_;
    std::chrono::steady_clock::time_point t_;
};

}  // namespace

void MatchConfig::validate() const {
    if (!(min_blob_area < small_blob_area && small_blob_area < max_blob_area))
        throw Error(ErrorCode::ConfigError, "need min_blob_area < small_blob_area < max_blob_area");
    if (stride < 1 || box_filter < 1 || hover_radius < 0 || max_age < 0)
        throw Error(ErrorCode::ConfigError, "stride, box_filter must be >= 1; hover_radius, max_age >= 0");
    if (!(gate_distance > 0.0) || !(gate_penalty > 0.0)) throw Error(ErrorCode::ConfigError, "gate values must be > 0");
}

std::vector<HandGroup> group_hands(const surface::HandRegions& regions) {
    std::vector<HandGroup> groups;
    const bool any_edge = std::any_of(regions.regions.begin(), regions.regions.end(),
                                      [](const surface::HandRegion& r) { return r.entry_edges != surface::kEdgeNone; });
    std::vector<int> orphans;
    for (const auto& r : regions.regions) {
        if (!any_edge || r.entry_edges != surface::kEdgeNone) {
            HandGroup g;
            g.parent = r.id;
            g.member_regions.push_back(r.id);
            g.bbox = r.component.bbox;
            groups.push_back(std::move(g));
        } else {
            orphans.push_back(r.id);
        }
    }
    auto nearest = [&](const Component& c) {
        int best = -1;
        double bd = kMaxFragmentGap;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const double d = rect_distance(regions.regions[groups[g].parent].component.bbox, c.centroid);
            if (d <= bd) {
                if (best < 0 || d < bd) best = static_cast<int>(g);
                bd = std::min(bd, d);
            }
        }
        return best;
    };
    for (int id : orphans) {
        const int g = nearest(regions.regions[id].component);
        if (g < 0) continue;
        groups[g].member_regions.push_back(id);
        groups[g].bbox = rect_union(groups[g].bbox, regions.regions[id].component.bbox);
    }
    for (std::size_t f = 0; f < regions.fragments.size(); ++f) {
        const int g = nearest(regions.fragments[f]);
        if (g < 0) continue;
        groups[g].member_fragments.push_back(static_cast<int>(f));
        groups[g].bbox = rect_union(groups[g].bbox, regions.fragments[f].bbox);
    }
    return groups;
}

std::vector<TouchBlob> extract_touch_blobs(const Mask& touch_mask, const surface::HandRegions& regions,
                                           const std::vector<HandGroup>& hands, const surface::HeightMap& hm,
                                           const MatchConfig& cfg) {
    const Mask filtered = majority_filter(touch_mask, cfg.box_filter);
    auto lab = label_components(filtered);
    const int w = filtered.width();
    const int h = filtered.height();

    std::vector<int> region_group(regions.regions.size(), -1), fragment_group(regions.fragments.size(), -1);
    for (std::size_t g = 0; g < hands.size(); ++g) {
        for (int r : hands[g].member_regions) region_group[r] = static_cast<int>(g);
        for (int f : hands[g].member_fragments) fragment_group[f] = static_cast<int>(g);
    }
    auto group_at = [&](int x, int y) {
        const std::int32_t l = regions.labels(x, y);
        if (l > 0) return region_group[l - 1];
        if (l < 0) return fragment_group[-l - 1];
        return -1;
    };

    std::vector<TouchBlob> out;
    const int r = cfg.hover_radius;
    for (auto& comp : lab.components) {
        if (comp.area() < cfg.min_blob_area || comp.area() > cfg.max_blob_area) continue;
        int hand = -1;
        int best_gap = std::numeric_limits<int>::max();
        for (auto p : comp.pixels) {
            const int x = p % w, y = p / w;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    const int g = group_at(nx, ny);
                    if (g < 0) continue;
                    const int gap = std::max(std::abs(dx), std::abs(dy));
                    if (gap < best_gap || (gap == best_gap && g < hand)) {
                        best_gap = gap;
                        hand = g;
                    }
                }
            }
        }
        TouchBlob b;
        b.adjacent = hand >= 0;
        if (hand < 0) {
            double bd = std::numeric_limits<double>::infinity();
            for (std::size_t g = 0; g < hands.size(); ++g) {
                if (!comp.bbox.intersects(hands[g].bbox.expanded(r))) continue;
                const double d = rect_distance(hands[g].bbox, comp.centroid);
                if (d < bd) {
                    bd = d;
                    hand = static_cast<int>(g);
                }
            }
            if (hand < 0) continue;
        }
        double sum = 0.0;
        int n = 0;
        for (auto p : comp.pixels) {
            const float v = hm.height[static_cast<std::size_t>(p)];
            if (!surface::height_valid(v)) continue;
            sum += v;
            ++n;
        }
        b.id = static_cast<int>(out.size());
        b.mean_height = n ? sum / n : 0.0;
        b.hand = hand;
        b.component = std::move(comp);
        out.push_back(std::move(b));
    }
    return out;
}

std::vector<TouchBlob> discard_hover(std::vector<TouchBlob> blobs, double touch_max_height) {
    const double ceiling = 0.75 * touch_max_height;
    std::erase_if(blobs, [&](const TouchBlob& b) { return b.mean_height > ceiling && !b.adjacent; });
    return blobs;
}

std::vector<int> FingerTracker::assign_hands(const std::vector<Vec2>& centroids) {
    struct Pair {
        double d;
        std::size_t known, fresh;
    };
    std::vector<Pair> pairs;
    for (std::size_t k = 0; k < hands_.size(); ++k) {
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            const double d = distance(hands_[k].centroid, centroids[c]);
            if (d < hand_gate_) pairs.push_back({d, k, c});
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.d < b.d; });
    std::vector<int> ids(centroids.size(), -1);
    std::vector<char> used(hands_.size(), 0);
    for (const auto& p : pairs) {
        if (used[p.known] || ids[p.fresh] >= 0) continue;
        used[p.known] = 1;
        ids[p.fresh] = hands_[p.known].id;
        hands_[p.known].centroid = centroids[p.fresh];
        hands_[p.known].age = 0;
    }
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        if (ids[c] >= 0) continue;
        ids[c] = next_hand_++;
        hands_.push_back({ids[c], centroids[c], 0});
    }
    return ids;
}

std::optional<Vec2> FingerTracker::last(int hand_id, Finger f) const {
    const auto it = fingers_.find({hand_id, static_cast<int>(f)});
    if (it == fingers_.end()) return std::nullopt;
    return it->second.pos;
}

int FingerTracker::age(int hand_id, Finger f) const {
    const auto it = fingers_.find({hand_id, static_cast<int>(f)});
    return it == fingers_.end() ? -1 : it->second.age;
}

void FingerTracker::update(int hand_id, Finger f, Vec2 pos) { fingers_[{hand_id, static_cast<int>(f)}] = {pos, 0}; }

void FingerTracker::end_frame() {
    for (auto it = fingers_.begin(); it != fingers_.end();) {
        if (++it->second.age > max_age_)
            it = fingers_.erase(it);
        else
            ++it;
    }
    std::erase_if(hands_, [&](HandEntry& h) { return ++h.age > max_age_; });
}

Decomposition decompose_blob(const TouchBlob& blob, const std::array<std::optional<Vec2>, kFingerCount>& tips,
                             int frame_width, const MatchConfig& cfg) {
    Decomposition d;
    const auto& px = blob.component.pixels;
    const Rect& bb = blob.bbox();
    std::array<Vec2, kFingerCount> sum{};
    std::array<int, kFingerCount> count{};
    for (int y = bb.y0; y <= bb.y1; y += cfg.stride) {
        for (int x = bb.x0; x <= bb.x1; x += cfg.stride) {
            const std::int32_t idx = y * frame_width + x;
            if (!std::binary_search(px.begin(), px.end(), idx)) continue;
            const Vec2 s{static_cast<double>(x), static_cast<double>(y)};
            d.samples.push_back(s);
            int best = -1;
            double bd = cfg.gate_distance;
            for (int f = 0; f < kFingerCount; ++f) {
                if (!tips[f]) continue;
                const double dist = distance(*tips[f], s);
                if (dist < bd) {
                    bd = dist;
                    best = f;
                }
            }
            if (best < 0) continue;
            sum[best] = sum[best] + s;
            ++count[best];
        }
    }
    d.degenerate = d.samples.empty();
    for (int f = 0; f < kFingerCount; ++f) {
        if (count[f]) d.clusters.push_back({f, sum[f] * (1.0 / count[f]), count[f]});
    }
    return d;
}

double designation_cost(Vec2 f, Vec2 t, std::optional<Vec2> f_prev, const MatchConfig& cfg) {
    const double d = distance(f, t);
    if (!(d < cfg.gate_distance)) return cfg.gate_penalty;
    return d + (f_prev ? distance(*f_prev, t) : 0.0);
}

std::vector<TouchPoint> designate_fingers(const std::vector<TouchBlob>& blobs, const pose::HandSkeleton& skeleton,
                                          int hand_id, FingerTracker& tracker, int frame_width, double mm_per_px,
                                          const MatchConfig& cfg) {
    std::array<std::optional<Vec2>, kFingerCount> tips;
    std::vector<int> rows;
    for (int f = 0; f < kFingerCount; ++f) {
        const auto& j = skeleton.joints[tip_index(f)];
        if (!j.present) continue;
        tips[f] = j.px;
        rows.push_back(f);
    }

    struct Target {
        Vec2 pos;
        std::size_t blob;
    };
    std::vector<Target> targets;
    for (std::size_t b = 0; b < blobs.size(); ++b) {
        const auto& blob = blobs[b];
        if (blob.area() < cfg.small_blob_area) {
            targets.push_back({blob.centroid(), b});
            continue;
        }
        const auto dec = decompose_blob(blob, tips, frame_width, cfg);
        if (dec.clusters.empty()) {
            targets.push_back({blob.centroid(), b});
            continue;
        }
        for (const auto& c : dec.clusters) targets.push_back({c.mean, b});
    }

    std::vector<std::vector<double>> cost(rows.size(), std::vector<double>(targets.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const Finger f = static_cast<Finger>(rows[r]);
        for (std::size_t t = 0; t < targets.size(); ++t)
            cost[r][t] = designation_cost(*tips[rows[r]], targets[t].pos, tracker.last(hand_id, f), cfg);
    }
    const auto asg = hungarian_assign(cost, cfg.gate_penalty);

    std::vector<int> target_row(targets.size(), -1);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (asg.row_to_col[r] >= 0) target_row[asg.row_to_col[r]] = static_cast<int>(r);
    }
    std::vector<bool> blob_matched(blobs.size(), false);
    for (std::size_t t = 0; t < targets.size(); ++t) {
        if (target_row[t] >= 0) blob_matched[targets[t].blob] = true;
    }
    std::vector<TouchPoint> out;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const auto& blob = blobs[targets[t].blob];
        const int r = target_row[t];
        if (r < 0) continue;
        TouchPoint p;
        p.hand_id = hand_id;
        p.blob_id = blob.id;
        p.finger = static_cast<Finger>(rows[r]);
        p.px = clamp_to(blob.bbox().expanded(1), *tips[rows[r]]);
        p.cost = cost[r][t];
        p.mm = p.px * mm_per_px;
        out.push_back(p);
    }
    // A blob none of whose targets found a fingertip is reported once, unlabelled, at its centroid.
    for (std::size_t b = 0; b < blobs.size(); ++b) {
        if (blob_matched[b]) continue;
        TouchPoint p;
        p.hand_id = hand_id;
        p.blob_id = blobs[b].id;
        p.px = blobs[b].centroid();
        p.cost = cfg.gate_penalty;
        p.mm = p.px * mm_per_px;
        out.push_back(p);
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (asg.row_to_col[r] >= 0) tracker.update(hand_id, static_cast<Finger>(rows[r]), *tips[rows[r]]);
    }
    return out;
}

std::vector<TouchPoint> centroid_touches(const std::vector<TouchBlob>& blobs, int hand_id, double mm_per_px) {
    std::vector<TouchPoint> out;
    for (const auto& b : blobs) {
        TouchPoint p;
        p.px = b.centroid();
        p.mm = p.px * mm_per_px;
        p.hand_id = hand_id;
        p.blob_id = b.id;
        out.push_back(p);
    }
    return out;
}

std::int64_t FrameResult::total_micros() const {
    std::int64_t t = 0;
    for (const auto& s : timings) t += s.micros;
    return t;
}

FrameResult process_frame(const DepthFrame& frame, std::span<const sim::GroundTruth> truths, const FrameContext& ctx,
                          FingerTracker& tracker) {
    const auto& cfg = ctx.config;
    FrameResult res;
    res.frame_id = frame.frame_id;
    Stopwatch sw(res.timings);

    const auto hm = surface::height_map(frame, ctx.model);
    sw.lap("height_map");
    auto masks = surface::slice_masks(hm, cfg.slice, ctx.model);
    sw.lap("slice");
    const auto regions = surface::localize_hand_regions(masks.hand, cfg.region);
    auto hands = group_hands(regions);
    {
        std::vector<Vec2> centroids;
        for (const auto& g : hands) centroids.push_back(regions.regions[g.parent].component.centroid);
        const auto ids = tracker.assign_hands(centroids);
        for (std::size_t g = 0; g < hands.size(); ++g) hands[g].hand_id = ids[g];
    }
    for (const auto& g : hands) {
        const auto& r = regions.regions[g.parent];
        res.hands.push_back({r.id, g.hand_id, r.entry_edges, g.bbox, r.crop, r.far_point, r.component.area()});
    }
    sw.lap("regions");

    std::vector<std::optional<pose::HandSkeleton>> skeletons(hands.size());
    for (std::size_t g = 0; g < hands.size(); ++g) {
        try {
            const pose::PoseInput in{frame, regions.regions[hands[g].parent], ctx.model, truths};
            skeletons[g] = ctx.poser.estimate(in);
            res.skeletons.push_back(*skeletons[g]);
            res.skeleton_hand_ids.push_back(hands[g].hand_id);
        } catch (const Error& e) {
            res.warnings.push_back("pose: hand " + std::to_string(hands[g].hand_id) + ": " + e.what());
        }
    }
    sw.lap("pose");

    auto blobs = extract_touch_blobs(masks.touch, regions, hands, hm, cfg.match);
    blobs = discard_hover(std::move(blobs), cfg.slice.touch_max_height);
    for (std::size_t i = 0; i < blobs.size(); ++i) blobs[i].id = static_cast<int>(i);
    sw.lap("blobs");

    for (std::size_t g = 0; g < hands.size(); ++g) {
        std::vector<TouchBlob> mine;
        for (const auto& b : blobs) {
            if (b.hand == static_cast<int>(g)) mine.push_back(b);
        }
        if (mine.empty()) continue;
        auto pts = skeletons[g] ? designate_fingers(mine, *skeletons[g], hands[g].hand_id, tracker, frame.width(),
                                                    frame.mm_per_px, cfg.match)
                                : centroid_touches(mine, hands[g].hand_id, frame.mm_per_px);
        res.touch_points.insert(res.touch_points.end(), pts.begin(), pts.end());
    }
    tracker.end_frame();
    sw.lap("designate");

    res.blob_labels = Image<std::int32_t>(frame.width(), frame.height(), 0);
    for (const auto& b : blobs) {
        for (auto p : b.component.pixels) res.blob_labels[static_cast<std::size_t>(p)] = b.id + 1;
    }
    res.blobs = std::move(blobs);
    res.touch_mask = std::move(masks.touch);
    res.hand_mask = std::move(masks.hand);
    return res;
}

nlohmann::json to_json(const TouchPoint& p) {
    return {
        {"x", p.px.x},
        {"y", p.px.y},
        {"x_mm", p.mm.x},
        {"y_mm", p.mm.y},
        {"finger", std::string(to_string(p.finger))},
        {"hand_id", p.hand_id},
        {"blob_id", p.blob_id},
        {"cost", p.cost},
    };
}

nlohmann::json to_json(const FrameResult& r, bool include_timings) {
    nlohmann::json j;
    j["frame_id"] = r.frame_id;
    j["touch_points"] = nlohmann::json::array();
    for (const auto& p : r.touch_points) j["touch_points"].push_back(to_json(p));
    j["skeletons"] = nlohmann::json::array();
    for (std::size_t i = 0; i < r.skeletons.size(); ++i) {
        const auto& s = r.skeletons[i];
        nlohmann::json joints = nlohmann::json::array();
        for (const auto& jt : s.joints) {
            if (jt.present)
                joints.push_back({jt.px.x, jt.px.y, jt.confidence});
            else
                joints.push_back(nullptr);
        }
        j["skeletons"].push_back({
            {"hand_id", r.skeleton_hand_ids[i]},
            {"region", s.region_id},
            {"hand_side", std::string(to_string(s.hand_side))},
            {"fitness", s.fitness_score},
            {"fitness_applicable", s.fitness_applicable},
            {"low_confidence", s.low_confidence},
            {"joints", joints},
        });
    }
    j["blobs"] = nlohmann::json::array();
    for (const auto& b : r.blobs) {
        const auto& bb = b.bbox();
        j["blobs"].push_back({
            {"id", b.id},
            {"area", b.area()},
            {"centroid", {b.centroid().x, b.centroid().y}},
            {"bbox", {bb.x0, bb.y0, bb.x1, bb.y1}},
            {"mean_height", b.mean_height},
            {"hand", b.hand},
        });
    }
    j["hands"] = nlohmann::json::array();
    for (const auto& h : r.hands) {
        j["hands"].push_back({
            {"hand_id", h.hand_id},
            {"region", h.region},
            {"entry", surface::entry_edges_string(h.entry_edges)},
            {"bbox", {h.bbox.x0, h.bbox.y0, h.bbox.x1, h.bbox.y1}},
            {"crop", {h.crop.x, h.crop.y, h.crop.size}},
            {"area", h.area},
        });
    }
    if (!r.warnings.empty()) j["warnings"] = r.warnings;
    if (include_timings) {
        nlohmann::json t = nlohmann::json::object();
        for (const auto& s : r.timings) t[s.stage] = s.micros;
        j["timings_us"] = t;
    }
    return j;
}

}  // namespace touchlab::touch

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "touchlab/common.hpp"
#include "touchlab/components.hpp"
#include "touchlab/depth_frame.hpp"
#include "touchlab/hand_sim.hpp"
#include "touchlab/pose_est.hpp"
#include "touchlab/surface_model.hpp"

namespace touchlab::touch {

struct MatchConfig {
    double gate_distance = 60.0;   // D_t, px
    double gate_penalty = 1e6;     // D_e
    int stride = 9;
    int small_blob_area = 40;
    int min_blob_area = 12;
    int max_blob_area = 2500;
    int box_filter = 3;
    int hover_radius = 4;
    int max_age = 15;
    double hand_gate_px = 120.0;  // hand identity carries over within this centroid distance

    void validate() const;
};

struct TouchBlob {
    int id = 0;
    Component component;
    double mean_height = 0.0;
    int hand = -1;           // index of the owning hand group in this frame
    bool adjacent = false;   // within hover_radius of a pixel of that hand

    int area() const { return component.area(); }
    Vec2 centroid() const { return component.centroid; }
    const Rect& bbox() const { return component.bbox; }
};

struct TouchPoint {
    Vec2 px;
    Vec2 mm;
    Finger finger = Finger::Unknown;
    int hand_id = -1;
    int blob_id = -1;
    double cost = 0.0;
};

/// Hands in one frame: a region with an entry edge plus the fragments attached to it.
struct HandGroup {
    int parent = -1;                 // index into HandRegions::regions
    std::vector<int> member_regions; // includes parent
    std::vector<int> member_fragments;
    Rect bbox;                       // union of members
    int hand_id = -1;
};

std::vector<HandGroup> group_hands(const surface::HandRegions& regions);

/// Box-filtered, area-gated, 8-connected touch blobs that lie near a hand group.
std::vector<TouchBlob> extract_touch_blobs(const Mask& touch_mask, const surface::HandRegions& regions,
                                           const std::vector<HandGroup>& hands, const surface::HeightMap& hm,
                                           const MatchConfig& cfg);

/// Drops near-ceiling blobs (mean height > 0.75 * touch_max_height) that are not adjacent to their hand.
std::vector<TouchBlob> discard_hover(std::vector<TouchBlob> blobs, double touch_max_height);

class FingerTracker {
public:
    explicit FingerTracker(int max_age = 15, double hand_gate_px = 120.0) : max_age_(max_age), hand_gate_(hand_gate_px) {}

    /// Greedy nearest-centroid hand identity; unmatched hands get fresh ids.
    std::vector<int> assign_hands(const std::vector<Vec2>& centroids);

    std::optional<Vec2> last(int hand_id, Finger f) const;
    void update(int hand_id, Finger f, Vec2 pos);
    /// Ages every entry; entries older than max_age are evicted.
    void end_frame();

    std::size_t size() const { return fingers_.size(); }
    int age(int hand_id, Finger f) const;

private:
    struct Entry {
        Vec2 pos;
        int age = 0;
    };
    struct HandEntry {
        int id;
        Vec2 centroid;
        int age = 0;
    };
    int max_age_;
    double hand_gate_;
    int next_hand_ = 0;
    std::vector<HandEntry> hands_;
    std::map<std::pair<int, int>, Entry> fingers_;
};

struct Cluster {
    int finger = -1;
    Vec2 mean;
    int samples = 0;
};

struct Decomposition {
    std::vector<Cluster> clusters;
    bool degenerate = false;  // no grid sample inside the blob
    std::vector<Vec2> samples;
};

/// Stride-9 grid over the bounding box (anchored at its origin); samples inside the blob join
/// the nearest fingertip within the gate; one cluster per fingertip that received samples.
Decomposition decompose_blob(const TouchBlob& blob, const std::array<std::optional<Vec2>, kFingerCount>& tips,
                             int frame_width, const MatchConfig& cfg);

/// Cost(f, t) = |f - t| + |f' - t| inside the gate, D_e outside; the history term is 0 without f'.
double designation_cost(Vec2 f, Vec2 t, std::optional<Vec2> f_prev, const MatchConfig& cfg);

/// Labelled points for every matched target, then one unknown point per blob left without a match.
std::vector<TouchPoint> designate_fingers(const std::vector<TouchBlob>& blobs, const pose::HandSkeleton& skeleton,
                                          int hand_id, FingerTracker& tracker, int frame_width, double mm_per_px,
                                          const MatchConfig& cfg);

/// Unlabelled centroid touches, used when a hand has no skeleton.
std::vector<TouchPoint> centroid_touches(const std::vector<TouchBlob>& blobs, int hand_id, double mm_per_px);

struct PipelineConfig {
    surface::SliceConfig slice;
    surface::RegionConfig region;
    MatchConfig match;
};

struct HandSummary {
    int region = -1;
    int hand_id = -1;
    std::uint8_t entry_edges = 0;
    Rect bbox;
    CropWindow crop;
    Vec2 far_point;
    int area = 0;
};

struct StageTiming {
    std::string stage;
    std::int64_t micros = 0;
};

struct FrameResult {
    std::uint64_t frame_id = 0;
    std::vector<TouchPoint> touch_points;
    std::vector<pose::HandSkeleton> skeletons;
    std::vector<int> skeleton_hand_ids;
    std::vector<TouchBlob> blobs;
    std::vector<HandSummary> hands;
    std::vector<std::string> warnings;
    Mask touch_mask;
    Mask hand_mask;
    Image<std::int32_t> blob_labels;  // blob id + 1
    std::vector<StageTiming> timings;

    std::int64_t total_micros() const;
};

struct FrameContext {
    const surface::BackgroundModel& model;
    const pose::Poser& poser;
    const PipelineConfig& config;
};

FrameResult process_frame(const DepthFrame& frame, std::span<const sim::GroundTruth> truths, const FrameContext& ctx,
                          FingerTracker& tracker);

nlohmann::json to_json(const TouchPoint& p);
nlohmann::json to_json(const FrameResult& r, bool include_timings);

}  // namespace touchlab::touch

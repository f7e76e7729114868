#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "touchlab/common.hpp"
#include "touchlab/components.hpp"
#include "touchlab/depth_frame.hpp"

namespace touchlab::surface {

struct BackgroundBuildConfig {
    int frame_count = 30;
    /// Samples farther than this from the modal bin are treated as transients, not surface.
    double inlier_window_mm = 8.0;
};

/// Per-pixel model of the empty surface. Immutable once built.
struct BackgroundModel {
    Image<float> surface_depth;    // mm
    Image<float> per_pixel_noise;  // mm, sample std
    int frames_used = 0;
    std::uint64_t reference_frame_id = 0;
    double mm_per_px = 1.5;

    int width() const { return surface_depth.width(); }
    int height() const { return surface_depth.height(); }
};

/// Histogram background: per pixel, 1 mm bins of depth differences against the reference
/// (first) frame, invalid samples skipped. The modal bin (ties toward the camera) anchors the
/// surface; the surface is the mean of samples within `inlier_window_mm` of that bin and the
/// noise is their sample standard deviation. Never-valid pixels take the median of their
/// filled 8-neighbours, iterated until every pixel is filled.
BackgroundModel build_background(std::span<const DepthFrame> frames, const BackgroundBuildConfig& cfg = {});

/// Model of an ideal plane; used when the surface geometry is known (dataset tooling).
BackgroundModel flat_background(int width, int height, double depth_mm, double mm_per_px);

void save_background(const std::filesystem::path& stem, const BackgroundModel& model);
BackgroundModel load_background(const std::filesystem::path& stem);

inline constexpr float kInvalidHeight = std::numeric_limits<float>::quiet_NaN();
inline bool height_valid(float h) { return !std::isnan(h); }

/// Signed height above the modelled surface in mm; NaN where the frame is invalid.
struct HeightMap {
    Image<float> height;
    int width() const { return height.width(); }
    int height_px() const { return height.height(); }
};

HeightMap height_map(const DepthFrame& frame, const BackgroundModel& model);

struct SliceConfig {
    double touch_min_height = 0.0;
    double touch_max_height = 2.0;
    double hand_max_height = 170.0;
    /// Per-pixel touch floor is max(touch_min_height, noise_k * per_pixel_noise).
    double noise_k = 1.0;

    void validate() const;
};

struct SliceMasks {
    Mask touch;
    Mask hand;
};

SliceMasks slice_masks(const HeightMap& hm, const SliceConfig& cfg, const BackgroundModel& model);

enum EntryEdge : std::uint8_t {
    kEdgeNone = 0,
    kEdgeLeft = 1,
    kEdgeRight = 2,
    kEdgeTop = 4,
    kEdgeBottom = 8,
};

struct RegionConfig {
    int min_area = 300;
    int hand_crop_px = 160;
    /// Smaller components are kept aside as fragments (e.g. a finger cut off by sensor dropout).
    int fragment_min_area = 20;
};

struct HandRegion {
    int id = 0;  // index into HandRegions::regions
    Component component;
    std::uint8_t entry_edges = kEdgeNone;
    Vec2 far_point;  // geodesically farthest from the entry edge
    CropWindow crop;
};

struct HandRegions {
    Image<std::int32_t> labels;  // region id + 1 for regions, -(fragment index + 1) for fragments
    std::vector<HandRegion> regions;
    std::vector<Component> fragments;  // area in [fragment_min_area, min_area)
};

HandRegions localize_hand_regions(const Mask& hand_mask, const RegionConfig& cfg = {});

/// Square window of `size` centred on `center`, shifted to lie inside a width x height frame.
CropWindow clamp_crop(Vec2 center, int size, int width, int height);

std::string entry_edges_string(std::uint8_t edges);

}  // namespace touchlab::surface

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "touchlab/common.hpp"
#include "touchlab/depth_frame.hpp"
#include "touchlab/hand_sim.hpp"
#include "touchlab/surface_model.hpp"

namespace touchlab::pose {

struct HandCrop {
    Image<float> values;  // [-1, 1]; invalid pixels read -1
    Mask invalid;
    CropWindow window;
    double scale = 1.0;  // crop px per frame px
};

struct PreprocessConfig {
    int crop_px = 96;
    double hand_max_height = 170.0;
};

HandCrop preprocess(const DepthFrame& frame, const surface::HandRegion& region, const surface::BackgroundModel& model,
                    const PreprocessConfig& cfg = {});

/// Gaussian-weighted local contrast normalization, output clamped to [-3, 3].
HandCrop lcn(const HandCrop& crop, int window = 9, double eps = 0.01);

inline constexpr int kHeatmapSize = 48;

struct HeatmapStack {
    int joints = kJointCount;  // 5 or 20
    int height = kHeatmapSize;
    int width = kHeatmapSize;
    std::vector<Image<float>> maps;
    std::vector<bool> empty;
    CropWindow window;  // frame pixels covered by the maps
    std::uint64_t frame_id = 0;

    /// Map coordinate of a frame-pixel position and its inverse.
    Vec2 to_map(Vec2 frame_px) const;
    Vec2 to_frame(Vec2 map_px) const;
};

/// Unnormalized Gaussians (peak 1.0) at each joint's map position; joints outside the window
/// yield an all-zero map flagged empty. `joints` selects 20 joints or the 5 fingertips.
HeatmapStack make_target_heatmaps(const sim::GroundTruth& truth, const CropWindow& window, double sigma = 2.0,
                                  int joints = kJointCount, int size = kHeatmapSize);

struct DecodedJoint {
    Vec2 map;    // sub-pixel map position
    Vec2 frame;  // back-projected frame position
    double confidence = 0.0;
};

/// Argmax plus separable log-quadratic refinement on the 3x3 neighbourhood.
DecodedJoint decode_heatmap(const Image<float>& map, const HeatmapStack& provenance);

void write_heatmaps(const std::filesystem::path& stem, const HeatmapStack& stack);
HeatmapStack read_heatmaps(const std::filesystem::path& stem);
std::string heatmap_stem(std::uint64_t frame_id, int region);

struct Joint {
    Vec2 px;
    double confidence = 0.0;
    bool present = false;
    std::optional<double> z_mm;
};

struct HandSkeleton {
    std::array<Joint, kJointCount> joints{};
    HandSide hand_side = HandSide::Right;
    double fitness_score = 0.0;
    bool fitness_applicable = false;
    bool low_confidence = false;
    double mm_per_px = 1.5;
    int region_id = -1;

    std::array<Joint, kFingerCount> fingertips() const;
    bool full() const;
};

HandSkeleton skeleton_from_truth(const sim::GroundTruth& truth, double mm_per_px);

struct AngleLimits {
    std::array<double, 2> mcp{-10.0, 100.0};
    std::array<double, 2> pip{0.0, 110.0};
    std::array<double, 2> dip{0.0, 90.0};
    std::array<double, 2> spread{-30.0, 30.0};
    double penalty_rate = 0.1;
    /// Excess below this is measurement error, not a violation.
    double tolerance_deg = 0.05;
    std::array<double, kFingerCount> rest_azimuth_deg{-40.0, 0.0, 0.0, 0.0, 0.0};

    void validate() const;
};

struct FingerAngles {
    double mcp = 0.0, pip = 0.0, dip = 0.0, spread = 0.0;
};

/// Per-finger joint angles in degrees. Uses 3D positions when every joint carries z,
/// otherwise image-plane turning angles.
std::array<FingerAngles, kFingerCount> finger_angles(const HandSkeleton& skel, const AngleLimits& limits);

double violation_penalty(double value, const std::array<double, 2>& range, double rate, double tolerance = 0.0);

struct Fitness {
    double score = 0.0;
    bool applicable = false;
};

/// Sum over out-of-range angles of exp(k * violation) - 1. A tips-only skeleton is
/// NotApplicable (score 0) unless `require_full`, which raises MissingJoints.
Fitness angle_fitness(const HandSkeleton& skel, const AngleLimits& limits = {}, bool require_full = false);

/// Depth at a joint pixel; invalid pixels fall back to the median of valid 3x3 neighbours.
std::optional<double> joint_depth(const DepthFrame& frame, Vec2 px);

struct PoseInput {
    const DepthFrame& frame;
    const surface::HandRegion& region;
    const surface::BackgroundModel& model;
    std::span<const sim::GroundTruth> truths;  // simulator annotations when available
};

class Poser {
public:
    virtual ~Poser() = default;
    virtual HandSkeleton estimate(const PoseInput& in) const = 0;
    virtual std::string_view name() const = 0;
};

/// Ground-truth joints of the hand that best overlaps the region, optionally perturbed.
class OraclePoser : public Poser {
public:
    explicit OraclePoser(double sigma_joint_px = 0.0, std::uint64_t seed = 0) : sigma_(sigma_joint_px), seed_(seed) {}
    HandSkeleton estimate(const PoseInput& in) const override;
    std::string_view name() const override { return "oracle"; }

private:
    double sigma_;
    std::uint64_t seed_;
};

/// Decodes `<dir>/hm_<frame_id>_<region>` stacks.
class HeatmapFilePoser : public Poser {
public:
    explicit HeatmapFilePoser(std::filesystem::path dir, double fitness_threshold = 10.0, AngleLimits limits = {})
        : dir_(std::move(dir)), threshold_(fitness_threshold), limits_(limits) {}
    HandSkeleton estimate(const PoseInput& in) const override;
    std::string_view name() const override { return "heatmaps"; }

private:
    std::filesystem::path dir_;
    double threshold_;
    AngleLimits limits_;
};

/// Renders target heatmaps from the annotations over the region crop and decodes them,
/// standing in for a network whose only error is heatmap quantization.
class HeatmapRoundTripPoser : public Poser {
public:
    explicit HeatmapRoundTripPoser(double sigma = 2.0, double fitness_threshold = 10.0)
        : sigma_(sigma), threshold_(fitness_threshold) {}
    HandSkeleton estimate(const PoseInput& in) const override;
    std::string_view name() const override { return "roundtrip"; }

private:
    double sigma_;
    double threshold_;
};

/// Decodes every map of a stack into a skeleton and scores it.
HandSkeleton skeleton_from_heatmaps(const HeatmapStack& stack, HandSide side, double mm_per_px, double fitness_threshold,
                                    const AngleLimits& limits = {});

/// Index of the annotated hand sharing the most pixels with the region (joints inside its
/// bounding box when the annotation has no mask), or -1.
int match_truth(const surface::HandRegion& region, std::span<const sim::GroundTruth> truths);

}  // namespace touchlab::pose

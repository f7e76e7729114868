#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "touchlab/common.hpp"
#include "touchlab/depth_frame.hpp"

namespace touchlab::sim {

struct FingerPose {
    double spread_deg = 0.0;                 // positive toward the little finger
    std::array<double, 3> flex_deg{};        // MCP, PIP, DIP; positive curls toward the palm
};

struct HandPoseParams {
    HandSide hand_side = HandSide::Right;
    Vec2 wrist_mm{480.0, 500.0};
    double wrist_height_mm = 40.0;
    double yaw_deg = 0.0;    // 0: fingers point toward -y (image up)
    double pitch_deg = 10.0; // positive tips the fingers down, raises the forearm
    double roll_deg = 0.0;   // positive raises the +lateral (little-finger) side of a right hand
    std::array<FingerPose, kFingerCount> fingers{};

    /// Throws InvalidArgument when flexion, spread or wrist height leave their legal ranges.
    void validate() const;
};

struct HandGeometry {
    double palm_length = 90.0;
    double palm_width = 80.0;
    double palm_thickness = 25.0;
    double palm_rounding = 8.0;
    std::array<std::array<double, 3>, kFingerCount> segment_lengths{{
        {50.0, 35.0, 30.0},
        {45.0, 25.0, 20.0},
        {50.0, 28.0, 22.0},
        {45.0, 26.0, 21.0},
        {35.0, 20.0, 18.0},
    }};
    std::array<double, kFingerCount> radius{9.0, 9.0, 9.0, 9.0, 8.0};
    // Chain base in palm coordinates: distance along the hand and toward the little finger.
    std::array<double, kFingerCount> base_forward{20.0, 90.0, 90.0, 90.0, 90.0};
    std::array<double, kFingerCount> base_lateral{-30.0, -27.0, -9.0, 9.0, 27.0};
    std::array<double, kFingerCount> rest_azimuth_deg{-40.0, 0.0, 0.0, 0.0, 0.0};
    double forearm_length = 400.0;
    double forearm_radius = 25.0;
};

struct SceneConfig {
    double camera_height = 800.0;
    double mm_per_px = 1.5;
    int width = 640;
    int height = 480;
    double contact_eps = 1.0;
    HandGeometry geometry;

    void validate() const;
    double surface_depth() const { return camera_height; }
    Vec2 to_px(Vec2 mm) const { return mm * (1.0 / mm_per_px); }
    Vec2 to_mm(Vec2 px) const { return px * mm_per_px; }
};

/// Joints are (x px, y px, z mm above the surface) of each capsule-chain articulation point.
struct GroundTruth {
    std::array<Vec3, kJointCount> joints{};
    std::array<bool, kFingerCount> touching{};
    std::array<double, kFingerCount> tip_height{};  // underside of the distal sphere, mm
    HandSide hand_side = HandSide::Right;
    Mask hand_mask;

    Vec2 tip_px(int finger) const { return joints[tip_index(finger)].xy(); }
};

struct Kinematics {
    std::array<Vec3, kJointCount> joints_mm{};  // world mm
    Vec3 wrist;
    Vec3 forward, lateral, normal;  // hand frame; lateral already mirrored for left hands
    Vec3 forearm_end;
};

Kinematics forward_kinematics(const HandPoseParams& pose, const HandGeometry& geom);

struct RenderResult {
    DepthFrame frame;
    std::vector<GroundTruth> truths;  // one per hand, in input order
};

/// Noiseless top-down orthographic render of any number of hands over the plane.
RenderResult render_scene(std::span<const HandPoseParams> poses, const SceneConfig& scene);
std::pair<DepthFrame, GroundTruth> render_depth(const HandPoseParams& pose, const SceneConfig& scene);

struct NoiseModel {
    double sigma_depth = 0.5;
    int edge_dropout_radius = 2;
    double edge_depth_jump = 20.0;
    double edge_dropout_prob = 0.8;
    double speckle_invalid_prob = 0.002;
    double quantization_step = 1.0;
    std::uint64_t rng_seed = 0;

    void validate() const;
    static NoiseModel none() { return {0.0, 0, 20.0, 0.0, 0.0, 1.0, 0}; }
};

DepthFrame apply_noise(const DepthFrame& frame, const NoiseModel& noise);

/// Empty-surface frames for background building; frame ids 0..count-1.
std::vector<DepthFrame> empty_frames(const SceneConfig& scene, const NoiseModel& noise, int count);

// --- pose construction ----------------------------------------------------------------------

/// Curled, clear of the surface.
FingerPose curled_finger();
/// Nearly straight finger, ready to be lowered onto the surface.
FingerPose extended_finger();

struct ContactSpec {
    std::array<bool, kFingerCount> touch{};
    double clearance_mm = 8.0;  // minimum underside height of everything that is not touching
    double lift_mm = 0.0;       // raise touching tips off the surface; negative sinks a pressed, flattened pad
};

/// Adjusts wrist height and touching fingers' MCP flexion so that exactly the requested tips
/// rest on the surface (underside at lift_mm) while the rest of the hand stays above clearance.
HandPoseParams make_contact_pose(HandPoseParams pose, const ContactSpec& spec, const HandGeometry& geom);

/// Translates the wrist so the given finger's TIP projects onto target_mm.
HandPoseParams place_tip(HandPoseParams pose, int finger, Vec2 target_mm, const HandGeometry& geom);

// --- datasets -------------------------------------------------------------------------------

struct PoseGrid {
    int yaw = 4;
    int tilt = 4;    // pitch/roll combinations
    int wrist = 4;   // wrist height/position combinations
    int finger = 6;  // finger presets

    std::uint64_t cardinality() const;
};

inline constexpr int kFingerPresetCount = 14;
FingerPose finger_preset(int preset, int finger);
std::array<bool, kFingerCount> preset_touching(int preset);

/// Every grid combination in row-major (yaw, tilt, wrist, finger) order. Throws EmptyGrid.
std::vector<HandPoseParams> enumerate_grid(const PoseGrid& grid, const SceneConfig& scene);

struct Sample {
    std::string id;
    DepthFrame noisy;
    DepthFrame clean;
    GroundTruth truth;
    HandPoseParams pose;
};

/// Horizontal mirror: images flipped, joints x -> width-1-x, side toggled, pose mirrored.
Sample flip_sample(const Sample& s);

struct DatasetManifest {
    std::filesystem::path root;
    std::vector<std::string> sample_ids;
    std::uint64_t right_count = 0;
};

DatasetManifest generate_dataset(const PoseGrid& grid, const SceneConfig& scene, const NoiseModel& noise,
                                 const std::filesystem::path& out_dir);

void save_sample(const std::filesystem::path& dir, const Sample& s);
Sample load_sample(const std::filesystem::path& dir);

nlohmann::json to_json(const HandPoseParams& p);
HandPoseParams pose_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GroundTruth& t);
GroundTruth truth_from_json(const nlohmann::json& j);

// --- evaluation trajectories ----------------------------------------------------------------

enum class TaskKind { Cross, HLine, VLine, Circle };
std::string_view to_string(TaskKind k);
TaskKind task_from_string(std::string_view s);

struct TrajectoryJitter {
    double placement_sigma_px = 0.0;  // cross: isotropic touch placement
    double lateral_sigma_px = 0.0;    // lines/circle: offset normal to the curve
    std::uint64_t seed = 0;
};

/// Reference geometry in frame pixels: a point (cross), a segment (lines) or a circle.
struct TaskGeometry {
    TaskKind kind = TaskKind::Cross;
    Vec2 center;
    Vec2 a, b;
    double radius = 0.0;

    /// Shortest distance from p to the reference geometry (same units as p).
    double distance(Vec2 p) const;
};

struct TrajectoryFrame {
    HandPoseParams pose;
    Vec2 tip_target_px;
    bool contact = true;
};

struct Trajectory {
    TaskGeometry geometry;
    std::vector<TrajectoryFrame> frames;
};

struct TrajectoryConfig {
    int cross_repetitions = 20;
    int path_frames = 40;     // lines: 5 px steps over 200 px
    int circle_frames = 126;  // about the same step length around the circle
    double line_length_px = 200.0;
    double circle_radius_px = 100.0;
    HandPoseParams base = default_base();  // yaw/pitch/roll and finger shape template

    /// Right hand approaching from the lower right; the circle task overrides yaw.
    static HandPoseParams default_base() {
        HandPoseParams p;
        p.yaw_deg = -20.0;
        return p;
    }
};

Trajectory script_trajectory(TaskKind task, const TrajectoryJitter& jitter, const SceneConfig& scene,
                             const TrajectoryConfig& cfg = {});

/// The pointing hand used by trajectories: index pad on the surface, other fingers lifted.
HandPoseParams pointing_pose(const HandGeometry& geom);

}  // namespace touchlab::sim

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include <nlohmann/json.hpp>

#include "test_util.hpp"
#include "touchlab/hand_sim.hpp"

using namespace touchlab;
using namespace touchlab::sim;

namespace {

constexpr int kIndex = static_cast<int>(Finger::Index);

double sample_std(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST_CASE("render: empty scene is the plane") {
    const SceneConfig scene;
    const auto r = render_scene({}, scene);
    CHECK(r.truths.empty());
    for (auto v : r.frame.depth.pixels()) CHECK(v == 800);
}

TEST_CASE("render: flat hand touches with every tip") {
    const SceneConfig scene;
    HandPoseParams p;
    p.pitch_deg = 5.0;
    for (auto& f : p.fingers) f = {0.0, {0.0, 0.0, 0.0}};
    p.fingers[0] = {0.0, {20.0, 0.0, 0.0}};
    ContactSpec spec;
    spec.touch.fill(true);
    spec.clearance_mm = 0.0;
    p = make_contact_pose(p, spec, scene.geometry);
    const auto [frame, truth] = render_depth(p, scene);
    for (int f = 0; f < kFingerCount; ++f) CHECK(truth.touching[f]);
}

TEST_CASE("render: pointing index touches alone and its tip lies on the silhouette") {
    const SceneConfig scene;
    const auto [frame, truth] = render_depth(testing::index_touch_pose(scene), scene);
    CHECK(truth.touching == std::array<bool, kFingerCount>{false, true, false, false, false});
    const Vec2 tip = truth.tip_px(kIndex);
    CHECK(truth.hand_mask(static_cast<int>(std::lround(tip.x)), static_cast<int>(std::lround(tip.y))) != 0);
    CHECK(frame.depth(static_cast<int>(std::lround(tip.x)), static_cast<int>(std::lround(tip.y))) < 800);
}

TEST_CASE("render: deterministic and never below the plane") {
    const SceneConfig scene;
    const auto pose = testing::index_touch_pose(scene);
    const auto a = render_depth(pose, scene);
    const auto b = render_depth(pose, scene);
    CHECK(a.first.depth == b.first.depth);
    int hand = 0;
    for (int y = 0; y < scene.height; ++y) {
        for (int x = 0; x < scene.width; ++x) {
            const auto d = a.first.depth(x, y);
            CHECK(d <= 800);
            if (a.second.hand_mask(x, y)) {
                ++hand;
                CHECK(d < 800);
            }
        }
    }
    CHECK(hand > 1000);
}

TEST_CASE("render: invalid poses are rejected") {
    HandPoseParams p;
    p.fingers[2].flex_deg[1] = 130.0;
    CHECK_ERROR_CODE(p.validate(), ErrorCode::InvalidArgument);
    HandPoseParams q;
    q.fingers[3].spread_deg = -31.0;
    CHECK_ERROR_CODE(q.validate(), ErrorCode::InvalidArgument);
    HandPoseParams far;
    far.wrist_mm = {-5000.0, -5000.0};
    CHECK_ERROR_CODE(render_depth(far, SceneConfig{}), ErrorCode::PoseOutOfBounds);
}

TEST_CASE("noise: identity settings leave the frame unchanged") {
    const SceneConfig scene;
    const auto [frame, truth] = render_depth(testing::index_touch_pose(scene), scene);
    CHECK(apply_noise(frame, NoiseModel::none()).depth == frame.depth);
}

TEST_CASE("noise: sigma 1.5 on a flat plane") {
    NoiseModel n = NoiseModel::none();
    n.sigma_depth = 1.5;
    n.rng_seed = 17;
    const DepthFrame plane(640, 480, 800);
    const auto out = apply_noise(plane, n);
    std::vector<double> v;
    for (auto d : out.depth.pixels()) v.push_back(d);
    const double s = sample_std(v);
    CHECK(s >= 1.2);
    CHECK(s <= 1.8);
    CHECK(apply_noise(plane, n).depth == out.depth);
}

TEST_CASE("noise: depth-jump edges drop out at probability 0.8") {
    const SceneConfig scene;
    const auto [frame, truth] = render_depth(testing::index_touch_pose(scene), scene);
    NoiseModel n = NoiseModel::none();
    n.edge_dropout_radius = 1;
    n.edge_dropout_prob = 0.8;
    n.rng_seed = 5;
    const auto out = apply_noise(frame, n);
    int edge = 0, dropped = 0;
    for (int y = 1; y + 1 < scene.height; ++y) {
        for (int x = 1; x + 1 < scene.width; ++x) {
            const int d = frame.depth(x, y);
            const bool jump = std::abs(d - frame.depth(x + 1, y)) > 20 || std::abs(d - frame.depth(x - 1, y)) > 20 ||
                              std::abs(d - frame.depth(x, y + 1)) > 20 || std::abs(d - frame.depth(x, y - 1)) > 20;
            if (!jump) continue;
            ++edge;
            dropped += out.depth(x, y) == kInvalidDepth;
        }
    }
    REQUIRE(edge > 100);
    CHECK(dropped >= 0.7 * edge);
}

TEST_CASE("noise: configuration errors") {
    NoiseModel n;
    n.edge_dropout_prob = 1.5;
    CHECK_ERROR_CODE(n.validate(), ErrorCode::ConfigError);
    NoiseModel q;
    q.quantization_step = 0.0;
    CHECK_ERROR_CODE(q.validate(), ErrorCode::ConfigError);
}

TEST_CASE("pose grid cardinality") {
    CHECK(PoseGrid{7, 10, 11, 14}.cardinality() == 10780);
    CHECK(PoseGrid{}.cardinality() == 384);
    CHECK_ERROR_CODE(enumerate_grid(PoseGrid{0, 1, 1, 1}, SceneConfig{}), ErrorCode::EmptyGrid);
    const auto poses = enumerate_grid(PoseGrid{2, 1, 1, 3}, SceneConfig{});
    CHECK(poses.size() == 6);
    for (const auto& p : poses) CHECK_NOTHROW(p.validate());
}

TEST_CASE("dataset: one-cell grid writes a right hand and its mirror") {
    const auto dir = std::filesystem::temp_directory_path() / "touchlab_ds_single";
    std::filesystem::remove_all(dir);
    const auto m = generate_dataset(PoseGrid{1, 1, 1, 1}, SceneConfig{}, NoiseModel{}, dir);
    REQUIRE(m.sample_ids.size() == 2);
    CHECK(m.right_count == 1);
    const auto right = load_sample(dir / m.sample_ids[0]);
    const auto left = load_sample(dir / m.sample_ids[1]);
    CHECK(right.truth.hand_side == HandSide::Right);
    CHECK(left.truth.hand_side == HandSide::Left);
    const Vec2 r = right.truth.tip_px(kIndex);
    const Vec2 l = left.truth.tip_px(kIndex);
    CHECK(l.x == doctest::Approx(SceneConfig{}.width - 1 - r.x));
    CHECK(l.y == doctest::Approx(r.y));
    CHECK(std::filesystem::exists(dir / "manifest.json"));
}

TEST_CASE("flip: mirrors joints and is an involution") {
    const SceneConfig scene;
    Sample s;
    s.id = "x";
    s.pose = testing::index_touch_pose(scene);
    std::tie(s.clean, s.truth) = render_depth(s.pose, scene);
    NoiseModel n;
    n.rng_seed = 3;
    s.noisy = apply_noise(s.clean, n);

    // Plant the tip at (100, 200) to check the mirror formula directly.
    s.truth.joints[tip_index(kIndex)] = {100.0, 200.0, 0.0};
    const auto f = flip_sample(s);
    CHECK(f.truth.tip_px(kIndex).x == doctest::Approx(scene.width - 1 - 100.0));
    CHECK(f.truth.tip_px(kIndex).y == doctest::Approx(200.0));
    CHECK(f.truth.hand_side == HandSide::Left);
    CHECK(f.noisy.depth(0, 0) == s.noisy.depth(scene.width - 1, 0));

    const auto ff = flip_sample(f);
    CHECK(ff.noisy.depth == s.noisy.depth);
    CHECK(ff.clean.depth == s.clean.depth);
    CHECK(ff.truth.hand_mask == s.truth.hand_mask);
    CHECK(ff.truth.hand_side == s.truth.hand_side);
    for (int j = 0; j < kJointCount; ++j) {
        CHECK(ff.truth.joints[j].x == s.truth.joints[j].x);
        CHECK(ff.truth.joints[j].y == s.truth.joints[j].y);
        CHECK(ff.truth.joints[j].z == s.truth.joints[j].z);
    }
    CHECK(nlohmann::json(to_json(ff.pose)) == nlohmann::json(to_json(s.pose)));
}

TEST_CASE("pose json round trip") {
    const auto p = testing::index_touch_pose();
    const auto q = pose_from_json(to_json(p));
    CHECK(to_json(q) == to_json(p));
    CHECK_ERROR_CODE(pose_from_json(nlohmann::json{{"fingers", nlohmann::json::array()}}), ErrorCode::InvalidArgument);
}

TEST_CASE("trajectory: cross with zero jitter repeats the centre") {
    const SceneConfig scene;
    const auto tr = script_trajectory(TaskKind::Cross, {}, scene);
    int contacts = 0;
    for (const auto& f : tr.frames) {
        if (!f.contact) continue;
        ++contacts;
        CHECK(f.tip_target_px.x == doctest::Approx(tr.geometry.center.x));
        CHECK(f.tip_target_px.y == doctest::Approx(tr.geometry.center.y));
        const auto [frame, truth] = render_depth(f.pose, scene);
        CHECK(distance(truth.tip_px(kIndex), tr.geometry.center) < 1e-6);
    }
    CHECK(contacts == 20);
}

TEST_CASE("trajectory: circle with zero jitter keeps every tip on the circle") {
    const SceneConfig scene;
    const auto tr = script_trajectory(TaskKind::Circle, {}, scene);
    CHECK(tr.geometry.radius == 100.0);
    for (const auto& f : tr.frames) {
        const auto [frame, truth] = render_depth(f.pose, scene);
        CHECK(std::abs(distance(truth.tip_px(kIndex), tr.geometry.center) - 100.0) <= 0.5);
    }
}

TEST_CASE("trajectory: hline lateral jitter statistics") {
    const SceneConfig scene;
    TrajectoryConfig cfg;
    cfg.path_frames = 400;
    TrajectoryJitter j;
    j.lateral_sigma_px = 3.0;
    j.seed = 99;
    const auto tr = script_trajectory(TaskKind::HLine, j, scene, cfg);
    std::vector<double> offsets;
    for (const auto& f : tr.frames) offsets.push_back(f.tip_target_px.y - tr.geometry.center.y);
    const double s = sample_std(offsets);
    CHECK(s >= 2.4);
    CHECK(s <= 3.6);
}

TEST_CASE("trajectory: lines slide at constant speed") {
    const SceneConfig scene;
    const auto tr = script_trajectory(TaskKind::VLine, {}, scene);
    REQUIRE(tr.frames.size() == 40);
    const double step = distance(tr.frames[0].tip_target_px, tr.frames[1].tip_target_px);
    for (std::size_t i = 1; i < tr.frames.size(); ++i)
        CHECK(distance(tr.frames[i - 1].tip_target_px, tr.frames[i].tip_target_px) == doctest::Approx(step));
    CHECK(tr.frames[0].tip_target_px.x == doctest::Approx(tr.frames.back().tip_target_px.x));
}

TEST_CASE("trajectory: geometry that leaves the frame is rejected") {
    SceneConfig tiny;
    tiny.width = 120;
    tiny.height = 100;
    CHECK_ERROR_CODE(script_trajectory(TaskKind::Circle, {}, tiny), ErrorCode::GeometryOutOfFrame);
}

TEST_CASE("task distance: circle metric matches the closed form") {
    TaskGeometry g;
    g.kind = TaskKind::Circle;
    g.center = {320.0, 240.0};
    g.radius = 100.0;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 640.0);
    for (int i = 0; i < 200; ++i) {
        const Vec2 p{u(rng), u(rng) * 0.75};
        CHECK(std::abs(g.distance(p) - std::abs(std::hypot(p.x - 320.0, p.y - 240.0) - 100.0)) < 1e-9);
    }
    TaskGeometry seg;
    seg.kind = TaskKind::HLine;
    seg.a = {0.0, 0.0};
    seg.b = {10.0, 0.0};
    CHECK(seg.distance({5.0, 3.0}) == doctest::Approx(3.0));
    CHECK(seg.distance({13.0, 4.0}) == doctest::Approx(5.0));
}

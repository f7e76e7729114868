#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "test_util.hpp"
#include "touchlab/pose_est.hpp"

using namespace touchlab;
using namespace touchlab::pose;

namespace {

constexpr int kIndex = static_cast<int>(Finger::Index);
constexpr int kMiddle = static_cast<int>(Finger::Middle);

/// Annotation built straight from forward kinematics, so illegal angles are representable.
sim::GroundTruth truth_from_kinematics(const sim::HandPoseParams& p, const sim::SceneConfig& scene) {
    const auto k = sim::forward_kinematics(p, scene.geometry);
    sim::GroundTruth t;
    t.hand_side = p.hand_side;
    for (int j = 0; j < kJointCount; ++j)
        t.joints[j] = {k.joints_mm[j].x / scene.mm_per_px, k.joints_mm[j].y / scene.mm_per_px, k.joints_mm[j].z};
    return t;
}

HeatmapStack blank_stack(CropWindow w) {
    HeatmapStack s;
    s.window = w;
    return s;
}

// Arm-shaped raised block entering from the bottom edge.
struct BlockScene {
    DepthFrame frame{200, 200, 800};
    surface::BackgroundModel model = surface::flat_background(200, 200, 800.0, 1.5);
    surface::HandRegion region;

    explicit BlockScene(std::uint16_t depth) {
        Mask m(200, 200, 0);
        for (int y = 60; y < 200; ++y)
            for (int x = 80; x < 120; ++x) {
                frame.depth(x, y) = depth;
                m(x, y) = 1;
            }
        region = surface::localize_hand_regions(m).regions.at(0);
    }
};

}  // namespace

TEST_CASE("preprocess: surface reads -1 and 85 mm reads 0") {
    BlockScene s(715);
    const auto crop = preprocess(s.frame, s.region, s.model);
    CHECK(crop.values.width() == 96);
    float lo = 2.0f, hi = -2.0f;
    for (auto v : crop.values.pixels()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo == -1.0f);
    CHECK(hi == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(crop.scale == doctest::Approx(96.0 / s.region.crop.size));
}

TEST_CASE("preprocess: tall points clamp to 1 and dropouts are flagged") {
    BlockScene s(500);
    s.frame.depth(100, 100) = kInvalidDepth;
    const auto crop = preprocess(s.frame, s.region, s.model);
    float hi = -2.0f;
    int invalid = 0;
    for (auto v : crop.values.pixels()) hi = std::max(hi, v);
    for (auto v : crop.invalid.pixels()) invalid += v;
    CHECK(hi == 1.0f);
    CHECK(invalid <= 1);
    surface::HandRegion empty;
    CHECK_ERROR_CODE(preprocess(s.frame, empty, s.model), ErrorCode::EmptyRegion);
}

TEST_CASE("lcn: constant input is identically zero") {
    HandCrop c;
    c.values = Image<float>(32, 32, 0.37f);
    c.invalid = Mask(32, 32, 0);
    const auto o = lcn(c);
    for (auto v : o.values.pixels()) CHECK(v == 0.0f);
}

TEST_CASE("lcn: step edge changes sign and peaks at the edge") {
    HandCrop c;
    c.values = Image<float>(32, 32, -1.0f);
    c.invalid = Mask(32, 32, 0);
    for (int y = 0; y < 32; ++y)
        for (int x = 16; x < 32; ++x) c.values(x, y) = 1.0f;
    const auto o = lcn(c);
    for (int y : {4, 10, 16, 22, 28}) {
        CHECK(o.values(15, y) < 0.0f);
        CHECK(o.values(16, y) > 0.0f);
        CHECK(std::abs(o.values(15, y)) > std::abs(o.values(12, y)));
        CHECK(std::abs(o.values(16, y)) > std::abs(o.values(19, y)));
    }
    for (auto v : o.values.pixels()) CHECK(std::abs(v) <= 3.0f);
}

TEST_CASE("lcn: white noise comes out near unit variance") {
    std::mt19937_64 rng(8);
    std::normal_distribution<float> g(0.0f, 0.2f);
    HandCrop c;
    c.values = Image<float>(96, 96);
    c.invalid = Mask(96, 96, 0);
    for (auto& v : c.values.pixels()) v = g(rng);
    const auto o = lcn(c);
    double m = 0.0, s = 0.0;
    for (auto v : o.values.pixels()) m += v;
    m /= static_cast<double>(o.values.size());
    for (auto v : o.values.pixels()) s += (v - m) * (v - m);
    s = std::sqrt(s / static_cast<double>(o.values.size() - 1));
    CHECK(s >= 0.8);
    CHECK(s <= 1.2);
}

TEST_CASE("target heatmaps: centre peak and empty maps outside the window") {
    sim::GroundTruth t;
    const CropWindow w{100, 100, 48};
    const auto probe = blank_stack(w);
    for (auto& j : t.joints) j = {1000.0, 1000.0, 0.0};
    const Vec2 centre = probe.to_frame({24.0, 24.0});
    t.joints[0] = {centre.x, centre.y, 0.0};
    const auto s = make_target_heatmaps(t, w);
    REQUIRE(s.maps.size() == kJointCount);
    CHECK(s.maps[0](24, 24) == 1.0f);
    float mx = 0.0f;
    for (auto v : s.maps[0].pixels()) mx = std::max(mx, v);
    CHECK(mx == 1.0f);
    CHECK_FALSE(s.empty[0]);
    CHECK(s.empty[1]);
    for (auto v : s.maps[1].pixels()) CHECK(v == 0.0f);

    const auto tips = make_target_heatmaps(t, w, 2.0, kFingerCount);
    CHECK(tips.maps.size() == kFingerCount);
}

TEST_CASE("target heatmaps of a flipped pair are mirror images") {
    const sim::SceneConfig scene;
    sim::Sample s;
    s.pose = testing::index_touch_pose(scene);
    std::tie(s.clean, s.truth) = sim::render_depth(s.pose, scene);
    s.noisy = s.clean;
    const auto f = sim::flip_sample(s);
    const CropWindow w{240, 160, 160};
    const CropWindow wf{scene.width - w.x - w.size, w.y, w.size};
    const auto a = make_target_heatmaps(s.truth, w);
    const auto b = make_target_heatmaps(f.truth, wf);
    for (int j = 0; j < kJointCount; ++j) {
        CHECK(a.empty[j] == b.empty[j]);
        bool equal = true;
        for (int y = 0; y < kHeatmapSize; ++y)
            for (int x = 0; x < kHeatmapSize; ++x)
                equal = equal && a.maps[j](x, y) == b.maps[j](kHeatmapSize - 1 - x, y);
        CHECK(equal);
    }
}

TEST_CASE("decode: impulse, border and empty maps fall back to the integer argmax") {
    const auto prov = blank_stack({0, 0, 48});
    Image<float> m(48, 48, 0.0f);
    m(5, 7) = 0.7f;
    auto d = decode_heatmap(m, prov);
    CHECK(d.map == Vec2{5.0, 7.0});
    CHECK(d.confidence == doctest::Approx(0.7));

    Image<float> border(48, 48, 0.1f);
    border(0, 20) = 0.9f;
    d = decode_heatmap(border, prov);
    CHECK(d.map == Vec2{0.0, 20.0});

    CHECK_ERROR_CODE(decode_heatmap(Image<float>(48, 48, 0.0f), prov), ErrorCode::EmptyHeatmap);
}

TEST_CASE("decode: sub-pixel gaussian centre") {
    const CropWindow w{0, 0, 48};
    const auto prov = blank_stack(w);
    sim::GroundTruth t;
    for (auto& j : t.joints) j = {1000.0, 1000.0, 0.0};
    const Vec2 f = prov.to_frame({10.3, 20.6});
    t.joints[3] = {f.x, f.y, 0.0};
    const auto s = make_target_heatmaps(t, w, 2.0);
    const auto d = decode_heatmap(s.maps[3], s);
    CHECK(distance(d.map, {10.3, 20.6}) <= 0.2);
    CHECK(distance(d.frame, f) <= 0.2);
}

TEST_CASE("decode round trip: 500 placements at least 3 px from the border") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> pos(3.0, kHeatmapSize - 1 - 3.0);
    std::uniform_int_distribution<int> origin(0, 400);
    std::uniform_int_distribution<int> size(48, 200);
    double worst = 0.0;
    int checked = 0;
    for (int trial = 0; trial < 25; ++trial) {
        const CropWindow w{origin(rng), origin(rng), size(rng)};
        const auto prov = blank_stack(w);
        sim::GroundTruth t;
        for (auto& j : t.joints) {
            const Vec2 f = prov.to_frame({pos(rng), pos(rng)});
            j = {f.x, f.y, 0.0};
        }
        const auto s = make_target_heatmaps(t, w);
        for (int j = 0; j < kJointCount; ++j) {
            const auto d = decode_heatmap(s.maps[j], s);
            worst = std::max(worst, distance(d.map, s.to_map(t.joints[j].xy())));
            ++checked;
        }
    }
    CHECK(checked == 500);
    CHECK(worst <= 0.25);
}

TEST_CASE("heatmap files round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "touchlab_hm";
    std::filesystem::create_directories(dir);
    sim::GroundTruth t;
    for (int j = 0; j < kJointCount; ++j) t.joints[j] = {110.0 + j, 120.0 + j % 7, 0.0};
    auto s = make_target_heatmaps(t, {100, 100, 64});
    s.frame_id = 9;
    write_heatmaps(dir / heatmap_stem(9, 0), s);
    const auto r = read_heatmaps(dir / heatmap_stem(9, 0));
    CHECK(r.window == s.window);
    CHECK(r.frame_id == 9);
    CHECK(r.empty == s.empty);
    for (int j = 0; j < kJointCount; ++j) CHECK(r.maps[j] == s.maps[j]);
    CHECK_ERROR_CODE(read_heatmaps(dir / "hm_404_0"), ErrorCode::MissingHeatmapFile);
}

TEST_CASE("fitness: zero on legal grid poses") {
    const sim::SceneConfig scene;
    for (const auto& p : sim::enumerate_grid(sim::PoseGrid{2, 2, 2, 6}, scene)) {
        const auto [frame, truth] = sim::render_depth(p, scene);
        const auto fit = angle_fitness(skeleton_from_truth(truth, scene.mm_per_px));
        CHECK(fit.applicable);
        CHECK(fit.score == 0.0);
    }
}

TEST_CASE("fitness: one PIP at 150 degrees scores exp(4) - 1, violations add") {
    const sim::SceneConfig scene;
    sim::HandPoseParams p;
    p.fingers[kMiddle].flex_deg = {20.0, 150.0, 20.0};
    const auto one = angle_fitness(skeleton_from_truth(truth_from_kinematics(p, scene), scene.mm_per_px));
    CHECK(one.score == doctest::Approx(std::exp(4.0) - 1.0).epsilon(1e-3));

    sim::HandPoseParams q;
    q.fingers[kIndex].flex_deg = {20.0, 30.0, 100.0};
    const auto other = angle_fitness(skeleton_from_truth(truth_from_kinematics(q, scene), scene.mm_per_px));
    CHECK(other.score == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-3));

    p.fingers[kIndex] = q.fingers[kIndex];
    const auto both = angle_fitness(skeleton_from_truth(truth_from_kinematics(p, scene), scene.mm_per_px));
    CHECK(both.score == doctest::Approx(one.score + other.score).epsilon(1e-9));
}

TEST_CASE("fitness: tips-only skeletons are not applicable") {
    HandSkeleton s;
    for (int f = 0; f < kFingerCount; ++f) s.joints[tip_index(f)] = {{10.0 * f, 0.0}, 1.0, true, {}};
    const auto fit = angle_fitness(s);
    CHECK_FALSE(fit.applicable);
    CHECK(fit.score == 0.0);
    CHECK_ERROR_CODE(angle_fitness(s, {}, true), ErrorCode::MissingJoints);
}

TEST_CASE("violation penalty") {
    CHECK(violation_penalty(50.0, {0.0, 110.0}, 0.1) == 0.0);
    CHECK(violation_penalty(150.0, {0.0, 110.0}, 0.1) == doctest::Approx(std::exp(4.0) - 1.0));
    CHECK(violation_penalty(-20.0, {-10.0, 100.0}, 0.1) == doctest::Approx(std::exp(1.0) - 1.0));
    CHECK(violation_penalty(110.01, {0.0, 110.0}, 0.1, 0.05) == 0.0);
}

TEST_CASE("joint depth falls back to the neighbourhood median") {
    DepthFrame f(5, 5, 790);
    f.depth(2, 2) = kInvalidDepth;
    f.depth(1, 1) = 780;
    CHECK(*joint_depth(f, {2.0, 2.0}) == 790.0);
    DepthFrame dead(5, 5, kInvalidDepth);
    CHECK_FALSE(joint_depth(dead, {2.0, 2.0}).has_value());
}

TEST_CASE("oracle poser: zero sigma returns the annotation") {
    const sim::SceneConfig scene;
    const auto [frame, truth] = sim::render_depth(testing::index_touch_pose(scene), scene);
    const auto model = testing::plane_model(scene);
    const auto masks = surface::slice_masks(surface::height_map(frame, model), {}, model);
    const auto regions = surface::localize_hand_regions(masks.hand);
    REQUIRE(regions.regions.size() == 1);
    const std::vector<sim::GroundTruth> truths{truth};
    const PoseInput in{frame, regions.regions[0], model, truths};
    CHECK(match_truth(regions.regions[0], truths) == 0);
    const auto s = OraclePoser().estimate(in);
    for (int j = 0; j < kJointCount; ++j) {
        CHECK(s.joints[j].present);
        CHECK(s.joints[j].px == truth.joints[j].xy());
    }
    CHECK(s.hand_side == HandSide::Right);

    const auto noisy = OraclePoser(2.0, 1).estimate(in);
    double moved = 0.0;
    for (int j = 0; j < kJointCount; ++j) moved += distance(noisy.joints[j].px, truth.joints[j].xy());
    CHECK(moved > 0.0);
}

TEST_CASE("heatmap file poser decodes exported annotations") {
    const sim::SceneConfig scene;
    auto [frame, truth] = sim::render_depth(testing::index_touch_pose(scene), scene);
    frame.frame_id = 3;
    const auto model = testing::plane_model(scene);
    const auto masks = surface::slice_masks(surface::height_map(frame, model), {}, model);
    const auto regions = surface::localize_hand_regions(masks.hand);
    REQUIRE(regions.regions.size() == 1);
    const auto& region = regions.regions[0];

    const auto dir = std::filesystem::temp_directory_path() / "touchlab_hm_poser";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    auto stack = make_target_heatmaps(truth, region.crop);
    stack.frame_id = frame.frame_id;
    write_heatmaps(dir / heatmap_stem(frame.frame_id, region.id), stack);

    const std::vector<sim::GroundTruth> none;
    const PoseInput in{frame, region, model, none};
    const auto s = HeatmapFilePoser(dir).estimate(in);
    int checked = 0;
    for (int j = 0; j < kJointCount; ++j) {
        if (stack.empty[j]) continue;
        const Vec2 m = stack.to_map(truth.joints[j].xy());
        if (m.x < 3 || m.y < 3 || m.x > kHeatmapSize - 4 || m.y > kHeatmapSize - 4) continue;
        REQUIRE(s.joints[j].present);
        CHECK(distance(stack.to_map(s.joints[j].px), m) <= 0.2);
        ++checked;
    }
    CHECK(checked >= 10);

    frame.frame_id = 4;
    CHECK_ERROR_CODE(HeatmapFilePoser(dir).estimate(in), ErrorCode::MissingHeatmapFile);
}

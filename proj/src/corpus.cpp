#include "touchlab/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

namespace touchlab::corpus {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string numbered(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%03zu.pgm", prefix, i);
    return buf;
}

fs::path truth_path(const fs::path& pgm) {
    fs::path p = pgm;
    p.replace_extension(".truth.json");
    return p;
}

sim::HandPoseParams scenario_pose(int preset, Vec2 tip_px, int tip_finger, double yaw, const sim::SceneConfig& scene,
                                  HandSide side = HandSide::Right, double lift = 0.0) {
    sim::HandPoseParams p;
    p.hand_side = side;
    p.yaw_deg = yaw;
    p.pitch_deg = 10.0;
    for (int f = 0; f < kFingerCount; ++f) p.fingers[f] = sim::finger_preset(preset, f);
    sim::ContactSpec spec;
    spec.touch = sim::preset_touching(preset);
    spec.lift_mm = lift;
    if (std::none_of(spec.touch.begin(), spec.touch.end(), [](bool b) { return b; })) {
        spec.touch[tip_finger] = true;
        spec.lift_mm = std::max(lift, 15.0);
    }
    p = sim::make_contact_pose(p, spec, scene.geometry);
    return sim::place_tip(p, tip_finger, scene.to_mm(tip_px), scene.geometry);
}

}  // namespace

Corpus generate_corpus(std::uint64_t seed, const sim::SceneConfig& scene, const sim::NoiseModel& noise) {
    Corpus c;
    sim::NoiseModel bg = noise;
    bg.rng_seed = derive_seed(seed, 0xb6);
    c.background = sim::empty_frames(scene, bg, kBackgroundFrames);

    std::mt19937_64 rng(derive_seed(seed, 0xc0));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Vec2 centre{scene.width / 2.0, scene.height / 2.0};
    const int index = static_cast<int>(Finger::Index);
    const int middle = static_cast<int>(Finger::Middle);
    const int thumb = static_cast<int>(Finger::Thumb);

    auto add = [&](std::string scenario, std::vector<sim::HandPoseParams> poses) {
        const std::uint64_t id = c.frames.size();
        auto r = sim::render_scene(poses, scene);
        sim::NoiseModel n = noise;
        n.rng_seed = derive_seed(seed, 0x1000 + id);
        CorpusFrame f;
        f.scenario = std::move(scenario);
        f.frame = sim::apply_noise(r.frame, n);
        f.frame.frame_id = id;
        f.frame.timestamp_ms = static_cast<std::int64_t>(id) * 33;
        f.truths = std::move(r.truths);
        for (auto& t : f.truths) t.hand_mask = Mask();
        c.frames.push_back(std::move(f));
    };

    for (int k = 0; k < 5; ++k) add("empty", {});
    for (int k = 0; k < 10; ++k) {
        const Vec2 tip = centre + Vec2{-90.0 + 20.0 * k, 15.0 * u(rng)};
        add("pointing", {scenario_pose(1, tip, index, 5.0 * u(rng), scene)});
    }
    for (int preset : {6, 7, 8, 9}) {
        for (int k = 0; k < 2; ++k) {
            const Vec2 tip = centre + Vec2{30.0 * u(rng), 20.0 * u(rng)};
            add("multi_" + std::to_string(preset), {scenario_pose(preset, tip, middle, 8.0 * u(rng), scene)});
        }
    }
    for (int k = 0; k < 6; ++k) {
        const Vec2 tip = centre + Vec2{30.0 * u(rng), 20.0 * u(rng)};
        add("pressed", {scenario_pose(12, tip, middle, 8.0 * u(rng), scene)});
    }
    for (int k = 0; k < 6; ++k) {
        const Vec2 tip = centre + Vec2{30.0 * u(rng), 20.0 * u(rng)};
        add("thumb", {scenario_pose(5, tip, thumb, 8.0 * u(rng), scene)});
    }
    for (int k = 0; k < 6; ++k) {
        const Vec2 tip = centre + Vec2{30.0 * u(rng), 20.0 * u(rng)};
        add("hover", {scenario_pose(10, tip, index, 8.0 * u(rng), scene)});
    }
    for (int k = 0; k < 6; ++k) {
        const Vec2 left_tip{scene.width * 0.28 + 10.0 * u(rng), centre.y + 15.0 * u(rng)};
        const Vec2 right_tip{scene.width * 0.72 + 10.0 * u(rng), centre.y + 15.0 * u(rng)};
        add("two_hands", {scenario_pose(1, left_tip, index, 15.0 + 5.0 * u(rng), scene, HandSide::Left),
                          scenario_pose(1, right_tip, index, -15.0 + 5.0 * u(rng), scene)});
    }
    for (int preset : {11, 0, 13}) {
        const Vec2 tip = centre + Vec2{30.0 * u(rng), 20.0 * u(rng)};
        add("preset_" + std::to_string(preset), {scenario_pose(preset, tip, middle, 8.0 * u(rng), scene)});
    }
    return c;
}

void save_corpus(const fs::path& dir, const Corpus& c) {
    fs::create_directories(dir / "background");
    fs::create_directories(dir / "frames");
    for (std::size_t i = 0; i < c.background.size(); ++i) save_frame(dir / "background" / numbered("bg", i), c.background[i]);
    for (std::size_t i = 0; i < c.frames.size(); ++i) {
        const auto& f = c.frames[i];
        const fs::path pgm = dir / "frames" / numbered("f", i);
        save_frame(pgm, f.frame);
        json hands = json::array();
        for (const auto& t : f.truths) hands.push_back(sim::to_json(t));
        std::ofstream out(truth_path(pgm));
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + truth_path(pgm).string());
        out << json{{"scenario", f.scenario}, {"hands", hands}}.dump(1) << '\n';
    }
}

Corpus load_corpus(const fs::path& dir) {
    auto pgms = [](const fs::path& d) {
        std::vector<fs::path> out;
        if (!fs::is_directory(d)) throw Error(ErrorCode::IoError, "missing directory " + d.string());
        for (const auto& e : fs::directory_iterator(d)) {
            if (e.path().extension() == ".pgm") out.push_back(e.path());
        }
        std::sort(out.begin(), out.end());
        return out;
    };
    Corpus c;
    for (const auto& p : pgms(dir / "background")) c.background.push_back(load_frame(p));
    for (const auto& p : pgms(dir / "frames")) {
        CorpusFrame f;
        f.frame = load_frame(p);
        const auto tp = truth_path(p);
        if (fs::exists(tp)) {
            std::ifstream in(tp);
            json j;
            try {
                in >> j;
            } catch (const json::exception& e) {
                throw Error(ErrorCode::IoError, tp.string() + ": " + e.what());
            }
            f.scenario = j.value("scenario", std::string());
            for (const auto& h : j.at("hands")) f.truths.push_back(sim::truth_from_json(h));
        }
        c.frames.push_back(std::move(f));
    }
    return c;
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t frame_hash(const DepthFrame& f) {
    // Big-endian sample bytes, matching the PGM payload.
    std::vector<unsigned char> bytes;
    bytes.reserve(f.depth.size() * 2);
    for (auto v : f.depth.pixels()) {
        bytes.push_back(static_cast<unsigned char>(v >> 8));
        bytes.push_back(static_cast<unsigned char>(v & 0xff));
    }
    return fnv1a64(bytes.data(), bytes.size());
}

std::string hash_list(const Corpus& c) {
    std::string out;
    char buf[96];
    auto line = [&](const std::string& name, const DepthFrame& f) {
        std::snprintf(buf, sizeof buf, "%s %016llx\n", name.c_str(), static_cast<unsigned long long>(frame_hash(f)));
        out += buf;
    };
    for (std::size_t i = 0; i < c.background.size(); ++i) line("background/" + numbered("bg", i), c.background[i]);
    for (std::size_t i = 0; i < c.frames.size(); ++i) line("frames/" + numbered("f", i), c.frames[i].frame);
    return out;
}

std::vector<std::string> replay(const Corpus& c, const pose::Poser& poser, const touch::PipelineConfig& pipeline,
                                const surface::BackgroundBuildConfig& background, bool include_timings,
                                std::vector<touch::FrameResult>* results) {
    const auto model = surface::build_background(c.background, background);
    const touch::FrameContext ctx{model, poser, pipeline};
    touch::FingerTracker tracker(pipeline.match.max_age, pipeline.match.hand_gate_px);
    std::vector<std::string> lines;
    for (const auto& f : c.frames) {
        auto res = touch::process_frame(f.frame, f.truths, ctx, tracker);
        lines.push_back(touch::to_json(res, include_timings).dump());
        if (results) results->push_back(std::move(res));
    }
    return lines;
}

int export_heatmaps(const Corpus& c, const touch::PipelineConfig& pipeline,
                    const surface::BackgroundBuildConfig& background, const fs::path& out_dir, double sigma) {
    const auto model = surface::build_background(c.background, background);
    fs::create_directories(out_dir);
    int written = 0;
    for (const auto& f : c.frames) {
        const auto hm = surface::height_map(f.frame, model);
        const auto masks = surface::slice_masks(hm, pipeline.slice, model);
        const auto regions = surface::localize_hand_regions(masks.hand, pipeline.region);
        for (const auto& r : regions.regions) {
            const int t = pose::match_truth(r, f.truths);
            if (t < 0) continue;
            auto stack = pose::make_target_heatmaps(f.truths[t], r.crop, sigma);
            stack.frame_id = f.frame.frame_id;
            pose::write_heatmaps(out_dir / pose::heatmap_stem(f.frame.frame_id, r.id), stack);
            ++written;
        }
    }
    return written;
}

int export_dataset_heatmaps(const fs::path& dataset_root, const sim::SceneConfig& scene,
                            const touch::PipelineConfig& pipeline, const fs::path& out_dir, double sigma) {
    std::ifstream in(dataset_root / "manifest.json");
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + (dataset_root / "manifest.json").string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::IoError, "manifest.json: " + std::string(e.what()));
    }
    const auto model = surface::flat_background(scene.width, scene.height, scene.surface_depth(), scene.mm_per_px);
    int written = 0;
    for (const auto& entry : manifest.at("samples")) {
        const auto id = entry.at("id").get<std::string>();
        const auto sample = sim::load_sample(dataset_root / id);
        const auto hm = surface::height_map(sample.noisy, model);
        const auto masks = surface::slice_masks(hm, pipeline.slice, model);
        const auto regions = surface::localize_hand_regions(masks.hand, pipeline.region);
        fs::create_directories(out_dir / id);
        for (const auto& r : regions.regions) {
            if (r.entry_edges == surface::kEdgeNone) continue;
            auto stack = pose::make_target_heatmaps(sample.truth, r.crop, sigma);
            stack.frame_id = sample.noisy.frame_id;
            pose::write_heatmaps(out_dir / id / pose::heatmap_stem(sample.noisy.frame_id, r.id), stack);
            ++written;
        }
    }
    return written;
}

}  // namespace touchlab::corpus

#include "touchlab/eval_bench.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "touchlab/components.hpp"

namespace touchlab::eval {

namespace {

using nlohmann::json;

constexpr int kThumb = static_cast<int>(Finger::Thumb);
constexpr int kIndex = static_cast<int>(Finger::Index);
constexpr int kMiddle = static_cast<int>(Finger::Middle);
constexpr int kRing = static_cast<int>(Finger::Ring);
constexpr int kLittle = static_cast<int>(Finger::Little);

// Stream ids keep every experiment's RNG independent of the others.
constexpr std::uint64_t kStreamTask = 0x1000;
constexpr std::uint64_t kStreamSingle = 0x2000;
constexpr std::uint64_t kStreamMulti = 0x3000;
constexpr std::uint64_t kStreamPressed = 0x4000;
constexpr std::uint64_t kStreamThumb = 0x5000;

Vec2 frame_center_mm(const sim::SceneConfig& scene) {
    return scene.to_mm({scene.width / 2.0, scene.height / 2.0});
}

/// The touch point nearest to `target`, or nullptr.
const touch::TouchPoint* nearest_point(const std::vector<touch::TouchPoint>& pts, Vec2 target) {
    const touch::TouchPoint* best = nullptr;
    double bd = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) {
        const double d = distance(p.px, target);
        if (d < bd) {
            bd = d;
            best = &p;
        }
    }
    return best;
}

/// Finger whose true tip is nearest to p.
int nearest_tip(const sim::GroundTruth& truth, Vec2 p) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int f = 0; f < kFingerCount; ++f) {
        const double d = distance(truth.tip_px(f), p);
        if (d < bd) {
            bd = d;
            best = f;
        }
    }
    return best;
}

sim::HandPoseParams preset_pose(int preset, std::mt19937_64& rng, const sim::SceneConfig& scene) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    sim::HandPoseParams p;
    p.yaw_deg = 10.0 * u(rng);
    p.pitch_deg = 10.0 + 2.0 * u(rng);
    for (int f = 0; f < kFingerCount; ++f) p.fingers[f] = sim::finger_preset(preset, f);
    sim::ContactSpec spec;
    spec.touch = sim::preset_touching(preset);
    p = sim::make_contact_pose(p, spec, scene.geometry);
    const Vec2 target = frame_center_mm(scene) + Vec2{20.0 * g(rng), 20.0 * g(rng)} * scene.mm_per_px;
    return sim::place_tip(p, kMiddle, target, scene.geometry);
}

}  // namespace

std::string_view to_string(Method m) { return m == Method::PoseAware ? "pose" : "naive"; }

Method method_from_string(std::string_view s) {
    if (s == "pose") return Method::PoseAware;
    if (s == "naive") return Method::Naive;
    throw Error(ErrorCode::InvalidArgument, "unknown method '" + std::string(s) + "'");
}

Bench::Bench(EvalConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.scene.validate();
    cfg_.noise.validate();
    sim::NoiseModel bg_noise = cfg_.noise;
    bg_noise.rng_seed = derive_seed(cfg_.seed, 0xb6);
    const auto frames = sim::empty_frames(cfg_.scene, bg_noise, cfg_.background.frame_count);
    model_ = surface::build_background(frames, cfg_.background);
}

sim::RenderResult Bench::render(std::span<const sim::HandPoseParams> poses, std::uint64_t stream,
                                const sim::NoiseModel& noise, std::uint64_t frame_id) const {
    auto r = sim::render_scene(poses, cfg_.scene);
    sim::NoiseModel n = noise;
    n.rng_seed = derive_seed(cfg_.seed, stream);
    r.frame = sim::apply_noise(r.frame, n);
    r.frame.frame_id = frame_id;
    r.frame.timestamp_ms = static_cast<std::int64_t>(frame_id) * 33;
    return r;
}

void summarize(AccuracyReport& r) {
    const auto n = r.errors_mm.size();
    r.mean = r.stddev = r.std_error = 0.0;
    if (n == 0) return;
    double sum = 0.0;
    for (double e : r.errors_mm) sum += e;
    r.mean = sum / static_cast<double>(n);
    if (n < 2) return;
    double ss = 0.0;
    for (double e : r.errors_mm) ss += (e - r.mean) * (e - r.mean);
    r.stddev = std::sqrt(ss / static_cast<double>(n - 1));
    r.std_error = r.stddev / std::sqrt(static_cast<double>(n));
}

AccuracyReport Bench::run_task(sim::TaskKind task, Method method) const {
    sim::TrajectoryJitter jitter{cfg_.placement_sigma_px, cfg_.lateral_sigma_px,
                                 derive_seed(cfg_.seed, kStreamTask + static_cast<std::uint64_t>(task))};
    const auto tr = sim::script_trajectory(task, jitter, cfg_.scene, cfg_.trajectory);

    AccuracyReport rep;
    rep.task = task;
    rep.method = method;
    rep.seed = cfg_.seed;

    const pose::HeatmapRoundTripPoser poser(cfg_.heatmap_sigma);
    const touch::FrameContext ctx{model_, poser, cfg_.pipeline};
    touch::FingerTracker tracker(cfg_.pipeline.match.max_age, cfg_.pipeline.match.hand_gate_px);
    const std::uint64_t task_stream = (kStreamTask + static_cast<std::uint64_t>(task)) << 16;

    for (std::size_t k = 0; k < tr.frames.size(); ++k) {
        const auto& tf = tr.frames[k];
        const auto r = render(std::span(&tf.pose, 1), task_stream + k, cfg_.noise, k);
        const auto res = touch::process_frame(r.frame, r.truths, ctx, tracker);
        if (!tf.contact) continue;
        ++rep.scripted;

        std::optional<Vec2> detected;
        if (method == Method::PoseAware) {
            for (const auto& p : res.touch_points) {
                if (p.finger == Finger::Index) {
                    detected = p.px;
                    break;
                }
            }
        } else {
            const touch::TouchBlob* largest = nullptr;
            for (const auto& b : res.blobs) {
                if (!largest || b.area() > largest->area()) largest = &b;
            }
            if (largest) detected = largest->centroid();
        }
        if (!detected) {
            ++rep.misses;
            continue;
        }
        rep.errors_mm.push_back(tr.geometry.distance(*detected) * cfg_.scene.mm_per_px);
    }
    summarize(rep);
    return rep;
}

sim::HandPoseParams single_touch_pose(int finger, bool instructed, std::uint64_t seed, const sim::SceneConfig& scene) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    sim::HandPoseParams p;
    p.yaw_deg = 10.0 * u(rng);
    p.pitch_deg = 10.0 + 2.0 * u(rng);
    for (auto& f : p.fingers) f = sim::curled_finger();
    p.fingers[finger] = sim::extended_finger();
    sim::ContactSpec spec;
    spec.touch[finger] = true;
    if (!instructed) {
        spec.clearance_mm = 3.0;
        if (finger == kThumb) {
            // Side-of-thumb contact: the hand rolls onto its thumb edge with the thumb tucked under
            // the curled index, whose tip then hovers close to the contact.
            p.roll_deg = 30.0 + 10.0 * u(rng);
            p.fingers[kThumb] = {25.0 + 5.0 * u(rng), {50.0 + 5.0 * u(rng), 70.0 + 5.0 * u(rng), 50.0 + 5.0 * u(rng)}};
        } else if (finger == kIndex || finger == kMiddle) {
            // The neighbouring finger hangs half-extended next to the touching one.
            const int other = finger == kIndex ? kMiddle : kIndex;
            p.fingers[other] = {finger == kIndex ? -6.0 : 6.0, {25.0, 30.0, 20.0}};
            p.fingers[finger].spread_deg = finger == kIndex ? 4.0 : -4.0;
        }
    }
    p = sim::make_contact_pose(p, spec, scene.geometry);
    const Vec2 target = frame_center_mm(scene) + Vec2{30.0 * g(rng), 20.0 * g(rng)} * scene.mm_per_px;
    return sim::place_tip(p, finger, target, scene.geometry);
}

DesignationReport Bench::run_single_touch(int trials_per_finger, bool instructed) const {
    DesignationReport rep;
    rep.instructed = instructed;
    rep.trials_per_finger = trials_per_finger;
    for (int f = 0; f < kFingerCount; ++f) {
        for (int k = 0; k < trials_per_finger; ++k) {
            const std::uint64_t trial = kStreamSingle + static_cast<std::uint64_t>(f) * 1000 + k;
            // Pose seeds are shared by both modes so instructed and uninstructed runs pair up.
            const auto pose = single_touch_pose(f, instructed, derive_seed(cfg_.seed, trial), cfg_.scene);
            const pose::OraclePoser poser(instructed ? 0.0 : 3.0, derive_seed(cfg_.seed, trial + 0x100000));
            const touch::FrameContext ctx{model_, poser, cfg_.pipeline};
            touch::FingerTracker tracker(cfg_.pipeline.match.max_age, cfg_.pipeline.match.hand_gate_px);
            const auto r = render(std::span(&pose, 1), trial, cfg_.noise, static_cast<std::uint64_t>(k));
            const auto res = touch::process_frame(r.frame, r.truths, ctx, tracker);
            ++rep.scripted;
            const auto* p = nearest_point(res.touch_points, r.truths[0].tip_px(f));
            if (!p) {
                ++rep.confusion[f][kFingerCount];
                continue;
            }
            ++rep.detected;
            const int label = p->finger == Finger::Unknown ? kFingerCount : static_cast<int>(p->finger);
            ++rep.confusion[f][label];
        }
    }
    return rep;
}

MultiTouchReport Bench::run_multi_touch(int trials) const {
    struct Spec {
        const char* name;
        int preset;
        bool pressed;
    };
    static constexpr Spec kSpecs[] = {
        {"2 fingers", 6, false},
        {"3 fingers", 7, false},
        {"4 fingers", 8, false},
        {"5 fingers", 9, false},
        {"2 fingers pressed", 12, true},
    };
    MultiTouchReport rep;
    const pose::OraclePoser poser;
    const touch::FrameContext ctx{model_, poser, cfg_.pipeline};
    for (std::size_t c = 0; c < std::size(kSpecs); ++c) {
        MultiTouchCondition cond;
        cond.name = kSpecs[c].name;
        cond.fingers = sim::preset_touching(kSpecs[c].preset);
        cond.pressed_together = kSpecs[c].pressed;
        int want = 0;
        for (bool b : cond.fingers) want += b;
        for (int k = 0; k < trials; ++k) {
            const std::uint64_t trial = kStreamMulti + c * 1000 + static_cast<std::uint64_t>(k);
            std::mt19937_64 rng(derive_seed(cfg_.seed, trial));
            const auto pose = kSpecs[c].pressed ? pressed_pose(derive_seed(cfg_.seed, trial), cfg_.scene)
                                                : preset_pose(kSpecs[c].preset, rng, cfg_.scene);
            touch::FingerTracker tracker(cfg_.pipeline.match.max_age, cfg_.pipeline.match.hand_gate_px);
            const auto r = render(std::span(&pose, 1), trial, cfg_.noise, static_cast<std::uint64_t>(k));
            const auto res = touch::process_frame(r.frame, r.truths, ctx, tracker);
            ++cond.trials;
            const int n = static_cast<int>(res.touch_points.size());
            cond.max_points = std::max(cond.max_points, n);
            if (n != want) continue;
            ++cond.partial;
            std::array<bool, kFingerCount> seen{};
            bool all = true;
            for (const auto& p : res.touch_points) {
                if (p.finger == Finger::Unknown) {
                    all = false;
                    break;
                }
                const int f = static_cast<int>(p.finger);
                if (!cond.fingers[f] || seen[f] || nearest_tip(r.truths[0], p.px) != f) {
                    all = false;
                    break;
                }
                seen[f] = true;
            }
            if (all) ++cond.total;
        }
        rep.conditions.push_back(cond);
    }
    return rep;
}

sim::HandPoseParams pressed_pose(std::uint64_t seed, const sim::SceneConfig& scene) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    sim::HandPoseParams p;
    p.yaw_deg = 10.0 * u(rng);
    p.pitch_deg = 5.0 + u(rng);
    for (auto& f : p.fingers) f = {0.0, {-10.0, 0.0, 0.0}};
    p.fingers[kRing].spread_deg = 12.0;
    p.fingers[kLittle].spread_deg = 20.0;
    // Flat pads converging slightly and pressed in, so the two contact patches fuse into one blob.
    p.fingers[kIndex] = {1.0 + 0.5 * u(rng), {0.0, 0.0, 0.0}};
    p.fingers[kMiddle] = {-1.0 + 0.5 * u(rng), {0.0, 0.0, 0.0}};
    sim::ContactSpec spec;
    spec.touch[kIndex] = spec.touch[kMiddle] = true;
    spec.lift_mm = -3.0;
    p = sim::make_contact_pose(p, spec, scene.geometry);
    const Vec2 target = frame_center_mm(scene) + Vec2{20.0 * g(rng), 20.0 * g(rng)} * scene.mm_per_px;
    return sim::place_tip(p, kMiddle, target, scene.geometry);
}

RateReport Bench::run_pressed_together(int frames) const {
    RateReport rep;
    const pose::OraclePoser poser;
    const touch::FrameContext ctx{model_, poser, cfg_.pipeline};
    for (int k = 0; k < frames; ++k) {
        const std::uint64_t trial = kStreamPressed + static_cast<std::uint64_t>(k);
        const auto pose = pressed_pose(derive_seed(cfg_.seed, trial), cfg_.scene);
        touch::FingerTracker tracker(cfg_.pipeline.match.max_age, cfg_.pipeline.match.hand_gate_px);
        const auto r = render(std::span(&pose, 1), trial, cfg_.noise, static_cast<std::uint64_t>(k));
        const auto res = touch::process_frame(r.frame, r.truths, ctx, tracker);
        ++rep.trials;
        if (res.blobs.size() == 1) ++rep.detached;
        if (res.touch_points.size() != 2) continue;
        bool ok = true;
        std::array<bool, kFingerCount> seen{};
        for (const auto& p : res.touch_points) {
            const int f = static_cast<int>(p.finger);
            if (p.finger != Finger::Index && p.finger != Finger::Middle) {
                ok = false;
                break;
            }
            if (seen[f] || nearest_tip(r.truths[0], p.px) != f) ok = false;
            seen[f] = true;
        }
        if (ok) ++rep.successes;
    }
    return rep;
}

RateReport Bench::run_thumb_dropout(int frames) const {
    RateReport rep;
    sim::NoiseModel noise = cfg_.noise;
    noise.edge_dropout_radius = 4;
    noise.edge_dropout_prob = 0.95;
    const pose::OraclePoser poser;
    const touch::FrameContext ctx{model_, poser, cfg_.pipeline};
    for (int k = 0; k < frames; ++k) {
        const std::uint64_t trial = kStreamThumb + static_cast<std::uint64_t>(k);
        const auto pose = single_touch_pose(kThumb, true, derive_seed(cfg_.seed, trial), cfg_.scene);
        touch::FingerTracker tracker(cfg_.pipeline.match.max_age, cfg_.pipeline.match.hand_gate_px);
        const auto r = render(std::span(&pose, 1), trial, noise, static_cast<std::uint64_t>(k));
        const auto res = touch::process_frame(r.frame, r.truths, ctx, tracker);
        ++rep.trials;

        // Detached: the thumb's middle joint does not share a hand component with the palm.
        const auto hm = surface::height_map(r.frame, model_);
        const auto masks = surface::slice_masks(hm, cfg_.pipeline.slice, model_);
        const auto lab = label_components(masks.hand);
        auto label_at = [&](Vec2 p) {
            const int x = static_cast<int>(std::lround(p.x)), y = static_cast<int>(std::lround(p.y));
            return lab.labels.in_bounds(x, y) ? lab.labels(x, y) : 0;
        };
        const auto& t = r.truths[0];
        const int thumb_label = label_at(t.joints[joint_index(Finger::Thumb, JointKind::Dip)].xy());
        const int palm_label = label_at(t.joints[joint_index(Finger::Middle, JointKind::Mcp)].xy());
        if (thumb_label != palm_label || thumb_label == 0) ++rep.detached;

        for (const auto& p : res.touch_points) {
            if (p.finger == Finger::Thumb) {
                ++rep.successes;
                break;
            }
        }
    }
    return rep;
}

bool anti_swap_trial(std::uint64_t seed, const touch::MatchConfig& cfg) {
    constexpr int kW = 640, kH = 480;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Vec2 c{120.0 + 400.0 * u(rng), 120.0 + 240.0 * u(rng)};
    const double phi = 2.0 * kPi * u(rng);
    const Vec2 axis{std::cos(phi), std::sin(phi)};
    const Vec2 normal{-axis.y, axis.x};
    const double sep = 16.0 + 24.0 * u(rng);
    const Vec2 a = c - axis * (sep / 2.0), b = c + axis * (sep / 2.0);
    const double radius = 2.0 + 3.0 * u(rng);

    Mask mask(kW, kH, 0);
    for (const Vec2 centre : {a, b}) {
        for (int y = 0; y < kH; ++y) {
            for (int x = 0; x < kW; ++x) {
                if (distance({double(x), double(y)}, centre) <= radius) mask(x, y) = 1;
            }
        }
    }
    const auto lab = label_components(mask);
    if (lab.components.size() != 2) return false;
    std::vector<touch::TouchBlob> blobs;
    for (std::size_t i = 0; i < lab.components.size(); ++i) {
        touch::TouchBlob blob;
        blob.id = static_cast<int>(i);
        blob.component = lab.components[i];
        blob.hand = 0;
        blob.adjacent = true;
        blobs.push_back(blob);
    }
    const int blob_a = distance(blobs[0].centroid(), a) < distance(blobs[1].centroid(), a) ? 0 : 1;
    const int blob_b = 1 - blob_a;

    auto skeleton = [](Vec2 index, Vec2 middle) {
        pose::HandSkeleton s;
        s.joints[tip_index(kIndex)] = {index, 1.0, true, std::nullopt};
        s.joints[tip_index(kMiddle)] = {middle, 1.0, true, std::nullopt};
        return s;
    };
    auto blob_of = [](const std::vector<touch::TouchPoint>& pts, Finger f) {
        for (const auto& p : pts) {
            if (p.finger == f) return p.blob_id;
        }
        return -1;
    };

    touch::FingerTracker tracker(cfg.max_age, cfg.hand_gate_px);
    const auto first = touch::designate_fingers(blobs, skeleton(a, b), 0, tracker, kW, 1.5, cfg);
    if (blob_of(first, Finger::Index) != blob_a || blob_of(first, Finger::Middle) != blob_b) return false;
    tracker.end_frame();

    const double h = 4.0 + 20.0 * u(rng);
    const double side = u(rng) < 0.5 ? 1.0 : -1.0;
    const auto second =
        touch::designate_fingers(blobs, skeleton(c + normal * (h * side), c - normal * (h * side)), 0, tracker, kW, 1.5, cfg);
    return blob_of(second, Finger::Index) == blob_a && blob_of(second, Finger::Middle) == blob_b;
}

ComparisonSummary compare_methods(const std::vector<AccuracyReport>& pose, const std::vector<AccuracyReport>& naive) {
    if (pose.size() != naive.size()) throw Error(ErrorCode::InvalidArgument, "report lists differ in length");
    ComparisonSummary s;
    for (std::size_t i = 0; i < pose.size(); ++i) {
        const auto& p = pose[i];
        const auto& n = naive[i];
        if (p.seed != n.seed) throw Error(ErrorCode::SeedMismatch, "paired reports were produced with different seeds");
        if (p.task != n.task) throw Error(ErrorCode::InvalidArgument, "paired reports cover different tasks");
        ComparisonRow row;
        row.task = p.task;
        row.pose_mean = p.mean;
        row.pose_se = p.std_error;
        row.naive_mean = n.mean;
        row.naive_se = n.std_error;
        row.delta = n.mean - p.mean;
        row.pose_wins = p.mean <= n.mean;
        s.rows.push_back(row);
    }
    return s;
}

json to_json(const AccuracyReport& r) {
    return {{"task", sim::to_string(r.task)}, {"method", to_string(r.method)}, {"seed", r.seed},
            {"scripted", r.scripted},         {"misses", r.misses},            {"mean_mm", r.mean},
            {"std_mm", r.stddev},             {"stderr_mm", r.std_error},      {"errors_mm", r.errors_mm}};
}

json to_json(const DesignationReport& r) {
    json rows = json::array();
    for (int f = 0; f < kFingerCount; ++f) {
        json row;
        for (int g = 0; g < kFingerCount; ++g) row[std::string(to_string(static_cast<Finger>(g)))] = r.confusion[f][g];
        row["none"] = r.confusion[f][kFingerCount];
        rows.push_back({{"finger", to_string(static_cast<Finger>(f))}, {"labels", row}, {"correct", r.correct(f)}});
    }
    return {{"instructed", r.instructed},
            {"trials_per_finger", r.trials_per_finger},
            {"presence_ratio", r.presence_ratio()},
            {"confusion", rows}};
}

json to_json(const MultiTouchReport& r) {
    json out = json::array();
    for (const auto& c : r.conditions) {
        json fingers = json::array();
        for (int f = 0; f < kFingerCount; ++f) {
            if (c.fingers[f]) fingers.push_back(to_string(static_cast<Finger>(f)));
        }
        out.push_back({{"condition", c.name},
                       {"fingers", fingers},
                       {"pressed_together", c.pressed_together},
                       {"trials", c.trials},
                       {"partial_a", c.partial},
                       {"total_b", c.total},
                       {"ratio_b_over_a", c.ratio()},
                       {"max_points", c.max_points}});
    }
    return out;
}

json to_json(const RateReport& r) {
    return {{"trials", r.trials}, {"successes", r.successes}, {"rate", r.rate()}, {"precondition_held", r.detached}};
}

json to_json(const ComparisonSummary& s) {
    json rows = json::array();
    for (const auto& r : s.rows) {
        rows.push_back({{"task", sim::to_string(r.task)},
                        {"pose_mean_mm", r.pose_mean},
                        {"pose_stderr_mm", r.pose_se},
                        {"naive_mean_mm", r.naive_mean},
                        {"naive_stderr_mm", r.naive_se},
                        {"delta_mm", r.delta},
                        {"pose_wins", r.pose_wins}});
    }
    return rows;
}

std::string to_csv(const std::vector<AccuracyReport>& reports) {
    std::ostringstream os;
    os.precision(17);
    os << "task,method,sample,error_mm\n";
    for (const auto& r : reports) {
        for (std::size_t i = 0; i < r.errors_mm.size(); ++i)
            os << sim::to_string(r.task) << ',' << to_string(r.method) << ',' << i << ',' << r.errors_mm[i] << '\n';
    }
    return os.str();
}

}  // namespace touchlab::eval

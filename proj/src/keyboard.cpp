#include "touchlab/keyboard.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "touchlab/hand_sim.hpp"
#include "touchlab/pose_est.hpp"
#include "touchlab/surface_model.hpp"

namespace touchlab::keyboard {

namespace {

using nlohmann::json;

enum class Role { Lower, Upper, Alt, None };

Role role_of(Finger f) {
    switch (f) {
        case Finger::Thumb:
        case Finger::Index:
        case Finger::Middle:
            return Role::Lower;
        case Finger::Little:
            return Role::Upper;
        case Finger::Ring:
            return Role::Alt;
        default:
            return Role::None;
    }
}

std::string upper(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

void KeyLayout::validate() const {
    std::map<char, int> letters;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const auto& k = keys[i];
        if (k.base.size() != 1) throw Error(ErrorCode::InvalidArgument, "key base must be one character");
        if (!(k.rect.w > 0.0 && k.rect.h > 0.0)) throw Error(ErrorCode::InvalidArgument, "key rect must have positive size");
        if (k.base[0] >= 'a' && k.base[0] <= 'z') ++letters[k.base[0]];
        for (std::size_t j = i + 1; j < keys.size(); ++j) {
            if (k.rect.overlaps(keys[j].rect))
                throw Error(ErrorCode::InvalidArgument, "keys '" + k.base + "' and '" + keys[j].base + "' overlap");
        }
    }
    for (char c = 'a'; c <= 'z'; ++c) {
        if (letters[c] != 1) throw Error(ErrorCode::InvalidArgument, std::string("letter '") + c + "' must appear once");
    }
}

const Key* KeyLayout::key_at(Vec2 mm) const {
    for (const auto& k : keys) {
        if (k.rect.contains(mm)) return &k;
    }
    return nullptr;
}

const Key* KeyLayout::find(std::string_view base) const {
    for (const auto& k : keys) {
        if (k.base == base) return &k;
    }
    return nullptr;
}

KeyLayout KeyLayout::qwerty(Vec2 origin, double s) {
    struct Row {
        const char* base;
        const char* alt;
        double offset;
    };
    static constexpr Row kRows[] = {
        {"qwertyuiop", "1234567890", 0.0},
        {"asdfghjkl", "@#$%&*-+(", 0.5},
        {"zxcvbnm", "!?,.;:/", 1.0},
    };
    KeyLayout l;
    for (int r = 0; r < 3; ++r) {
        const std::string base = kRows[r].base, alt = kRows[r].alt;
        for (std::size_t i = 0; i < base.size(); ++i) {
            l.keys.push_back({std::string(1, base[i]), std::string(1, alt[i]),
                              {origin.x + (kRows[r].offset + static_cast<double>(i)) * s, origin.y + r * s, s, s}});
        }
    }
    l.keys.push_back({" ", " ", {origin.x + 2.0 * s, origin.y + 3.0 * s, 6.0 * s, s}});
    return l;
}

json to_json(const KeyLayout& layout) {
    json keys = json::array();
    for (const auto& k : layout.keys)
        keys.push_back({{"char", k.base}, {"alt", k.alt}, {"rect_mm", {k.rect.x, k.rect.y, k.rect.w, k.rect.h}}});
    return {{"id", layout.id}, {"keys", keys}};
}

KeyLayout layout_from_json(const json& j) {
    KeyLayout l;
    try {
        l.id = j.value("id", std::string("custom"));
        for (const auto& k : j.at("keys")) {
            const auto r = k.at("rect_mm").get<std::array<double, 4>>();
            l.keys.push_back({k.at("char").get<std::string>(), k.value("alt", std::string()), {r[0], r[1], r[2], r[3]}});
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("layout: ") + e.what());
    }
    l.validate();
    return l;
}

KeyLayout load_layout(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read layout " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
    return layout_from_json(j);
}

std::string_view to_string(KeystrokeStatus s) {
    switch (s) {
        case KeystrokeStatus::Emitted: return "emitted";
        case KeystrokeStatus::NoKey: return "no_key";
        case KeystrokeStatus::ConflictingRoles: return "conflicting_roles";
        case KeystrokeStatus::Empty: return "empty";
    }
    return "empty";
}

Keystroke resolve_keystroke(std::span<const touch::TouchPoint> touches, const KeyLayout& layout) {
    Keystroke ks;
    Vec2 sum;
    for (const auto& t : touches) {
        if (t.finger == Finger::Unknown) continue;
        ks.fingers.push_back(t.finger);
        sum = sum + t.mm;
    }
    if (ks.fingers.empty()) return ks;
    ks.key = layout.key_at(sum * (1.0 / static_cast<double>(ks.fingers.size())));
    if (!ks.key) {
        ks.status = KeystrokeStatus::NoKey;
        return ks;
    }
    const Key& key = *ks.key;
    if (ks.fingers.size() == 1) {
        ks.status = KeystrokeStatus::Emitted;
        switch (role_of(ks.fingers[0])) {
            case Role::Lower: ks.text = key.base; break;
            case Role::Upper: ks.text = upper(key.base); break;
            case Role::Alt: ks.text = key.alt; break;
            case Role::None: break;
        }
        return ks;
    }
    if (ks.fingers.size() == 2 && role_of(ks.fingers[0]) == Role::Lower && role_of(ks.fingers[1]) == Role::Lower) {
        ks.status = KeystrokeStatus::Emitted;
        ks.text = key.base + key.base;
        return ks;
    }
    ks.status = KeystrokeStatus::ConflictingRoles;
    return ks;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double cer(std::string_view reference, std::string_view emitted) {
    if (reference.empty()) throw Error(ErrorCode::EmptyReference, "reference text is empty");
    return static_cast<double>(levenshtein(reference, emitted)) / static_cast<double>(reference.size());
}

double wpm(const TypingSession& s) {
    const auto duration = s.end_ms - s.start_ms;
    if (duration <= 0) throw Error(ErrorCode::ZeroDuration, "typing session has no duration");
    return (static_cast<double>(s.emitted.size()) / 5.0) / (static_cast<double>(duration) / 60000.0);
}

json to_json(const LogEntry& e) {
    json fingers = json::array();
    for (auto f : e.fingers) fingers.push_back(to_string(f));
    return {{"key", e.key}, {"fingers", fingers}, {"time_ms", e.time_ms}, {"emitted", e.emitted},
            {"status", to_string(e.status)}};
}

std::vector<std::vector<TimedTouch>> group_contact_events(std::vector<TimedTouch> downs, const KeyLayout& layout,
                                                          std::int64_t window_ms) {
    std::stable_sort(downs.begin(), downs.end(),
                     [](const TimedTouch& a, const TimedTouch& b) { return a.time_ms < b.time_ms; });
    std::vector<std::vector<TimedTouch>> events;
    std::vector<const Key*> event_keys;
    for (const auto& d : downs) {
        const Key* key = layout.key_at(d.point.mm);
        bool placed = false;
        if (key) {
            for (std::size_t e = 0; e < events.size(); ++e) {
                if (event_keys[e] == key && d.time_ms - events[e].front().time_ms <= window_ms) {
                    events[e].push_back(d);
                    placed = true;
                    break;
                }
            }
        }
        if (!placed) {
            events.push_back({d});
            event_keys.push_back(key);
        }
    }
    return events;
}

std::vector<KeyScatter> touch_distribution(const std::vector<TouchSample>& samples) {
    std::map<std::string, std::vector<Vec2>> by_key;
    for (const auto& s : samples) by_key[s.key].push_back(s.mm);
    std::vector<KeyScatter> out;
    for (auto& [key, pts] : by_key) {
        if (pts.size() < 3) continue;
        KeyScatter k;
        k.key = key;
        k.touches = pts;
        const double n = static_cast<double>(pts.size());
        for (const auto& p : pts) k.mean = k.mean + p * (1.0 / n);
        for (const auto& p : pts) {
            const Vec2 d = p - k.mean;
            k.cov[0] += d.x * d.x / (n - 1.0);
            k.cov[1] += d.x * d.y / (n - 1.0);
            k.cov[2] += d.y * d.y / (n - 1.0);
        }
        const double a = k.cov[0], b = k.cov[1], c = k.cov[2];
        const double mid = (a + c) / 2.0;
        const double rad = std::hypot((a - c) / 2.0, b);
        const double l1 = mid + rad, l2 = std::max(0.0, mid - rad);
        Vec2 v1 = std::abs(b) > 1e-15 ? Vec2{b, l1 - a} : (a >= c ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0});
        v1 = v1 * (1.0 / v1.norm());
        const Vec2 v2{-v1.y, v1.x};
        k.degenerate = l1 <= 1e-12;
        const double s1 = std::sqrt(l1 / n), s2 = std::sqrt(l2 / n);
        k.se1 = {v1 * s1, v2 * s2};
        k.se2 = {v1 * (2.0 * s1), v2 * (2.0 * s2)};
        out.push_back(std::move(k));
    }
    return out;
}

json to_json(const KeyScatter& k) {
    json pts = json::array();
    for (const auto& p : k.touches) pts.push_back({p.x, p.y});
    auto axes = [](const EllipseAxes& e) {
        return json{{"major", {e.major.x, e.major.y}}, {"minor", {e.minor.x, e.minor.y}}};
    };
    return {{"key", k.key},
            {"mean", {k.mean.x, k.mean.y}},
            {"cov", k.cov},
            {"se1", axes(k.se1)},
            {"se2", axes(k.se2)},
            {"degenerate", k.degenerate},
            {"touches", pts}};
}

PrefixSuggester::PrefixSuggester(std::vector<std::string> words, std::size_t min_prefix)
    : words_(std::move(words)), min_prefix_(min_prefix) {
    std::sort(words_.begin(), words_.end());
    words_.erase(std::unique(words_.begin(), words_.end()), words_.end());
}

PrefixSuggester PrefixSuggester::from_file(const std::filesystem::path& path, std::size_t min_prefix) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read word list " + path.string());
    std::vector<std::string> words;
    for (std::string w; in >> w;) words.push_back(w);
    return PrefixSuggester(std::move(words), min_prefix);
}

std::optional<std::string> PrefixSuggester::suggest(std::string_view prefix) const {
    if (prefix.size() < min_prefix_) return std::nullopt;
    auto it = std::lower_bound(words_.begin(), words_.end(), prefix);
    if (it != words_.end() && it->size() > prefix.size() && std::string_view(*it).substr(0, prefix.size()) == prefix)
        return *it;
    return std::nullopt;
}

namespace {

struct Stroke {
    std::array<bool, kFingerCount> fingers{};
    const Key* key = nullptr;
    std::size_t chars = 1;  // reference characters covered
};

Stroke plan_stroke(std::string_view text, std::size_t i, const KeyLayout& layout) {
    Stroke s;
    const char c = text[i];
    const char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == ' ') {
        s.key = layout.find(" ");
        s.fingers[static_cast<int>(Finger::Thumb)] = true;
    } else if (c >= 'a' && c <= 'z') {
        s.key = layout.find(std::string_view(&c, 1));
        if (i + 1 < text.size() && text[i + 1] == c) {
            s.fingers[static_cast<int>(Finger::Index)] = s.fingers[static_cast<int>(Finger::Middle)] = true;
            s.chars = 2;
        } else {
            s.fingers[static_cast<int>(Finger::Index)] = true;
        }
    } else if (c >= 'A' && c <= 'Z') {
        s.key = layout.find(std::string_view(&lower, 1));
        s.fingers[static_cast<int>(Finger::Little)] = true;
    } else {
        for (const auto& k : layout.keys) {
            if (k.alt.size() == 1 && k.alt[0] == c) s.key = &k;
        }
        s.fingers[static_cast<int>(Finger::Ring)] = true;
    }
    return s;
}

sim::HandPoseParams stroke_pose(const Stroke& s, Vec2 target_mm, const sim::SceneConfig& scene) {
    sim::HandPoseParams p;
    p.pitch_deg = 10.0;
    int n = 0;
    for (int f = 0; f < kFingerCount; ++f) {
        p.fingers[f] = s.fingers[f] ? sim::extended_finger() : sim::curled_finger();
        n += s.fingers[f];
    }
    if (n == 2) {
        p.fingers[static_cast<int>(Finger::Index)].spread_deg = 2.0;
        p.fingers[static_cast<int>(Finger::Middle)].spread_deg = -2.0;
    }
    sim::ContactSpec spec;
    spec.touch = s.fingers;
    p = sim::make_contact_pose(p, spec, scene.geometry);
    const auto k = sim::forward_kinematics(p, scene.geometry);
    Vec2 tip;
    for (int f = 0; f < kFingerCount; ++f) {
        if (s.fingers[f]) tip = tip + k.joints_mm[tip_index(f)].xy() * (1.0 / n);
    }
    p.wrist_mm = p.wrist_mm + (target_mm - tip);
    return p;
}

}  // namespace

TypingSession run_typist(std::string_view text, const KeyLayout& layout, const Suggester& suggester,
                         const TypistConfig& cfg, const touch::PipelineConfig& pipeline, const sim::SceneConfig& scene,
                         const sim::NoiseModel& noise) {
    TypingSession session;
    session.reference = std::string(text);
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x7e));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<std::int64_t> jitter(-cfg.keystroke_jitter_ms, cfg.keystroke_jitter_ms);

    sim::NoiseModel bg_noise = noise;
    bg_noise.rng_seed = derive_seed(cfg.seed, 0xb6);
    const auto model = surface::build_background(sim::empty_frames(scene, bg_noise, 30));
    const pose::OraclePoser poser;
    const touch::FrameContext ctx{model, poser, pipeline};

    std::int64_t t = 0;
    std::uint64_t frame_id = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t word_start = i;
        while (word_start > 0 && text[word_start - 1] != ' ') --word_start;
        std::size_t word_end = text.find(' ', i);
        if (word_end == std::string_view::npos) word_end = text.size();
        if (i > word_start && i < word_end) {
            const auto s = suggester.suggest(text.substr(word_start, i - word_start));
            if (s && *s == text.substr(word_start, word_end - word_start)) {
                t += cfg.keystroke_ms + jitter(rng);
                LogEntry e;
                e.key = "suggestion";
                e.time_ms = t;
                e.emitted = std::string(text.substr(i, word_end - i));
                e.status = KeystrokeStatus::Emitted;
                session.emitted += e.emitted;
                session.log.push_back(std::move(e));
                i = word_end;
                continue;
            }
        }

        const Stroke stroke = plan_stroke(text, i, layout);
        t += cfg.keystroke_ms + jitter(rng);
        i += stroke.chars;
        if (!stroke.key) {
            LogEntry e;
            e.time_ms = t;
            e.status = KeystrokeStatus::NoKey;
            session.log.push_back(std::move(e));
            continue;
        }
        const Vec2 target = stroke.key->rect.center() +
                            Vec2{cfg.placement_sigma_mm * gauss(rng), cfg.placement_sigma_mm * gauss(rng)};
        const auto pose = stroke_pose(stroke, target, scene);
        auto r = sim::render_scene(std::span(&pose, 1), scene);
        sim::NoiseModel n = noise;
        n.rng_seed = derive_seed(cfg.seed, 0x10000 + frame_id);
        r.frame = sim::apply_noise(r.frame, n);
        r.frame.frame_id = frame_id++;
        r.frame.timestamp_ms = t;
        touch::FingerTracker tracker(pipeline.match.max_age, pipeline.match.hand_gate_px);
        const auto res = touch::process_frame(r.frame, r.truths, ctx, tracker);

        std::vector<TimedTouch> downs;
        for (const auto& p : res.touch_points) downs.push_back({t, p});
        for (const auto& event : group_contact_events(downs, layout)) {
            std::vector<touch::TouchPoint> pts;
            for (const auto& d : event) pts.push_back(d.point);
            const auto ks = resolve_keystroke(pts, layout);
            LogEntry e;
            e.key = ks.key ? ks.key->base : "";
            e.fingers = ks.fingers;
            e.time_ms = t;
            e.emitted = ks.text;
            e.status = ks.status;
            session.emitted += ks.text;
            session.log.push_back(std::move(e));
        }
    }
    session.end_ms = t;
    return session;
}

}  // namespace touchlab::keyboard

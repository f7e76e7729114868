#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "touchlab/common.hpp"
#include "touchlab/touch_pipeline.hpp"

namespace touchlab::keyboard {

/// Axis-aligned rectangle in surface millimetres.
struct RectMm {
    double x = 0.0, y = 0.0, w = 0.0, h = 0.0;

    bool contains(Vec2 p) const { return p.x >= x && p.x < x + w && p.y >= y && p.y < y + h; }
    bool overlaps(const RectMm& o) const { return x < o.x + o.w && o.x < x + w && y < o.y + o.h && o.y < y + h; }
    Vec2 center() const { return {x + w / 2.0, y + h / 2.0}; }
};

struct Key {
    std::string base;  // single character
    std::string alt;   // ring-finger alternate
    RectMm rect;
};

struct KeyLayout {
    std::string id = "qwerty";
    std::vector<Key> keys;

    /// Throws InvalidArgument on overlapping rects or a lowercase letter missing or repeated.
    void validate() const;
    const Key* key_at(Vec2 mm) const;
    const Key* find(std::string_view base) const;

    /// 10/9/7 letter rows plus a space bar; keys are `key_mm` squares starting at origin_mm.
    static KeyLayout qwerty(Vec2 origin_mm = {330.0, 210.0}, double key_mm = 30.0);
};

nlohmann::json to_json(const KeyLayout& layout);
KeyLayout layout_from_json(const nlohmann::json& j);
KeyLayout load_layout(const std::filesystem::path& path);

enum class KeystrokeStatus { Emitted, NoKey, ConflictingRoles, Empty };
std::string_view to_string(KeystrokeStatus s);

struct Keystroke {
    KeystrokeStatus status = KeystrokeStatus::Empty;
    std::string text;
    const Key* key = nullptr;
    std::vector<Finger> fingers;
};

/// Maps one contact event to text. Thumb, index and middle type lowercase, little uppercase,
/// ring the alternate; two lowercase-role fingers together double the letter.
Keystroke resolve_keystroke(std::span<const touch::TouchPoint> touches, const KeyLayout& layout);

std::size_t levenshtein(std::string_view a, std::string_view b);
/// Levenshtein distance over the reference length. Throws EmptyReference.
double cer(std::string_view reference, std::string_view emitted);

struct LogEntry {
    std::string key;
    std::vector<Finger> fingers;
    std::int64_t time_ms = 0;
    std::string emitted;
    KeystrokeStatus status = KeystrokeStatus::Empty;
};

struct TypingSession {
    std::string reference;
    std::string emitted;
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;
    std::vector<LogEntry> log;
};

/// (characters / 5) per minute of session time. Throws ZeroDuration.
double wpm(const TypingSession& s);

nlohmann::json to_json(const LogEntry& e);

struct TimedTouch {
    std::int64_t time_ms = 0;
    touch::TouchPoint point;
};

/// Groups touch-downs whose times fall within `window_ms` of the group's first touch and that
/// land on the same key. Touches off every key form their own single-touch events.
std::vector<std::vector<TimedTouch>> group_contact_events(std::vector<TimedTouch> downs, const KeyLayout& layout,
                                                          std::int64_t window_ms = 80);

struct EllipseAxes {
    Vec2 major, minor;  // semi-axis vectors
    double area() const { return kPi * major.norm() * minor.norm(); }
};

struct KeyScatter {
    std::string key;
    std::vector<Vec2> touches;
    Vec2 mean;
    std::array<double, 3> cov{};  // xx, xy, yy
    EllipseAxes se1, se2;         // 1 and 2 standard errors
    bool degenerate = false;
};

struct TouchSample {
    std::string key;
    Vec2 mm;
};

/// Per-key mean, covariance and standard-error ellipses; keys with fewer than 3 touches are omitted.
std::vector<KeyScatter> touch_distribution(const std::vector<TouchSample>& samples);
nlohmann::json to_json(const KeyScatter& k);

class Suggester {
public:
    virtual ~Suggester() = default;
    /// Full word to complete the prefix with, if any.
    virtual std::optional<std::string> suggest(std::string_view prefix) const = 0;
};

class NullSuggester : public Suggester {
public:
    std::optional<std::string> suggest(std::string_view) const override { return std::nullopt; }
};

/// First dictionary word (in sorted order) extending a prefix of at least `min_prefix` letters.
class PrefixSuggester : public Suggester {
public:
    explicit PrefixSuggester(std::vector<std::string> words, std::size_t min_prefix = 3);
    static PrefixSuggester from_file(const std::filesystem::path& path, std::size_t min_prefix = 3);
    std::optional<std::string> suggest(std::string_view prefix) const override;

private:
    std::vector<std::string> words_;
    std::size_t min_prefix_;
};

struct TypistConfig {
    double placement_sigma_mm = 3.0;
    std::int64_t keystroke_ms = 700;
    std::int64_t keystroke_jitter_ms = 150;
    std::uint64_t seed = 1;
};

/// Scripted synthetic typist: each character becomes a simulated contact pose on its key,
/// processed by the full pipeline with the oracle poser and resolved by the finger rules.
/// Accepted suggestions skip the remaining characters of the word.
TypingSession run_typist(std::string_view text, const KeyLayout& layout, const Suggester& suggester,
                         const TypistConfig& cfg, const touch::PipelineConfig& pipeline = {},
                         const sim::SceneConfig& scene = {}, const sim::NoiseModel& noise = {});

}  // namespace touchlab::keyboard

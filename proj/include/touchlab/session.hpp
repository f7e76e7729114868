#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "touchlab/config.hpp"
#include "touchlab/keyboard.hpp"

namespace touchlab::service {

inline constexpr int kProtocolVersion = 1;

/// Run-length encoding of a binary mask in raster order: alternating run lengths, starting
/// with a run of zeros (possibly empty).
nlohmann::json rle_encode(const Mask& m);
Mask rle_decode(const nlohmann::json& j);

/// One interactive connection: simulator-driven frames through the full pipeline.
/// Messages are handled strictly in order; each call returns every reply it produced.
class Session {
public:
    explicit Session(AppConfig config);

    std::vector<nlohmann::json> handle(const nlohmann::json& msg);
    /// Parses one text frame; malformed JSON yields an error reply with a null seq.
    std::vector<std::string> handle_text(std::string_view text);

    std::uint64_t frame_counter() const { return frame_counter_; }
    const surface::BackgroundModel& background() const { return model_; }

private:
    nlohmann::json frame_result(const nlohmann::json& seq, std::vector<nlohmann::json>& extra);
    void apply_config(const nlohmann::json& payload);
    void rebuild_background();

    AppConfig config_;
    surface::BackgroundModel model_;
    std::unique_ptr<touch::FingerTracker> tracker_;
    std::vector<sim::HandPoseParams> poses_;
    std::uint64_t frame_counter_ = 0;
    std::optional<keyboard::KeyLayout> layout_;
    std::set<std::pair<int, int>> touching_;  // (hand id, finger) down in the previous frame
    std::string transcript_;
};

}  // namespace touchlab::service

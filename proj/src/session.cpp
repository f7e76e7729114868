#include "touchlab/session.hpp"

#include "touchlab/components.hpp"

namespace touchlab::service {

namespace {

using nlohmann::json;

json envelope(std::string_view type, const json& seq) {
    return {{"v", kProtocolVersion}, {"type", type}, {"seq", seq}};
}

json error_reply(const json& seq, const std::string& message, std::string_view stage) {
    json j = envelope("error", seq);
    j["message"] = message;
    j["stage"] = stage;
    return j;
}

}  // namespace

json rle_encode(const Mask& m) {
    json runs = json::array();
    std::uint8_t current = 0;
    std::size_t run = 0;
    for (auto v : m.pixels()) {
        const std::uint8_t bit = v ? 1 : 0;
        if (bit != current) {
            runs.push_back(run);
            current = bit;
            run = 0;
        }
        ++run;
    }
    runs.push_back(run);
    return {{"width", m.width()}, {"height", m.height()}, {"runs", runs}};
}

Mask rle_decode(const json& j) {
    Mask m(j.at("width").get<int>(), j.at("height").get<int>(), 0);
    std::size_t pos = 0;
    std::uint8_t value = 0;
    for (const auto& r : j.at("runs")) {
        const auto n = r.get<std::size_t>();
        if (pos + n > m.size()) throw Error(ErrorCode::InvalidArgument, "run lengths exceed the mask size");
        std::fill_n(m.data() + pos, n, value);
        pos += n;
        value ^= 1;
    }
    if (pos != m.size()) throw Error(ErrorCode::InvalidArgument, "run lengths do not cover the mask");
    return m;
}

Session::Session(AppConfig config) : config_(std::move(config)) {
    config_.validate();
    rebuild_background();
}

void Session::rebuild_background() {
    sim::NoiseModel n = config_.noise;
    n.rng_seed = derive_seed(config_.noise.rng_seed, 0xb6);
    model_ = surface::build_background(sim::empty_frames(config_.scene, n, config_.background.frame_count),
                                       config_.background);
    tracker_ = std::make_unique<touch::FingerTracker>(config_.pipeline.match.max_age,
                                                       config_.pipeline.match.hand_gate_px);
    touching_.clear();
}

void Session::apply_config(const json& payload) {
    if (payload.contains("config")) {
        json merged = to_json(config_);
        merged.merge_patch(payload.at("config"));
        config_ = config_from_json(merged);
        rebuild_background();
    }
    if (payload.contains("keyboard")) {
        const auto& kb = payload.at("keyboard");
        const json layout = kb.is_object() && kb.contains("layout") ? kb.at("layout") : kb;
        if (layout.is_null()) {
            layout_.reset();
        } else if (layout.is_string()) {
            if (layout.get<std::string>() != "qwerty")
                throw Error(ErrorCode::ConfigError, "unknown layout '" + layout.get<std::string>() + "'");
            layout_ = keyboard::KeyLayout::qwerty();
        } else {
            layout_ = keyboard::layout_from_json(layout);
        }
        transcript_.clear();
        touching_.clear();
    }
}

json Session::frame_result(const json& seq, std::vector<json>& extra) {
    std::string stage = "simulate";
    try {
        auto r = sim::render_scene(poses_, config_.scene);
        sim::NoiseModel n = config_.noise;
        n.rng_seed = derive_seed(config_.noise.rng_seed, 0x1000 + frame_counter_);
        r.frame = sim::apply_noise(r.frame, n);
        r.frame.frame_id = frame_counter_;
        r.frame.timestamp_ms = static_cast<std::int64_t>(frame_counter_) * 33;
        ++frame_counter_;

        stage = "process";
        const pose::OraclePoser poser(config_.poser.sigma_joint_px, config_.noise.rng_seed);
        const touch::FrameContext ctx{model_, poser, config_.pipeline};
        const auto res = touch::process_frame(r.frame, r.truths, ctx, *tracker_);

        stage = "serialize";
        json j = envelope("frame_result", seq);
        const json body = touch::to_json(res, true);
        for (const auto& [k, v] : body.items()) j[k] = v;
        json outlines = json::array();
        for (const auto& b : res.blobs) {
            json pts = json::array();
            for (const auto& p : trace_outline(res.blob_labels, b.component)) pts.push_back({p.x, p.y});
            outlines.push_back({{"id", b.id}, {"outline", pts}});
        }
        j["blob_outlines"] = outlines;
        j["masks"] = {{"touch", rle_encode(res.touch_mask)}, {"hand", rle_encode(res.hand_mask)}};

        stage = "keyboard";
        if (layout_) {
            std::set<std::pair<int, int>> now;
            std::vector<keyboard::TimedTouch> downs;
            for (const auto& p : res.touch_points) {
                if (p.finger == Finger::Unknown) continue;
                const std::pair<int, int> key{p.hand_id, static_cast<int>(p.finger)};
                now.insert(key);
                if (!touching_.count(key)) downs.push_back({r.frame.timestamp_ms, p});
            }
            touching_ = std::move(now);
            json events = json::array();
            for (const auto& event : keyboard::group_contact_events(downs, *layout_)) {
                std::vector<touch::TouchPoint> pts;
                for (const auto& d : event) pts.push_back(d.point);
                const auto ks = keyboard::resolve_keystroke(pts, *layout_);
                if (ks.status == keyboard::KeystrokeStatus::Empty) continue;
                transcript_ += ks.text;
                keyboard::LogEntry e{ks.key ? ks.key->base : "", ks.fingers, r.frame.timestamp_ms, ks.text, ks.status};
                json ev = keyboard::to_json(e);
                events.push_back(ev);
                json msg = envelope("keyboard_event", seq);
                for (const auto& [k, v] : ev.items()) msg[k] = v;
                msg["transcript"] = transcript_;
                extra.push_back(std::move(msg));
            }
            j["keyboard"] = {{"layout", layout_->id}, {"events", events}, {"transcript", transcript_}};
        } else {
            j["keyboard"] = nullptr;
        }
        return j;
    } catch (const Error& e) {
        return error_reply(seq, e.what(), stage);
    }
}

std::vector<json> Session::handle(const json& msg) {
    const json seq = msg.is_object() && msg.contains("seq") ? msg.at("seq") : json(nullptr);
    if (!msg.is_object() || !msg.contains("type") || !msg.at("type").is_string())
        return {error_reply(seq, "message must be an object with a string 'type'", "protocol")};
    if (!msg.contains("v") || !msg.at("v").is_number_integer() || msg.at("v").get<int>() != kProtocolVersion)
        return {error_reply(seq, "unsupported protocol version; expected v=1", "protocol")};

    const std::string type = msg.at("type").get<std::string>();
    std::vector<json> extra;
    json reply;
    if (type == "set_pose") {
        try {
            std::vector<sim::HandPoseParams> poses;
            if (msg.contains("poses")) {
                for (const auto& p : msg.at("poses")) poses.push_back(sim::pose_from_json(p));
            } else if (msg.contains("pose") && !msg.at("pose").is_null()) {
                poses.push_back(sim::pose_from_json(msg.at("pose")));
            }
            for (const auto& p : poses) p.validate();
            poses_ = std::move(poses);
        } catch (const Error& e) {
            return {error_reply(seq, e.what(), "pose")};
        }
        reply = frame_result(seq, extra);
    } else if (type == "set_config") {
        try {
            apply_config(msg);
        } catch (const Error& e) {
            return {error_reply(seq, e.what(), "config")};
        }
        reply = frame_result(seq, extra);
    } else if (type == "request_frame") {
        reply = frame_result(seq, extra);
    } else {
        return {error_reply(seq, "unknown message type '" + type + "'", "protocol")};
    }
    std::vector<json> out{std::move(reply)};
    for (auto& e : extra) out.push_back(std::move(e));
    return out;
}

std::vector<std::string> Session::handle_text(std::string_view text) {
    json msg;
    try {
        msg = json::parse(text);
    } catch (const json::parse_error& e) {
        return {error_reply(nullptr, std::string("malformed JSON: ") + e.what(), "protocol").dump()};
    }
    std::vector<std::string> out;
    for (const auto& r : handle(msg)) out.push_back(r.dump());
    return out;
}

}  // namespace touchlab::service

#include "touchlab/config.hpp"

#include <fstream>
#include <set>

namespace touchlab {

namespace {

using nlohmann::json;

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, std::string(section) + " must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items()) {
        if (!ok.count(k)) throw Error(ErrorCode::ConfigError, "unknown key '" + k + "' in " + section);
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void read_range(const json& j, const char* key, std::array<double, 2>& out) {
    if (j.contains(key)) out = j.at(key).get<std::array<double, 2>>();
}

}  // namespace

void AppConfig::validate() const {
    scene.validate();
    noise.validate();
    pipeline.slice.validate();
    pipeline.match.validate();
    angles.validate();
    if (background.frame_count < 1) throw Error(ErrorCode::ConfigError, "background.frame_count must be >= 1");
    if (pipeline.region.min_area < 1 || pipeline.region.hand_crop_px < 1)
        throw Error(ErrorCode::ConfigError, "region.min_area and region.hand_crop_px must be >= 1");
}

AppConfig config_from_json(const json& j) {
    AppConfig c;
    try {
        check_keys(j, "config", {"scene", "noise", "background", "slice", "region", "match", "angles", "poser"});
        if (j.contains("scene")) {
            const auto& s = j["scene"];
            check_keys(s, "scene", {"camera_height", "mm_per_px", "width", "height", "contact_eps"});
            read(s, "camera_height", c.scene.camera_height);
            read(s, "mm_per_px", c.scene.mm_per_px);
            read(s, "width", c.scene.width);
            read(s, "height", c.scene.height);
            read(s, "contact_eps", c.scene.contact_eps);
        }
        if (j.contains("noise")) {
            const auto& s = j["noise"];
            check_keys(s, "noise",
                       {"sigma_depth", "edge_dropout_radius", "edge_depth_jump", "edge_dropout_prob",
                        "speckle_invalid_prob", "quantization_step", "rng_seed"});
            read(s, "sigma_depth", c.noise.sigma_depth);
            read(s, "edge_dropout_radius", c.noise.edge_dropout_radius);
            read(s, "edge_depth_jump", c.noise.edge_depth_jump);
            read(s, "edge_dropout_prob", c.noise.edge_dropout_prob);
            read(s, "speckle_invalid_prob", c.noise.speckle_invalid_prob);
            read(s, "quantization_step", c.noise.quantization_step);
            read(s, "rng_seed", c.noise.rng_seed);
        }
        if (j.contains("background")) {
            const auto& s = j["background"];
            check_keys(s, "background", {"frame_count", "inlier_window_mm"});
            read(s, "frame_count", c.background.frame_count);
            read(s, "inlier_window_mm", c.background.inlier_window_mm);
        }
        if (j.contains("slice")) {
            const auto& s = j["slice"];
            check_keys(s, "slice", {"touch_min_height", "touch_max_height", "hand_max_height", "noise_k"});
            read(s, "touch_min_height", c.pipeline.slice.touch_min_height);
            read(s, "touch_max_height", c.pipeline.slice.touch_max_height);
            read(s, "hand_max_height", c.pipeline.slice.hand_max_height);
            read(s, "noise_k", c.pipeline.slice.noise_k);
        }
        if (j.contains("region")) {
            const auto& s = j["region"];
            check_keys(s, "region", {"min_area", "hand_crop_px", "fragment_min_area"});
            read(s, "min_area", c.pipeline.region.min_area);
            read(s, "hand_crop_px", c.pipeline.region.hand_crop_px);
            read(s, "fragment_min_area", c.pipeline.region.fragment_min_area);
        }
        if (j.contains("match")) {
            const auto& s = j["match"];
            check_keys(s, "match",
                       {"gate_distance", "gate_penalty", "stride", "small_blob_area", "min_blob_area", "max_blob_area",
                        "box_filter", "hover_radius", "max_age", "hand_gate_px"});
            auto& m = c.pipeline.match;
            read(s, "gate_distance", m.gate_distance);
            read(s, "gate_penalty", m.gate_penalty);
            read(s, "stride", m.stride);
            read(s, "small_blob_area", m.small_blob_area);
            read(s, "min_blob_area", m.min_blob_area);
            read(s, "max_blob_area", m.max_blob_area);
            read(s, "box_filter", m.box_filter);
            read(s, "hover_radius", m.hover_radius);
            read(s, "max_age", m.max_age);
            read(s, "hand_gate_px", m.hand_gate_px);
        }
        if (j.contains("angles")) {
            const auto& s = j["angles"];
            check_keys(s, "angles", {"mcp", "pip", "dip", "spread", "penalty_rate", "tolerance_deg"});
            read_range(s, "mcp", c.angles.mcp);
            read_range(s, "pip", c.angles.pip);
            read_range(s, "dip", c.angles.dip);
            read_range(s, "spread", c.angles.spread);
            read(s, "penalty_rate", c.angles.penalty_rate);
            read(s, "tolerance_deg", c.angles.tolerance_deg);
        }
        if (j.contains("poser")) {
            const auto& s = j["poser"];
            check_keys(s, "poser", {"sigma_joint_px", "fitness_threshold"});
            read(s, "sigma_joint_px", c.poser.sigma_joint_px);
            read(s, "fitness_threshold", c.poser.fitness_threshold);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, e.what());
    }
    c.validate();
    return c;
}

AppConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot read config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

json to_json(const AppConfig& c) {
    const auto& m = c.pipeline.match;
    return {
        {"scene",
         {{"camera_height", c.scene.camera_height},
          {"mm_per_px", c.scene.mm_per_px},
          {"width", c.scene.width},
          {"height", c.scene.height},
          {"contact_eps", c.scene.contact_eps}}},
        {"noise",
         {{"sigma_depth", c.noise.sigma_depth},
          {"edge_dropout_radius", c.noise.edge_dropout_radius},
          {"edge_depth_jump", c.noise.edge_depth_jump},
          {"edge_dropout_prob", c.noise.edge_dropout_prob},
          {"speckle_invalid_prob", c.noise.speckle_invalid_prob},
          {"quantization_step", c.noise.quantization_step},
          {"rng_seed", c.noise.rng_seed}}},
        {"background", {{"frame_count", c.background.frame_count}, {"inlier_window_mm", c.background.inlier_window_mm}}},
        {"slice",
         {{"touch_min_height", c.pipeline.slice.touch_min_height},
          {"touch_max_height", c.pipeline.slice.touch_max_height},
          {"hand_max_height", c.pipeline.slice.hand_max_height},
          {"noise_k", c.pipeline.slice.noise_k}}},
        {"region",
         {{"min_area", c.pipeline.region.min_area},
          {"hand_crop_px", c.pipeline.region.hand_crop_px},
          {"fragment_min_area", c.pipeline.region.fragment_min_area}}},
        {"match",
         {{"gate_distance", m.gate_distance},
          {"gate_penalty", m.gate_penalty},
          {"stride", m.stride},
          {"small_blob_area", m.small_blob_area},
          {"min_blob_area", m.min_blob_area},
          {"max_blob_area", m.max_blob_area},
          {"box_filter", m.box_filter},
          {"hover_radius", m.hover_radius},
          {"max_age", m.max_age},
          {"hand_gate_px", m.hand_gate_px}}},
        {"angles",
         {{"mcp", c.angles.mcp},
          {"pip", c.angles.pip},
          {"dip", c.angles.dip},
          {"spread", c.angles.spread},
          {"penalty_rate", c.angles.penalty_rate},
          {"tolerance_deg", c.angles.tolerance_deg}}},
        {"poser", {{"sigma_joint_px", c.poser.sigma_joint_px}, {"fitness_threshold", c.poser.fitness_threshold}}},
    };
}

}  // namespace touchlab

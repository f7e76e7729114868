#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "touchlab/hand_sim.hpp"
#include "touchlab/pose_est.hpp"
#include "touchlab/surface_model.hpp"
#include "touchlab/touch_pipeline.hpp"

namespace touchlab {

struct PoserConfig {
    double sigma_joint_px = 0.0;
    double fitness_threshold = 10.0;
};

/// Every module configuration in one place; mirrors the JSON config file.
struct AppConfig {
    sim::SceneConfig scene;
    sim::NoiseModel noise;
    surface::BackgroundBuildConfig background;
    touch::PipelineConfig pipeline;
    pose::AngleLimits angles;
    PoserConfig poser;

    void validate() const;
};

/// Missing keys keep their defaults; unknown keys and type errors raise ConfigError.
AppConfig config_from_json(const nlohmann::json& j);
AppConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const AppConfig& c);

}  // namespace touchlab

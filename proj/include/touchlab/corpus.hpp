#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "touchlab/hand_sim.hpp"
#include "touchlab/pose_est.hpp"
#include "touchlab/surface_model.hpp"
#include "touchlab/touch_pipeline.hpp"

namespace touchlab::corpus {

struct CorpusFrame {
    std::string scenario;
    DepthFrame frame;
    std::vector<sim::GroundTruth> truths;
};

struct Corpus {
    std::vector<DepthFrame> background;
    std::vector<CorpusFrame> frames;
};

inline constexpr int kBackgroundFrames = 30;
inline constexpr int kScenarioFrames = 50;
inline constexpr std::uint64_t kDefaultSeed = 2024;

/// Deterministic replay corpus: empty-surface frames for the background model followed by
/// scripted scenarios (pointing, multi-finger, pressed together, thumb, hover, two hands).
Corpus generate_corpus(std::uint64_t seed = kDefaultSeed, const sim::SceneConfig& scene = {},
                       const sim::NoiseModel& noise = {});

/// Layout: background/bg_NNN.pgm, frames/f_NNN.pgm, each with a .json sidecar; annotations in
/// frames/f_NNN.truth.json.
void save_corpus(const std::filesystem::path& dir, const Corpus& c);
Corpus load_corpus(const std::filesystem::path& dir);

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t frame_hash(const DepthFrame& f);

/// One "<relative path> <16 hex digits>" line per frame.
std::string hash_list(const Corpus& c);

/// Builds the background from the corpus and processes every scenario frame in order with one
/// tracker; returns one JSON line per frame.
std::vector<std::string> replay(const Corpus& c, const pose::Poser& poser, const touch::PipelineConfig& pipeline,
                                const surface::BackgroundBuildConfig& background, bool include_timings,
                                std::vector<touch::FrameResult>* results = nullptr);

/// Writes annotation-derived heatmap stacks for every hand region of every frame, in the
/// layout HeatmapFilePoser reads. Returns the number of stacks written.
int export_heatmaps(const Corpus& c, const touch::PipelineConfig& pipeline,
                    const surface::BackgroundBuildConfig& background, const std::filesystem::path& out_dir,
                    double sigma = 2.0);

/// Training targets for a rendered dataset: `<out_dir>/<sample id>/hm_<frame>_<region>` for every
/// arm region of each sample's noisy frame, sliced against the known plane.
int export_dataset_heatmaps(const std::filesystem::path& dataset_root, const sim::SceneConfig& scene,
                            const touch::PipelineConfig& pipeline, const std::filesystem::path& out_dir,
                            double sigma = 2.0);

}  // namespace touchlab::corpus

#pragma once

#include <random>
#include <vector>

#include "touchlab/hand_sim.hpp"
#include "touchlab/surface_model.hpp"

namespace touchlab::testing {

inline sim::SceneConfig small_scene() { return sim::SceneConfig{}; }

/// Exact background for a noiseless scene.
inline surface::BackgroundModel plane_model(const sim::SceneConfig& scene = {}) {
    return surface::flat_background(scene.width, scene.height, scene.surface_depth(), scene.mm_per_px);
}

/// Flat right hand with only the index pad on the surface at the frame centre.
inline sim::HandPoseParams index_touch_pose(const sim::SceneConfig& scene = {}) {
    auto p = sim::pointing_pose(scene.geometry);
    return sim::place_tip(p, 1, {scene.width * scene.mm_per_px / 2, scene.height * scene.mm_per_px / 2},
                          scene.geometry);
}

}  // namespace touchlab::testing

#define CHECK_ERROR_CODE(expr, expected)                         \
    do {                                                        \
        try {                                                   \
            (void)(expr);                                       \
            FAIL("no exception from " #expr);                   \
        } catch (const ::touchlab::Error& e_) {                 \
            CHECK(e_.code() == (expected));                     \
        }                                                       \
    } while (0)

#pragma once

#include <cstdint>
#include <vector>

#include "touchlab/common.hpp"

namespace touchlab {

struct Component {
    int label = 0;                 // 1-based; matches Labeling::labels
    std::vector<std::int32_t> pixels;  // linear indices, raster order
    Rect bbox;
    Vec2 centroid;

    int area() const { return static_cast<int>(pixels.size()); }
};

struct Labeling {
    Image<std::int32_t> labels;  // 0 = background
    std::vector<Component> components;
};

/// 8-connected component labeling. Components are ordered by their first pixel in raster order.
Labeling label_components(const Mask& mask);

/// Majority vote over a (2r+1)x(2r+1) window; pixels outside the image count as unset.
Mask majority_filter(const Mask& mask, int window);

/// Chebyshev-distance dilation by `radius` pixels.
Mask dilate(const Mask& mask, int radius);

/// Boundary of a component as an ordered closed polygon (Moore-neighbour trace), pixel coordinates.
std::vector<Vec2> trace_outline(const Image<std::int32_t>& labels, const Component& comp);

}  // namespace touchlab

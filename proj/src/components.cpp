#include "touchlab/components.hpp"

#include <numeric>

namespace touchlab {

namespace {

std::int32_t find_root(std::vector<std::int32_t>& parent, std::int32_t a) {
    while (parent[a] != a) {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    return a;
}

void unite(std::vector<std::int32_t>& parent, std::int32_t a, std::int32_t b) {
    a = find_root(parent, a);
    b = find_root(parent, b);
    if (a == b) return;
    if (a < b)
        parent[b] = a;
    else
        parent[a] = b;
}

}  // namespace

Labeling label_components(const Mask& mask) {
    const int w = mask.width();
    const int h = mask.height();
    Labeling out;
    out.labels = Image<std::int32_t>(w, h, 0);
    auto& lab = out.labels;

    std::vector<std::int32_t> parent{0};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask(x, y)) continue;
            std::int32_t best = 0;
            // Already-visited 8-neighbours: W, NW, N, NE.
            const int nx[4] = {x - 1, x - 1, x, x + 1};
            const int ny[4] = {y, y - 1, y - 1, y - 1};
            for (int k = 0; k < 4; ++k) {
                if (nx[k] < 0 || nx[k] >= w || ny[k] < 0) continue;
                const std::int32_t l = lab(nx[k], ny[k]);
                if (!l) continue;
                if (!best)
                    best = l;
                else if (l != best)
                    unite(parent, best, l);
            }
            if (!best) {
                best = static_cast<std::int32_t>(parent.size());
                parent.push_back(best);
            }
            lab(x, y) = best;
        }
    }

    // Resolve provisional labels to dense 1-based ids in raster order of first pixel.
    std::vector<std::int32_t> dense(parent.size(), 0);
    std::int32_t next = 0;
    for (std::size_t i = 0; i < lab.size(); ++i) {
        std::int32_t l = lab[i];
        if (!l) continue;
        const std::int32_t root = find_root(parent, l);
        if (!dense[root]) {
            dense[root] = ++next;
            out.components.emplace_back();
            out.components.back().label = next;
        }
        const std::int32_t d = dense[root];
        lab[i] = d;
        auto& comp = out.components[d - 1];
        comp.pixels.push_back(static_cast<std::int32_t>(i));
        comp.bbox.include(static_cast<int>(i % w), static_cast<int>(i / w));
    }
    for (auto& comp : out.components) {
        double sx = 0.0, sy = 0.0;
        for (auto p : comp.pixels) {
            sx += p % w;
            sy += p / w;
        }
        comp.centroid = {sx / comp.area(), sy / comp.area()};
    }
    return out;
}

Mask majority_filter(const Mask& mask, int window) {
    const int w = mask.width();
    const int h = mask.height();
    const int r = window / 2;
    if (r <= 0) return mask;
    const int need = (window * window) / 2 + 1;

    // Integral image of set pixels.
    std::vector<std::int32_t> integral(static_cast<std::size_t>(w + 1) * (h + 1), 0);
    auto at = [w](int x, int y) { return static_cast<std::size_t>(y) * (w + 1) + x; };
    for (int y = 0; y < h; ++y) {
        std::int32_t row = 0;
        for (int x = 0; x < w; ++x) {
            row += mask(x, y) ? 1 : 0;
            integral[at(x + 1, y + 1)] = integral[at(x + 1, y)] + row;
        }
    }
    Mask out(w, h, 0);
    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
            const std::int32_t n = integral[at(x1 + 1, y1 + 1)] - integral[at(x0, y1 + 1)] -
                                   integral[at(x1 + 1, y0)] + integral[at(x0, y0)];
            out(x, y) = n >= need ? 1 : 0;
        }
    }
    return out;
}

Mask dilate(const Mask& mask, int radius) {
    if (radius <= 0) return mask;
    const int w = mask.width();
    const int h = mask.height();
    // Separable max filter.
    Mask tmp(w, h, 0), out(w, h, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask(x, y)) continue;
            const int x0 = std::max(0, x - radius), x1 = std::min(w - 1, x + radius);
            for (int xx = x0; xx <= x1; ++xx) tmp(xx, y) = 1;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!tmp(x, y)) continue;
            const int y0 = std::max(0, y - radius), y1 = std::min(h - 1, y + radius);
            for (int yy = y0; yy <= y1; ++yy) out(x, yy) = 1;
        }
    }
    return out;
}

std::vector<Vec2> trace_outline(const Image<std::int32_t>& labels, const Component& comp) {
    std::vector<Vec2> poly;
    if (comp.pixels.empty()) return poly;
    const int w = labels.width();
    const int sx = comp.pixels.front() % w;
    const int sy = comp.pixels.front() / w;
    auto inside = [&](int x, int y) { return labels.in_bounds(x, y) && labels(x, y) == comp.label; };

    // Clockwise neighbour order starting West (image coordinates, y down).
    static constexpr int dx[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
    static constexpr int dy[8] = {0, -1, -1, -1, 0, 1, 1, 1};

    int cx = sx, cy = sy;
    int dir = 0;  // first pixel in raster order: its West neighbour is outside
    const std::size_t limit = 4 * comp.pixels.size() + 8;
    do {
        poly.push_back({static_cast<double>(cx), static_cast<double>(cy)});
        int k = 0;
        for (; k < 8; ++k) {
            const int d = (dir + k) % 8;
            if (inside(cx + dx[d], cy + dy[d])) {
                cx += dx[d];
                cy += dy[d];
                // Next search starts from the backtrack direction rotated one step.
                dir = (d + 6) % 8;
                break;
            }
        }
        if (k == 8) break;  // isolated pixel
    } while ((cx != sx || cy != sy) && poly.size() < limit);
    return poly;
}

}  // namespace touchlab

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace touchlab {

enum class ErrorCode {
    InsufficientFrames,
    DimensionMismatch,
    AllPixelsInvalid,
    PoseOutOfBounds,
    IoError,
    EmptyGrid,
    GeometryOutOfFrame,
    EmptyRegion,
    EmptyHeatmap,
    MissingJoints,
    MissingHeatmapFile,
    NonFiniteCost,
    SeedMismatch,
    EmptyReference,
    ZeroDuration,
    ConfigError,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
    bool operator==(const Vec2&) const = default;
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        const double n = norm();
        return n > 0.0 ? *this * (1.0 / n) : Vec3{};
    }
    Vec2 xy() const { return {x, y}; }
};

/// Inclusive pixel rectangle.
struct Rect {
    int x0 = 0;
    int y0 = 0;
    int x1 = -1;
    int y1 = -1;

    bool empty() const { return x1 < x0 || y1 < y0; }
    int width() const { return empty() ? 0 : x1 - x0 + 1; }
    int height() const { return empty() ? 0 : y1 - y0 + 1; }
    bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
    Rect expanded(int r) const { return {x0 - r, y0 - r, x1 + r, y1 + r}; }
    bool intersects(const Rect& o) const {
        return !empty() && !o.empty() && x0 <= o.x1 && o.x0 <= x1 && y0 <= o.y1 && o.y0 <= y1;
    }
    void include(int x, int y) {
        if (empty()) {
            *this = {x, y, x, y};
            return;
        }
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
    }
    bool operator==(const Rect&) const = default;
};

/// Square crop window in frame pixels. May extend past the frame only before clamping.
struct CropWindow {
    int x = 0;
    int y = 0;
    int size = 0;
    bool operator==(const CropWindow&) const = default;
};

enum class Finger : std::uint8_t { Thumb = 0, Index, Middle, Ring, Little, Unknown };
enum class JointKind : std::uint8_t { Mcp = 0, Pip, Dip, Tip };
enum class HandSide : std::uint8_t { Right = 0, Left };

inline constexpr int kFingerCount = 5;
inline constexpr int kJointsPerFinger = 4;
inline constexpr int kJointCount = kFingerCount * kJointsPerFinger;

constexpr int joint_index(Finger f, JointKind k) {
    return static_cast<int>(f) * kJointsPerFinger + static_cast<int>(k);
}
constexpr int tip_index(int finger) { return finger * kJointsPerFinger + 3; }

std::string_view to_string(Finger f);
Finger finger_from_string(std::string_view s);
std::string_view to_string(HandSide s);
HandSide hand_side_from_string(std::string_view s);
inline HandSide flipped(HandSide s) { return s == HandSide::Right ? HandSide::Left : HandSide::Right; }

/// Row-major 2D grid.
template <typename T>
class Image {
public:
    Image() = default;
    Image(int width, int height, T fill = T{})
        : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {
        if (width < 0 || height < 0) throw Error(ErrorCode::InvalidArgument, "negative image size");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
    bool same_shape(int w, int h) const { return w == width_ && h == height_; }
    template <typename U>
    bool same_shape(const Image<U>& o) const { return o.width() == width_ && o.height() == height_; }

    T& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    const T& operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> pixels() { return data_; }
    std::span<const T> pixels() const { return data_; }
    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
    bool operator==(const Image&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using Mask = Image<std::uint8_t>;

/// Deterministic 64-bit mixer used to derive per-trial / per-sample RNG streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ (stream * 0xd1342543de82ef95ULL + 1));
}

constexpr double kPi = 3.14159265358979323846;
constexpr double deg2rad(double d) { return d * kPi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace touchlab

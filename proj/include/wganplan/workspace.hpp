#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "wganplan/tensor.hpp"
#include "wganplan/textio.hpp"

namespace wganplan {

/// Configuration scaled to the unit hypercube [0,1]^d. Arm joint angles map
/// affinely from [-pi, pi]; the point robot maps to workspace coordinates.
using Config = std::vector<double>;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

struct Box2 {
    Vec2 lo;
    Vec2 hi;
    bool contains(Vec2 p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
    }
    Vec2 extent() const { return hi - lo; }
};

struct Segment {
    Vec2 a;
    Vec2 b;
};

struct Obstacle {
    enum class Kind { Disc, Rect };
    Kind kind = Kind::Disc;
    Vec2 a;               // disc centre, or rect lower corner
    Vec2 b;               // rect upper corner (unused for discs)
    double radius = 0.0;  // disc radius (unused for rects)

    static Obstacle disc(Vec2 centre, double radius);
    static Obstacle rect(Vec2 lo, Vec2 hi);

    bool contains(Vec2 p) const;
    /// Unsigned distance from p to the obstacle region (0 inside).
    double distance(Vec2 p) const;
    /// Exact segment-obstacle intersection test.
    bool intersects(const Segment& s) const;
};

struct RobotModel {
    enum class Kind { Point, Arm };
    Kind kind = Kind::Point;
    Vec2 base;                  // arm only
    std::vector<double> links;  // arm only, 2..7 positive lengths

    static RobotModel point_robot();
    static RobotModel planar_arm(Vec2 base, std::vector<double> links);

    int dim() const { return kind == Kind::Point ? 2 : static_cast<int>(links.size()); }
};

/// Workspace with implicit configuration-space semantics. Read-only after
/// construction. Rectangles are clipped to the bounds and disc centres
/// clamped into them; geometry outside the bounds is inert anyway since no
/// valid configuration leaves the box.
struct Scene {
    Box2 bounds{{0.0, 0.0}, {1.0, 1.0}};
    std::vector<Obstacle> obstacles;
    RobotModel robot;

    Scene() = default;
    Scene(Box2 bounds, std::vector<Obstacle> obstacles, RobotModel robot);

    int dim() const { return robot.dim(); }
};

/// Workspace position of the point robot at q.
Vec2 point_position(const Scene& scene, const Config& q);

/// One workspace segment per arm link; angles accumulate along the chain.
/// Throws std::invalid_argument for non-arm robots.
std::vector<Segment> forward_kinematics(const RobotModel& robot, const Config& q);

/// True iff the robot at q intersects no obstacle and stays inside bounds.
bool is_free(const Scene& scene, const Config& q);

/// Collision test along the straight C-space segment from q_a to q_b.
/// Point robots get an exact continuous test; arms are sampled at
/// configuration spacing <= resolution (endpoints included).
bool segment_free(const Scene& scene, const Config& q_a, const Config& q_b, double resolution);

/// Default C-space collision resolution: 1/64 of the unit-cube diagonal.
inline double default_resolution(int d) { return std::sqrt(static_cast<double>(d)) / 64.0; }

/// 4x(h)x(w) grid: occupancy, normalized distance transform, two reserved
/// zero channels.
Tensor rasterize(const Scene& scene, std::size_t height = 32, std::size_t width = 32);

std::string serialize_scene(const Scene& scene, bool single_line = false);
Scene parse_scene(TokenReader& reader);
Scene parse_scene(std::string_view text);

}  // namespace wganplan

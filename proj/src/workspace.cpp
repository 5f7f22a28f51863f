#include "wganplan/workspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace wganplan {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

double segment_point_distance(const Segment& s, Vec2 p) {
    Vec2 d = s.b - s.a;
    double len2 = dot(d, d);
    if (len2 == 0.0) return norm(p - s.a);
    double t = clamp(dot(p - s.a, d) / len2, 0.0, 1.0);
    return norm(p - (s.a + t * d));
}

// Liang-Barsky clip of a segment against an axis-aligned box.
bool segment_intersects_box(const Segment& s, Vec2 lo, Vec2 hi) {
    double t0 = 0.0, t1 = 1.0;
    Vec2 d = s.b - s.a;
    const double p[4] = {-d.x, d.x, -d.y, d.y};
    const double q[4] = {s.a.x - lo.x, hi.x - s.a.x, s.a.y - lo.y, hi.y - s.a.y};
    for (int i = 0; i < 4; ++i) {
        if (p[i] == 0.0) {
            if (q[i] < 0.0) return false;  // parallel and outside the slab
        } else {
            double r = q[i] / p[i];
            if (p[i] < 0.0) {
                if (r > t1) return false;
                t0 = std::max(t0, r);
            } else {
                if (r < t0) return false;
                t1 = std::min(t1, r);
            }
        }
    }
    return t0 <= t1;
}

}  // namespace

Obstacle Obstacle::disc(Vec2 centre, double radius) {
    if (radius <= 0.0) throw std::invalid_argument("Obstacle::disc: radius must be positive");
    Obstacle o;
    o.kind = Kind::Disc;
    o.a = centre;
    o.radius = radius;
    return o;
}

Obstacle Obstacle::rect(Vec2 lo, Vec2 hi) {
    if (!(lo.x < hi.x && lo.y < hi.y))
        throw std::invalid_argument("Obstacle::rect: min corner must be strictly below max");
    Obstacle o;
    o.kind = Kind::Rect;
    o.a = lo;
    o.b = hi;
    return o;
}

bool Obstacle::contains(Vec2 p) const {
    if (kind == Kind::Disc) return norm(p - a) <= radius;
    return p.x >= a.x && p.x <= b.x && p.y >= a.y && p.y <= b.y;
}

double Obstacle::distance(Vec2 p) const {
    if (kind == Kind::Disc) return std::max(0.0, norm(p - a) - radius);
    double dx = std::max({a.x - p.x, 0.0, p.x - b.x});
    double dy = std::max({a.y - p.y, 0.0, p.y - b.y});
    return std::sqrt(dx * dx + dy * dy);
}

bool Obstacle::intersects(const Segment& s) const {
    if (kind == Kind::Disc) return segment_point_distance(s, a) <= radius;
    return segment_intersects_box(s, a, b);
}

RobotModel RobotModel::point_robot() {
    RobotModel r;
    r.kind = Kind::Point;
    return r;
}

RobotModel RobotModel::planar_arm(Vec2 base, std::vector<double> links) {
    if (links.size() < 2 || links.size() > 7)
        throw std::invalid_argument("RobotModel: arm needs 2..7 links");
    for (double l : links)
        if (l <= 0.0) throw std::invalid_argument("RobotModel: link lengths must be positive");
    RobotModel r;
    r.kind = Kind::Arm;
    r.base = base;
    r.links = std::move(links);
    return r;
}

Scene::Scene(Box2 b, std::vector<Obstacle> obs, RobotModel rob)
    : bounds(b), obstacles(std::move(obs)), robot(std::move(rob)) {
    if (!(bounds.lo.x < bounds.hi.x && bounds.lo.y < bounds.hi.y))
        throw std::invalid_argument("Scene: bounds must have positive extent");
    for (Obstacle& o : obstacles) {
        if (o.kind == Obstacle::Kind::Disc) {
            o.a.x = clamp(o.a.x, bounds.lo.x, bounds.hi.x);
            o.a.y = clamp(o.a.y, bounds.lo.y, bounds.hi.y);
        } else {
            o.a.x = std::max(o.a.x, bounds.lo.x);
            o.a.y = std::max(o.a.y, bounds.lo.y);
            o.b.x = std::min(o.b.x, bounds.hi.x);
            o.b.y = std::min(o.b.y, bounds.hi.y);
            if (!(o.a.x < o.b.x && o.a.y < o.b.y))
                throw std::invalid_argument("Scene: rectangle lies outside bounds");
        }
    }
}

Vec2 point_position(const Scene& scene, const Config& q) {
    Vec2 e = scene.bounds.extent();
    return {scene.bounds.lo.x + q[0] * e.x, scene.bounds.lo.y + q[1] * e.y};
}

std::vector<Segment> forward_kinematics(const RobotModel& robot, const Config& q) {
    if (robot.kind != RobotModel::Kind::Arm)
        throw std::invalid_argument("forward_kinematics: robot is not a planar arm");
    if (q.size() != robot.links.size())
        throw std::invalid_argument("forward_kinematics: configuration dimension mismatch");
    std::vector<Segment> segments;
    segments.reserve(robot.links.size());
    Vec2 p = robot.base;
    double angle = 0.0;
    for (std::size_t i = 0; i < robot.links.size(); ++i) {
        angle += (q[i] - 0.5) * kTwoPi;  // scaled [0,1] -> [-pi, pi]
        Vec2 next = p + robot.links[i] * Vec2{std::cos(angle), std::sin(angle)};
        segments.push_back({p, next});
        p = next;
    }
    return segments;
}

bool is_free(const Scene& scene, const Config& q) {
    if (scene.robot.kind == RobotModel::Kind::Point) {
        Vec2 p = point_position(scene, q);
        if (!scene.bounds.contains(p)) return false;
        for (const Obstacle& o : scene.obstacles)
            if (o.contains(p)) return false;
        return true;
    }
    std::vector<Segment> links = forward_kinematics(scene.robot, q);
    for (const Segment& link : links) {
        if (!scene.bounds.contains(link.a) || !scene.bounds.contains(link.b)) return false;
        for (const Obstacle& o : scene.obstacles)
            if (o.intersects(link)) return false;
    }
    return true;
}

bool segment_free(const Scene& scene, const Config& q_a, const Config& q_b, double resolution) {
    if (resolution <= 0.0) throw std::invalid_argument("segment_free: resolution must be positive");
    if (scene.robot.kind == RobotModel::Kind::Point) {
        Vec2 pa = point_position(scene, q_a);
        Vec2 pb = point_position(scene, q_b);
        if (!scene.bounds.contains(pa) || !scene.bounds.contains(pb)) return false;
        Segment s{pa, pb};
        for (const Obstacle& o : scene.obstacles)
            if (o.intersects(s)) return false;
        return true;
    }
    double dist = 0.0;
    for (std::size_t i = 0; i < q_a.size(); ++i) {
        double d = q_b[i] - q_a[i];
        dist += d * d;
    }
    dist = std::sqrt(dist);
    auto steps = static_cast<std::size_t>(std::ceil(dist / resolution));
    Config q(q_a.size());
    for (std::size_t k = 0; k <= steps; ++k) {
        double t = steps == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(steps);
        for (std::size_t i = 0; i < q.size(); ++i) q[i] = q_a[i] + t * (q_b[i] - q_a[i]);
        if (!is_free(scene, q)) return false;
    }
    return true;
}

Tensor rasterize(const Scene& scene, std::size_t height, std::size_t width) {
    Tensor grid({4, height, width});
    if (scene.obstacles.empty()) return grid;

    Vec2 e = scene.bounds.extent();
    double max_dist = 0.0;
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            Vec2 p{scene.bounds.lo.x + (static_cast<double>(c) + 0.5) * e.x / static_cast<double>(width),
                   scene.bounds.lo.y + (static_cast<double>(r) + 0.5) * e.y / static_cast<double>(height)};
            double dist = std::numeric_limits<double>::infinity();
            bool occupied = false;
            for (const Obstacle& o : scene.obstacles) {
                if (o.contains(p)) {
                    occupied = true;
                    dist = 0.0;
                    break;
                }
                dist = std::min(dist, o.distance(p));
            }
            grid.at3(0, r, c) = occupied ? 1.0 : 0.0;
            grid.at3(1, r, c) = dist;
            max_dist = std::max(max_dist, dist);
        }
    }
    if (max_dist > 0.0) {
        for (std::size_t r = 0; r < height; ++r)
            for (std::size_t c = 0; c < width; ++c) grid.at3(1, r, c) /= max_dist;
    }
    return grid;
}

std::string serialize_scene(const Scene& scene, bool single_line) {
    const char sep = single_line ? ' ' : '\n';
    std::string out = "scene 1";
    out += sep;
    out += "bounds " + format_double(scene.bounds.lo.x) + " " + format_double(scene.bounds.lo.y) +
           " " + format_double(scene.bounds.hi.x) + " " + format_double(scene.bounds.hi.y);
    out += sep;
    if (scene.robot.kind == RobotModel::Kind::Point) {
        out += "robot point";
    } else {
        out += "robot arm " + format_double(scene.robot.base.x) + " " +
               format_double(scene.robot.base.y) + " " + std::to_string(scene.robot.links.size());
        for (double l : scene.robot.links) out += " " + format_double(l);
    }
    out += sep;
    out += "obstacles " + std::to_string(scene.obstacles.size());
    for (const Obstacle& o : scene.obstacles) {
        out += sep;
        if (o.kind == Obstacle::Kind::Disc) {
            out += "disc " + format_double(o.a.x) + " " + format_double(o.a.y) + " " +
                   format_double(o.radius);
        } else {
            out += "rect " + format_double(o.a.x) + " " + format_double(o.a.y) + " " +
                   format_double(o.b.x) + " " + format_double(o.b.y);
        }
    }
    out += sep;
    out += "end";
    return out;
}

Scene parse_scene(TokenReader& reader) {
    reader.expect("scene", "scene header");
    long long version = reader.next_int("scene version");
    if (version != 1) reader.fail("scene version", "unsupported version");

    reader.expect("bounds", "bounds");
    Box2 bounds;
    bounds.lo.x = reader.next_double("bounds.xmin");
    bounds.lo.y = reader.next_double("bounds.ymin");
    bounds.hi.x = reader.next_double("bounds.xmax");
    bounds.hi.y = reader.next_double("bounds.ymax");

    reader.expect("robot", "robot");
    std::string_view kind = reader.next_token("robot kind");
    RobotModel robot;
    if (kind == "point") {
        robot = RobotModel::point_robot();
    } else if (kind == "arm") {
        Vec2 base;
        base.x = reader.next_double("robot.base.x");
        base.y = reader.next_double("robot.base.y");
        long long nlinks = reader.next_int("robot.link_count");
        if (nlinks < 2 || nlinks > 7) reader.fail("robot.link_count", "link count must be 2..7");
        std::vector<double> links(static_cast<std::size_t>(nlinks));
        for (double& l : links) l = reader.next_double("robot.link_length");
        robot = RobotModel::planar_arm(base, std::move(links));
    } else {
        reader.fail("robot kind", "expected 'point' or 'arm'");
    }

    reader.expect("obstacles", "obstacles");
    long long count = reader.next_int("obstacle count");
    if (count < 0) reader.fail("obstacle count", "negative count");
    std::vector<Obstacle> obstacles;
    obstacles.reserve(static_cast<std::size_t>(count));
    for (long long i = 0; i < count; ++i) {
        std::string_view okind = reader.next_token("obstacle kind");
        if (okind == "disc") {
            Vec2 c;
            c.x = reader.next_double("disc.cx");
            c.y = reader.next_double("disc.cy");
            double r = reader.next_double("disc.radius");
            if (r <= 0.0) reader.fail("disc.radius", "radius must be positive");
            obstacles.push_back(Obstacle::disc(c, r));
        } else if (okind == "rect") {
            Vec2 lo, hi;
            lo.x = reader.next_double("rect.xmin");
            lo.y = reader.next_double("rect.ymin");
            hi.x = reader.next_double("rect.xmax");
            hi.y = reader.next_double("rect.ymax");
            if (!(lo.x < hi.x && lo.y < hi.y)) reader.fail("rect", "min corner must be below max");
            obstacles.push_back(Obstacle::rect(lo, hi));
        } else {
            reader.fail("obstacle kind", "expected 'disc' or 'rect'");
        }
    }
    reader.expect("end", "scene terminator");
    return Scene(bounds, std::move(obstacles), std::move(robot));
}

Scene parse_scene(std::string_view text) {
    TokenReader reader(text, "scene");
    return parse_scene(reader);
}

}  // namespace wganplan

#include "aoirrm/mobility.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace aoirrm::mobility {

namespace {

constexpr double kEps = 1e-9;

// Pre-roll distance used by spawn_vehicle when the pair distance is shorter.
// A fixed pre-roll keeps the head trajectory independent of the pair distance.
constexpr double kSpawnPrerollM = 100.0;

int sign(Heading h) { return (h == Heading::east || h == Heading::north) ? 1 : -1; }

double along(Vec2 p, Heading h) { return dot(p, direction(h)); }

// Along-heading coordinate of the first lane crossed at cross road `cross`.
double decision_along(const RoadMap& map, Heading h, int cross) {
  return map.road_center(cross) * sign(h) - map.lane_width() / 2.0;
}

bool valid_index(const RoadMap& map, int i) {
  return i >= 0 && i < map.intersections_per_axis();
}

Vec2 with_along(Vec2 p, Heading h, double a) {
  if (is_horizontal(h)) {
    p.x = a * sign(h);
  } else {
    p.y = a * sign(h);
  }
  return p;
}

void set_next_decision(const RoadMap& map, VehicleTrace& t, int cross) {
  t.stop = StopKind::decide;
  t.stop_cross = cross;
  t.stop_along = decision_along(map, t.heading, cross);
}

void handle_decision(const RoadMap& map, VehicleTrace& t, Rng& rng) {
  const int cross = t.stop_cross;
  const Heading left = turn_left(t.heading);
  const Heading right = turn_right(t.heading);
  const std::array<bool, 3> open{
      valid_index(map, cross + sign(t.heading)),
      valid_index(map, t.road + sign(left)),
      valid_index(map, t.road + sign(right)),
  };

  double total = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (open[i]) total += kTurnProbabilities[i];
  }
  const double u = uniform01(rng) * total;
  std::size_t choice = 0;
  double acc = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!open[i]) continue;
    acc += kTurnProbabilities[i];
    choice = i;
    if (u < acc) break;
  }
  if (open[0] && open[1] && open[2]) ++t.free_choices[choice];

  switch (choice) {
    case 0:
      set_next_decision(map, t, cross + sign(t.heading));
      break;
    case 1:
      t.stop = StopKind::turn;
      t.turn_to = left;
      t.stop_along = map.road_center(cross) * sign(t.heading) + map.lane_width() / 2.0;
      break;
    default:
      t.stop = StopKind::turn;
      t.turn_to = right;
      // right turns happen at the decision point itself
      break;
  }
}

void handle_turn(const RoadMap& map, VehicleTrace& t) {
  t.history.push_back({t.head, t.odometer});
  const int previous_road = t.road;
  t.heading = t.turn_to;
  t.road = t.stop_cross;
  set_next_decision(map, t, previous_road + sign(t.heading));
}

void advance(const RoadMap& map, VehicleTrace& t, double distance, Rng& rng) {
  double remaining = distance;
  for (;;) {
    const double to_stop = std::max(0.0, t.stop_along - along(t.head, t.heading));
    if (to_stop >= remaining) {
      t.head = t.head + remaining * direction(t.heading);
      t.odometer += remaining;
      return;
    }
    t.head = with_along(t.head, t.heading, t.stop_along);
    t.odometer += to_stop;
    remaining -= to_stop;
    if (t.stop == StopKind::decide) {
      handle_decision(map, t, rng);
    } else {
      handle_turn(map, t);
    }
  }
}

void prune(VehicleTrace& t, double slack) {
  const double keep_from = t.odometer - t.retain_m - slack;
  while (t.history.size() >= 2 && t.history[1].arc <= keep_from) {
    t.history.pop_front();
  }
}

}  // namespace

Vec2 direction(Heading h) {
  switch (h) {
    case Heading::north: return {0.0, 1.0};
    case Heading::south: return {0.0, -1.0};
    case Heading::east: return {1.0, 0.0};
    case Heading::west: return {-1.0, 0.0};
  }
  return {};
}

Heading turn_left(Heading h) {
  switch (h) {
    case Heading::north: return Heading::west;
    case Heading::west: return Heading::south;
    case Heading::south: return Heading::east;
    case Heading::east: return Heading::north;
  }
  return h;
}

Heading turn_right(Heading h) {
  switch (h) {
    case Heading::north: return Heading::east;
    case Heading::east: return Heading::south;
    case Heading::south: return Heading::west;
    case Heading::west: return Heading::north;
  }
  return h;
}

bool is_horizontal(Heading h) { return h == Heading::east || h == Heading::west; }

RoadMap::RoadMap(const MapConfig& cfg)
    : side_(cfg.side_length_m), n_(cfg.intersections_per_axis), lane_width_(cfg.lane_width_m) {
  centers_.reserve(static_cast<std::size_t>(n_));
  for (int i = 0; i < n_; ++i) centers_.push_back(spacing() * (i + 0.5));
}

double RoadMap::lane_offset(Heading h, int road) const {
  const Vec2 right = direction(turn_right(h));
  const double toward = is_horizontal(h) ? right.y : right.x;
  return road_center(road) + toward * lane_width_ / 2.0;
}

std::vector<Lane> RoadMap::lane_centerlines() const {
  std::vector<Lane> lanes;
  for (Heading h : {Heading::east, Heading::west, Heading::north, Heading::south}) {
    for (int r = 0; r < n_; ++r) {
      const double off = lane_offset(h, r);
      Vec2 a = is_horizontal(h) ? Vec2{0.0, off} : Vec2{off, 0.0};
      Vec2 b = is_horizontal(h) ? Vec2{side_, off} : Vec2{off, side_};
      if (sign(h) < 0) std::swap(a, b);
      lanes.push_back({h, r, a, b});
    }
  }
  return lanes;
}

RoadMap build_map(const MapConfig& cfg) {
  if (!(cfg.side_length_m > 0.0)) throw ConfigError("side_length_m must be positive");
  if (cfg.intersections_per_axis < 2) {
    throw ConfigError("intersections_per_axis must be at least 2");
  }
  if (!(cfg.lane_width_m > 0.0)) throw ConfigError("lane_width_m must be positive");
  if (cfg.lane_width_m > cfg.side_length_m / cfg.intersections_per_axis) {
    throw ConfigError("lane_width_m exceeds the road spacing");
  }
  return RoadMap(cfg);
}

VehicleTrace step_vehicle(const RoadMap& map, VehicleTrace trace, double speed_mps,
                          double slot_s, Rng& rng) {
  if (speed_mps < 0.0 || slot_s < 0.0) {
    throw PreconditionError("step_vehicle: speed and slot duration must be non-negative");
  }
  const double travel = speed_mps * slot_s;
  advance(map, trace, travel, rng);
  prune(trace, travel);
  return trace;
}

Vec2 place_vtx(const VehicleTrace& trace, double ell_m) {
  if (ell_m < 0.0) throw PreconditionError("place_vtx: negative pair distance");
  const double target = trace.odometer - ell_m;
  if (ell_m == 0.0) return trace.head;
  if (trace.history.empty() || trace.history.front().arc > target + kEps) {
    throw PreconditionError("place_vtx: path history shorter than the pair distance");
  }
  Vec2 next = trace.head;
  double next_arc = trace.odometer;
  for (auto it = trace.history.rbegin(); it != trace.history.rend(); ++it) {
    if (it->arc <= target) {
      const double seg = next_arc - it->arc;
      if (seg <= 0.0) return it->pos;
      const double frac = (target - it->arc) / seg;
      return it->pos + frac * (next - it->pos);
    }
    next = it->pos;
    next_arc = it->arc;
  }
  return trace.history.front().pos;
}

VehicleTrace spawn_vehicle(const RoadMap& map, double retain_m, Rng& rng) {
  const int n = map.intersections_per_axis();
  static constexpr std::array<Heading, 4> kHeadings{Heading::east, Heading::west, Heading::north,
                                                    Heading::south};
  VehicleTrace t;
  t.heading = kHeadings[std::min<std::size_t>(3, static_cast<std::size_t>(uniform01(rng) * 4))];
  t.road = std::min(n - 1, static_cast<int>(uniform01(rng) * n));
  t.retain_m = retain_m;

  const double a0 = decision_along(map, t.heading, sign(t.heading) > 0 ? 0 : n - 1);
  const double a1 = decision_along(map, t.heading, sign(t.heading) > 0 ? n - 1 : 0);
  const double start = a0 + uniform01(rng) * (a1 - a0);
  const double perp = map.lane_offset(t.heading, t.road);
  t.head = with_along(is_horizontal(t.heading) ? Vec2{0.0, perp} : Vec2{perp, 0.0}, t.heading,
                      start);

  // first cross road whose decision point lies at or ahead of the start
  int cross = sign(t.heading) > 0 ? 0 : n - 1;
  while (decision_along(map, t.heading, cross) < start) cross += sign(t.heading);
  set_next_decision(map, t, cross);

  t.history.push_back({t.head, 0.0});
  advance(map, t, std::max(retain_m, kSpawnPrerollM), rng);
  prune(t, 0.0);
  return t;
}

const char* to_string(LinkClass c) {
  switch (c) {
    case LinkClass::los: return "LOS";
    case LinkClass::wlos: return "WLOS";
    case LinkClass::nlos: return "NLOS";
  }
  return "?";
}

LinkClass classify_link(const RoadMap& map, Vec2 vtx, Vec2 vrx, double ell0_m) {
  const double half = map.lane_width() / 2.0 + kEps;
  const double side = map.side_length();
  auto roads_of = [&](Vec2 p, bool horizontal) {
    std::vector<int> out;
    const double perp = horizontal ? p.y : p.x;
    const double par = horizontal ? p.x : p.y;
    if (par < -kEps || par > side + kEps) return out;
    for (int r = 0; r < map.intersections_per_axis(); ++r) {
      if (std::abs(perp - map.road_center(r)) <= half) out.push_back(r);
    }
    return out;
  };
  const auto tx_h = roads_of(vtx, true);
  const auto tx_v = roads_of(vtx, false);
  const auto rx_h = roads_of(vrx, true);
  const auto rx_v = roads_of(vrx, false);
  if ((tx_h.empty() && tx_v.empty()) || (rx_h.empty() && rx_v.empty())) {
    throw PreconditionError("classify_link: position is not on a lane");
  }

  auto shares = [](const std::vector<int>& a, const std::vector<int>& b) {
    return std::any_of(a.begin(), a.end(), [&](int r) {
      return std::find(b.begin(), b.end(), r) != b.end();
    });
  };
  if (shares(tx_h, rx_h) || shares(tx_v, rx_v)) return LinkClass::los;

  // perpendicular roads: the shared intersection is (vertical centre, horizontal centre)
  auto near = [&](const std::vector<int>& horiz, const std::vector<int>& vert) {
    for (int h : horiz) {
      for (int v : vert) {
        const Vec2 centre{map.road_center(v), map.road_center(h)};
        if (norm2(vtx - centre) <= ell0_m || norm2(vrx - centre) <= ell0_m) return true;
      }
    }
    return false;
  };
  if (near(tx_h, rx_v) || near(rx_h, tx_v)) return LinkClass::wlos;
  return LinkClass::nlos;
}

VuePairGeometry pair_geometry(const VehicleTrace& vrx_trace, double ell_m) {
  VuePairGeometry g;
  g.vrx_position = vrx_trace.head;
  g.vtx_position = place_vtx(vrx_trace, ell_m);
  g.pair_distance_m = ell_m;
  g.midpoint = midpoint(g.vtx_position, g.vrx_position);
  return g;
}

}  // namespace aoirrm::mobility

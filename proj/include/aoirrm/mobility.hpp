#pragma once

// Manhattan road grid and vehicle motion.
//
// Roads run the full side of a square area; n horizontal and n vertical
// roads are centred at spacing * (i + 0.5). Each road carries two lanes, one
// per direction, with right-hand traffic: the lane for a heading sits half a
// lane width to the right of the road centre. Vehicles only travel between
// the outermost intersections; at an intersection a vehicle goes straight,
// left or right, and options that would lead off the grid are removed.

#include <array>
#include <cstdint>
#include <deque>
#include <vector>

#include "aoirrm/common.hpp"

namespace aoirrm::mobility {

enum class Heading : std::uint8_t { north, south, east, west };

Vec2 direction(Heading h);
Heading turn_left(Heading h);
Heading turn_right(Heading h);
bool is_horizontal(Heading h);

struct MapConfig {
  double side_length_m = 250.0;
  int intersections_per_axis = 3;
  double lane_width_m = 4.0;
};

/// One directed lane centerline.
struct Lane {
  Heading heading;
  int road;      // index among roads of the same orientation
  Vec2 start;    // endpoints of the centerline inside the area
  Vec2 end;
};

class RoadMap {
 public:
  explicit RoadMap(const MapConfig& cfg);

  double side_length() const { return side_; }
  int intersections_per_axis() const { return n_; }
  double lane_width() const { return lane_width_; }
  double spacing() const { return side_ / n_; }
  int num_roads() const { return 2 * n_; }
  static constexpr int lanes_per_road = 2;

  /// Centre coordinate of road `i`: y for horizontal roads, x for vertical ones.
  double road_center(int i) const { return centers_.at(static_cast<std::size_t>(i)); }
  const std::vector<double>& road_centers() const { return centers_; }

  /// Fixed perpendicular coordinate of the lane with heading `h` on road `road`.
  double lane_offset(Heading h, int road) const;

  std::vector<Lane> lane_centerlines() const;

 private:
  double side_;
  int n_;
  double lane_width_;
  std::vector<double> centers_;
};

/// Validates the grid description and builds the map.
RoadMap build_map(const MapConfig& cfg);

struct PathPoint {
  Vec2 pos;
  double arc = 0.0;  // odometer reading when the vehicle was at `pos`
};

enum class StopKind : std::uint8_t { decide, turn };

struct VehicleTrace {
  Vec2 head;
  Heading heading = Heading::east;
  int road = 0;  // road the head travels on (same orientation as heading)

  // Next motion event, expressed as a coordinate along the heading.
  StopKind stop = StopKind::decide;
  int stop_cross = 0;           // cross road the event belongs to
  double stop_along = 0.0;      // dot(position, direction(heading)) at the event
  Heading turn_to = Heading::east;

  double odometer = 0.0;
  double retain_m = 0.0;          // history length kept behind the head
  std::deque<PathPoint> history;  // oldest first; the head itself is not stored

  // Turn counts (straight, left, right) at intersections where all three
  // options were open.
  std::array<std::uint64_t, 3> free_choices{};
};

inline constexpr std::array<double, 3> kTurnProbabilities{0.5, 0.25, 0.25};

/// Advances the head by speed * slot metres of arc length.
VehicleTrace step_vehicle(const RoadMap& map, VehicleTrace trace, double speed_mps,
                          double slot_s, Rng& rng);

/// Point `ell_m` of arc length behind the head along the stored path.
Vec2 place_vtx(const VehicleTrace& trace, double ell_m);

/// Places a vehicle uniformly on the drivable lane network, then drives it
/// forward `retain_m` metres so the trailing history covers the pair distance.
VehicleTrace spawn_vehicle(const RoadMap& map, double retain_m, Rng& rng);

enum class LinkClass : std::uint8_t { los, wlos, nlos };

const char* to_string(LinkClass c);

/// Line-of-sight class of a link between two on-road positions. "Near the
/// intersection" is the Euclidean distance to the shared intersection centre.
LinkClass classify_link(const RoadMap& map, Vec2 vtx, Vec2 vrx, double ell0_m);

struct VuePairGeometry {
  Vec2 vtx_position;
  Vec2 vrx_position;
  double pair_distance_m = 0.0;
  Vec2 midpoint;
};

VuePairGeometry pair_geometry(const VehicleTrace& vrx_trace, double ell_m);

}  // namespace aoirrm::mobility

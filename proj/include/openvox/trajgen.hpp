#pragma once

// Inspection-trajectory generation on a 2D occupancy grid: largest free
// component, brushfire places and their geodesic basins, the place graph,
// a Chinese Postman tour over it, and a Bezier-smoothed path quantized to
// discrete agent actions.

#include <compare>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "openvox/error.hpp"

namespace openvox {

struct Cell {
  int x = 0;  // column
  int y = 0;  // row
  auto operator<=>(const Cell&) const = default;
};

struct OccupancyGrid {
  int width = 0;
  int height = 0;
  double cell_size = 0.1;                            // meters
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();  // world position of cell (0,0)'s corner
  std::vector<std::uint8_t> occupied;                // row-major, nonzero = occupied

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  bool is_free(int x, int y) const { return in_bounds(x, y) && occupied[index(x, y)] == 0; }
  bool is_free(const Cell& c) const { return is_free(c.x, c.y); }
  Eigen::Vector2d center(const Cell& c) const {
    return origin + cell_size * Eigen::Vector2d(c.x + 0.5, c.y + 0.5);
  }
  Cell cell_of(const Eigen::Vector2d& p) const;
  bool is_free(const Eigen::Vector2d& p) const { return is_free(cell_of(p)); }
  std::size_t free_count() const;
  void validate() const;

  static OccupancyGrid all_free(int width, int height, double cell_size);
};

struct ComponentResult {
  OccupancyGrid grid;  // everything outside the largest component marked occupied
  std::size_t largest = 0;
  std::size_t total_free = 0;
  double ratio = 0.0;  // largest island / total free area
};

// 4-connected components; ties go to the component met first in row-major order.
ComponentResult largest_component(const OccupancyGrid& grid);

struct Place {
  Cell cell;
  Eigen::Vector2d position;
  int clearance = 0;  // brushfire distance in chamfer units (10 per cell)
};

struct PlaceDecomposition {
  std::vector<Place> places;
  std::vector<int> basin;      // per cell: place index, -1 for occupied/unreached
  std::vector<int> clearance;  // per cell brushfire distance, 0 for occupied
};

inline constexpr int kChamferStraight = 10;
inline constexpr int kChamferDiagonal = 14;

// Integer chamfer (10/14) distance to the nearest occupied cell; the
// outside of the grid counts as occupied.
std::vector<int> brushfire(const OccupancyGrid& grid);

// Places are the local maxima of the brushfire field, each plateau collapsed
// to the plateau cell nearest its centroid. Every free cell joins the basin
// of its geodesically nearest place.
PlaceDecomposition extract_places(const OccupancyGrid& grid);

struct GridPath {
  std::vector<Cell> cells;
  double length = 0.0;  // meters
};

// 8-connected A*, straight cost cell_size, diagonal sqrt(2) cell_size, no
// corner cutting. nullopt when unreachable.
std::optional<GridPath> astar(const OccupancyGrid& grid, const Cell& start, const Cell& goal);

struct GraphEdge {
  int u = 0;
  int v = 0;
  double length = 0.0;
};

struct PlaceGraph {
  std::vector<Eigen::Vector2d> nodes;
  std::vector<Cell> node_cells;  // may be empty for abstract graphs
  std::vector<GraphEdge> edges;

  std::size_t size() const { return nodes.size(); }
  double total_length() const;
};

// Edge (u, v) iff the basins of u and v share a 4-neighbor boundary;
// weight is the A* geodesic between the place cells.
PlaceGraph build_place_graph(const OccupancyGrid& grid, const PlaceDecomposition& places);

struct TourStep {
  int from = 0;
  int to = 0;
  int edge = 0;  // index into PlaceGraph::edges
};

struct Tour {
  std::vector<TourStep> steps;
  double length = 0.0;
  bool optimal = true;  // false when the greedy odd-vertex pairing was used
  std::vector<int> duplicated_edges;
  int start = 0;
};

inline constexpr std::size_t kExactMatchingLimit = 14;

// Closed walk over every edge. Odd vertices are paired by an exact bitmask
// DP up to kExactMatchingLimit, greedily beyond. Throws ValidationError for
// disconnected graphs.
Tour chinese_postman(const PlaceGraph& graph);

enum class Action : std::uint8_t { MoveForward, TurnLeft, TurnRight };

const char* action_name(Action a);

inline constexpr double kForwardStep = 0.25;                       // meters
inline constexpr double kTurnStep = 15.0 * std::numbers::pi / 180;  // radians
inline constexpr double kSensorHeight = 1.2;                       // meters

struct AgentPose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;  // radians, counter-clockwise from +x
};

AgentPose apply_action(const AgentPose& pose, Action action);

struct AgentTrajectory {
  std::vector<AgentPose> poses;  // poses.size() == actions.size() + 1
  std::vector<Action> actions;
  double sensor_height = kSensorHeight;
};

AgentTrajectory replay(const AgentPose& start, std::span<const Action> actions);

// Cell-center polyline of the tour (A* per edge), collinear points removed.
std::vector<Eigen::Vector2d> tour_polyline(const Tour& tour, const PlaceGraph& graph, const OccupancyGrid& grid);

// Piecewise cubic Bezier through the polyline vertices, control points at
// 1/3 of each segment along Catmull-Rom tangents. A span whose curve leaves
// free space is replaced by its straight segment. Returns dense samples.
std::vector<Eigen::Vector2d> smooth_polyline(std::span<const Eigen::Vector2d> polyline, const OccupancyGrid& grid);

// Quantizes a path to move_forward / turn actions with a carrot follower.
// Every emitted pose is in free space.
AgentTrajectory follow_path(std::span<const Eigen::Vector2d> path, const OccupancyGrid& grid);

// Single-place graphs have an empty tour; the trajectory is then one full
// turn in place at that place.
AgentTrajectory smooth_trajectory(const Tour& tour, const PlaceGraph& graph, const OccupancyGrid& grid);

}  // namespace openvox

#include "openvox/trajgen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <tuple>

namespace openvox {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

struct Offset {
  int dx, dy;
};
constexpr Offset kNeighbors4[] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
constexpr Offset kNeighbors8[] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, 1}, {1, -1}, {-1, -1}};

// A diagonal step is allowed only when both orthogonal cells it cuts past are free.
bool can_step(const OccupancyGrid& g, int x, int y, const Offset& o) {
  if (!g.is_free(x + o.dx, y + o.dy)) return false;
  if (o.dx != 0 && o.dy != 0) return g.is_free(x + o.dx, y) && g.is_free(x, y + o.dy);
  return true;
}

double step_cost(const Offset& o) { return (o.dx != 0 && o.dy != 0) ? kSqrt2 : 1.0; }

double wrap_angle(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a < 0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

}  // namespace

Cell OccupancyGrid::cell_of(const Eigen::Vector2d& p) const {
  const Eigen::Vector2d q = (p - origin) / cell_size;
  return {static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y()))};
}

std::size_t OccupancyGrid::free_count() const {
  return static_cast<std::size_t>(std::count(occupied.begin(), occupied.end(), std::uint8_t{0}));
}

void OccupancyGrid::validate() const {
  if (width <= 0 || height <= 0) throw ValidationError("occupancy grid: empty extent");
  if (!(cell_size > 0.0)) throw ValidationError("occupancy grid: cell_size must be positive");
  if (occupied.size() != static_cast<std::size_t>(width) * height) {
    throw ValidationError("occupancy grid: cell count does not match extent");
  }
}

OccupancyGrid OccupancyGrid::all_free(int width, int height, double cell_size) {
  OccupancyGrid g;
  g.width = width;
  g.height = height;
  g.cell_size = cell_size;
  g.occupied.assign(static_cast<std::size_t>(width) * height, 0);
  return g;
}

ComponentResult largest_component(const OccupancyGrid& grid) {
  grid.validate();
  const std::size_t n = grid.occupied.size();
  std::vector<int> label(n, -1);
  std::vector<std::size_t> sizes;
  std::vector<Cell> stack;
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      if (!grid.is_free(x, y) || label[grid.index(x, y)] >= 0) continue;
      const int id = static_cast<int>(sizes.size());
      std::size_t count = 0;
      stack.push_back({x, y});
      label[grid.index(x, y)] = id;
      while (!stack.empty()) {
        const Cell c = stack.back();
        stack.pop_back();
        ++count;
        for (const auto& o : kNeighbors4) {
          const int nx = c.x + o.dx, ny = c.y + o.dy;
          if (!grid.is_free(nx, ny) || label[grid.index(nx, ny)] >= 0) continue;
          label[grid.index(nx, ny)] = id;
          stack.push_back({nx, ny});
        }
      }
      sizes.push_back(count);
    }
  }
  ComponentResult result;
  result.grid = grid;
  if (sizes.empty()) throw ValidationError("occupancy grid has no free cells");
  const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != best) result.grid.occupied[i] = 1;
  }
  result.largest = sizes[best];
  for (auto s : sizes) result.total_free += s;
  result.ratio = static_cast<double>(result.largest) / static_cast<double>(result.total_free);
  return result;
}

std::vector<int> brushfire(const OccupancyGrid& grid) {
  grid.validate();
  constexpr int kInf = std::numeric_limits<int>::max();
  std::vector<int> dist(grid.occupied.size(), kInf);
  using Item = std::pair<int, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  // Seed each free cell with its cheapest step from an obstacle or the border.
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const std::size_t i = grid.index(x, y);
      if (!grid.is_free(x, y)) {
        dist[i] = 0;
        continue;
      }
      int best = kInf;
      for (const auto& o : kNeighbors8) {
        if (grid.is_free(x + o.dx, y + o.dy)) continue;
        best = std::min(best, (o.dx != 0 && o.dy != 0) ? kChamferDiagonal : kChamferStraight);
      }
      if (best < kInf) {
        dist[i] = best;
        open.push({best, i});
      }
    }
  }
  while (!open.empty()) {
    const auto [d, i] = open.top();
    open.pop();
    if (d != dist[i]) continue;
    const int x = static_cast<int>(i % grid.width), y = static_cast<int>(i / grid.width);
    for (const auto& o : kNeighbors8) {
      const int nx = x + o.dx, ny = y + o.dy;
      if (!grid.is_free(nx, ny)) continue;
      const int nd = d + ((o.dx != 0 && o.dy != 0) ? kChamferDiagonal : kChamferStraight);
      const std::size_t j = grid.index(nx, ny);
      if (nd < dist[j]) {
        dist[j] = nd;
        open.push({nd, j});
      }
    }
  }
  return dist;
}

PlaceDecomposition extract_places(const OccupancyGrid& grid) {
  PlaceDecomposition out;
  out.clearance = brushfire(grid);
  const auto& dist = out.clearance;
  const std::size_t n = grid.occupied.size();

  // Plateaus: 8-connected groups of free cells sharing one distance value.
  std::vector<int> plateau(n, -1);
  std::vector<Cell> stack, members;
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const std::size_t seed = grid.index(x, y);
      if (!grid.is_free(x, y) || plateau[seed] >= 0) continue;
      const int value = dist[seed];
      const int id = static_cast<int>(seed);
      members.clear();
      bool is_max = true;
      plateau[seed] = id;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const Cell c = stack.back();
        stack.pop_back();
        members.push_back(c);
        for (const auto& o : kNeighbors8) {
          const int nx = c.x + o.dx, ny = c.y + o.dy;
          if (!grid.is_free(nx, ny)) continue;
          const std::size_t j = grid.index(nx, ny);
          if (dist[j] > value) is_max = false;
          if (dist[j] != value || plateau[j] >= 0) continue;
          plateau[j] = id;
          stack.push_back({nx, ny});
        }
      }
      if (!is_max) continue;
      Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
      for (const auto& c : members) centroid += Eigen::Vector2d(c.x, c.y);
      centroid /= static_cast<double>(members.size());
      Cell best = members.front();
      double best_d = std::numeric_limits<double>::infinity();
      for (const auto& c : members) {
        const double d = (Eigen::Vector2d(c.x, c.y) - centroid).squaredNorm();
        if (d < best_d || (d == best_d && grid.index(c.x, c.y) < grid.index(best.x, best.y))) {
          best_d = d;
          best = c;
        }
      }
      out.places.push_back({best, grid.center(best), value});
    }
  }

  // Geodesic basins: multi-source Dijkstra, equal distances go to the lower place.
  out.basin.assign(n, -1);
  std::vector<double> geo(n, std::numeric_limits<double>::infinity());
  using Item = std::tuple<double, int, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  for (std::size_t p = 0; p < out.places.size(); ++p) {
    const std::size_t i = grid.index(out.places[p].cell.x, out.places[p].cell.y);
    geo[i] = 0.0;
    out.basin[i] = static_cast<int>(p);
    open.push({0.0, static_cast<int>(p), i});
  }
  while (!open.empty()) {
    const auto [d, p, i] = open.top();
    open.pop();
    if (d != geo[i] || p != out.basin[i]) continue;
    const int x = static_cast<int>(i % grid.width), y = static_cast<int>(i / grid.width);
    for (const auto& o : kNeighbors8) {
      if (!can_step(grid, x, y, o)) continue;
      const std::size_t j = grid.index(x + o.dx, y + o.dy);
      const double nd = d + step_cost(o);
      if (nd < geo[j] || (nd == geo[j] && p < out.basin[j])) {
        geo[j] = nd;
        out.basin[j] = p;
        open.push({nd, p, j});
      }
    }
  }
  return out;
}

std::optional<GridPath> astar(const OccupancyGrid& grid, const Cell& start, const Cell& goal) {
  grid.validate();
  if (!grid.is_free(start) || !grid.is_free(goal)) return std::nullopt;
  const std::size_t n = grid.occupied.size();
  auto heuristic = [&](int x, int y) {
    const double dx = std::abs(x - goal.x), dy = std::abs(y - goal.y);
    return (std::max(dx, dy) - std::min(dx, dy)) + kSqrt2 * std::min(dx, dy);
  };
  std::vector<double> g(n, std::numeric_limits<double>::infinity());
  std::vector<std::int64_t> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);
  using Item = std::tuple<double, double, std::size_t>;  // f, h, index
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  const std::size_t s = grid.index(start.x, start.y), t = grid.index(goal.x, goal.y);
  g[s] = 0.0;
  open.push({heuristic(start.x, start.y), heuristic(start.x, start.y), s});
  while (!open.empty()) {
    const auto [f, h, i] = open.top();
    open.pop();
    if (closed[i]) continue;
    closed[i] = 1;
    if (i == t) break;
    const int x = static_cast<int>(i % grid.width), y = static_cast<int>(i / grid.width);
    for (const auto& o : kNeighbors8) {
      if (!can_step(grid, x, y, o)) continue;
      const std::size_t j = grid.index(x + o.dx, y + o.dy);
      if (closed[j]) continue;
      const double ng = g[i] + step_cost(o);
      if (ng < g[j]) {
        g[j] = ng;
        parent[j] = static_cast<std::int64_t>(i);
        const double nh = heuristic(x + o.dx, y + o.dy);
        open.push({ng + nh, nh, j});
      }
    }
  }
  if (!closed[t]) return std::nullopt;
  GridPath path;
  for (std::int64_t i = static_cast<std::int64_t>(t); i >= 0; i = parent[i]) {
    path.cells.push_back({static_cast<int>(i % grid.width), static_cast<int>(i / grid.width)});
    if (static_cast<std::size_t>(i) == s) break;
  }
  std::reverse(path.cells.begin(), path.cells.end());
  path.length = g[t] * grid.cell_size;
  return path;
}

double PlaceGraph::total_length() const {
  double total = 0.0;
  for (const auto& e : edges) total += e.length;
  return total;
}

PlaceGraph build_place_graph(const OccupancyGrid& grid, const PlaceDecomposition& places) {
  PlaceGraph graph;
  for (const auto& p : places.places) {
    graph.nodes.push_back(p.position);
    graph.node_cells.push_back(p.cell);
  }
  std::set<std::pair<int, int>> adjacent;
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const int a = places.basin[grid.index(x, y)];
      if (a < 0) continue;
      for (const auto& o : kNeighbors4) {
        if (!grid.is_free(x + o.dx, y + o.dy)) continue;
        const int b = places.basin[grid.index(x + o.dx, y + o.dy)];
        if (b >= 0 && b != a) adjacent.insert({std::min(a, b), std::max(a, b)});
      }
    }
  }
  for (const auto& [u, v] : adjacent) {
    const auto path = astar(grid, graph.node_cells[u], graph.node_cells[v]);
    if (!path) throw InvariantError("adjacent basins without a connecting path");
    graph.edges.push_back({u, v, path->length});
  }
  return graph;
}

namespace {

struct ShortestPaths {
  std::vector<double> dist;
  std::vector<int> via_edge;  // edge used to reach each vertex, -1 at the source
};

ShortestPaths graph_dijkstra(const PlaceGraph& graph, const std::vector<std::vector<int>>& incident, int source) {
  const std::size_t n = graph.size();
  ShortestPaths sp{std::vector<double>(n, std::numeric_limits<double>::infinity()), std::vector<int>(n, -1)};
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  sp.dist[source] = 0.0;
  open.push({0.0, source});
  while (!open.empty()) {
    const auto [d, u] = open.top();
    open.pop();
    if (d != sp.dist[u]) continue;
    for (const int e : incident[u]) {
      const auto& edge = graph.edges[e];
      const int v = edge.u == u ? edge.v : edge.u;
      const double nd = d + edge.length;
      if (nd < sp.dist[v]) {
        sp.dist[v] = nd;
        sp.via_edge[v] = e;
        open.push({nd, v});
      }
    }
  }
  return sp;
}

}  // namespace

Tour chinese_postman(const PlaceGraph& graph) {
  const std::size_t n = graph.size();
  Tour tour;
  if (n == 0) return tour;
  std::vector<std::vector<int>> incident(n);
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto& edge = graph.edges[e];
    if (edge.u < 0 || edge.v < 0 || static_cast<std::size_t>(edge.u) >= n || static_cast<std::size_t>(edge.v) >= n) {
      throw ValidationError("place graph: edge endpoint out of range");
    }
    if (!(edge.length >= 0.0)) throw ValidationError("place graph: negative edge length");
    incident[edge.u].push_back(static_cast<int>(e));
    if (edge.v != edge.u) incident[edge.v].push_back(static_cast<int>(e));
  }
  {
    std::vector<std::uint8_t> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const int e : incident[u]) {
        const int v = graph.edges[e].u == u ? graph.edges[e].v : graph.edges[e].u;
        if (!seen[v]) {
          seen[v] = 1;
          ++reached;
          stack.push_back(v);
        }
      }
    }
    if (reached != n) throw ValidationError("place graph is disconnected");
  }
  if (graph.edges.empty()) return tour;

  std::vector<int> odd;
  for (std::size_t v = 0; v < n; ++v) {
    std::size_t degree = 0;
    for (const int e : incident[v]) degree += graph.edges[e].u == graph.edges[e].v ? 2 : 1;
    if (degree % 2) odd.push_back(static_cast<int>(v));
  }
  const std::size_t m = odd.size();
  std::vector<ShortestPaths> paths;
  for (const int v : odd) paths.push_back(graph_dijkstra(graph, incident, v));
  auto cost = [&](std::size_t a, std::size_t b) { return paths[a].dist[odd[b]]; };

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (m <= kExactMatchingLimit) {
    const std::size_t full = (std::size_t{1} << m) - 1;
    std::vector<double> best(full + 1, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> choice(full + 1, 0);
    best[0] = 0.0;
    for (std::size_t mask = 1; mask <= full; ++mask) {
      if (std::popcount(mask) % 2) continue;
      const std::size_t i = static_cast<std::size_t>(std::countr_zero(mask));
      for (std::size_t j = i + 1; j < m; ++j) {
        if (!(mask >> j & 1)) continue;
        const std::size_t rest = mask & ~(std::size_t{1} << i) & ~(std::size_t{1} << j);
        const double c = best[rest] + cost(i, j);
        if (c < best[mask]) {
          best[mask] = c;
          choice[mask] = j;
        }
      }
    }
    for (std::size_t mask = full; mask;) {
      const std::size_t i = static_cast<std::size_t>(std::countr_zero(mask));
      const std::size_t j = choice[mask];
      pairs.push_back({i, j});
      mask &= ~(std::size_t{1} << i) & ~(std::size_t{1} << j);
    }
  } else {
    tour.optimal = false;
    std::vector<std::uint8_t> used(m, 0);
    for (std::size_t round = 0; round < m / 2; ++round) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t bi = 0, bj = 0;
      for (std::size_t i = 0; i < m; ++i) {
        if (used[i]) continue;
        for (std::size_t j = i + 1; j < m; ++j) {
          if (!used[j] && cost(i, j) < best) {
            best = cost(i, j);
            bi = i;
            bj = j;
          }
        }
      }
      used[bi] = used[bj] = 1;
      pairs.push_back({bi, bj});
    }
  }

  // Multigraph: original edges plus one copy per edge on each matched path.
  std::vector<int> multi;
  for (std::size_t e = 0; e < graph.edges.size(); ++e) multi.push_back(static_cast<int>(e));
  for (const auto& [i, j] : pairs) {
    for (int v = odd[j]; v != odd[i];) {
      const int e = paths[i].via_edge[v];
      multi.push_back(e);
      tour.duplicated_edges.push_back(e);
      v = graph.edges[e].u == v ? graph.edges[e].v : graph.edges[e].u;
    }
  }
  std::sort(tour.duplicated_edges.begin(), tour.duplicated_edges.end());

  // Hierholzer over multigraph slots.
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t s = 0; s < multi.size(); ++s) {
    const auto& edge = graph.edges[multi[s]];
    adj[edge.u].push_back(s);
    if (edge.v != edge.u) adj[edge.v].push_back(s);
  }
  std::vector<std::uint8_t> used(multi.size(), 0);
  std::vector<std::size_t> cursor(n, 0);
  tour.start = graph.edges.front().u;
  std::vector<std::pair<int, int>> stack{{tour.start, -1}};  // vertex, slot used to reach it
  std::vector<std::pair<int, int>> circuit;
  while (!stack.empty()) {
    const int u = stack.back().first;
    auto& c = cursor[u];
    while (c < adj[u].size() && used[adj[u][c]]) ++c;
    if (c == adj[u].size()) {
      circuit.push_back(stack.back());
      stack.pop_back();
      continue;
    }
    const std::size_t slot = adj[u][c];
    used[slot] = 1;
    const auto& edge = graph.edges[multi[slot]];
    stack.push_back({edge.u == u ? edge.v : edge.u, static_cast<int>(slot)});
  }
  std::reverse(circuit.begin(), circuit.end());
  if (circuit.size() != multi.size() + 1) throw InvariantError("postman walk does not use every edge");
  for (std::size_t k = 1; k < circuit.size(); ++k) {
    const int e = multi[circuit[k].second];
    tour.steps.push_back({circuit[k - 1].first, circuit[k].first, e});
    tour.length += graph.edges[e].length;
  }
  return tour;
}

const char* action_name(Action a) {
  switch (a) {
    case Action::MoveForward: return "move_forward";
    case Action::TurnLeft: return "turn_left";
    case Action::TurnRight: return "turn_right";
  }
  return "unknown";
}

AgentPose apply_action(const AgentPose& pose, Action action) {
  AgentPose next = pose;
  switch (action) {
    case Action::MoveForward:
      next.x += kForwardStep * std::cos(pose.yaw);
      next.y += kForwardStep * std::sin(pose.yaw);
      break;
    case Action::TurnLeft: next.yaw = wrap_angle(pose.yaw + kTurnStep); break;
    case Action::TurnRight: next.yaw = wrap_angle(pose.yaw - kTurnStep); break;
  }
  return next;
}

AgentTrajectory replay(const AgentPose& start, std::span<const Action> actions) {
  AgentTrajectory t;
  t.poses.push_back(start);
  for (const Action a : actions) {
    t.actions.push_back(a);
    t.poses.push_back(apply_action(t.poses.back(), a));
  }
  return t;
}

namespace {

void push_unique(std::vector<Eigen::Vector2d>& out, const Eigen::Vector2d& p) {
  if (out.empty() || (out.back() - p).norm() > 1e-12) out.push_back(p);
}

// Drops interior points lying on the straight line through their neighbors.
std::vector<Eigen::Vector2d> simplify_collinear(const std::vector<Eigen::Vector2d>& pts) {
  if (pts.size() < 3) return pts;
  std::vector<Eigen::Vector2d> out{pts.front()};
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const Eigen::Vector2d a = pts[i] - out.back();
    const Eigen::Vector2d b = pts[i + 1] - pts[i];
    const double cross = a.x() * b.y() - a.y() * b.x();
    if (std::abs(cross) > 1e-9 * a.norm() * b.norm() || a.dot(b) < 0.0) out.push_back(pts[i]);
  }
  out.push_back(pts.back());
  return out;
}

bool segment_free(const OccupancyGrid& grid, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const double len = (b - a).norm();
  const int steps = std::max(1, static_cast<int>(std::ceil(len / (grid.cell_size * 0.25))));
  for (int s = 0; s <= steps; ++s) {
    if (!grid.is_free(a + (b - a) * (static_cast<double>(s) / steps))) return false;
  }
  return true;
}

}  // namespace

std::vector<Eigen::Vector2d> tour_polyline(const Tour& tour, const PlaceGraph& graph, const OccupancyGrid& grid) {
  std::vector<Eigen::Vector2d> pts;
  if (tour.steps.empty()) {
    if (!graph.node_cells.empty()) pts.push_back(grid.center(graph.node_cells[tour.start]));
    return pts;
  }
  if (graph.node_cells.size() != graph.size()) throw ValidationError("tour polyline needs place cells");
  for (const auto& step : tour.steps) {
    const auto path = astar(grid, graph.node_cells[step.from], graph.node_cells[step.to]);
    if (!path) throw InvariantError("tour edge has no grid path");
    for (const auto& c : path->cells) push_unique(pts, grid.center(c));
  }
  return simplify_collinear(pts);
}

std::vector<Eigen::Vector2d> smooth_polyline(std::span<const Eigen::Vector2d> polyline, const OccupancyGrid& grid) {
  std::vector<Eigen::Vector2d> out;
  const std::size_t n = polyline.size();
  if (n == 0) return out;
  if (n == 1) return {polyline[0]};
  std::vector<Eigen::Vector2d> tangent(n, Eigen::Vector2d::Zero());
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d d = polyline[std::min(i + 1, n - 1)] - polyline[i == 0 ? 0 : i - 1];
    if (d.norm() > 1e-12) tangent[i] = d.normalized();
  }
  const double spacing = grid.cell_size * 0.5;
  out.push_back(polyline[0]);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Eigen::Vector2d& p0 = polyline[i];
    const Eigen::Vector2d& p3 = polyline[i + 1];
    const double len = (p3 - p0).norm();
    const Eigen::Vector2d p1 = p0 + tangent[i] * (len / 3.0);
    const Eigen::Vector2d p2 = p3 - tangent[i + 1] * (len / 3.0);
    const int samples = std::max(4, static_cast<int>(std::ceil(len / spacing)));
    std::vector<Eigen::Vector2d> curve;
    bool ok = true;
    for (int s = 1; s <= samples && ok; ++s) {
      const double t = static_cast<double>(s) / samples, u = 1.0 - t;
      const Eigen::Vector2d p = u * u * u * p0 + 3 * u * u * t * p1 + 3 * u * t * t * p2 + t * t * t * p3;
      ok = segment_free(grid, curve.empty() ? p0 : curve.back(), p);
      curve.push_back(p);
    }
    if (!ok) {
      curve.clear();
      for (int s = 1; s <= samples; ++s) curve.push_back(p0 + (p3 - p0) * (static_cast<double>(s) / samples));
    }
    for (const auto& p : curve) push_unique(out, p);
  }
  return out;
}

AgentTrajectory follow_path(std::span<const Eigen::Vector2d> path, const OccupancyGrid& grid) {
  AgentTrajectory traj;
  if (path.empty()) throw ValidationError("follow_path: empty path");
  std::vector<double> arc{0.0};
  for (std::size_t i = 1; i < path.size(); ++i) arc.push_back(arc.back() + (path[i] - path[i - 1]).norm());
  const double total = arc.back();
  AgentPose pose{path[0].x(), path[0].y(), 0.0};
  if (path.size() > 1) {
    for (std::size_t i = 1; i < path.size(); ++i) {
      const Eigen::Vector2d d = path[i] - path[0];
      if (d.norm() > 1e-9) {
        // Start on the 15-degree lattice so headings stay exactly representable.
        pose.yaw = wrap_angle(std::round(std::atan2(d.y(), d.x()) / kTurnStep) * kTurnStep);
        break;
      }
    }
  }
  if (!grid.is_free(Eigen::Vector2d(pose.x, pose.y))) throw ValidationError("follow_path: start is occupied");
  traj.poses.push_back(pose);
  if (total <= 0.0) return traj;

  constexpr double kLookahead = 0.5;
  constexpr double kHalfTurn = kTurnStep / 2 + 1e-9;
  const Eigen::Vector2d goal = path.back();
  std::size_t progress = 0;  // index of the nearest path sample reached so far
  const std::size_t max_actions = 100000 + static_cast<std::size_t>(200.0 * total / kForwardStep);

  auto point_at = [&](double s) -> Eigen::Vector2d {
    s = std::clamp(s, 0.0, total);
    const auto it = std::upper_bound(arc.begin(), arc.end(), s);
    const std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(it - arc.begin()), path.size() - 1);
    const std::size_t i = j - 1;
    const double seg = arc[j] - arc[i];
    return seg > 0 ? Eigen::Vector2d(path[i] + (path[j] - path[i]) * ((s - arc[i]) / seg)) : path[j];
  };
  auto emit = [&](Action a) {
    pose = apply_action(pose, a);
    traj.actions.push_back(a);
    traj.poses.push_back(pose);
    if (traj.actions.size() > max_actions) throw InvariantError("follow_path: agent stuck");
  };

  while (true) {
    const Eigen::Vector2d here(pose.x, pose.y);
    // Advance the projection within a bounded forward window.
    double best = (path[progress] - here).squaredNorm();
    for (std::size_t i = progress + 1; i < path.size() && arc[i] <= arc[progress] + 2.0 * kLookahead; ++i) {
      const double d = (path[i] - here).squaredNorm();
      if (d < best) {
        best = d;
        progress = i;
      }
    }
    const double s = arc[progress];
    if (s >= total - kLookahead && (goal - here).norm() <= kForwardStep / 2) break;
    const Eigen::Vector2d target = (total - s <= kLookahead) ? goal : point_at(s + kLookahead);
    const Eigen::Vector2d to_target = target - here;
    const double err = wrap_angle(std::atan2(to_target.y(), to_target.x()) - pose.yaw);
    if (std::abs(err) > kHalfTurn) {
      emit(err > 0 ? Action::TurnLeft : Action::TurnRight);
      continue;
    }
    const AgentPose ahead = apply_action(pose, Action::MoveForward);
    if (segment_free(grid, here, Eigen::Vector2d(ahead.x, ahead.y))) {
      emit(Action::MoveForward);
      continue;
    }
    // Blocked: take the free lattice heading that lands closest to the target.
    int best_k = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = -11; k <= 12; ++k) {
      const double yaw = pose.yaw + k * kTurnStep;
      const Eigen::Vector2d p = here + kForwardStep * Eigen::Vector2d(std::cos(yaw), std::sin(yaw));
      if (!segment_free(grid, here, p)) continue;
      const double d = (target - p).norm();
      if (d < best_d - 1e-12 || (std::abs(d - best_d) <= 1e-12 && std::abs(k) < std::abs(best_k))) {
        best_d = d;
        best_k = k;
      }
    }
    if (!std::isfinite(best_d)) throw InvariantError("follow_path: agent enclosed");
    for (int k = 0; k < std::abs(best_k); ++k) emit(best_k > 0 ? Action::TurnLeft : Action::TurnRight);
    emit(Action::MoveForward);
  }
  return traj;
}

AgentTrajectory smooth_trajectory(const Tour& tour, const PlaceGraph& graph, const OccupancyGrid& grid) {
  const auto polyline = tour_polyline(tour, graph, grid);
  if (polyline.empty()) throw ValidationError("smooth_trajectory: empty tour");
  if (polyline.size() == 1) {
    // A single place has nothing to traverse; look around once instead.
    const int turns = static_cast<int>(std::lround(2 * std::numbers::pi / kTurnStep));
    const std::vector<Action> spin(static_cast<std::size_t>(turns), Action::TurnLeft);
    return replay({polyline[0].x(), polyline[0].y(), 0.0}, spin);
  }
  const auto smooth = smooth_polyline(polyline, grid);
  return follow_path(smooth, grid);
}

}  // namespace openvox

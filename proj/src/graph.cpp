#include "gog/graph.hpp"

#include <algorithm>
#include <cmath>

#include "gog/error.hpp"

namespace gog {

void RelationGraph::set_edge(int i, int j, int lbl) {
  adjacency[static_cast<std::size_t>(i) * n + j] = 1;
  edge_labels[static_cast<std::size_t>(i) * n + j] = lbl;
  if (!directed && i != j) {
    adjacency[static_cast<std::size_t>(j) * n + i] = 1;
    edge_labels[static_cast<std::size_t>(j) * n + i] = lbl;
  }
}

int RelationGraph::off_diagonal_edges() const {
  int count = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && edge(i, j)) ++count;
    }
  }
  return count;
}

RelationGraph make_self_loop_graph(int n, bool directed) {
  if (n < 1) throw ValidationError("graph must have at least one node");
  RelationGraph g;
  g.n = n;
  g.directed = directed;
  g.adjacency.assign(static_cast<std::size_t>(n) * n, 0);
  g.edge_labels.assign(static_cast<std::size_t>(n) * n, kSelfLabel);
  for (int i = 0; i < n; ++i) g.set_edge(i, i, kSelfLabel);
  return g;
}

RelationGraph make_fully_connected(int n, int valid) {
  RelationGraph g = make_self_loop_graph(n);
  if (valid < 0 || valid > n) valid = n;
  for (int i = 0; i < valid; ++i) {
    for (int j = 0; j < valid; ++j) g.set_edge(i, j, kGenericLabel);
  }
  return g;
}

RelationGraph build_history_graph(const CorefAnnotation& coref, int t) {
  RelationGraph g = make_self_loop_graph(t);
  for (const auto& chain : coref.chains) {
    std::vector<int> turns;
    for (const CorefMention& m : chain) {
      if (m.turn >= t) {
        throw AnnotationError("history graph: chain mentions turn " + std::to_string(m.turn) +
                              " but only " + std::to_string(t) + " turns exist");
      }
      turns.push_back(m.turn);
    }
    std::sort(turns.begin(), turns.end());
    turns.erase(std::unique(turns.begin(), turns.end()), turns.end());
    for (std::size_t a = 0; a < turns.size(); ++a) {
      for (std::size_t b = a + 1; b < turns.size(); ++b) {
        g.set_edge(turns[a], turns[b], kCorefLabel);
      }
    }
  }
  return g;
}

RelationGraph build_question_graph(const DependencyAnnotation& dep, int n_tokens, int valid_len) {
  if (static_cast<int>(dep.heads.size()) > n_tokens) {
    throw AnnotationError("question graph: annotation covers " + std::to_string(dep.heads.size()) +
                          " tokens, graph has " + std::to_string(n_tokens));
  }
  if (valid_len < 0 || valid_len > n_tokens) valid_len = n_tokens;
  valid_len = std::min<int>(valid_len, static_cast<int>(dep.heads.size()));

  // cycle check over the annotated prefix
  for (int i = 0; i < valid_len; ++i) {
    int cur = i;
    int hops = 0;
    while (true) {
      const int h = dep.heads[cur];
      if (h == -1) break;
      if (h < 0 || h >= static_cast<int>(dep.heads.size())) {
        throw AnnotationError("question graph: head out of range at token " + std::to_string(cur));
      }
      cur = h;
      if (++hops > static_cast<int>(dep.heads.size())) {
        throw AnnotationError("question graph: cycle in heads at token " + std::to_string(i));
      }
    }
  }

  RelationGraph g = make_self_loop_graph(n_tokens);
  for (int i = 0; i < valid_len; ++i) {
    const int h = dep.heads[i];
    if (h == -1) continue;  // root keeps only its self-loop
    if (h >= valid_len) continue;  // arcs into the truncated tail are dropped
    g.set_edge(i, h, 1 + dep.labels[i]);
  }
  return g;
}

namespace {

const std::array<std::string, kNumSpatialRelations> kSpatialNames = {
    "inside", "cover", "overlap", "n", "ne", "e", "se", "s", "sw", "w", "nw"};

bool strictly_inside(const Bbox& inner, const Bbox& outer) {
  return outer[0] < inner[0] && outer[1] < inner[1] && inner[2] < outer[2] && inner[3] < outer[3];
}

// Octant of direction (dx, dy) out of 8, computed with exact comparisons so
// that negating the vector always lands on the converse octant.
SpatialRelation octant_of(double dx, double dy) {
  // canonical half-plane: dy < 0, or dy == 0 and dx > 0; otherwise classify
  // the negated vector and return the converse
  if (!(dy < 0.0 || (dy == 0.0 && dx > 0.0))) {
    return converse(octant_of(-dx, -dy));
  }
  // here B is above A (or level to the east); boundaries at 22.5 degrees
  constexpr double kTan = 0.41421356237309503;  // tan(22.5 deg)
  if (dy == 0.0) return SpatialRelation::E;
  const double ady = -dy;
  if (std::abs(dx) <= kTan * ady) return SpatialRelation::N;
  if (dx > 0.0) {
    if (ady >= kTan * dx) return SpatialRelation::NE;
    return SpatialRelation::E;
  }
  if (ady >= kTan * (-dx)) return SpatialRelation::NW;
  return SpatialRelation::W;
}

void validate_box(const Bbox& b, const char* which) {
  if (!(b[0] < b[2]) || !(b[1] < b[3])) {
    throw ValidationError(std::string("degenerate bounding box (") + which + ")");
  }
}

}  // namespace

const std::string& spatial_relation_name(SpatialRelation r) {
  return kSpatialNames[static_cast<int>(r)];
}

SpatialRelation converse(SpatialRelation r) {
  switch (r) {
    case SpatialRelation::Inside: return SpatialRelation::Cover;
    case SpatialRelation::Cover: return SpatialRelation::Inside;
    case SpatialRelation::Overlap: return SpatialRelation::Overlap;
    case SpatialRelation::N: return SpatialRelation::S;
    case SpatialRelation::NE: return SpatialRelation::SW;
    case SpatialRelation::E: return SpatialRelation::W;
    case SpatialRelation::SE: return SpatialRelation::NW;
    case SpatialRelation::S: return SpatialRelation::N;
    case SpatialRelation::SW: return SpatialRelation::NE;
    case SpatialRelation::W: return SpatialRelation::E;
    case SpatialRelation::NW: return SpatialRelation::SE;
  }
  throw ValidationError("unknown spatial relation");
}

double box_iou(const Bbox& a, const Bbox& b) {
  const double ix = std::max(0.0, std::min(a[2], b[2]) - std::max(a[0], b[0]));
  const double iy = std::max(0.0, std::min(a[3], b[3]) - std::max(a[1], b[1]));
  const double inter = ix * iy;
  const double area_a = (a[2] - a[0]) * (a[3] - a[1]);
  const double area_b = (b[2] - b[0]) * (b[3] - b[1]);
  const double uni = area_a + area_b - inter;
  return uni <= 0.0 ? 0.0 : inter / uni;
}

std::optional<SpatialRelation> classify_spatial_relation(const Bbox& a, const Bbox& b,
                                                         const SpatialThresholds& thresholds) {
  validate_box(a, "first");
  validate_box(b, "second");
  if (strictly_inside(b, a)) return SpatialRelation::Cover;
  if (strictly_inside(a, b)) return SpatialRelation::Inside;
  if (box_iou(a, b) >= thresholds.iou) return SpatialRelation::Overlap;

  double diag = thresholds.image_diagonal;
  if (diag <= 0.0) {
    const double w = std::max(a[2], b[2]) - std::min(a[0], b[0]);
    const double h = std::max(a[3], b[3]) - std::min(a[1], b[1]);
    diag = std::hypot(w, h);
  }
  const double dx = 0.5 * (b[0] + b[2]) - 0.5 * (a[0] + a[2]);
  const double dy = 0.5 * (b[1] + b[3]) - 0.5 * (a[1] + a[3]);
  const double dist = std::hypot(dx, dy);
  if (dist > thresholds.distance * diag) return std::nullopt;
  if (dx == 0.0 && dy == 0.0) return SpatialRelation::Overlap;  // concentric boxes do intersect
  return octant_of(dx, dy);
}

RelationGraph build_image_graph(const std::vector<Bbox>& boxes, const SpatialThresholds& thresholds) {
  if (boxes.empty()) throw ValidationError("image graph: no regions");
  SpatialThresholds th = thresholds;
  if (th.image_diagonal <= 0.0) {
    // one shared normalization from the enclosing box of all regions
    double x1 = boxes[0][0], y1 = boxes[0][1], x2 = boxes[0][2], y2 = boxes[0][3];
    for (const Bbox& b : boxes) {
      x1 = std::min(x1, b[0]);
      y1 = std::min(y1, b[1]);
      x2 = std::max(x2, b[2]);
      y2 = std::max(y2, b[3]);
    }
    th.image_diagonal = std::hypot(x2 - x1, y2 - y1);
  }
  RelationGraph g = make_self_loop_graph(static_cast<int>(boxes.size()), /*directed=*/true);
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j < g.n; ++j) {
      if (i == j) continue;
      const auto rel = classify_spatial_relation(boxes[i], boxes[j], th);
      if (rel) g.set_edge(i, j, 1 + static_cast<int>(*rel));
    }
  }
  return g;
}

CorefAnnotation restrict_chains(const CorefAnnotation& coref, int t) {
  CorefAnnotation out;
  for (const auto& chain : coref.chains) {
    std::vector<CorefMention> kept;
    for (const CorefMention& m : chain) {
      if (m.turn < t) kept.push_back(m);
    }
    if (kept.size() >= 2) out.chains.push_back(std::move(kept));
  }
  return out;
}

}  // namespace gog

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gog/corpus.hpp"

namespace gog {

/// Square boolean adjacency with a label id per edge. The diagonal is always
/// set (every node keeps a self-loop labelled kSelfLabel).
struct RelationGraph {
  int n = 0;
  std::vector<std::uint8_t> adjacency;  // n*n, row-major
  std::vector<int> edge_labels;         // n*n, valid where adjacency is set
  bool directed = false;

  bool edge(int i, int j) const { return adjacency[static_cast<std::size_t>(i) * n + j] != 0; }
  int label(int i, int j) const { return edge_labels[static_cast<std::size_t>(i) * n + j]; }
  void set_edge(int i, int j, int label);
  int off_diagonal_edges() const;
};

/// Label id 0 is the self-loop label in every graph.
constexpr int kSelfLabel = 0;
constexpr int kCorefLabel = 1;
constexpr int kNumHistoryLabels = 2;
constexpr int kNumQuestionLabels = 1 + kNumDepLabels;
constexpr int kGenericLabel = 0;  // fully-connected replacement graphs are unlabeled

RelationGraph make_self_loop_graph(int n, bool directed = false);
RelationGraph make_fully_connected(int n, int valid = -1);

/// Undirected t-node graph; turns i and j are linked iff some chain mentions
/// both. Chains are not closed transitively across each other.
RelationGraph build_history_graph(const CorefAnnotation& coref, int t);

/// Undirected graph over question tokens; each non-root token i with head h
/// yields a symmetric edge (i, h) labelled with i's dependency relation.
/// Tokens at or beyond valid_len stay isolated (self-loop only).
RelationGraph build_question_graph(const DependencyAnnotation& dep, int n_tokens, int valid_len = -1);

/// The eleven spatial categories. Directions are the octant of B's center
/// relative to A's, measured with y growing downward (N means B is above A).
enum class SpatialRelation {
  Inside,  // A is strictly inside B
  Cover,   // A strictly contains B
  Overlap,
  N, NE, E, SE, S, SW, W, NW,
};

constexpr int kNumSpatialRelations = 11;
constexpr int kNumImageLabels = 1 + kNumSpatialRelations;

const std::string& spatial_relation_name(SpatialRelation r);
SpatialRelation converse(SpatialRelation r);

struct SpatialThresholds {
  double iou = 0.3;
  double distance = 0.5;      // of the image diagonal
  double image_diagonal = 0;  // 0 means: derive from the boxes' enclosing box
};

using Bbox = std::array<double, 4>;

double box_iou(const Bbox& a, const Bbox& b);

/// Decision cascade: strict containment, then IoU >= threshold (overlap),
/// then a directional octant if the centers are close enough, else nothing.
std::optional<SpatialRelation> classify_spatial_relation(const Bbox& a, const Bbox& b,
                                                         const SpatialThresholds& thresholds);

/// Directed graph over regions: edge (i, j) labelled by the relation of box j
/// relative to box i whenever the classifier returns one.
RelationGraph build_image_graph(const std::vector<Bbox>& boxes, const SpatialThresholds& thresholds);

/// Drops chain mentions at turns >= t (history only covers earlier turns).
CorefAnnotation restrict_chains(const CorefAnnotation& coref, int t);

}  // namespace gog

#pragma once

#include <string>
#include <vector>

#include "gog/graph.hpp"
#include "gog/param_store.hpp"
#include "gog/tensor.hpp"

namespace gog {

struct GraphAttOutput {
  Tensor node_states;             // n x d
  std::vector<Tensor> attention;  // one n x n weight matrix per head
};

/// Registers the per-head score projections U and V, the per-head message
/// transform W_u, the shared per-label scalar bias table and the output
/// projection under `prefix`. d must be divisible by heads.
void register_graph_att_params(ParamStore& store, const std::string& prefix, int d, int heads,
                               int n_labels);

/// Scaled bilinear scores for one head: s_ij = (U u_i) . (V u_j) / sqrt(d_k).
Tensor relation_scores(const Tensor& u, const std::string& prefix, int head, ParamStore& store);

/// Softmax over each node's neighbourhood of scores plus the per-label bias.
/// Weights at non-adjacent positions are exactly zero.
Tensor attention_weights(const Tensor& scores, const RelationGraph& graph, const std::string& prefix,
                         ParamStore& store);

/// Per-head weighted aggregation of transformed neighbours, heads concatenated
/// and projected, then a residual connection and ReLU.
GraphAttOutput graph_att(const Tensor& u, const RelationGraph& graph, const std::string& prefix,
                         int heads, ParamStore& store);

}  // namespace gog

#include "gog/graph_attention.hpp"

#include <cmath>

#include "gog/error.hpp"
#include "gog/ops.hpp"

namespace gog {

void register_graph_att_params(ParamStore& store, const std::string& prefix, int d, int heads,
                               int n_labels) {
  if (heads < 1 || d % heads != 0) {
    throw ConfigError(prefix + ": width " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const int d_k = d / heads;
  for (int h = 0; h < heads; ++h) {
    const std::string hp = prefix + ".head" + std::to_string(h);
    store.create(hp + ".U", d, d_k);
    store.create(hp + ".V", d, d_k);
    store.create(hp + ".Wu", d, d_k);
  }
  store.create(prefix + ".Wlab", n_labels, 1, Init::Zeros);
  store.create(prefix + ".Wo", d, d);
}

Tensor relation_scores(const Tensor& u, const std::string& prefix, int head, ParamStore& store) {
  const std::string hp = prefix + ".head" + std::to_string(head);
  Tensor left = matmul(u, store.get(hp + ".U"));   // n x d_k
  Tensor right = matmul(u, store.get(hp + ".V"));  // n x d_k
  return scale(matmul(left, transpose(right)), 1.0 / std::sqrt(static_cast<double>(left.cols)));
}

Tensor attention_weights(const Tensor& scores, const RelationGraph& graph, const std::string& prefix,
                         ParamStore& store) {
  if (scores.rows != graph.n || scores.cols != graph.n) {
    throw DimensionError("attention_weights: scores " + std::to_string(scores.rows) + "x" +
                         std::to_string(scores.cols) + " for a graph of " + std::to_string(graph.n));
  }
  Tensor bias = gather_label_bias(store.get(prefix + ".Wlab"), graph.edge_labels, graph.adjacency, graph.n);
  return masked_softmax_rows(add(scores, bias), graph.adjacency);
}

GraphAttOutput graph_att(const Tensor& u, const RelationGraph& graph, const std::string& prefix,
                         int heads, ParamStore& store) {
  if (u.rows != graph.n) {
    throw DimensionError("graph_att: " + std::to_string(u.rows) + " node states for a graph of " +
                         std::to_string(graph.n));
  }
  GraphAttOutput out;
  std::vector<Tensor> messages;
  messages.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Tensor alpha = attention_weights(relation_scores(u, prefix, h, store), graph, prefix, store);
    out.attention.push_back(alpha);
    const std::string hp = prefix + ".head" + std::to_string(h);
    messages.push_back(matmul(alpha, matmul(u, store.get(hp + ".Wu"))));
  }
  Tensor merged = messages[0];
  for (int h = 1; h < heads; ++h) merged = concat_cols(merged, messages[h]);
  out.node_states = relu(add(u, matmul(merged, store.get(prefix + ".Wo"))));
  return out;
}

}  // namespace gog

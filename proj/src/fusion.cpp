#include "gog/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "gog/error.hpp"
#include "gog/ops.hpp"

namespace gog {

CrossAttOutput cross_attend(const Tensor& source, const Tensor& target,
                            const std::vector<std::uint8_t>& source_mask, const std::string& prefix,
                            int heads, ParamStore& store) {
  if (source.rows < 1) throw ConfigError(prefix + ": empty attention source");
  if (source_mask.size() != static_cast<std::size_t>(source.rows)) {
    throw DimensionError(prefix + ": source mask length mismatch");
  }
  if (std::find(source_mask.begin(), source_mask.end(), 1) == source_mask.end()) {
    throw ConfigError(prefix + ": fully masked attention source");
  }
  // one mask row per target position
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(target.rows) * source.rows);
  for (int i = 0; i < target.rows; ++i) {
    std::copy(source_mask.begin(), source_mask.end(), mask.begin() + static_cast<std::size_t>(i) * source.rows);
  }

  CrossAttOutput out;
  std::vector<Tensor> merged;
  merged.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    const std::string hp = prefix + ".head" + std::to_string(h);
    Tensor queries = matmul(target, store.get(hp + ".Wq"));
    Tensor keys = matmul(source, store.get(hp + ".Wk"));
    Tensor values = matmul(source, store.get(hp + ".Wv"));
    Tensor scores = scale(matmul(queries, transpose(keys)), 1.0 / std::sqrt(static_cast<double>(queries.cols)));
    Tensor alpha = masked_softmax_rows(scores, mask);
    out.attention.push_back(alpha);
    merged.push_back(matmul(alpha, values));
  }
  Tensor cat = merged[0];
  for (int h = 1; h < heads; ++h) cat = concat_cols(cat, merged[h]);
  out.out = matmul(cat, store.get(prefix + ".Wo"));
  return out;
}

namespace {

struct Modality {
  const char* name;
  Tensor states;
  std::vector<std::uint8_t> mask;
};

Tensor fuse_modality(const Modality& target, const std::vector<Modality>& all, int heads,
                     ParamStore& store, Tensor& pool_out,
                     std::map<std::string, CrossAttOutput>& streams) {
  const std::string mp = std::string("fuse.") + target.name;
  Tensor cat;
  for (const Modality& src : all) {
    CrossAttOutput att =
        cross_attend(src.states, target.states, src.mask, mp + ".att_" + src.name, heads, store);
    streams[std::string(target.name) + ".att_" + src.name] = att;
    cat = cat.defined() ? concat_cols(cat, att.out) : att.out;
  }
  Tensor mixed = relu(linear(cat, mp + ".Wcat", store));
  Tensor normed = layer_norm(add(mixed, target.states), mp + ".ln.gain", mp + ".ln.shift", store);
  Tensor logits = linear(tanh_op(linear(normed, mp + ".pool.W2", store)), mp + ".pool.W1", store);
  pool_out = masked_softmax(transpose(logits), target.mask);
  return matmul(pool_out, normed);  // 1 x d
}

}  // namespace

FusionOutput fuse(const GoGState& s, int heads, ParamStore& store) {
  std::vector<std::uint8_t> q_mask(s.q_star.rows, 0);
  std::fill(q_mask.begin(), q_mask.begin() + s.enc.q_valid, 1);

  // stream order fixed as [self, from q, from h] for v and symmetrically for
  // the others, with self always first
  const Modality v{"v", s.v_star, std::vector<std::uint8_t>(s.v_star.rows, 1)};
  const Modality q{"q", s.q_star, q_mask};
  const Modality h{"h", s.h_star, std::vector<std::uint8_t>(s.h_star.rows, 1)};

  FusionOutput out;
  Tensor v_bar = fuse_modality(v, {v, q, h}, heads, store, out.v_pool, out.streams);
  Tensor q_bar = fuse_modality(q, {q, v, h}, heads, store, out.q_pool, out.streams);
  Tensor h_bar = fuse_modality(h, {h, q, v}, heads, store, out.h_pool, out.streams);
  out.joint = linear(concat_cols(concat_cols(q_bar, h_bar), v_bar), "fuse.WJ", store);
  return out;
}

}  // namespace gog

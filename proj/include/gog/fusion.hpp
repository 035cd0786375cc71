#pragma once

#include <map>
#include <string>
#include <vector>

#include "gog/encoder.hpp"
#include "gog/param_store.hpp"
#include "gog/tensor.hpp"

namespace gog {

struct CrossAttOutput {
  Tensor out;                     // |target| x d
  std::vector<Tensor> attention;  // per head, |target| x |source|
};

/// Multi-head scaled dot-product attention from `source` to `target`: queries
/// come from the target rows, keys and values from the source rows. With
/// source == target this is self-attention. Masked source positions are
/// excluded from every softmax.
CrossAttOutput cross_attend(const Tensor& source, const Tensor& target,
                            const std::vector<std::uint8_t>& source_mask, const std::string& prefix,
                            int heads, ParamStore& store);

struct FusionOutput {
  Tensor joint;                             // 1 x d
  Tensor v_pool, q_pool, h_pool;            // alignment pooling weights
  std::map<std::string, CrossAttOutput> streams;  // e.g. "v.att_q"
};

/// Attention-alignment fusion: per modality, concatenate the self- and
/// cross-attended streams, project with a ReLU and a residual LayerNorm, pool
/// with a two-layer softmax, then join the three pooled vectors.
FusionOutput fuse(const GoGState& s, int heads, ParamStore& store);

}  // namespace gog

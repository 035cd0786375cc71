#include "gog/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gog/error.hpp"

namespace gog {

namespace {

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows) + "x" + std::to_string(t.cols);
}

Tensor make_out(int rows, int cols, bool parent_grad) {
  Tensor t;
  t.rows = rows;
  t.cols = cols;
  t.data = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows) * cols, 0.0);
  t.requires_grad = parent_grad && grad_enabled();
  if (t.requires_grad) {
    t.grad = std::make_shared<std::vector<double>>(t.numel(), 0.0);
  }
  return t;
}

void attach(Tensor& out, std::vector<Tensor> parents, std::function<void(const Tensor&)> fn) {
  if (!out.requires_grad) return;
  out.node = std::make_shared<TensorNode>();
  out.node->parents = std::move(parents);
  out.node->backward = std::move(fn);
}

bool wants_grad(const Tensor& t) { return t.requires_grad; }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols != b.rows) {
    throw DimensionError("matmul: " + shape_str(a) + " * " + shape_str(b));
  }
  Tensor out = make_out(a.rows, b.cols, wants_grad(a) || wants_grad(b));
  const double* ad = a.data->data();
  const double* bd = b.data->data();
  double* od = out.data->data();
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      const double aik = ad[static_cast<std::size_t>(i) * a.cols + k];
      if (aik == 0.0) continue;
      const double* brow = bd + static_cast<std::size_t>(k) * b.cols;
      double* orow = od + static_cast<std::size_t>(i) * b.cols;
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  check_finite(out, "matmul");
  attach(out, {a, b}, [](const Tensor& o) {
    const Tensor& pa = o.node->parents[0];
    const Tensor& pb = o.node->parents[1];
    const double* gd = o.grad->data();
    if (pa.requires_grad) {
      // dA += dC * B^T
      double* ga = pa.grad->data();
      const double* bd = pb.data->data();
      for (int i = 0; i < pa.rows; ++i) {
        for (int j = 0; j < pb.cols; ++j) {
          const double g = gd[static_cast<std::size_t>(i) * pb.cols + j];
          if (g == 0.0) continue;
          const double* brow = bd;
          for (int k = 0; k < pa.cols; ++k) {
            ga[static_cast<std::size_t>(i) * pa.cols + k] += g * brow[static_cast<std::size_t>(k) * pb.cols + j];
          }
        }
      }
    }
    if (pb.requires_grad) {
      // dB += A^T * dC
      double* gb = pb.grad->data();
      const double* ad = pa.data->data();
      for (int i = 0; i < pa.rows; ++i) {
        for (int k = 0; k < pa.cols; ++k) {
          const double aik = ad[static_cast<std::size_t>(i) * pa.cols + k];
          if (aik == 0.0) continue;
          const double* grow = gd + static_cast<std::size_t>(i) * pb.cols;
          double* brow = gb + static_cast<std::size_t>(k) * pb.cols;
          for (int j = 0; j < pb.cols; ++j) brow[j] += aik * grow[j];
        }
      }
    }
  });
  return out;
}

Tensor transpose(const Tensor& a) {
  Tensor out = make_out(a.cols, a.rows, wants_grad(a));
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) out.mut(j, i) = a.at(i, j);
  }
  attach(out, {a}, [](const Tensor& o) {
    const Tensor& pa = o.node->parents[0];
    if (!pa.requires_grad) return;
    for (int i = 0; i < o.rows; ++i) {
      for (int j = 0; j < o.cols; ++j) {
        (*pa.grad)[static_cast<std::size_t>(j) * pa.cols + i] += (*o.grad)[static_cast<std::size_t>(i) * o.cols + j];
      }
    }
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw DimensionError("add: " + shape_str(a) + " vs " + shape_str(b));
  }
  Tensor out = make_out(a.rows, a.cols, wants_grad(a) || wants_grad(b));
  for (std::size_t i = 0; i < out.numel(); ++i) (*out.data)[i] = (*a.data)[i] + (*b.data)[i];
  check_finite(out, "add");
  attach(out, {a, b}, [](const Tensor& o) {
    for (int p = 0; p < 2; ++p) {
      const Tensor& pp = o.node->parents[p];
      if (!pp.requires_grad) continue;
      for (std::size_t i = 0; i < o.numel(); ++i) (*pp.grad)[i] += (*o.grad)[i];
    }
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw DimensionError("sub: " + shape_str(a) + " vs " + shape_str(b));
  }
  Tensor out = make_out(a.rows, a.cols, wants_grad(a) || wants_grad(b));
  for (std::size_t i = 0; i < out.numel(); ++i) (*out.data)[i] = (*a.data)[i] - (*b.data)[i];
  check_finite(out, "sub");
  attach(out, {a, b}, [](const Tensor& o) {
    const Tensor& pa = o.node->parents[0];
    const Tensor& pb = o.node->parents[1];
    if (pa.requires_grad) {
      for (std::size_t i = 0; i < o.numel(); ++i) (*pa.grad)[i] += (*o.grad)[i];
    }
    if (pb.requires_grad) {
      for (std::size_t i = 0; i < o.numel(); ++i) (*pb.grad)[i] -= (*o.grad)[i];
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw DimensionError("mul: " + shape_str(a) + " vs " + shape_str(b));
  }
  Tensor out = make_out(a.rows, a.cols, wants_grad(a) || wants_grad(b));
  for (std::size_t i = 0; i < out.numel(); ++i) (*out.data)[i] = (*a.data)[i] * (*b.data)[i];
  check_finite(out, "mul");
  attach(out, {a, b}, [](const Tensor& o) {
    const Tensor& pa = o.node->parents[0];
    const Tensor& pb = o.node->parents[1];
    if (pa.requires_grad) {
      for (std::size_t i = 0; i < o.numel(); ++i) (*pa.grad)[i] += (*o.grad)[i] * (*pb.data)[i];
    }
    if (pb.requires_grad) {
      for (std::size_t i = 0; i < o.numel(); ++i) (*pb.grad)[i] += (*o.grad)[i] * (*pa.data)[i];
    }
  });
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = make_out(a.rows, a.cols, wants_grad(a));
  for (std::size_t i = 0; i < out.numel(); ++i) (*out.data)[i] = (*a.data)[i] * s;
  check_finite(out, "scale");
  attach(out, {a}, [s](const Tensor& o) {
    const Tensor& pa = o.node->parents[0];
    if (!pa.requires_grad) return;
    for (std::size_t i = 0; i < o.numel(); ++i) (*pa.grad)[i] += (*o.grad)[i] * s;
  });
  return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& bias) {
  if (bias.rows != 1 || bias.cols != a.cols) {
    throw DimensionError("add_rowvec: " + shape_str(a) + " + " + shape_str(bias));
  }
  Tensor out = make_out(a.rows, a.cols, wants_grad(a) || wants_grad(bias));
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) out.mut(i, j) = a.at(i, j) + bias.at(0, j);
  }
  check_finite(out, "add_rowvec");
  attach(out, {a, bias}, [](const Tensor& o) {
    const Tensor& pa = o.node->parents[0];
    const Tensor& pb = o.node->parents[1];
    if (pa.requires_grad) {
      for (std::size_t i = 0; i < o.numel(); ++i) (*pa.grad)[i] += (*o.grad)[i];
    }
    if (pb.requires_grad) {
      for (int i = 0; i < o.rows; ++i) {
        for (int j = 0; j < o.cols; ++j) (*pb.grad)[j] += (*o.grad)[static_cast<std::size_t>(i) * o.cols + j];
      }
    }
  });
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = make_out(a.rows, a.cols, wants_grad(a));
  for (std::size_t i = 0; i < out.numel(); ++i) (*out.data)[i] = std::max(0.0, (*a.data)[i]);
  attach(out, {a}, [](const Tensor& o) {
    const Tensor& pa = o.node->parents[0];
    if (!pa.requires_grad) return;
    for (std::size_t i = 0; i < o.numel(); ++i) {
      if ((*pa.data)[i] > 0.0) (*pa.grad)[i] += (*o.grad)[i];
    }
  });
  return out;
}

Tensor tanh_op(const Tensor& a) {
  Tensor out = make_out(a.rows, a.cols, wants_grad(a));
  for (std::size_t i = 0; i < out.numel(); ++i) (*out.data)[i] = std::tanh((*a.data)[i]);
  attach(out, {a}, [](const Tensor& o) {
    const Tensor& pa = o.node->parents[0];
    if (!pa.requires_grad) return;
    for (std::size_t i = 0; i < o.numel(); ++i) {
      const double y = (*o.data)[i];
      (*pa.grad)[i] += (*o.grad)[i] * (1.0 - y * y);
    }
  });
  return out;
}

Tensor sigmoid(const Tensor& a) {
  Tensor out = make_out(a.rows, a.cols, wants_grad(a));
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double x = (*a.data)[i];
    (*out.data)[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  attach(out, {a}, [](const Tensor& o) {
    const Tensor& pa = o.node->parents[0];
    if (!pa.requires_grad) return;
    for (std::size_t i = 0; i < o.numel(); ++i) {
      const double y = (*o.data)[i];
      (*pa.grad)[i] += (*o.grad)[i] * y * (1.0 - y);
    }
  });
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows != b.rows) {
    throw DimensionError("concat_cols: " + shape_str(a) + " | " + shape_str(b));
  }
  Tensor out = make_out(a.rows, a.cols + b.cols, wants_grad(a) || wants_grad(b));
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) out.mut(i, j) = a.at(i, j);
    for (int j = 0; j < b.cols; ++j) out.mut(i, a.cols + j) = b.at(i, j);
  }
  attach(out, {a, b}, [](const Tensor& o) {
    const Tensor& pa = o.node->parents[0];
    const Tensor& pb = o.node->parents[1];
    for (int i = 0; i < o.rows; ++i) {
      if (pa.requires_grad) {
        for (int j = 0; j < pa.cols; ++j) {
          (*pa.grad)[static_cast<std::size_t>(i) * pa.cols + j] += (*o.grad)[static_cast<std::size_t>(i) * o.cols + j];
        }
      }
      if (pb.requires_grad) {
        for (int j = 0; j < pb.cols; ++j) {
          (*pb.grad)[static_cast<std::size_t>(i) * pb.cols + j] +=
              (*o.grad)[static_cast<std::size_t>(i) * o.cols + pa.cols + j];
        }
      }
    }
  });
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  const int cols = parts[0].cols;
  int rows = 0;
  bool any_grad = false;
  for (const Tensor& p : parts) {
    if (p.cols != cols) throw DimensionError("concat_rows: column mismatch");
    rows += p.rows;
    any_grad = any_grad || wants_grad(p);
  }
  Tensor out = make_out(rows, cols, any_grad);
  int r = 0;
  for (const Tensor& p : parts) {
    for (int i = 0; i < p.rows; ++i, ++r) {
      for (int j = 0; j < cols; ++j) out.mut(r, j) = p.at(i, j);
    }
  }
  attach(out, parts, [](const Tensor& o) {
    int r = 0;
    for (const Tensor& p : o.node->parents) {
      if (p.requires_grad) {
        for (int i = 0; i < p.rows; ++i) {
          for (int j = 0; j < p.cols; ++j) {
            (*p.grad)[static_cast<std::size_t>(i) * p.cols + j] +=
                (*o.grad)[static_cast<std::size_t>(r + i) * o.cols + j];
          }
        }
      }
      r += p.rows;
    }
  });
  return out;
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
  if (c0 < 0 || c1 > a.cols || c0 >= c1) {
    throw DimensionError("slice_cols: [" + std::to_string(c0) + "," + std::to_string(c1) + ") of " + shape_str(a));
  }
  Tensor out = make_out(a.rows, c1 - c0, wants_grad(a));
  for (int i = 0; i < a.rows; ++i) {
    for (int j = c0; j < c1; ++j) out.mut(i, j - c0) = a.at(i, j);
  }
  attach(out, {a}, [c0](const Tensor& o) {
    const Tensor& pa = o.node->parents[0];
    if (!pa.requires_grad) return;
    for (int i = 0; i < o.rows; ++i) {
      for (int j = 0; j < o.cols; ++j) {
        (*pa.grad)[static_cast<std::size_t>(i) * pa.cols + c0 + j] += (*o.grad)[static_cast<std::size_t>(i) * o.cols + j];
      }
    }
  });
  return out;
}

Tensor row(const Tensor& a, int r) {
  if (r < 0 || r >= a.rows) throw DimensionError("row: index " + std::to_string(r) + " of " + shape_str(a));
  Tensor out = make_out(1, a.cols, wants_grad(a));
  for (int j = 0; j < a.cols; ++j) out.mut(0, j) = a.at(r, j);
  attach(out, {a}, [r](const Tensor& o) {
    const Tensor& pa = o.node->parents[0];
    if (!pa.requires_grad) return;
    for (int j = 0; j < o.cols; ++j) (*pa.grad)[static_cast<std::size_t>(r) * pa.cols + j] += (*o.grad)[j];
  });
  return out;
}

Tensor repeat_rows(const Tensor& a, int n) {
  if (a.rows != 1) throw DimensionError("repeat_rows: input must be 1x*, got " + shape_str(a));
  if (n < 1) throw DimensionError("repeat_rows: n < 1");
  Tensor out = make_out(n, a.cols, wants_grad(a));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < a.cols; ++j) out.mut(i, j) = a.at(0, j);
  }
  attach(out, {a}, [](const Tensor& o) {
    const Tensor& pa = o.node->parents[0];
    if (!pa.requires_grad) return;
    for (int i = 0; i < o.rows; ++i) {
      for (int j = 0; j < o.cols; ++j) (*pa.grad)[j] += (*o.grad)[static_cast<std::size_t>(i) * o.cols + j];
    }
  });
  return out;
}

Tensor sum_all(const Tensor& a) {
  Tensor out = make_out(1, 1, wants_grad(a));
  double s = 0.0;
  for (double v : *a.data) s += v;
  (*out.data)[0] = s;
  check_finite(out, "sum_all");
  attach(out, {a}, [](const Tensor& o) {
    const Tensor& pa = o.node->parents[0];
    if (!pa.requires_grad) return;
    const double g = (*o.grad)[0];
    for (std::size_t i = 0; i < pa.numel(); ++i) (*pa.grad)[i] += g;
  });
  return out;
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.numel())); }

Tensor masked_softmax_rows(const Tensor& scores, const std::vector<std::uint8_t>& mask) {
  if (mask.size() != scores.numel()) {
    throw DimensionError("masked_softmax_rows: mask size " + std::to_string(mask.size()) + " for " + shape_str(scores));
  }
  Tensor out = make_out(scores.rows, scores.cols, wants_grad(scores));
  for (int i = 0; i < scores.rows; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * scores.cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < scores.cols; ++j) {
      if (mask[base + j]) mx = std::max(mx, (*scores.data)[base + j]);
    }
    if (!std::isfinite(mx)) continue;  // fully masked row stays all zero
    double z = 0.0;
    for (int j = 0; j < scores.cols; ++j) {
      if (mask[base + j]) {
        const double e = std::exp((*scores.data)[base + j] - mx);
        (*out.data)[base + j] = e;
        z += e;
      }
    }
    for (int j = 0; j < scores.cols; ++j) {
      if (mask[base + j]) (*out.data)[base + j] /= z;
    }
  }
  check_finite(out, "masked_softmax_rows");
  attach(out, {scores}, [mask](const Tensor& o) {
    const Tensor& pa = o.node->parents[0];
    if (!pa.requires_grad) return;
    for (int i = 0; i < o.rows; ++i) {
      const std::size_t base = static_cast<std::size_t>(i) * o.cols;
      double dot = 0.0;
      for (int j = 0; j < o.cols; ++j) {
        if (mask[base + j]) dot += (*o.grad)[base + j] * (*o.data)[base + j];
      }
      for (int j = 0; j < o.cols; ++j) {
        if (mask[base + j]) {
          (*pa.grad)[base + j] += (*o.data)[base + j] * ((*o.grad)[base + j] - dot);
        }
      }
    }
  });
  return out;
}

Tensor masked_softmax(const Tensor& scores, const std::vector<std::uint8_t>& mask) {
  if (scores.rows != 1) throw DimensionError("masked_softmax: expected a 1x* score vector, got " + shape_str(scores));
  return masked_softmax_rows(scores, mask);
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps) {
  if (x.cols < 2) throw DimensionError("layer_norm_rows: degenerate width " + std::to_string(x.cols));
  if (gain.rows != 1 || gain.cols != x.cols || shift.rows != 1 || shift.cols != x.cols) {
    throw DimensionError("layer_norm_rows: affine shape mismatch for " + shape_str(x));
  }
  Tensor out = make_out(x.rows, x.cols, wants_grad(x) || wants_grad(gain) || wants_grad(shift));
  const int d = x.cols;
  std::vector<double> inv_std(x.rows), means(x.rows);
  for (int i = 0; i < x.rows; ++i) {
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += x.at(i, j);
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = x.at(i, j) - mu;
      var += c * c;
    }
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    means[i] = mu;
    inv_std[i] = is;
    for (int j = 0; j < d; ++j) {
      out.mut(i, j) = gain.at(0, j) * ((x.at(i, j) - mu) * is) + shift.at(0, j);
    }
  }
  check_finite(out, "layer_norm_rows");
  attach(out, {x, gain, shift}, [means, inv_std](const Tensor& o) {
    const Tensor& px = o.node->parents[0];
    const Tensor& pg = o.node->parents[1];
    const Tensor& ps = o.node->parents[2];
    const int d = o.cols;
    for (int i = 0; i < o.rows; ++i) {
      const double mu = means[i];
      const double is = inv_std[i];
      // dxhat, and the two row sums needed for dx
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (int j = 0; j < d; ++j) {
        const double xhat = (px.at(i, j) - mu) * is;
        const double dy = (*o.grad)[static_cast<std::size_t>(i) * d + j];
        const double dxhat = dy * pg.at(0, j);
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat;
        if (pg.requires_grad) (*pg.grad)[j] += dy * xhat;
        if (ps.requires_grad) (*ps.grad)[j] += dy;
      }
      if (px.requires_grad) {
        for (int j = 0; j < d; ++j) {
          const double xhat = (px.at(i, j) - mu) * is;
          const double dy = (*o.grad)[static_cast<std::size_t>(i) * d + j];
          const double dxhat = dy * pg.at(0, j);
          (*px.grad)[static_cast<std::size_t>(i) * d + j] +=
              is * (dxhat - sum_dxhat / d - xhat * sum_dxhat_xhat / d);
        }
      }
    }
  });
  return out;
}

Tensor log_softmax_row(const Tensor& x) {
  if (x.rows != 1) throw DimensionError("log_softmax_row: expected 1x*, got " + shape_str(x));
  Tensor out = make_out(1, x.cols, wants_grad(x));
  double mx = (*x.data)[0];
  for (double v : *x.data) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : *x.data) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  for (int j = 0; j < x.cols; ++j) (*out.data)[j] = (*x.data)[j] - lse;
  check_finite(out, "log_softmax_row");
  attach(out, {x}, [](const Tensor& o) {
    const Tensor& pa = o.node->parents[0];
    if (!pa.requires_grad) return;
    double gsum = 0.0;
    for (int j = 0; j < o.cols; ++j) gsum += (*o.grad)[j];
    for (int j = 0; j < o.cols; ++j) {
      (*pa.grad)[j] += (*o.grad)[j] - std::exp((*o.data)[j]) * gsum;
    }
  });
  return out;
}

Tensor pick(const Tensor& x, int index) {
  if (x.rows != 1 || index < 0 || index >= x.cols) {
    throw DimensionError("pick: index " + std::to_string(index) + " of " + shape_str(x));
  }
  Tensor out = make_out(1, 1, wants_grad(x));
  (*out.data)[0] = (*x.data)[index];
  attach(out, {x}, [index](const Tensor& o) {
    const Tensor& pa = o.node->parents[0];
    if (!pa.requires_grad) return;
    (*pa.grad)[index] += (*o.grad)[0];
  });
  return out;
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  if (ids.empty()) throw DimensionError("embedding_lookup: empty id list");
  for (int id : ids) {
    if (id < 0 || id >= table.rows) {
      throw ValidationError("embedding_lookup: id " + std::to_string(id) + " outside table of " +
                            std::to_string(table.rows) + " rows");
    }
  }
  Tensor out = make_out(static_cast<int>(ids.size()), table.cols, wants_grad(table));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (int j = 0; j < table.cols; ++j) out.mut(static_cast<int>(i), j) = table.at(ids[i], j);
  }
  attach(out, {table}, [ids](const Tensor& o) {
    const Tensor& pt = o.node->parents[0];
    if (!pt.requires_grad) return;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (int j = 0; j < o.cols; ++j) {
        (*pt.grad)[static_cast<std::size_t>(ids[i]) * pt.cols + j] += (*o.grad)[i * o.cols + j];
      }
    }
  });
  return out;
}

Tensor gather_label_bias(const Tensor& table, const std::vector<int>& labels,
                         const std::vector<std::uint8_t>& adjacency, int n) {
  if (table.cols != 1) throw DimensionError("gather_label_bias: table must be n_labels x 1");
  if (labels.size() != static_cast<std::size_t>(n) * n || adjacency.size() != labels.size()) {
    throw DimensionError("gather_label_bias: label/adjacency size mismatch");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (adjacency[i] && (labels[i] < 0 || labels[i] >= table.rows)) {
      throw ConfigError("gather_label_bias: label id " + std::to_string(labels[i]) + " outside bias table of " +
                        std::to_string(table.rows) + " labels");
    }
  }
  Tensor out = make_out(n, n, wants_grad(table));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (adjacency[i]) (*out.data)[i] = (*table.data)[labels[i]];
  }
  attach(out, {table}, [labels, adjacency](const Tensor& o) {
    const Tensor& pt = o.node->parents[0];
    if (!pt.requires_grad) return;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (adjacency[i]) (*pt.grad)[labels[i]] += (*o.grad)[i];
    }
  });
  return out;
}

}  // namespace gog

#include "lnrel/ops.h"

#include <algorithm>
#include <cmath>

namespace lnrel {

namespace {

using detail::Node;

bool wants_grad(const Tensor& t) { return t.defined() && t.requires_grad(); }

// Builds an op result; records graph edges only when grad mode is on and an
// input requires a gradient.
Tensor make_result(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs,
                   std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  if (grad_mode_enabled()) {
    for (const Tensor& in : inputs) {
      if (wants_grad(in)) {
        node->requires_grad = true;
        break;
      }
    }
  }
  if (node->requires_grad) {
    for (const Tensor& in : inputs) {
      if (wants_grad(in)) node->parents.push_back(in.node());
    }
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor::wrap(std::move(node));
}

std::vector<double>* grad_sink(const Tensor& t) {
  return wants_grad(t) ? &t.node()->ensure_grad() : nullptr;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](Node& self) {
    for (const Tensor* t : {&a, &b}) {
      if (auto* g = grad_sink(*t)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](Node& self) {
    if (auto* g = grad_sink(a)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * b.at(i);
    }
    if (auto* g = grad_sink(b)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * a.at(i);
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * factor;
  return make_result(a.shape(), std::move(out), {a}, [a, factor](Node& self) {
    auto& g = a.node()->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return make_result(Shape{1}, {total}, {a}, [a](Node& self) {
    auto& g = a.node()->ensure_grad();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), {a}, [a](Node& self) {
    auto& g = a.node()->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size()) throw ShapeError("concat: axis out of range for " + shape_str(ref));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= ref[i];
  for (std::size_t i = axis + 1; i < ref.size(); ++i) inner *= ref[i];
  std::size_t total_axis = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (i != axis && s[i] != ref[i]) ok = false;
    }
    if (!ok) throw ShapeError("concat: incompatible " + shape_str(s) + " vs " + shape_str(ref));
    total_axis += s[axis];
  }
  Shape out_shape = ref;
  out_shape[axis] = total_axis;
  std::vector<double> out(outer * total_axis * inner);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t chunk = p.shape()[axis] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(p.data().begin() + o * chunk, chunk, out.begin() + o * total_axis * inner + offset);
    }
    offset += chunk;
  }
  return make_result(std::move(out_shape), std::move(out), parts,
                     [parts, outer, inner, total_axis, axis](Node& self) {
                       std::size_t off = 0;
                       for (const Tensor& p : parts) {
                         const std::size_t chunk = p.shape()[axis] * inner;
                         if (auto* g = grad_sink(p)) {
                           for (std::size_t o = 0; o < outer; ++o) {
                             const double* src = self.grad.data() + o * total_axis * inner + off;
                             double* dst = g->data() + o * chunk;
                             for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
                           }
                         }
                         off += chunk;
                       }
                     });
}

Tensor stack(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("stack: no inputs");
  std::vector<Tensor> rows;
  rows.reserve(parts.size());
  Shape row_shape = parts.front().shape();
  row_shape.insert(row_shape.begin(), 1);
  for (const Tensor& p : parts) {
    if (p.shape() != parts.front().shape()) {
      throw ShapeError("stack: mismatched " + shape_str(p.shape()) + " vs " +
                       shape_str(parts.front().shape()));
    }
    rows.push_back(reshape(p, row_shape));
  }
  return concat(rows, 0);
}

Tensor select(const Tensor& a, std::size_t index) {
  if (a.rank() < 1 || index >= a.dim(0)) {
    throw ShapeError("select: index " + std::to_string(index) + " out of range for " +
                     shape_str(a.shape()));
  }
  Shape out_shape(a.shape().begin() + 1, a.shape().end());
  if (out_shape.empty()) out_shape = {1};
  const std::size_t width = shape_numel(out_shape);
  std::vector<double> out(a.data().begin() + index * width, a.data().begin() + (index + 1) * width);
  return make_result(std::move(out_shape), std::move(out), {a}, [a, index, width](Node& self) {
    auto& g = a.node()->ensure_grad();
    for (std::size_t i = 0; i < width; ++i) g[index * width + i] += self.grad[i];
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, a.at(i));
  return make_result(a.shape(), std::move(out), {a}, [a](Node& self) {
    auto& g = a.node()->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (a.at(i) > 0.0) g[i] += self.grad[i];
    }
  });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a.at(i);
    // Split by sign so exp never overflows.
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  return make_result(a.shape(), std::move(out), {a}, [a](Node& self) {
    auto& g = a.node()->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = self.data[i];
      g[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor activation(const Tensor& a, Activation kind) {
  switch (kind) {
    case Activation::relu:
      return relu(a);
    case Activation::sigmoid:
      return sigmoid(a);
    case Activation::none:
      break;
  }
  return a;
}

Tensor conv3d(const Tensor& input, const Tensor& weights, int stride, int padding) {
  return conv3d(input, weights, Tensor{}, stride, padding);
}

Tensor conv3d(const Tensor& input, const Tensor& weights, const Tensor& bias, int stride,
              int padding) {
  if (input.rank() != 4) throw ShapeError("conv3d: input must be [C,D,H,W], got " + shape_str(input.shape()));
  if (weights.rank() != 5) {
    throw ShapeError("conv3d: weights must be [C_out,C_in,k,k,k], got " + shape_str(weights.shape()));
  }
  const int c_in = static_cast<int>(input.dim(0));
  const int depth = static_cast<int>(input.dim(1));
  const int height = static_cast<int>(input.dim(2));
  const int width = static_cast<int>(input.dim(3));
  const int c_out = static_cast<int>(weights.dim(0));
  const int k = static_cast<int>(weights.dim(2));
  if (static_cast<int>(weights.dim(1)) != c_in) {
    throw ShapeError("conv3d: input has " + std::to_string(c_in) + " channels but weights expect " +
                     std::to_string(weights.dim(1)));
  }
  if (weights.dim(3) != weights.dim(2) || weights.dim(4) != weights.dim(2) || k % 2 == 0) {
    throw ShapeError("conv3d: kernel must be cubic with odd extent, got " + shape_str(weights.shape()));
  }
  if (stride < 1 || padding < 0) throw std::invalid_argument("conv3d: stride >= 1 and padding >= 0 required");
  if (bias.defined() && bias.shape() != Shape{static_cast<std::size_t>(c_out)}) {
    throw ShapeError("conv3d: bias must be [" + std::to_string(c_out) + "], got " + shape_str(bias.shape()));
  }
  const int out_d = (depth + 2 * padding - k) / stride + 1;
  const int out_h = (height + 2 * padding - k) / stride + 1;
  const int out_w = (width + 2 * padding - k) / stride + 1;
  if (out_d < 1 || out_h < 1 || out_w < 1) throw ShapeError("conv3d: kernel larger than padded input");

  const int pd = depth + 2 * padding;
  const int ph = height + 2 * padding;
  const int pw = width + 2 * padding;
  const std::size_t p_plane = static_cast<std::size_t>(ph) * pw;
  const std::size_t p_vol = p_plane * pd;
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
  const std::size_t out_vol = out_plane * out_d;

  // Zero-padded copy of the input, so the tap loops need no bounds checks.
  auto padded = std::make_shared<std::vector<double>>(static_cast<std::size_t>(c_in) * p_vol, 0.0);
  {
    const double* in = input.data().data();
    for (int ci = 0; ci < c_in; ++ci) {
      for (int z = 0; z < depth; ++z) {
        for (int y = 0; y < height; ++y) {
          const double* src = in + ((static_cast<std::size_t>(ci) * depth + z) * height + y) * width;
          double* dst = padded->data() + ci * p_vol + (z + padding) * p_plane +
                        static_cast<std::size_t>(y + padding) * pw + padding;
          std::copy_n(src, width, dst);
        }
      }
    }
  }

  // Calls fn(out_row_offset, padded_row_offset, weight_row_offset) for every
  // output row and every (ci, kz, ky); the kx taps are handled by fn.
  auto for_each_row = [=](auto&& fn) {
    for (int co = 0; co < c_out; ++co) {
      for (int oz = 0; oz < out_d; ++oz) {
        for (int oy = 0; oy < out_h; ++oy) {
          const std::size_t out_row = co * out_vol + oz * out_plane + static_cast<std::size_t>(oy) * out_w;
          for (int ci = 0; ci < c_in; ++ci) {
            for (int kz = 0; kz < k; ++kz) {
              for (int ky = 0; ky < k; ++ky) {
                const std::size_t p_row = ci * p_vol + (oz * stride + kz) * p_plane +
                                          static_cast<std::size_t>(oy * stride + ky) * pw;
                const std::size_t w_row = ((static_cast<std::size_t>(co) * c_in + ci) * k + kz) * k * k + ky * k;
                fn(out_row, p_row, w_row);
              }
            }
          }
        }
      }
    }
  };
  const bool fused = k == 3 && stride == 1;

  std::vector<double> out(static_cast<std::size_t>(c_out) * out_vol, 0.0);
  if (bias.defined()) {
    for (int co = 0; co < c_out; ++co) {
      std::fill_n(out.begin() + co * out_vol, out_vol, bias.at(co));
    }
  }
  {
    const double* pin = padded->data();
    const double* w = weights.data().data();
    double* o = out.data();
    for_each_row([&](std::size_t out_row, std::size_t p_row, std::size_t w_row) {
      double* op = o + out_row;
      const double* ip = pin + p_row;
      const double* wk = w + w_row;
      if (fused) {
        const double w0 = wk[0], w1 = wk[1], w2 = wk[2];
        for (int x = 0; x < out_w; ++x) op[x] += w0 * ip[x] + w1 * ip[x + 1] + w2 * ip[x + 2];
      } else {
        for (int kx = 0; kx < k; ++kx) {
          for (int x = 0; x < out_w; ++x) op[x] += wk[kx] * ip[x * stride + kx];
        }
      }
    });
  }

  Shape out_shape{static_cast<std::size_t>(c_out), static_cast<std::size_t>(out_d),
                  static_cast<std::size_t>(out_h), static_cast<std::size_t>(out_w)};
  return make_result(std::move(out_shape), std::move(out), {input, weights, bias},
                     [=](Node& self) {
                       const double* go = self.grad.data();
                       const double* w = weights.data().data();
                       const double* pin = padded->data();
                       std::vector<double>* gin = grad_sink(input);
                       std::vector<double>* gw = grad_sink(weights);
                       if (auto* gb = grad_sink(bias)) {
                         for (int co = 0; co < c_out; ++co) {
                           double acc = 0.0;
                           for (std::size_t i = 0; i < out_vol; ++i) acc += go[co * out_vol + i];
                           (*gb)[co] += acc;
                         }
                       }
                       if (!gin && !gw) return;
                       std::vector<double> gpad(gin ? static_cast<std::size_t>(c_in) * p_vol : 0, 0.0);
                       double* gwp = gw ? gw->data() : nullptr;
                       for_each_row([&](std::size_t out_row, std::size_t p_row, std::size_t w_row) {
                         const double* gop = go + out_row;
                         if (gwp) {
                           const double* ip = pin + p_row;
                           double* gwk = gwp + w_row;
                           if (fused) {
                             double a0 = 0.0, a1 = 0.0, a2 = 0.0;
#pragma omp simd reduction(+ : a0, a1, a2)
                             for (int x = 0; x < out_w; ++x) {
                               a0 += gop[x] * ip[x];
                               a1 += gop[x] * ip[x + 1];
                               a2 += gop[x] * ip[x + 2];
                             }
                             gwk[0] += a0;
                             gwk[1] += a1;
                             gwk[2] += a2;
                           } else {
                             for (int kx = 0; kx < k; ++kx) {
                               double acc = 0.0;
#pragma omp simd reduction(+ : acc)
                               for (int x = 0; x < out_w; ++x) acc += gop[x] * ip[x * stride + kx];
                               gwk[kx] += acc;
                             }
                           }
                         }
                         if (gin) {
                           const double* wk = w + w_row;
                           double* gp = gpad.data() + p_row;
                           if (fused && out_w >= 2) {
                             // gp[x] gathers gop[x - kx] * w[kx] over the taps that exist.
                             const double w0 = wk[0], w1 = wk[1], w2 = wk[2];
                             gp[0] += w0 * gop[0];
                             gp[1] += w0 * gop[1] + w1 * gop[0];
                             for (int x = 2; x < out_w; ++x) gp[x] += w0 * gop[x] + w1 * gop[x - 1] + w2 * gop[x - 2];
                             gp[out_w] += w1 * gop[out_w - 1] + w2 * gop[out_w - 2];
                             gp[out_w + 1] += w2 * gop[out_w - 1];
                           } else {
                             for (int kx = 0; kx < k; ++kx) {
                               for (int x = 0; x < out_w; ++x) gp[x * stride + kx] += wk[kx] * gop[x];
                             }
                           }
                         }
                       });
                       if (gin) {
                         for (int ci = 0; ci < c_in; ++ci) {
                           for (int z = 0; z < depth; ++z) {
                             for (int y = 0; y < height; ++y) {
                               double* dst = gin->data() + ((static_cast<std::size_t>(ci) * depth + z) * height + y) * width;
                               const double* src = gpad.data() + ci * p_vol + (z + padding) * p_plane +
                                                   static_cast<std::size_t>(y + padding) * pw + padding;
                               for (int x = 0; x < width; ++x) dst[x] += src[x];
                             }
                           }
                         }
                       }
                     });
}

Tensor roi_gap(const Tensor& feature_map, const Box3& roi) {
  if (feature_map.rank() != 4) {
    throw ShapeError("roi_gap: feature map must be [C,D,H,W], got " + shape_str(feature_map.shape()));
  }
  const Index3 extent{static_cast<int>(feature_map.dim(1)), static_cast<int>(feature_map.dim(2)),
                      static_cast<int>(feature_map.dim(3))};
  if (roi.empty() || !roi.inside(extent)) {
    throw std::out_of_range("roi_gap: roi " + to_string(roi) + " is empty or outside feature map " +
                            shape_str(feature_map.shape()));
  }
  const std::size_t channels = feature_map.dim(0);
  const std::size_t plane = static_cast<std::size_t>(extent[1]) * extent[2];
  const std::size_t vol = plane * extent[0];
  const double inv_count = 1.0 / static_cast<double>(roi.volume());
  std::vector<double> out(channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    double acc = 0.0;
    for (int z = roi.lo[0]; z < roi.hi[0]; ++z) {
      for (int y = roi.lo[1]; y < roi.hi[1]; ++y) {
        const double* row = feature_map.data().data() + c * vol + z * plane + static_cast<std::size_t>(y) * extent[2];
        for (int x = roi.lo[2]; x < roi.hi[2]; ++x) acc += row[x];
      }
    }
    out[c] = acc * inv_count;
  }
  return make_result(Shape{channels}, std::move(out), {feature_map},
                     [feature_map, roi, channels, plane, vol, inv_count, extent](Node& self) {
                       auto& g = feature_map.node()->ensure_grad();
                       for (std::size_t c = 0; c < channels; ++c) {
                         const double gc = self.grad[c] * inv_count;
                         for (int z = roi.lo[0]; z < roi.hi[0]; ++z) {
                           for (int y = roi.lo[1]; y < roi.hi[1]; ++y) {
                             double* row = g.data() + c * vol + z * plane + static_cast<std::size_t>(y) * extent[2];
                             for (int x = roi.lo[2]; x < roi.hi[2]; ++x) row[x] += gc;
                           }
                         }
                       }
                     });
}

Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (weights.rank() != 2) throw ShapeError("linear: weights must be [N_out,N_in], got " + shape_str(weights.shape()));
  const std::size_t n_out = weights.dim(0);
  const std::size_t n_in = weights.dim(1);
  const bool batched = input.rank() == 2;
  if (!(input.rank() == 1 || batched) || input.shape().back() != n_in) {
    throw ShapeError("linear: input " + shape_str(input.shape()) + " incompatible with weights " +
                     shape_str(weights.shape()));
  }
  if (bias.defined() && bias.shape() != Shape{n_out}) {
    throw ShapeError("linear: bias must be [" + std::to_string(n_out) + "], got " + shape_str(bias.shape()));
  }
  const std::size_t rows = batched ? input.dim(0) : 1;
  std::vector<double> out(rows * n_out);
  const double* x = input.data().data();
  const double* w = weights.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < n_out; ++o) {
      double acc = bias.defined() ? bias.at(o) : 0.0;
      const double* wr = w + o * n_in;
      const double* xr = x + r * n_in;
      for (std::size_t i = 0; i < n_in; ++i) acc += wr[i] * xr[i];
      out[r * n_out + o] = acc;
    }
  }
  Shape out_shape = batched ? Shape{rows, n_out} : Shape{n_out};
  return make_result(std::move(out_shape), std::move(out), {input, weights, bias},
                     [=](Node& self) {
                       const double* go = self.grad.data();
                       const double* xv = input.data().data();
                       const double* wv = weights.data().data();
                       if (auto* gx = grad_sink(input)) {
                         for (std::size_t r = 0; r < rows; ++r) {
                           double* gxr = gx->data() + r * n_in;
                           for (std::size_t o = 0; o < n_out; ++o) {
                             const double g = go[r * n_out + o];
                             const double* wr = wv + o * n_in;
                             for (std::size_t i = 0; i < n_in; ++i) gxr[i] += g * wr[i];
                           }
                         }
                       }
                       if (auto* gw = grad_sink(weights)) {
                         for (std::size_t r = 0; r < rows; ++r) {
                           const double* xr = xv + r * n_in;
                           for (std::size_t o = 0; o < n_out; ++o) {
                             const double g = go[r * n_out + o];
                             double* gwr = gw->data() + o * n_in;
                             for (std::size_t i = 0; i < n_in; ++i) gwr[i] += g * xr[i];
                           }
                         }
                       }
                       if (auto* gb = grad_sink(bias)) {
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t o = 0; o < n_out; ++o) (*gb)[o] += go[r * n_out + o];
                         }
                       }
                     });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), kk = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < kk; ++p) {
      const double av = a.at(i * kk + p);
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * b.at(p * n + j);
    }
  }
  return make_result(Shape{m, n}, std::move(out), {a, b}, [a, b, m, kk, n](Node& self) {
    const double* go = self.grad.data();
    if (auto* ga = grad_sink(a)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < kk; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += go[i * n + j] * b.at(p * n + j);
          (*ga)[i * kk + p] += acc;
        }
      }
    }
    if (auto* gb = grad_sink(b)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < kk; ++p) {
          const double av = a.at(i * kk + p);
          for (std::size_t j = 0; j < n; ++j) (*gb)[p * n + j] += av * go[i * n + j];
        }
      }
    }
  });
}

Tensor softmax_rows(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("softmax_rows: expected [M,N], got " + shape_str(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double peak = a.at(i * n);
    for (std::size_t j = 1; j < n; ++j) peak = std::max(peak, a.at(i * n + j));
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(a.at(i * n + j) - peak);
      total += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= total;
  }
  return make_result(Shape{m, n}, std::move(out), {a}, [a, m, n](Node& self) {
    auto& g = a.node()->ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += self.grad[i * n + j] * self.data[i * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        g[i * n + j] += self.data[i * n + j] * (self.grad[i * n + j] - dot);
      }
    }
  });
}

Tensor pairwise_concat(const Tensor& targets, const Tensor& sources) {
  if (targets.rank() != 2 || sources.rank() != 2 || targets.dim(0) != sources.dim(0)) {
    throw ShapeError("pairwise_concat: expected [N,d] inputs with equal N, got " +
                     shape_str(targets.shape()) + " and " + shape_str(sources.shape()));
  }
  const std::size_t n = targets.dim(0), dt = targets.dim(1), ds = sources.dim(1);
  const std::size_t width = dt + ds;
  std::vector<double> out(n * n * width);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      double* row = out.data() + (u * n + v) * width;
      std::copy_n(targets.data().begin() + u * dt, dt, row);
      std::copy_n(sources.data().begin() + v * ds, ds, row + dt);
    }
  }
  return make_result(Shape{n * n, width}, std::move(out), {targets, sources},
                     [targets, sources, n, dt, ds, width](Node& self) {
                       auto* gt = grad_sink(targets);
                       auto* gs = grad_sink(sources);
                       for (std::size_t u = 0; u < n; ++u) {
                         for (std::size_t v = 0; v < n; ++v) {
                           const double* row = self.grad.data() + (u * n + v) * width;
                           if (gt) {
                             for (std::size_t i = 0; i < dt; ++i) (*gt)[u * dt + i] += row[i];
                           }
                           if (gs) {
                             for (std::size_t i = 0; i < ds; ++i) (*gs)[v * ds + i] += row[dt + i];
                           }
                         }
                       }
                     });
}

Tensor block_sum(const Tensor& a, std::size_t block) {
  if (a.rank() != 2 || block == 0 || a.dim(0) % block != 0) {
    throw ShapeError("block_sum: " + shape_str(a.shape()) + " not divisible into blocks of " +
                     std::to_string(block));
  }
  const std::size_t groups = a.dim(0) / block, d = a.dim(1);
  std::vector<double> out(groups * d, 0.0);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t r = 0; r < block; ++r) {
      const double* row = a.data().data() + (g * block + r) * d;
      for (std::size_t i = 0; i < d; ++i) out[g * d + i] += row[i];
    }
  }
  return make_result(Shape{groups, d}, std::move(out), {a}, [a, groups, block, d](Node& self) {
    auto& ga = a.node()->ensure_grad();
    for (std::size_t g = 0; g < groups; ++g) {
      for (std::size_t r = 0; r < block; ++r) {
        for (std::size_t i = 0; i < d; ++i) ga[(g * block + r) * d + i] += self.grad[g * d + i];
      }
    }
  });
}

Tensor bce_loss(const Tensor& predictions, const Tensor& labels, double positive_weight) {
  if (predictions.numel() != labels.numel()) {
    throw ShapeError("bce_loss: " + std::to_string(predictions.numel()) + " predictions vs " +
                     std::to_string(labels.numel()) + " labels");
  }
  if (!(positive_weight > 0.0)) throw std::invalid_argument("bce_loss: positive_weight must be > 0");
  for (double y : labels.data()) {
    if (y != 0.0 && y != 1.0) {
      throw std::invalid_argument("bce_loss: label " + std::to_string(y) + " is not in {0,1}");
    }
  }
  const std::size_t n = predictions.numel();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(predictions.at(i), kProbabilityClamp, 1.0 - kProbabilityClamp);
    const double y = labels.at(i);
    total -= positive_weight * y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return make_result(Shape{1}, {total / static_cast<double>(n)}, {predictions, labels},
                     [predictions, labels, positive_weight, n](Node& self) {
                       auto* g = grad_sink(predictions);
                       if (!g) return;
                       const double scale_factor = self.grad[0] / static_cast<double>(n);
                       for (std::size_t i = 0; i < n; ++i) {
                         const double raw = predictions.at(i);
                         if (raw < kProbabilityClamp || raw > 1.0 - kProbabilityClamp) continue;
                         const double y = labels.at(i);
                         (*g)[i] += scale_factor * (-positive_weight * y / raw + (1.0 - y) / (1.0 - raw));
                       }
                     });
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& labels, double positive_weight) {
  if (logits.numel() != labels.numel()) {
    throw ShapeError("bce_with_logits: " + std::to_string(logits.numel()) + " logits vs " +
                     std::to_string(labels.numel()) + " labels");
  }
  if (!(positive_weight > 0.0)) throw std::invalid_argument("bce_with_logits: positive_weight must be > 0");
  for (double y : labels.data()) {
    if (y != 0.0 && y != 1.0) {
      throw std::invalid_argument("bce_with_logits: label " + std::to_string(y) + " is not in {0,1}");
    }
  }
  // softplus(z) = -log(1 - sigmoid(z)), softplus(-z) = -log(sigmoid(z))
  auto softplus = [](double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); };
  const std::size_t n = logits.numel();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits.at(i), y = labels.at(i);
    total += positive_weight * y * softplus(-z) + (1.0 - y) * softplus(z);
  }
  return make_result(Shape{1}, {total / static_cast<double>(n)}, {logits, labels},
                     [logits, labels, positive_weight, n](Node& self) {
                       auto* g = grad_sink(logits);
                       if (!g) return;
                       const double scale_factor = self.grad[0] / static_cast<double>(n);
                       for (std::size_t i = 0; i < n; ++i) {
                         const double z = logits.at(i), y = labels.at(i);
                         const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
                         (*g)[i] += scale_factor * (positive_weight * y * (s - 1.0) + (1.0 - y) * s);
                       }
                     });
}

}  // namespace lnrel

#include "susl/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace susl {

namespace {

int floor_div(int a, int b) {
  int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

int ceil_div(int a, int b) { return -floor_div(-a, b); }

// Decompose a shape around one axis: outer x axis x inner.
struct AxisSplit {
  int64_t outer = 1, axis = 1, inner = 1;
};

AxisSplit split_axis(std::span<const int> shape, int axis) {
  if (axis < 0 || axis >= static_cast<int>(shape.size()))
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape));
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<size_t>(i)];
  s.axis = shape[static_cast<size_t>(axis)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

bool row_broadcastable(const Array& a, const Array& b) {
  // (n, d) against (d) or (1, d)
  if (a.rank() != 2) return false;
  if (b.rank() == 1) return b.dim(0) == a.dim(1);
  if (b.rank() == 2) return b.dim(0) == 1 && b.dim(1) == a.dim(1);
  return false;
}

struct ConvDims {
  int batch, in_channels, length;
  bool batched;
};

ConvDims conv_input_dims(const Array& x, const char* op) {
  if (x.rank() == 2) return {1, x.dim(0), x.dim(1), false};
  if (x.rank() == 3) return {x.dim(0), x.dim(1), x.dim(2), true};
  throw ShapeError(std::string(op) + ": input must be (channels, length) or (batch, channels, length), got " +
                   shape_str(x.shape()));
}

}  // namespace

int conv1d_output_length(int length, int kernel, int stride, int padding) {
  return (length + 2 * padding - kernel) / stride + 1;
}

int transposed_conv1d_output_length(int length, int kernel, int stride, int padding, int output_padding) {
  return (length - 1) * stride - 2 * padding + kernel + output_padding;
}

Tape::NodeId Tape::push(Array value, const char* op, std::function<void(Tape&, const Array&)> backprop) {
  if (!value.all_finite())
    throw NumericError(std::string(op) + " produced non-finite values (shape " + shape_str(value.shape()) + ")");
  nodes_.push_back(Node{std::move(value), std::move(backprop)});
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::leaf(Array value) { return push(std::move(value), "leaf", nullptr); }

Array& Tape::grad_slot(NodeId id) {
  auto i = static_cast<size_t>(id);
  if (!has_grad_[i]) {
    grads_[i] = Array(nodes_[i].value.shape());
    has_grad_[i] = 1;
  }
  return grads_[i];
}

void Tape::add_grad(NodeId id, const Array& g) { accumulate(grad_slot(id), g); }

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Array& va = value(a);
  const Array& vb = value(b);
  if (va.same_shape(vb)) {
    Array out = va;
    const double* pb = vb.data();
    for (int64_t i = 0; i < out.size(); ++i) out[i] += pb[i];
    return push(std::move(out), "add", [a, b](Tape& t, const Array& g) {
      t.add_grad(a, g);
      t.add_grad(b, g);
    });
  }
  if (row_broadcastable(va, vb)) {
    const int n = va.dim(0), d = va.dim(1);
    Array out = va;
    const double* pb = vb.data();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) out[static_cast<int64_t>(i) * d + j] += pb[j];
    return push(std::move(out), "add", [a, b, n, d](Tape& t, const Array& g) {
      t.add_grad(a, g);
      Array& gb = t.grad_slot(b);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) gb[j] += g[static_cast<int64_t>(i) * d + j];
    });
  }
  throw ShapeError("add: shape " + shape_str(va.shape()) + " vs " + shape_str(vb.shape()));
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  const Array& va = value(a);
  const Array& vb = value(b);
  if (va.same_shape(vb)) {
    Array out = va;
    const double* pb = vb.data();
    for (int64_t i = 0; i < out.size(); ++i) out[i] -= pb[i];
    return push(std::move(out), "sub", [a, b](Tape& t, const Array& g) {
      t.add_grad(a, g);
      Array& gb = t.grad_slot(b);
      for (int64_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    });
  }
  if (row_broadcastable(va, vb)) {
    const int n = va.dim(0), d = va.dim(1);
    Array out = va;
    const double* pb = vb.data();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) out[static_cast<int64_t>(i) * d + j] -= pb[j];
    return push(std::move(out), "sub", [a, b, n, d](Tape& t, const Array& g) {
      t.add_grad(a, g);
      Array& gb = t.grad_slot(b);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) gb[j] -= g[static_cast<int64_t>(i) * d + j];
    });
  }
  throw ShapeError("sub: shape " + shape_str(va.shape()) + " vs " + shape_str(vb.shape()));
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  const Array& va = value(a);
  const Array& vb = value(b);
  if (!va.same_shape(vb))
    throw ShapeError("mul: shape " + shape_str(va.shape()) + " vs " + shape_str(vb.shape()));
  Array out = va;
  const double* pb = vb.data();
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= pb[i];
  return push(std::move(out), "mul", [a, b](Tape& t, const Array& g) {
    const Array& va = t.value(a);
    const Array& vb = t.value(b);
    Array& ga = t.grad_slot(a);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    Array& gb = t.grad_slot(b);
    for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
  });
}

Tape::NodeId Tape::scale(NodeId a, double factor) {
  Array out = value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= factor;
  return push(std::move(out), "scale", [a, factor](Tape& t, const Array& g) {
    Array& ga = t.grad_slot(a);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

Tape::NodeId Tape::add_const(NodeId a, double constant) {
  Array out = value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] += constant;
  return push(std::move(out), "add_const", [a](Tape& t, const Array& g) { t.add_grad(a, g); });
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  const Array& va = value(a);
  const Array& vb = value(b);
  if (va.rank() != 2 || vb.rank() != 2 || va.dim(1) != vb.dim(0))
    throw ShapeError("matmul: shape " + shape_str(va.shape()) + " vs " + shape_str(vb.shape()));
  const int m = va.dim(0), k = va.dim(1), n = vb.dim(1);
  Array out({m, n});
  {
    const double* pa = va.data();
    const double* pb = vb.data();
    double* pc = out.data();
    for (int i = 0; i < m; ++i)
      for (int l = 0; l < k; ++l) {
        const double av = pa[static_cast<int64_t>(i) * k + l];
        const double* brow = pb + static_cast<int64_t>(l) * n;
        double* crow = pc + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
  }
  return push(std::move(out), "matmul", [a, b, m, k, n](Tape& t, const Array& g) {
    const double* pa = t.value(a).data();
    const double* pb = t.value(b).data();
    const double* pg = g.data();
    {
      Array& ga = t.grad_slot(a);
      double* pga = ga.data();
      for (int i = 0; i < m; ++i)
        for (int l = 0; l < k; ++l) {
          const double* grow = pg + static_cast<int64_t>(i) * n;
          const double* brow = pb + static_cast<int64_t>(l) * n;
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
          pga[static_cast<int64_t>(i) * k + l] += acc;
        }
    }
    {
      Array& gb = t.grad_slot(b);
      double* pgb = gb.data();
      for (int i = 0; i < m; ++i)
        for (int l = 0; l < k; ++l) {
          const double av = pa[static_cast<int64_t>(i) * k + l];
          if (av == 0.0) continue;
          const double* grow = pg + static_cast<int64_t>(i) * n;
          double* gbrow = pgb + static_cast<int64_t>(l) * n;
          for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
    }
  });
}

Tape::NodeId Tape::conv1d(NodeId x, NodeId w, int stride, int padding) {
  return conv1d(x, w, -1, stride, padding);
}

Tape::NodeId Tape::conv1d(NodeId x, NodeId w, NodeId bias, int stride, int padding) {
  const Array& vx = value(x);
  const Array& vw = value(w);
  const ConvDims in = conv_input_dims(vx, "conv1d");
  if (vw.rank() != 3 || vw.dim(1) != in.in_channels)
    throw ShapeError("conv1d: weight " + shape_str(vw.shape()) + " incompatible with input " + shape_str(vx.shape()));
  if (stride < 1 || padding < 0) throw ShapeError("conv1d: stride must be >= 1 and padding >= 0");
  const int co = vw.dim(0), ci = vw.dim(1), kk = vw.dim(2), L = in.length;
  const int lo_n = conv1d_output_length(L, kk, stride, padding);
  if (lo_n < 1)
    throw ShapeError("conv1d: kernel " + std::to_string(kk) + " too large for input " + shape_str(vx.shape()));
  if (bias >= 0 && (value(bias).rank() != 1 || value(bias).dim(0) != co))
    throw ShapeError("conv1d: bias " + shape_str(value(bias).shape()) + " must be (" + std::to_string(co) + ")");

  Array out(in.batched ? std::vector<int>{in.batch, co, lo_n} : std::vector<int>{co, lo_n});
  const double* px = vx.data();
  const double* pw = vw.data();
  double* py = out.data();
  for (int n = 0; n < in.batch; ++n)
    for (int c = 0; c < co; ++c) {
      double* yrow = py + (static_cast<int64_t>(n) * co + c) * lo_n;
      for (int ic = 0; ic < ci; ++ic) {
        const double* xrow = px + (static_cast<int64_t>(n) * ci + ic) * L;
        for (int k = 0; k < kk; ++k) {
          const double wv = pw[(static_cast<int64_t>(c) * ci + ic) * kk + k];
          const int off = k - padding;
          const int lo_min = std::max(0, ceil_div(-off, stride));
          const int lo_max = std::min(lo_n - 1, floor_div(L - 1 - off, stride));
          for (int lo = lo_min; lo <= lo_max; ++lo) yrow[lo] += wv * xrow[lo * stride + off];
        }
      }
      if (bias >= 0) {
        const double bv = value(bias)[c];
        for (int lo = 0; lo < lo_n; ++lo) yrow[lo] += bv;
      }
    }

  auto back = [x, w, bias, stride, padding, in, co, ci, kk, L, lo_n](Tape& t, const Array& g) {
    const double* px = t.value(x).data();
    const double* pw = t.value(w).data();
    const double* pg = g.data();
    Array& gx = t.grad_slot(x);
    Array& gw = t.grad_slot(w);
    for (int n = 0; n < in.batch; ++n)
      for (int c = 0; c < co; ++c) {
        const double* grow = pg + (static_cast<int64_t>(n) * co + c) * lo_n;
        for (int ic = 0; ic < ci; ++ic) {
          const double* xrow = px + (static_cast<int64_t>(n) * ci + ic) * L;
          double* gxrow = gx.data() + (static_cast<int64_t>(n) * ci + ic) * L;
          for (int k = 0; k < kk; ++k) {
            const int64_t wi = (static_cast<int64_t>(c) * ci + ic) * kk + k;
            const double wv = pw[wi];
            const int off = k - padding;
            const int lo_min = std::max(0, ceil_div(-off, stride));
            const int lo_max = std::min(lo_n - 1, floor_div(L - 1 - off, stride));
            double wacc = 0.0;
            for (int lo = lo_min; lo <= lo_max; ++lo) {
              const double gv = grow[lo];
              gxrow[lo * stride + off] += gv * wv;
              wacc += gv * xrow[lo * stride + off];
            }
            gw[wi] += wacc;
          }
        }
        if (bias >= 0) {
          Array& gb = t.grad_slot(bias);
          double acc = 0.0;
          for (int lo = 0; lo < lo_n; ++lo) acc += grow[lo];
          gb[c] += acc;
        }
      }
  };
  return push(std::move(out), "conv1d", std::move(back));
}

Tape::NodeId Tape::transposed_conv1d(NodeId x, NodeId w, int stride, int padding, int output_padding) {
  return transposed_conv1d(x, w, -1, stride, padding, output_padding);
}

Tape::NodeId Tape::transposed_conv1d(NodeId x, NodeId w, NodeId bias, int stride, int padding, int output_padding) {
  const Array& vx = value(x);
  const Array& vw = value(w);
  const ConvDims in = conv_input_dims(vx, "transposed_conv1d");
  if (vw.rank() != 3 || vw.dim(0) != in.in_channels)
    throw ShapeError("transposed_conv1d: weight " + shape_str(vw.shape()) + " incompatible with input " +
                     shape_str(vx.shape()));
  if (stride < 1 || padding < 0 || output_padding < 0 || output_padding >= stride)
    throw ShapeError("transposed_conv1d: need stride >= 1, padding >= 0, 0 <= output_padding < stride");
  const int ci = vw.dim(0), co = vw.dim(1), kk = vw.dim(2), L = in.length;
  const int lo_n = transposed_conv1d_output_length(L, kk, stride, padding, output_padding);
  if (lo_n < 1) throw ShapeError("transposed_conv1d: empty output for input " + shape_str(vx.shape()));
  if (bias >= 0 && (value(bias).rank() != 1 || value(bias).dim(0) != co))
    throw ShapeError("transposed_conv1d: bias " + shape_str(value(bias).shape()) + " must be (" + std::to_string(co) + ")");

  Array out(in.batched ? std::vector<int>{in.batch, co, lo_n} : std::vector<int>{co, lo_n});
  const double* px = vx.data();
  const double* pw = vw.data();
  double* py = out.data();
  for (int n = 0; n < in.batch; ++n) {
    for (int ic = 0; ic < ci; ++ic) {
      const double* xrow = px + (static_cast<int64_t>(n) * ci + ic) * L;
      for (int c = 0; c < co; ++c) {
        double* yrow = py + (static_cast<int64_t>(n) * co + c) * lo_n;
        for (int k = 0; k < kk; ++k) {
          const double wv = pw[(static_cast<int64_t>(ic) * co + c) * kk + k];
          const int off = k - padding;
          // lo = l*stride + off must land inside [0, lo_n)
          const int l_min = std::max(0, ceil_div(-off, stride));
          const int l_max = std::min(L - 1, floor_div(lo_n - 1 - off, stride));
          for (int l = l_min; l <= l_max; ++l) yrow[l * stride + off] += wv * xrow[l];
        }
      }
    }
    if (bias >= 0)
      for (int c = 0; c < co; ++c) {
        const double bv = value(bias)[c];
        double* yrow = py + (static_cast<int64_t>(n) * co + c) * lo_n;
        for (int lo = 0; lo < lo_n; ++lo) yrow[lo] += bv;
      }
  }

  auto back = [x, w, bias, stride, padding, in, ci, co, kk, L, lo_n](Tape& t, const Array& g) {
    const double* px = t.value(x).data();
    const double* pw = t.value(w).data();
    const double* pg = g.data();
    Array& gx = t.grad_slot(x);
    Array& gw = t.grad_slot(w);
    for (int n = 0; n < in.batch; ++n) {
      for (int ic = 0; ic < ci; ++ic) {
        const double* xrow = px + (static_cast<int64_t>(n) * ci + ic) * L;
        double* gxrow = gx.data() + (static_cast<int64_t>(n) * ci + ic) * L;
        for (int c = 0; c < co; ++c) {
          const double* grow = pg + (static_cast<int64_t>(n) * co + c) * lo_n;
          for (int k = 0; k < kk; ++k) {
            const int64_t wi = (static_cast<int64_t>(ic) * co + c) * kk + k;
            const double wv = pw[wi];
            const int off = k - padding;
            const int l_min = std::max(0, ceil_div(-off, stride));
            const int l_max = std::min(L - 1, floor_div(lo_n - 1 - off, stride));
            double wacc = 0.0;
            for (int l = l_min; l <= l_max; ++l) {
              const double gv = grow[l * stride + off];
              gxrow[l] += gv * wv;
              wacc += gv * xrow[l];
            }
            gw[wi] += wacc;
          }
        }
      }
      if (bias >= 0) {
        Array& gb = t.grad_slot(bias);
        for (int c = 0; c < co; ++c) {
          const double* grow = pg + (static_cast<int64_t>(n) * co + c) * lo_n;
          double acc = 0.0;
          for (int lo = 0; lo < lo_n; ++lo) acc += grow[lo];
          gb[c] += acc;
        }
      }
    }
  };
  return push(std::move(out), "transposed_conv1d", std::move(back));
}

Tape::NodeId Tape::relu(NodeId a) {
  Array out = value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], 0.0);
  return push(std::move(out), "relu", [a](Tape& t, const Array& g) {
    const Array& v = t.value(a);
    Array& ga = t.grad_slot(a);
    for (int64_t i = 0; i < g.size(); ++i)
      if (v[i] > 0.0) ga[i] += g[i];
  });
}

Tape::NodeId Tape::softplus(NodeId a) {
  Array out = value(a);
  for (int64_t i = 0; i < out.size(); ++i) {
    const double x = out[i];
    out[i] = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  }
  return push(std::move(out), "softplus", [a](Tape& t, const Array& g) {
    const Array& v = t.value(a);
    Array& ga = t.grad_slot(a);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] / (1.0 + std::exp(-v[i]));
  });
}

Tape::NodeId Tape::exp(NodeId a) {
  Array out = value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  return push(std::move(out), "exp", [a, self = static_cast<NodeId>(nodes_.size())](Tape& t, const Array& g) {
    const Array& y = t.value(self);
    Array& ga = t.grad_slot(a);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
  });
}

Tape::NodeId Tape::log(NodeId a) {
  Array out = value(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
  return push(std::move(out), "log", [a](Tape& t, const Array& g) {
    const Array& v = t.value(a);
    Array& ga = t.grad_slot(a);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] / v[i];
  });
}

Tape::NodeId Tape::softmax(NodeId a, int axis) {
  const Array& va = value(a);
  const AxisSplit s = split_axis(va.shape(), axis);
  Array out = va;
  for (int64_t o = 0; o < s.outer; ++o)
    for (int64_t i = 0; i < s.inner; ++i) {
      const int64_t base = o * s.axis * s.inner + i;
      double m = out[base];
      for (int64_t j = 1; j < s.axis; ++j) m = std::max(m, out[base + j * s.inner]);
      double z = 0.0;
      for (int64_t j = 0; j < s.axis; ++j) {
        const int64_t idx = base + j * s.inner;
        out[idx] = std::exp(out[idx] - m);
        z += out[idx];
      }
      for (int64_t j = 0; j < s.axis; ++j) out[base + j * s.inner] /= z;
    }
  return push(std::move(out), "softmax",
              [s, a, self = static_cast<NodeId>(nodes_.size())](Tape& t, const Array& g) {
                const Array& y = t.value(self);
                Array& ga = t.grad_slot(a);
                for (int64_t o = 0; o < s.outer; ++o)
                  for (int64_t i = 0; i < s.inner; ++i) {
                    const int64_t base = o * s.axis * s.inner + i;
                    double dot = 0.0;
                    for (int64_t j = 0; j < s.axis; ++j) {
                      const int64_t idx = base + j * s.inner;
                      dot += g[idx] * y[idx];
                    }
                    for (int64_t j = 0; j < s.axis; ++j) {
                      const int64_t idx = base + j * s.inner;
                      ga[idx] += y[idx] * (g[idx] - dot);
                    }
                  }
              });
}

Tape::NodeId Tape::log_softmax(NodeId a, int axis) {
  const Array& va = value(a);
  const AxisSplit s = split_axis(va.shape(), axis);
  Array out = va;
  for (int64_t o = 0; o < s.outer; ++o)
    for (int64_t i = 0; i < s.inner; ++i) {
      const int64_t base = o * s.axis * s.inner + i;
      double m = out[base];
      for (int64_t j = 1; j < s.axis; ++j) m = std::max(m, out[base + j * s.inner]);
      double z = 0.0;
      for (int64_t j = 0; j < s.axis; ++j) z += std::exp(out[base + j * s.inner] - m);
      const double lse = m + std::log(z);
      for (int64_t j = 0; j < s.axis; ++j) out[base + j * s.inner] -= lse;
    }
  return push(std::move(out), "log_softmax",
              [s, a, self = static_cast<NodeId>(nodes_.size())](Tape& t, const Array& g) {
                const Array& y = t.value(self);
                Array& ga = t.grad_slot(a);
                for (int64_t o = 0; o < s.outer; ++o)
                  for (int64_t i = 0; i < s.inner; ++i) {
                    const int64_t base = o * s.axis * s.inner + i;
                    double gsum = 0.0;
                    for (int64_t j = 0; j < s.axis; ++j) gsum += g[base + j * s.inner];
                    for (int64_t j = 0; j < s.axis; ++j) {
                      const int64_t idx = base + j * s.inner;
                      ga[idx] += g[idx] - std::exp(y[idx]) * gsum;
                    }
                  }
              });
}

Tape::NodeId Tape::sum(NodeId a) {
  const Array& va = value(a);
  double acc = 0.0;
  for (int64_t i = 0; i < va.size(); ++i) acc += va[i];
  return push(Array::scalar(acc), "sum", [a](Tape& t, const Array& g) {
    Array& ga = t.grad_slot(a);
    const double gv = g[0];
    for (int64_t i = 0; i < ga.size(); ++i) ga[i] += gv;
  });
}

Tape::NodeId Tape::mean(NodeId a) {
  const Array& va = value(a);
  double acc = 0.0;
  for (int64_t i = 0; i < va.size(); ++i) acc += va[i];
  const double inv = 1.0 / static_cast<double>(va.size());
  return push(Array::scalar(acc * inv), "mean", [a, inv](Tape& t, const Array& g) {
    Array& ga = t.grad_slot(a);
    const double gv = g[0] * inv;
    for (int64_t i = 0; i < ga.size(); ++i) ga[i] += gv;
  });
}

Tape::NodeId Tape::sum_axis(NodeId a, int axis) {
  const Array& va = value(a);
  const AxisSplit s = split_axis(va.shape(), axis);
  std::vector<int> out_shape;
  for (int i = 0; i < va.rank(); ++i)
    if (i != axis) out_shape.push_back(va.dim(i));
  if (out_shape.empty()) out_shape.push_back(1);
  Array out(out_shape);
  for (int64_t o = 0; o < s.outer; ++o)
    for (int64_t j = 0; j < s.axis; ++j) {
      const double* src = va.data() + (o * s.axis + j) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (int64_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  return push(std::move(out), "sum_axis", [a, s](Tape& t, const Array& g) {
    Array& ga = t.grad_slot(a);
    for (int64_t o = 0; o < s.outer; ++o)
      for (int64_t j = 0; j < s.axis; ++j) {
        double* dst = ga.data() + (o * s.axis + j) * s.inner;
        const double* src = g.data() + o * s.inner;
        for (int64_t i = 0; i < s.inner; ++i) dst[i] += src[i];
      }
  });
}

Tape::NodeId Tape::concat(std::span<const NodeId> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Array& first = value(parts[0]);
  const int rank = first.rank();
  if (axis < 0 || axis >= rank) throw ShapeError("concat: axis " + std::to_string(axis) + " out of range");
  std::vector<int> out_shape = first.shape();
  std::vector<int> extents;
  extents.reserve(parts.size());
  int total = 0;
  for (NodeId p : parts) {
    const Array& v = value(p);
    if (v.rank() != rank) throw ShapeError("concat: rank mismatch");
    for (int i = 0; i < rank; ++i)
      if (i != axis && v.dim(i) != first.dim(i))
        throw ShapeError("concat: shape " + shape_str(v.shape()) + " vs " + shape_str(first.shape()));
    extents.push_back(v.dim(axis));
    total += v.dim(axis);
  }
  out_shape[static_cast<size_t>(axis)] = total;
  const AxisSplit s = split_axis(out_shape, axis);
  Array out(out_shape);
  int offset = 0;
  for (size_t pi = 0; pi < parts.size(); ++pi) {
    const Array& v = value(parts[pi]);
    const int64_t block = static_cast<int64_t>(extents[pi]) * s.inner;
    for (int64_t o = 0; o < s.outer; ++o) {
      const double* src = v.data() + o * block;
      double* dst = out.data() + (o * total + offset) * s.inner;
      for (int64_t i = 0; i < block; ++i) dst[i] = src[i];
    }
    offset += extents[pi];
  }
  std::vector<NodeId> part_ids(parts.begin(), parts.end());
  return push(std::move(out), "concat", [part_ids, extents, s, total](Tape& t, const Array& g) {
    int offset = 0;
    for (size_t pi = 0; pi < part_ids.size(); ++pi) {
      Array& gp = t.grad_slot(part_ids[pi]);
      const int64_t block = static_cast<int64_t>(extents[pi]) * s.inner;
      for (int64_t o = 0; o < s.outer; ++o) {
        const double* src = g.data() + (o * total + offset) * s.inner;
        double* dst = gp.data() + o * block;
        for (int64_t i = 0; i < block; ++i) dst[i] += src[i];
      }
      offset += extents[pi];
    }
  });
}

Tape::NodeId Tape::reshape(NodeId a, std::vector<int> shape) {
  const Array& va = value(a);
  if (shape_size(shape) != va.size())
    throw ShapeError("reshape: " + shape_str(va.shape()) + " to " + shape_str(shape));
  Array out(std::move(shape), std::vector<double>(va.data(), va.data() + va.size()));
  return push(std::move(out), "reshape", [a](Tape& t, const Array& g) {
    Array& ga = t.grad_slot(a);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

void Tape::backward(NodeId loss) {
  if (loss < 0 || static_cast<size_t>(loss) >= nodes_.size()) throw ShapeError("backward: invalid node id");
  if (nodes_[static_cast<size_t>(loss)].value.size() != 1)
    throw ShapeError("backward: loss must be scalar, got shape " +
                     shape_str(nodes_[static_cast<size_t>(loss)].value.shape()));
  grads_.assign(nodes_.size(), Array());
  has_grad_.assign(nodes_.size(), 0);
  grad_slot(loss)[0] = 1.0;
  for (NodeId id = loss; id >= 0; --id) {
    const auto i = static_cast<size_t>(id);
    if (has_grad_[i] && nodes_[i].backprop) nodes_[i].backprop(*this, grads_[i]);
  }
}

Array Tape::grad(NodeId id) const {
  const auto i = static_cast<size_t>(id);
  if (i < has_grad_.size() && has_grad_[i]) return grads_[i];
  return Array(nodes_[i].value.shape());
}

std::vector<Array> Tape::gradients(NodeId loss, std::span<const NodeId> wrt) {
  backward(loss);
  std::vector<Array> out;
  out.reserve(wrt.size());
  for (NodeId id : wrt) out.push_back(grad(id));
  return out;
}

}  // namespace susl

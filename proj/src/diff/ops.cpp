#include "hypervq/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "op_helpers.hpp"

namespace hypervq::diff {
namespace detail {

Tensor make_node(Shape shape, Array value, std::vector<NodePtr> parents,
                 const std::function<std::function<void(Node&)>()>& make_backprop) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  for (const auto& p : parents) {
    if (p->requires_grad) {
      node->requires_grad = true;
      break;
    }
  }
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backprop = make_backprop();
  }
  return Tensor(std::move(node));
}

int normalize_axis(int axis, int ndim) {
  int a = axis < 0 ? axis + ndim : axis;
  if (a < 0 || a >= ndim) {
    throw std::invalid_argument("axis " + std::to_string(axis) + " out of range for ndim " +
                                std::to_string(ndim));
  }
  return a;
}

Shape align_shape(const Shape& s, size_t ndim) {
  Shape r(ndim, 1);
  std::copy(s.begin(), s.end(), r.begin() + (ndim - s.size()));
  return r;
}

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  size_t nd = std::max(a.size(), b.size());
  Shape aa = align_shape(a, nd), bb = align_shape(b, nd);
  Shape out(nd);
  for (size_t i = 0; i < nd; ++i) {
    if (aa[i] == bb[i]) {
      out[i] = aa[i];
    } else if (aa[i] == 1) {
      out[i] = bb[i];
    } else if (bb[i] == 1) {
      out[i] = aa[i];
    } else {
      throw std::invalid_argument("shapes " + shape_str(a) + " and " + shape_str(b) +
                                  " are not broadcastable");
    }
  }
  return out;
}

static std::vector<Eigen::Index> row_major_strides(const Shape& s) {
  std::vector<Eigen::Index> st(s.size());
  Eigen::Index acc = 1;
  for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
    st[i] = acc;
    acc *= s[i];
  }
  return st;
}

Array broadcast_array(const Array& v, const Shape& from, const Shape& to) {
  if (from == to) return v;
  const size_t nd = to.size();
  Shape f = align_shape(from, nd);
  auto fstride = row_major_strides(f);
  for (size_t i = 0; i < nd; ++i) {
    if (f[i] != to[i] && f[i] != 1) {
      throw std::invalid_argument("cannot broadcast " + shape_str(from) + " to " + shape_str(to));
    }
    if (f[i] == 1) fstride[i] = 0;
  }
  Array out(numel(to));
  if (nd == 0) {
    out = v;
    return out;
  }
  std::vector<Eigen::Index> idx(nd, 0);
  Eigen::Index src = 0;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out[i] = v[src];
    for (int ax = static_cast<int>(nd) - 1; ax >= 0; --ax) {
      ++idx[ax];
      src += fstride[ax];
      if (idx[ax] < to[ax]) break;
      src -= fstride[ax] * to[ax];
      idx[ax] = 0;
    }
  }
  return out;
}

Array reduce_to(const Array& g, const Shape& from, const Shape& to) {
  if (from == to) return g;
  const size_t nd = from.size();
  Shape t = align_shape(to, nd);
  auto tstride = row_major_strides(t);
  for (size_t i = 0; i < nd; ++i) {
    if (t[i] != from[i] && t[i] != 1) {
      throw std::invalid_argument("cannot reduce " + shape_str(from) + " to " + shape_str(to));
    }
    if (t[i] == 1) tstride[i] = 0;
  }
  Array out = Array::Zero(numel(to));
  std::vector<Eigen::Index> idx(nd, 0);
  Eigen::Index dst = 0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    out[dst] += g[i];
    for (int ax = static_cast<int>(nd) - 1; ax >= 0; --ax) {
      ++idx[ax];
      dst += tstride[ax];
      if (idx[ax] < from[ax]) break;
      dst -= tstride[ax] * from[ax];
      idx[ax] = 0;
    }
  }
  return out;
}

}  // namespace detail

using detail::broadcast_array;
using detail::broadcast_shapes;
using detail::make_node;
using detail::normalize_axis;
using detail::reduce_to;

namespace {

using BinGrad = std::function<Array(const Array& g, const Array& va, const Array& vb)>;

Tensor binary_ew(const Tensor& a, const Tensor& b,
                 const std::function<Array(const Array&, const Array&)>& f, BinGrad da,
                 BinGrad db) {
  Shape oshape = broadcast_shapes(a.shape(), b.shape());
  Array va = broadcast_array(a.values(), a.shape(), oshape);
  Array vb = broadcast_array(b.values(), b.shape(), oshape);
  Array value = f(va, vb);
  return make_node(oshape, std::move(value), {a.node(), b.node()}, [&] {
    return [an = a.node(), bn = b.node(), va = std::move(va), vb = std::move(vb),
            da = std::move(da), db = std::move(db)](Node& n) {
      if (an->requires_grad) an->accumulate(reduce_to(da(n.grad, va, vb), n.shape, an->shape));
      if (bn->requires_grad) bn->accumulate(reduce_to(db(n.grad, va, vb), n.shape, bn->shape));
    };
  });
}

// dfn(g, x, y): gradient wrt input given upstream g, input x, output y.
Tensor unary_ew(const Tensor& a, Array value,
                std::function<Array(const Array& g, const Array& x, const Array& y)> dfn) {
  return make_node(a.shape(), std::move(value), {a.node()}, [&] {
    return [an = a.node(), dfn = std::move(dfn)](Node& n) {
      an->accumulate(dfn(n.grad, an->value, n.value));
    };
  });
}

// Nudge artanh-family arguments to the open interval (-1, 1); anything past
// the 1e-7 tolerance is a caller bug, not roundoff.
double clamp_open_unit(double x) {
  if (std::abs(x) < 1.0) return x;
  if (std::abs(x) > 1.0 + 1e-7) {
    throw std::domain_error("artanh argument " + std::to_string(x) +
                            " out of domain by more than 1e-7");
  }
  return std::copysign(std::nextafter(1.0, 0.0), x);
}

double tanhc_val(double x) {
  if (std::abs(x) < 1e-3) {
    double x2 = x * x;
    return 1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0;
  }
  return std::tanh(x) / x;
}

double tanhc_deriv(double x) {
  if (std::abs(x) < 1e-3) {
    double x2 = x * x;
    return x * (-2.0 / 3.0 + 8.0 * x2 / 15.0);
  }
  double t = std::tanh(x);
  return ((1.0 - t * t) * x - t) / (x * x);
}

double atanhc_val(double x) {
  x = clamp_open_unit(x);
  if (std::abs(x) < 1e-3) {
    double x2 = x * x;
    return 1.0 + x2 / 3.0 + x2 * x2 / 5.0;
  }
  return std::atanh(x) / x;
}

double atanhc_deriv(double x) {
  x = clamp_open_unit(x);
  if (std::abs(x) < 1e-3) {
    double x2 = x * x;
    return x * (2.0 / 3.0 + 4.0 * x2 / 5.0);
  }
  return (x / (1.0 - x * x) - std::atanh(x)) / (x * x);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_ew(
      a, b, [](const Array& x, const Array& y) { return Array(x + y); },
      [](const Array& g, const Array&, const Array&) { return g; },
      [](const Array& g, const Array&, const Array&) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_ew(
      a, b, [](const Array& x, const Array& y) { return Array(x - y); },
      [](const Array& g, const Array&, const Array&) { return g; },
      [](const Array& g, const Array&, const Array&) { return Array(-g); });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_ew(
      a, b, [](const Array& x, const Array& y) { return Array(x * y); },
      [](const Array& g, const Array&, const Array& y) { return Array(g * y); },
      [](const Array& g, const Array& x, const Array&) { return Array(g * x); });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_ew(
      a, b, [](const Array& x, const Array& y) { return Array(x / y); },
      [](const Array& g, const Array&, const Array& y) { return Array(g / y); },
      [](const Array& g, const Array& x, const Array& y) { return Array(-g * x / (y * y)); });
}

Tensor neg(const Tensor& a) {
  return unary_ew(a, Array(-a.values()),
                  [](const Array& g, const Array&, const Array&) { return Array(-g); });
}

Tensor relu(const Tensor& a) {
  return unary_ew(a, a.values().max(0.0), [](const Array& g, const Array& x, const Array&) {
    return Array(g * (x > 0.0).cast<double>());
  });
}

Tensor tanh(const Tensor& a) {
  return unary_ew(a, a.values().tanh(), [](const Array& g, const Array&, const Array& y) {
    return Array(g * (1.0 - y * y));
  });
}

Tensor artanh(const Tensor& a) {
  Array v = a.values().unaryExpr([](double x) { return std::atanh(clamp_open_unit(x)); });
  return unary_ew(a, std::move(v), [](const Array& g, const Array& x, const Array&) {
    Array xc = x.unaryExpr([](double t) { return clamp_open_unit(t); });
    return Array(g / (1.0 - xc * xc));
  });
}

Tensor asinh(const Tensor& a) {
  Array v = a.values().unaryExpr([](double x) { return std::asinh(x); });
  return unary_ew(a, std::move(v), [](const Array& g, const Array& x, const Array&) {
    return Array(g / (1.0 + x * x).sqrt());
  });
}

Tensor exp(const Tensor& a) {
  return unary_ew(a, a.values().exp(),
                  [](const Array& g, const Array&, const Array& y) { return Array(g * y); });
}

Tensor log(const Tensor& a) {
  if ((a.values() <= 0.0).any()) throw std::domain_error("log: non-positive input");
  return unary_ew(a, a.values().log(),
                  [](const Array& g, const Array& x, const Array&) { return Array(g / x); });
}

Tensor sqrt(const Tensor& a) {
  if ((a.values() < 0.0).any()) throw std::domain_error("sqrt: negative input");
  return unary_ew(a, a.values().sqrt(), [](const Array& g, const Array&, const Array& y) {
    return Array(g / (2.0 * y));
  });
}

Tensor square(const Tensor& a) {
  return unary_ew(a, a.values().square(), [](const Array& g, const Array& x, const Array&) {
    return Array(2.0 * g * x);
  });
}

Tensor pow(const Tensor& a, double p) {
  Array v = a.values().pow(p);
  return unary_ew(a, std::move(v), [p](const Array& g, const Array& x, const Array&) {
    return Array(g * p * x.pow(p - 1.0));
  });
}

Tensor tanhc(const Tensor& a) {
  Array v = a.values().unaryExpr([](double x) { return tanhc_val(x); });
  return unary_ew(a, std::move(v), [](const Array& g, const Array& x, const Array&) {
    return Array(g * x.unaryExpr([](double t) { return tanhc_deriv(t); }));
  });
}

Tensor atanhc(const Tensor& a) {
  Array v = a.values().unaryExpr([](double x) { return atanhc_val(x); });
  return unary_ew(a, std::move(v), [](const Array& g, const Array& x, const Array&) {
    return Array(g * x.unaryExpr([](double t) { return atanhc_deriv(t); }));
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                shape_str(shape));
  }
  return make_node(shape, Array(a.values()), {a.node()}, [&] {
    return [an = a.node()](Node& n) { an->accumulate(n.grad); };
  });
}

Tensor broadcast_to(const Tensor& a, Shape shape) {
  Array v = broadcast_array(a.values(), a.shape(), shape);
  return make_node(shape, std::move(v), {a.node()}, [&] {
    return [an = a.node()](Node& n) { an->accumulate(reduce_to(n.grad, n.shape, an->shape)); };
  });
}

namespace {

Array permute_array(const Array& v, const Shape& from, const std::vector<int>& axes, Shape& oshape) {
  const size_t nd = from.size();
  std::vector<Eigen::Index> fstride(nd);
  {
    Eigen::Index acc = 1;
    for (int i = static_cast<int>(nd) - 1; i >= 0; --i) {
      fstride[i] = acc;
      acc *= from[i];
    }
  }
  oshape.resize(nd);
  std::vector<Eigen::Index> ostride(nd);
  for (size_t i = 0; i < nd; ++i) {
    oshape[i] = from[axes[i]];
    ostride[i] = fstride[axes[i]];
  }
  Array out(v.size());
  std::vector<Eigen::Index> idx(nd, 0);
  Eigen::Index src = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out[i] = v[src];
    for (int ax = static_cast<int>(nd) - 1; ax >= 0; --ax) {
      ++idx[ax];
      src += ostride[ax];
      if (idx[ax] < oshape[ax]) break;
      src -= ostride[ax] * oshape[ax];
      idx[ax] = 0;
    }
  }
  return out;
}

}  // namespace

Tensor permute(const Tensor& a, const std::vector<int>& axes) {
  const size_t nd = a.shape().size();
  if (axes.size() != nd) throw std::invalid_argument("permute: axes size mismatch");
  std::vector<bool> seen(nd, false);
  for (int ax : axes) {
    if (ax < 0 || ax >= static_cast<int>(nd) || seen[ax]) {
      throw std::invalid_argument("permute: invalid axis permutation");
    }
    seen[ax] = true;
  }
  Shape oshape;
  Array v = permute_array(a.values(), a.shape(), axes, oshape);
  return make_node(oshape, std::move(v), {a.node()}, [&] {
    std::vector<int> inverse(nd);
    for (size_t i = 0; i < nd; ++i) inverse[axes[i]] = static_cast<int>(i);
    return [an = a.node(), inverse](Node& n) {
      Shape back;
      an->accumulate(permute_array(n.grad, n.shape, inverse, back));
    };
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const int nd = parts[0].ndim();
  const int ax = normalize_axis(axis, nd);
  Shape oshape = parts[0].shape();
  for (size_t i = 1; i < parts.size(); ++i) {
    const Shape& s = parts[i].shape();
    if (static_cast<int>(s.size()) != nd) throw std::invalid_argument("concat: rank mismatch");
    for (int d = 0; d < nd; ++d) {
      if (d != ax && s[d] != oshape[d]) {
        throw std::invalid_argument("concat: shape mismatch at axis " + std::to_string(d));
      }
    }
    oshape[ax] += s[ax];
  }
  Eigen::Index outer = 1, inner = 1;
  for (int d = 0; d < ax; ++d) outer *= oshape[d];
  for (int d = ax + 1; d < nd; ++d) inner *= oshape[d];

  Array value(numel(oshape));
  const Eigen::Index orow = oshape[ax] * inner;
  Eigen::Index off = 0;
  for (const Tensor& t : parts) {
    const Eigen::Index prow = t.shape()[ax] * inner;
    for (Eigen::Index o = 0; o < outer; ++o) {
      value.segment(o * orow + off, prow) = t.values().segment(o * prow, prow);
    }
    off += prow;
  }
  std::vector<NodePtr> parents;
  for (const Tensor& t : parts) parents.push_back(t.node());
  return make_node(oshape, std::move(value), std::move(parents), [&] {
    std::vector<Eigen::Index> prows;
    for (const Tensor& t : parts) prows.push_back(t.shape()[ax] * inner);
    return [parents = [&] {
              std::vector<NodePtr> ps;
              for (const Tensor& t : parts) ps.push_back(t.node());
              return ps;
            }(),
            prows, outer, orow](Node& n) {
      Eigen::Index off = 0;
      for (size_t i = 0; i < parents.size(); ++i) {
        if (parents[i]->requires_grad) {
          Array g(prows[i] * outer);
          for (Eigen::Index o = 0; o < outer; ++o) {
            g.segment(o * prows[i], prows[i]) = n.grad.segment(o * orow + off, prows[i]);
          }
          parents[i]->accumulate(g);
        }
        off += prows[i];
      }
    };
  });
}

Tensor sum(const Tensor& a) {
  Array v(1);
  v[0] = a.values().sum();
  return make_node({1}, std::move(v), {a.node()}, [&] {
    return [an = a.node()](Node& n) {
      an->accumulate(Array::Constant(an->value.size(), n.grad[0]));
    };
  });
}

namespace {

struct AxisView {
  Eigen::Index outer, dim, inner;
};

AxisView axis_view(const Shape& s, int ax) {
  AxisView v{1, s[ax], 1};
  for (int d = 0; d < ax; ++d) v.outer *= s[d];
  for (size_t d = ax + 1; d < s.size(); ++d) v.inner *= s[d];
  return v;
}

Shape reduced_shape(const Shape& s, int ax, bool keepdim) {
  Shape out = s;
  if (keepdim) {
    out[ax] = 1;
  } else {
    out.erase(out.begin() + ax);
    if (out.empty()) out.push_back(1);
  }
  return out;
}

}  // namespace

Tensor sum(const Tensor& a, int axis, bool keepdim) {
  const int ax = normalize_axis(axis, a.ndim());
  const AxisView v = axis_view(a.shape(), ax);
  Array value = Array::Zero(v.outer * v.inner);
  const Array& x = a.values();
  for (Eigen::Index o = 0; o < v.outer; ++o) {
    for (Eigen::Index k = 0; k < v.dim; ++k) {
      value.segment(o * v.inner, v.inner) += x.segment((o * v.dim + k) * v.inner, v.inner);
    }
  }
  return make_node(reduced_shape(a.shape(), ax, keepdim), std::move(value), {a.node()}, [&] {
    return [an = a.node(), v](Node& n) {
      Array g(an->value.size());
      for (Eigen::Index o = 0; o < v.outer; ++o) {
        for (Eigen::Index k = 0; k < v.dim; ++k) {
          g.segment((o * v.dim + k) * v.inner, v.inner) = n.grad.segment(o * v.inner, v.inner);
        }
      }
      an->accumulate(g);
    };
  });
}

Tensor mean(const Tensor& a) { return sum(a) * (1.0 / static_cast<double>(a.size())); }

Tensor mean(const Tensor& a, int axis, bool keepdim) {
  const int ax = normalize_axis(axis, a.ndim());
  return sum(a, ax, keepdim) * (1.0 / static_cast<double>(a.shape()[ax]));
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  Array v(1);
  v[0] = (a.values() * b.values()).sum();
  return make_node({1}, std::move(v), {a.node(), b.node()}, [&] {
    return [an = a.node(), bn = b.node()](Node& n) {
      if (an->requires_grad) an->accumulate(Array(n.grad[0] * bn->value));
      if (bn->requires_grad) bn->accumulate(Array(n.grad[0] * an->value));
    };
  });
}

Tensor l2_norm(const Tensor& a, int axis, bool keepdim) {
  const int ax = normalize_axis(axis, a.ndim());
  const AxisView v = axis_view(a.shape(), ax);
  Array value = Array::Zero(v.outer * v.inner);
  const Array& x = a.values();
  for (Eigen::Index o = 0; o < v.outer; ++o) {
    for (Eigen::Index k = 0; k < v.dim; ++k) {
      value.segment(o * v.inner, v.inner) +=
          x.segment((o * v.dim + k) * v.inner, v.inner).square();
    }
  }
  value = value.sqrt();
  return make_node(reduced_shape(a.shape(), ax, keepdim), std::move(value), {a.node()}, [&] {
    return [an = a.node(), v](Node& n) {
      // d||x||/dx = x/||x||; zero vectors get a zero subgradient
      Array g(an->value.size());
      for (Eigen::Index o = 0; o < v.outer; ++o) {
        for (Eigen::Index k = 0; k < v.dim; ++k) {
          for (Eigen::Index i = 0; i < v.inner; ++i) {
            const double nv = n.value[o * v.inner + i];
            const double gv = n.grad[o * v.inner + i];
            const double xv = an->value[(o * v.dim + k) * v.inner + i];
            g[(o * v.dim + k) * v.inner + i] = nv > 0.0 ? gv * xv / nv : 0.0;
          }
        }
      }
      an->accumulate(g);
    };
  });
}

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0]) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  }
  const Eigen::Index m = a.shape()[0], k = a.shape()[1], n2 = b.shape()[1];
  Array value(m * n2);
  CMapRM A(a.values().data(), m, k), B(b.values().data(), k, n2);
  MapRM(value.data(), m, n2).noalias() = A * B;
  return make_node({m, n2}, std::move(value), {a.node(), b.node()}, [&] {
    return [an = a.node(), bn = b.node(), m, k, n2](Node& n) {
      CMapRM G(n.grad.data(), m, n2);
      if (an->requires_grad) {
        Array ga(m * k);
        CMapRM B(bn->value.data(), k, n2);
        MapRM(ga.data(), m, k).noalias() = G * B.transpose();
        an->accumulate(ga);
      }
      if (bn->requires_grad) {
        Array gb(k * n2);
        CMapRM A(an->value.data(), m, k);
        MapRM(gb.data(), k, n2).noalias() = A.transpose() * G;
        bn->accumulate(gb);
      }
    };
  });
}

Tensor softmax(const Tensor& a, int axis) {
  const int ax = normalize_axis(axis, a.ndim());
  const AxisView v = axis_view(a.shape(), ax);
  Array value(a.size());
  const Array& x = a.values();
  for (Eigen::Index o = 0; o < v.outer; ++o) {
    for (Eigen::Index i = 0; i < v.inner; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 0; k < v.dim; ++k) {
        mx = std::max(mx, x[(o * v.dim + k) * v.inner + i]);
      }
      double s = 0.0;
      for (Eigen::Index k = 0; k < v.dim; ++k) {
        const double e = std::exp(x[(o * v.dim + k) * v.inner + i] - mx);
        value[(o * v.dim + k) * v.inner + i] = e;
        s += e;
      }
      for (Eigen::Index k = 0; k < v.dim; ++k) value[(o * v.dim + k) * v.inner + i] /= s;
    }
  }
  return make_node(a.shape(), std::move(value), {a.node()}, [&] {
    return [an = a.node(), v](Node& n) {
      // dx = y * (g - sum_k g_k y_k)
      Array g(n.value.size());
      for (Eigen::Index o = 0; o < v.outer; ++o) {
        for (Eigen::Index i = 0; i < v.inner; ++i) {
          double acc = 0.0;
          for (Eigen::Index k = 0; k < v.dim; ++k) {
            const Eigen::Index at = (o * v.dim + k) * v.inner + i;
            acc += n.grad[at] * n.value[at];
          }
          for (Eigen::Index k = 0; k < v.dim; ++k) {
            const Eigen::Index at = (o * v.dim + k) * v.inner + i;
            g[at] = n.value[at] * (n.grad[at] - acc);
          }
        }
      }
      an->accumulate(g);
    };
  });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.ndim() != 2) throw std::invalid_argument("cross_entropy: logits must be [N,K]");
  const Eigen::Index N = logits.shape()[0], K = logits.shape()[1];
  if (static_cast<Eigen::Index>(labels.size()) != N) {
    throw std::invalid_argument("cross_entropy: label count mismatch");
  }
  for (int l : labels) {
    if (l < 0 || l >= K) throw std::invalid_argument("cross_entropy: label out of range");
  }
  Array probs(N * K);
  double loss = 0.0;
  const Array& x = logits.values();
  for (Eigen::Index i = 0; i < N; ++i) {
    const double mx = x.segment(i * K, K).maxCoeff();
    Array e = (x.segment(i * K, K) - mx).exp();
    const double s = e.sum();
    probs.segment(i * K, K) = e / s;
    loss += std::log(s) + mx - x[i * K + labels[i]];
  }
  Array v(1);
  v[0] = loss / static_cast<double>(N);
  return make_node({1}, std::move(v), {logits.node()}, [&] {
    return [ln = logits.node(), probs = std::move(probs), labels, N, K](Node& n) {
      Array g = probs;
      for (Eigen::Index i = 0; i < N; ++i) g[i * K + labels[i]] -= 1.0;
      ln->accumulate(Array(g * (n.grad[0] / static_cast<double>(N))));
    };
  });
}

Tensor mse(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw std::invalid_argument("mse: shape mismatch " + shape_str(pred.shape()) + " vs " +
                                shape_str(target.shape()));
  }
  Array v(1);
  v[0] = (pred.values() - target.values()).square().mean();
  return make_node({1}, std::move(v), {pred.node(), target.node()}, [&] {
    return [pn = pred.node(), tn = target.node()](Node& n) {
      const double scale = 2.0 * n.grad[0] / static_cast<double>(pn->value.size());
      Array d = scale * (pn->value - tn->value);
      if (pn->requires_grad) pn->accumulate(d);
      if (tn->requires_grad) tn->accumulate(Array(-d));
    };
  });
}

Tensor straight_through(const Tensor& hard, const Tensor& soft) {
  if (hard.shape() != soft.shape()) {
    throw std::invalid_argument("straight_through: shape mismatch " + shape_str(hard.shape()) +
                                " vs " + shape_str(soft.shape()));
  }
  return make_node(hard.shape(), Array(hard.values()), {soft.node()}, [&] {
    return [sn = soft.node()](Node& n) { sn->accumulate(n.grad); };
  });
}

}  // namespace hypervq::diff

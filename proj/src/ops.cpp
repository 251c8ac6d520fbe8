#include "adsm/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "adsm/errors.hpp"

namespace adsm {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

std::string operand_shapes(std::initializer_list<const Var*> in) {
  std::string s;
  for (const Var* v : in) {
    if (!s.empty()) s += ", ";
    s += shape_str(v->shape());
  }
  return s;
}

Tape* common_tape(std::span<const Var* const> in) {
  Tape* tape = nullptr;
  for (const Var* v : in) {
    Tape* t = v->tape();
    if (!t) continue;
    ADSM_REQUIRE(!tape || tape == t, "operands recorded on different tapes");
    tape = t;
  }
  return tape;
}

// Wraps a computed value as a graph node. `make_backward` is only invoked
// when some operand is recorded, so closures are not built for inference.
template <class MakeBackward>
Var finish(const char* kind, Tensor value, std::initializer_list<const Var*> in,
           MakeBackward&& make_backward) {
  if (!value.all_finite())
    throw NumericFault(std::string("non-finite output from ") + kind + " with operands " +
                       operand_shapes(in));
  std::vector<const Var*> ins(in);
  Tape* tape = common_tape(ins);
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->kind = kind;
  if (!tape) return Var(std::move(n));
  for (const Var* v : ins) n->parents.push_back(v->node());
  n->backward = make_backward();
  return tape->record(std::move(n));
}

bool needs_grad(const NodePtr& p) { return p->tape != nullptr; }

// Shape relation for binary elementwise ops.
enum class Expand { none, b_into_a, a_into_b };

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(), big.end() - static_cast<long>(small.size()));
}

Expand binary_layout(const char* kind, const Var& a, const Var& b) {
  if (a.shape() == b.shape()) return Expand::none;
  if (is_suffix(b.shape(), a.shape())) return Expand::b_into_a;
  if (is_suffix(a.shape(), b.shape())) return Expand::a_into_b;
  throw ContractViolation(std::string(kind) + ": shapes do not conform " +
                          operand_shapes({&a, &b}));
}

// Sums `g` (length big) into `out` (length small) cycling over `out`.
void reduce_into(std::span<const double> g, std::span<double> out) {
  const std::size_t k = out.size();
  for (std::size_t i = 0; i < g.size(); i += k)
    for (std::size_t j = 0; j < k; ++j) out[j] += g[i + j];
}

template <class F>
Tensor zip(const Tensor& big, const Tensor& small, F f, bool swapped) {
  Tensor out(big.shape());
  const std::size_t k = small.size();
  const double* pb = big.data().data();
  const double* ps = small.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < big.size(); i += k)
    for (std::size_t j = 0; j < k; ++j)
      po[i + j] = swapped ? f(ps[j], pb[i + j]) : f(pb[i + j], ps[j]);
  return out;
}

template <class F>
Tensor unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  const double* pa = a.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < a.size(); ++i) po[i] = f(pa[i]);
  return out;
}

std::size_t last_dim(const char* kind, const Var& a) {
  ADSM_REQUIRE(a.shape().size() >= 1, std::string(kind) + " needs rank >= 1, got " +
                                          shape_str(a.shape()));
  return a.shape().back();
}

Shape drop_last(const Shape& s) { return Shape(s.begin(), s.end() - 1); }

}  // namespace

Var add(const Var& a, const Var& b) {
  const Expand e = binary_layout("add", a, b);
  const bool swapped = e == Expand::a_into_b;
  const Tensor& big = swapped ? b.value() : a.value();
  const Tensor& small = swapped ? a.value() : b.value();
  Tensor v = zip(big, small, [](double x, double y) { return x + y; }, swapped);
  return finish("add", std::move(v), {&a, &b}, [e] {
    return [e](Node& n) {
      for (int side = 0; side < 2; ++side) {
        auto& p = n.parents[side];
        if (!needs_grad(p)) continue;
        Tensor& g = p->grad_buffer();
        const bool small_side = (e == Expand::b_into_a && side == 1) ||
                                (e == Expand::a_into_b && side == 0);
        if (small_side) {
          reduce_into(n.grad.data(), g.data());
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        }
      }
    };
  });
}

Var sub(const Var& a, const Var& b) {
  const Expand e = binary_layout("sub", a, b);
  const bool swapped = e == Expand::a_into_b;
  const Tensor& big = swapped ? b.value() : a.value();
  const Tensor& small = swapped ? a.value() : b.value();
  Tensor v = zip(big, small, [](double x, double y) { return x - y; }, swapped);
  return finish("sub", std::move(v), {&a, &b}, [e] {
    return [e](Node& n) {
      for (int side = 0; side < 2; ++side) {
        auto& p = n.parents[side];
        if (!needs_grad(p)) continue;
        Tensor& g = p->grad_buffer();
        const double sign = side == 0 ? 1.0 : -1.0;
        const bool small_side = (e == Expand::b_into_a && side == 1) ||
                                (e == Expand::a_into_b && side == 0);
        if (small_side) {
          Tensor tmp = Tensor::zeros(g.shape());
          reduce_into(n.grad.data(), tmp.data());
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * tmp[i];
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * n.grad[i];
        }
      }
    };
  });
}

Var mul(const Var& a, const Var& b) {
  const Expand e = binary_layout("mul", a, b);
  const bool swapped = e == Expand::a_into_b;
  const Tensor& big = swapped ? b.value() : a.value();
  const Tensor& small = swapped ? a.value() : b.value();
  Tensor v = zip(big, small, [](double x, double y) { return x * y; }, swapped);
  return finish("mul", std::move(v), {&a, &b}, [e] {
    return [e](Node& n) {
      const Tensor& av = n.parents[0]->val();
      const Tensor& bv = n.parents[1]->val();
      for (int side = 0; side < 2; ++side) {
        auto& p = n.parents[side];
        if (!needs_grad(p)) continue;
        Tensor& g = p->grad_buffer();
        const Tensor& other = side == 0 ? bv : av;
        const bool small_side = (e == Expand::b_into_a && side == 1) ||
                                (e == Expand::a_into_b && side == 0);
        if (e == Expand::none) {
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * other[i];
        } else if (small_side) {
          // other is the big operand, same layout as n.grad
          const std::size_t k = g.size();
          for (std::size_t i = 0; i < n.grad.size(); i += k)
            for (std::size_t j = 0; j < k; ++j) g[j] += n.grad[i + j] * other[i + j];
        } else {
          const std::size_t k = other.size();
          for (std::size_t i = 0; i < g.size(); i += k)
            for (std::size_t j = 0; j < k; ++j) g[i + j] += n.grad[i + j] * other[j];
        }
      }
    };
  });
}

Var scale(const Var& a, double factor) {
  Tensor v = unary(a.value(), [factor](double x) { return x * factor; });
  return finish("scale", std::move(v), {&a}, [factor] {
    return [factor](Node& n) {
      Tensor& g = n.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * n.grad[i];
    };
  });
}

Var matmul(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  ADSM_REQUIRE(sa.size() >= 2 && sb.size() >= 2,
               "matmul needs rank >= 2 operands, got " + operand_shapes({&a, &b}));
  const std::size_t m = sa[sa.size() - 2], k = sa.back();
  const std::size_t kb = sb[sb.size() - 2], n = sb.back();
  ADSM_REQUIRE(k == kb, "matmul inner dimensions differ: " + operand_shapes({&a, &b}));
  const bool shared = sb.size() == 2;
  std::size_t batch = 1;
  if (!shared) {
    ADSM_REQUIRE(sa.size() == sb.size() && std::equal(sa.begin(), sa.end() - 2, sb.begin()),
                 "matmul batch dimensions differ: " + operand_shapes({&a, &b}));
    batch = shape_size(Shape(sa.begin(), sa.end() - 2));
  }
  Shape out_shape = sa;
  out_shape.back() = n;
  Tensor v(out_shape);
  if (shared) {
    const std::size_t rows = a.value().size() / k;
    Map(v.data().data(), rows, n).noalias() =
        MapC(a.value().data().data(), rows, k) * MapC(b.value().data().data(), k, n);
  } else {
    for (std::size_t i = 0; i < batch; ++i)
      Map(v.data().data() + i * m * n, m, n).noalias() =
          MapC(a.value().data().data() + i * m * k, m, k) *
          MapC(b.value().data().data() + i * k * n, k, n);
  }
  return finish("matmul", std::move(v), {&a, &b}, [=] {
    return [=](Node& nd) {
      const Tensor& av = nd.parents[0]->val();
      const Tensor& bv = nd.parents[1]->val();
      const bool ga_needed = needs_grad(nd.parents[0]);
      const bool gb_needed = needs_grad(nd.parents[1]);
      if (shared) {
        const std::size_t rows = av.size() / k;
        MapC g(nd.grad.data().data(), rows, n);
        if (ga_needed)
          Map(nd.parents[0]->grad_buffer().data().data(), rows, k).noalias() +=
              g * MapC(bv.data().data(), k, n).transpose();
        if (gb_needed)
          Map(nd.parents[1]->grad_buffer().data().data(), k, n).noalias() +=
              MapC(av.data().data(), rows, k).transpose() * g;
        return;
      }
      double* pga = ga_needed ? nd.parents[0]->grad_buffer().data().data() : nullptr;
      double* pgb = gb_needed ? nd.parents[1]->grad_buffer().data().data() : nullptr;
      for (std::size_t i = 0; i < batch; ++i) {
        MapC g(nd.grad.data().data() + i * m * n, m, n);
        if (pga)
          Map(pga + i * m * k, m, k).noalias() +=
              g * MapC(bv.data().data() + i * k * n, k, n).transpose();
        if (pgb)
          Map(pgb + i * k * n, k, n).noalias() +=
              MapC(av.data().data() + i * m * k, m, k).transpose() * g;
      }
    };
  });
}

namespace {

// Generic axis permutation: out[idx permuted] = in[idx].
Tensor permute_tensor(const Tensor& in, const std::vector<std::size_t>& axes) {
  const Shape& s = in.shape();
  const std::size_t r = s.size();
  Shape os(r);
  for (std::size_t i = 0; i < r; ++i) os[i] = s[axes[i]];
  Tensor out(os);
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * s[i];
  // stride in the input for each output axis
  std::vector<std::size_t> st(r);
  for (std::size_t i = 0; i < r; ++i) st[i] = in_strides[axes[i]];
  std::vector<std::size_t> idx(r, 0);
  const double* pi = in.data().data();
  double* po = out.data().data();
  const std::size_t total = out.size();
  if (r == 0) {
    po[0] = pi[0];
    return out;
  }
  const std::size_t inner = os[r - 1];
  const std::size_t inner_stride = st[r - 1];
  std::size_t offset = 0;
  for (std::size_t o = 0; o < total; o += inner) {
    for (std::size_t j = 0; j < inner; ++j) po[o + j] = pi[offset + j * inner_stride];
    // advance the multi-index over all but the last axis
    for (std::size_t ax = r - 1; ax-- > 0;) {
      ++idx[ax];
      offset += st[ax];
      if (idx[ax] < os[ax]) break;
      offset -= st[ax] * os[ax];
      idx[ax] = 0;
    }
  }
  return out;
}

}  // namespace

Var permute(const Var& a, std::vector<std::size_t> axes) {
  const std::size_t r = a.shape().size();
  ADSM_REQUIRE(axes.size() == r, "permute: axes rank mismatch for shape " + shape_str(a.shape()));
  std::vector<bool> seen(r, false);
  for (std::size_t ax : axes) {
    ADSM_REQUIRE(ax < r && !seen[ax], "permute: axes are not a permutation");
    seen[ax] = true;
  }
  std::vector<std::size_t> inverse(r);
  for (std::size_t i = 0; i < r; ++i) inverse[axes[i]] = i;
  Tensor v = permute_tensor(a.value(), axes);
  return finish("permute", std::move(v), {&a}, [inverse] {
    return [inverse](Node& n) {
      Tensor back = permute_tensor(n.grad, inverse);
      Tensor& g = n.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += back[i];
    };
  });
}

Var transpose(const Var& a) {
  const std::size_t r = a.shape().size();
  ADSM_REQUIRE(r >= 2, "transpose needs rank >= 2, got " + shape_str(a.shape()));
  std::vector<std::size_t> axes(r);
  for (std::size_t i = 0; i < r; ++i) axes[i] = i;
  std::swap(axes[r - 1], axes[r - 2]);
  return permute(a, std::move(axes));
}

Var reshape(const Var& a, Shape shape) {
  ADSM_REQUIRE(shape_size(shape) == a.value().size(),
               "reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  Tensor v = a.value().reshaped(std::move(shape));
  return finish("reshape", std::move(v), {&a}, [] {
    return [](Node& n) {
      Tensor& g = n.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    };
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  ADSM_REQUIRE(!parts.empty(), "concat of zero tensors");
  const Shape& s0 = parts[0].shape();
  ADSM_REQUIRE(axis < s0.size(), "concat axis out of range for " + shape_str(s0));
  Shape out_shape = s0;
  out_shape[axis] = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    ADSM_REQUIRE(s.size() == s0.size(), "concat rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      ADSM_REQUIRE(i == axis || s[i] == s0[i],
                   "concat: shapes differ off-axis " + shape_str(s0) + " vs " + shape_str(s));
    out_shape[axis] += s[axis];
  }
  const std::size_t outer = shape_size(Shape(s0.begin(), s0.begin() + static_cast<long>(axis)));
  const std::size_t inner = shape_size(Shape(s0.begin() + static_cast<long>(axis) + 1, s0.end()));
  const std::size_t row = out_shape[axis] * inner;
  Tensor v(out_shape);
  std::vector<std::size_t> widths;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const std::size_t w = p.shape()[axis] * inner;
    widths.push_back(w);
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(p.value().data().data() + o * w, w, v.data().data() + o * row + offset);
    offset += w;
  }
  Tensor value = std::move(v);
  if (!value.all_finite()) throw NumericFault("non-finite output from concat");
  std::vector<const Var*> ins;
  for (const Var& p : parts) ins.push_back(&p);
  Tape* tape = common_tape(ins);
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->kind = "concat";
  if (!tape) return Var(std::move(n));
  for (const Var& p : parts) n->parents.push_back(p.node());
  n->backward = [widths, outer, row](Node& nd) {
    std::size_t off = 0;
    for (std::size_t pi = 0; pi < nd.parents.size(); ++pi) {
      const std::size_t w = widths[pi];
      if (needs_grad(nd.parents[pi])) {
        Tensor& g = nd.parents[pi]->grad_buffer();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t j = 0; j < w; ++j) g[o * w + j] += nd.grad[o * row + off + j];
      }
      off += w;
    }
  };
  return tape->record(std::move(n));
}

std::vector<Var> split(const Var& a, std::size_t axis, std::span<const std::size_t> sizes) {
  const Shape& s = a.shape();
  ADSM_REQUIRE(axis < s.size(), "split axis out of range for " + shape_str(s));
  std::size_t total = 0;
  for (std::size_t z : sizes) total += z;
  ADSM_REQUIRE(total == s[axis], "split sizes do not sum to extent of " + shape_str(s));
  const std::size_t outer = shape_size(Shape(s.begin(), s.begin() + static_cast<long>(axis)));
  const std::size_t inner = shape_size(Shape(s.begin() + static_cast<long>(axis) + 1, s.end()));
  const std::size_t row = s[axis] * inner;
  std::vector<Var> out;
  std::size_t offset = 0;
  for (std::size_t z : sizes) {
    Shape ps = s;
    ps[axis] = z;
    Tensor v(ps);
    const std::size_t w = z * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(a.value().data().data() + o * row + offset, w, v.data().data() + o * w);
    out.push_back(finish("split", std::move(v), {&a}, [=] {
      return [=](Node& n) {
        Tensor& g = n.parents[0]->grad_buffer();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t j = 0; j < w; ++j) g[o * row + offset + j] += n.grad[o * w + j];
      };
    }));
    offset += w;
  }
  return out;
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  return finish("sum", Tensor::scalar(s), {&a}, [] {
    return [](Node& n) {
      Tensor& g = n.parents[0]->grad_buffer();
      const double gv = n.grad[0];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gv;
    };
  });
}

Var mean(const Var& a) {
  ADSM_REQUIRE(a.value().size() > 0, "mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var sum_last(const Var& a) {
  const std::size_t k = last_dim("sum_last", a);
  Tensor v(drop_last(a.shape()));
  const double* pa = a.value().data().data();
  for (std::size_t r = 0; r < v.size(); ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += pa[r * k + j];
    v[r] = s;
  }
  return finish("sum_last", std::move(v), {&a}, [k] {
    return [k](Node& n) {
      Tensor& g = n.parents[0]->grad_buffer();
      for (std::size_t r = 0; r < n.grad.size(); ++r)
        for (std::size_t j = 0; j < k; ++j) g[r * k + j] += n.grad[r];
    };
  });
}

Var mean_last(const Var& a) {
  const std::size_t k = last_dim("mean_last", a);
  ADSM_REQUIRE(k > 0, "mean_last over empty axis");
  return scale(sum_last(a), 1.0 / static_cast<double>(k));
}

Var max_last(const Var& a) {
  const std::size_t k = last_dim("max_last", a);
  ADSM_REQUIRE(k > 0, "max_last over empty axis");
  Tensor v(drop_last(a.shape()));
  std::vector<std::size_t> arg(v.size());
  const double* pa = a.value().data().data();
  for (std::size_t r = 0; r < v.size(); ++r) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (pa[r * k + j] > pa[r * k + best]) best = j;
    arg[r] = best;
    v[r] = pa[r * k + best];
  }
  return finish("max_last", std::move(v), {&a}, [k, arg = std::move(arg)]() mutable {
    return [k, arg = std::move(arg)](Node& n) {
      Tensor& g = n.parents[0]->grad_buffer();
      for (std::size_t r = 0; r < n.grad.size(); ++r) g[r * k + arg[r]] += n.grad[r];
    };
  });
}

Var abs(const Var& a) {
  Tensor v = unary(a.value(), [](double x) { return std::abs(x); });
  return finish("abs", std::move(v), {&a}, [] {
    return [](Node& n) {
      const Tensor& x = n.parents[0]->val();
      Tensor& g = n.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i)
        g[i] += n.grad[i] * (x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0));
    };
  });
}

Var exp(const Var& a) {
  Tensor v = unary(a.value(), [](double x) { return std::exp(x); });
  return finish("exp", std::move(v), {&a}, [] {
    return [](Node& n) {
      Tensor& g = n.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * n.value[i];
    };
  });
}

Var log(const Var& a) {
  Tensor v = unary(a.value(), [](double x) { return std::log(x); });
  return finish("log", std::move(v), {&a}, [] {
    return [](Node& n) {
      const Tensor& x = n.parents[0]->val();
      Tensor& g = n.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] / x[i];
    };
  });
}

Var sqrt(const Var& a) {
  Tensor v = unary(a.value(), [](double x) { return std::sqrt(x); });
  return finish("sqrt", std::move(v), {&a}, [] {
    return [](Node& n) {
      Tensor& g = n.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * 0.5 / n.value[i];
    };
  });
}

Var gelu(const Var& a) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  Tensor v = unary(a.value(), [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); });
  return finish("gelu", std::move(v), {&a}, [] {
    return [](Node& n) {
      constexpr double inv_sqrt2pi = 0.39894228040143267794;
      const Tensor& x = n.parents[0]->val();
      Tensor& g = n.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double cdf = 0.5 * (1.0 + std::erf(x[i] * inv_sqrt2));
        const double pdf = inv_sqrt2pi * std::exp(-0.5 * x[i] * x[i]);
        g[i] += n.grad[i] * (cdf + x[i] * pdf);
      }
    };
  });
}

Var softmax(const Var& a) {
  const std::size_t k = last_dim("softmax", a);
  Tensor v(a.shape());
  const double* pa = a.value().data().data();
  double* pv = v.data().data();
  for (std::size_t r = 0; r * k < v.size(); ++r) {
    const double* x = pa + r * k;
    double* y = pv + r * k;
    const double mx = *std::max_element(x, x + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += (y[j] = std::exp(x[j] - mx));
    const double inv = 1.0 / s;
    for (std::size_t j = 0; j < k; ++j) y[j] *= inv;
  }
  return finish("softmax", std::move(v), {&a}, [k] {
    return [k](Node& n) {
      Tensor& g = n.parents[0]->grad_buffer();
      for (std::size_t r = 0; r * k < g.size(); ++r) {
        const double* y = n.value.data().data() + r * k;
        const double* gy = n.grad.data().data() + r * k;
        double dot = 0.0;
        for (std::size_t j = 0; j < k; ++j) dot += gy[j] * y[j];
        for (std::size_t j = 0; j < k; ++j) g[r * k + j] += y[j] * (gy[j] - dot);
      }
    };
  });
}

Var layer_norm(const Var& a, double eps) {
  const std::size_t k = last_dim("layer_norm", a);
  ADSM_REQUIRE(k > 0, "layer_norm over empty axis");
  const std::size_t rows = a.value().size() / k;
  Tensor v(a.shape());
  std::vector<double> inv_std(rows);
  const double* pa = a.value().data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = pa + r * k;
    double mu = 0.0;
    for (std::size_t j = 0; j < k; ++j) mu += x[j];
    mu /= static_cast<double>(k);
    double var = 0.0;
    for (std::size_t j = 0; j < k; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= static_cast<double>(k);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < k; ++j) v[r * k + j] = (x[j] - mu) * is;
  }
  return finish("layer_norm", std::move(v), {&a}, [k, rows, inv_std = std::move(inv_std)]() mutable {
    return [k, rows, inv_std = std::move(inv_std)](Node& n) {
      Tensor& g = n.parents[0]->grad_buffer();
      const double kd = static_cast<double>(k);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = n.value.data().data() + r * k;
        const double* gy = n.grad.data().data() + r * k;
        double mg = 0.0, mgy = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
          mg += gy[j];
          mgy += gy[j] * y[j];
        }
        mg /= kd;
        mgy /= kd;
        for (std::size_t j = 0; j < k; ++j)
          g[r * k + j] += inv_std[r] * (gy[j] - mg - y[j] * mgy);
      }
    };
  });
}

}  // namespace adsm

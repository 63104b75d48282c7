#include "protoaudio/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <Eigen/Core>

#include "protoaudio/error.hpp"

namespace protoaudio::ad {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

thread_local bool g_grad_enabled = true;

[[noreturn]] void shape_error(const std::string& op, const std::string& what) {
  fail(ErrorCode::kShapeMismatch, op, op + ": " + what);
}

bool needs_grad(const std::vector<Tensor>& parents) {
  if (!g_grad_enabled) return false;
  return std::any_of(parents.begin(), parents.end(),
                     [](const Tensor& t) { return t.defined() && t.requires_grad(); });
}

// Contiguous rows of [rows, n] matrices: dst += alpha * src.
inline void axpy(double alpha, const double* src, double* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += alpha * src[i];
}

// Eight independent partial sums so the reduction vectorizes without
// -ffast-math; the summation order is fixed, so results stay deterministic.
inline double dot(const double* a, const double* b, std::size_t n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

struct ConvGeometry {
  std::size_t batch, cin, h, w, cout, kh, kw, stride, pad, oh, ow;
  std::size_t patch() const { return cin * kh * kw; }
  std::size_t positions() const { return oh * ow; }
};

// cols [cin*kh*kw, oh*ow] for one batch item.
void im2col(const double* x, const ConvGeometry& g, double* cols) {
  const std::size_t npos = g.positions();
  for (std::size_t c = 0; c < g.cin; ++c) {
    const double* plane = x + c * g.h * g.w;
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        double* row = cols + ((c * g.kh + ky) * g.kw + kx) * npos;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          double* out = row + oy * g.ow;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(out, out + g.ow, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            out[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, const ConvGeometry& g, double* gx) {
  const std::size_t npos = g.positions();
  for (std::size_t c = 0; c < g.cin; ++c) {
    double* plane = gx + c * g.h * g.w;
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const double* row = cols + ((c * g.kh + ky) * g.kw + kx) * npos;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          double* dst = plane + static_cast<std::size_t>(iy) * g.w;
          const double* src = row + oy * g.ow;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::vector<double>& TensorNode::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = numel(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (numel(shape) != data.size())
    shape_error("tensor", "shape " + shape_string(shape) + " holds " + std::to_string(numel(shape)) +
                              " values, got " + std::to_string(data.size()));
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

double Tensor::item() const {
  if (size() != 1) shape_error("item", "tensor of shape " + shape_string(shape()) + " is not a scalar");
  return node_->data[0];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::clone() const { return from(shape(), node_->data, requires_grad()); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() noexcept { return g_grad_enabled; }

Tensor make_result(Shape shape, std::vector<double> data, const std::vector<Tensor>& parents,
                   BackwardFn backward) {
  for (double v : data)
    if (!std::isfinite(v)) fail(ErrorCode::kDegenerateData, "tensor", "non-finite value in forward pass");
  Tensor out = Tensor::from(std::move(shape), std::move(data));
  if (needs_grad(parents)) {
    auto& node = *out.node();
    node.requires_grad = true;
    for (const auto& p : parents) node.parents.push_back(p.node());
    node.backward = std::move(backward);
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("add", shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  NodePtr pa = a.node(), pb = b.node();
  return make_result(a.shape(), std::move(out), {a, b}, [pa, pb](TensorNode& o) {
    for (const auto& p : {pa, pb}) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  NodePtr pa = a.node(), pb = b.node();
  return make_result(a.shape(), std::move(out), {a, b}, [pa, pb](TensorNode& o) {
    if (pa->requires_grad) {
      auto& g = pa->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * pb->data[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * pa->data[i];
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  NodePtr px = x.node();
  return make_result({}, {total}, {x}, [px](TensorNode& o) {
    auto& g = px->grad_buffer();
    for (double& v : g) v += o.grad[0];
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, x.data()[i]);
  NodePtr px = x.node();
  return make_result(x.shape(), std::move(out), {x}, [px](TensorNode& o) {
    auto& g = px->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (px->data[i] > 0.0) g[i] += o.grad[i];
  });
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  const std::string shapes = "input " + shape_string(input.shape()) + ", weight " + shape_string(weight.shape()) +
                             ", bias " + shape_string(bias.shape());
  if (input.rank() != 4 || weight.rank() != 4 || bias.rank() != 1) shape_error("conv2d", "rank mismatch: " + shapes);
  if (stride == 0) shape_error("conv2d", "stride must be positive");
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.cin = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.cout = weight.dim(0);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.stride = stride;
  g.pad = pad;
  if (weight.dim(1) != g.cin || bias.dim(0) != g.cout) shape_error("conv2d", "channel mismatch: " + shapes);
  if (g.h + 2 * pad < g.kh || g.w + 2 * pad < g.kw) shape_error("conv2d", "kernel larger than padded input: " + shapes);
  if ((g.h + 2 * pad - g.kh) % stride != 0 || (g.w + 2 * pad - g.kw) % stride != 0)
    shape_error("conv2d", "output size not integral: " + shapes);
  g.oh = (g.h + 2 * pad - g.kh) / stride + 1;
  g.ow = (g.w + 2 * pad - g.kw) / stride + 1;

  const auto npos = static_cast<Eigen::Index>(g.positions());
  const auto patch = static_cast<Eigen::Index>(g.patch());
  const auto cout = static_cast<Eigen::Index>(g.cout);
  // Operands live in Eigen-owned (aligned) storage so the GEMM kernels do
  // not depend on where the tensor buffers happen to be allocated.
  std::vector<double> out(g.batch * g.cout * g.positions());
  RowMatrix cols(patch, npos);
  RowMatrix res(cout, npos);
  const RowMatrix w = ConstMatMap(weight.data().data(), cout, patch);
  const double* b = bias.data().data();
  for (std::size_t bi = 0; bi < g.batch; ++bi) {
    im2col(input.data().data() + bi * g.cin * g.h * g.w, g, cols.data());
    res.noalias() = w * cols;
    double* dst = out.data() + bi * g.cout * g.positions();
    for (Eigen::Index c = 0; c < cout; ++c)
      for (Eigen::Index p = 0; p < npos; ++p) dst[c * npos + p] = res(c, p) + b[c];
  }

  NodePtr px = input.node(), pw = weight.node(), pb = bias.node();
  return make_result({g.batch, g.cout, g.oh, g.ow}, std::move(out), {input, weight, bias},
                     [px, pw, pb, g](TensorNode& o) {
    const auto npos = static_cast<Eigen::Index>(g.positions());
    const auto patch = static_cast<Eigen::Index>(g.patch());
    const auto cout = static_cast<Eigen::Index>(g.cout);
    RowMatrix cols(patch, npos);
    RowMatrix gout(cout, npos);
    RowMatrix gcols;
    RowMatrix gw;
    if (px->requires_grad) gcols.resize(patch, npos);
    if (pw->requires_grad) gw = RowMatrix::Zero(cout, patch);
    const RowMatrix w = ConstMatMap(pw->data.data(), cout, patch);
    for (std::size_t bi = 0; bi < g.batch; ++bi) {
      const double* src = o.grad.data() + bi * g.cout * g.positions();
      std::copy(src, src + cout * npos, gout.data());
      if (pb->requires_grad) {
        auto& gb = pb->grad_buffer();
        for (Eigen::Index c = 0; c < cout; ++c) {
          double acc = 0.0;
          for (Eigen::Index p = 0; p < npos; ++p) acc += gout(c, p);
          gb[static_cast<std::size_t>(c)] += acc;
        }
      }
      if (pw->requires_grad) {
        im2col(px->data.data() + bi * g.cin * g.h * g.w, g, cols.data());
        gw.noalias() += gout * cols.transpose();
      }
      if (px->requires_grad) {
        gcols.noalias() = w.transpose() * gout;
        col2im_add(gcols.data(), g, px->grad_buffer().data() + bi * g.cin * g.h * g.w);
      }
    }
    if (pw->requires_grad) {
      auto& dst = pw->grad_buffer();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gw.data()[i];
    }
  });
}

Tensor maxpool2(const Tensor& x) {
  if (x.rank() != 4) shape_error("maxpool2", "expected [B,C,H,W], got " + shape_string(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) shape_error("maxpool2", "odd spatial size " + shape_string(x.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  std::vector<double> out(planes * oh * ow);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  const double* src = x.data().data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t base = p * h * w + 2 * oy * w + 2 * ox;
        std::size_t best = base;
        for (std::size_t idx : {base + 1, base + w, base + w + 1})
          if (src[idx] > src[best]) best = idx;
        const std::size_t o = (p * oh + oy) * ow + ox;
        out[o] = src[best];
        (*argmax)[o] = best;
      }
    }
  }
  NodePtr px = x.node();
  return make_result({x.dim(0), x.dim(1), oh, ow}, std::move(out), {x}, [px, argmax](TensorNode& o) {
    auto& g = px->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[(*argmax)[i]] += o.grad[i];
  });
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.rank() != 4) shape_error("global_avg_pool", "expected [B,C,H,W], got " + shape_string(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1), area = x.dim(2) * x.dim(3);
  std::vector<double> out(planes);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = x.data().data() + p * area;
    out[p] = std::accumulate(src, src + area, 0.0) / static_cast<double>(area);
  }
  NodePtr px = x.node();
  return make_result({x.dim(0), x.dim(1)}, std::move(out), {x}, [px, planes, area](TensorNode& o) {
    auto& g = px->grad_buffer();
    for (std::size_t p = 0; p < planes; ++p) {
      const double share = o.grad[p] / static_cast<double>(area);
      for (std::size_t i = 0; i < area; ++i) g[p * area + i] += share;
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1 || x.dim(1) != w.dim(1) || b.dim(0) != w.dim(0))
    shape_error("linear", "x " + shape_string(x.shape()) + ", w " + shape_string(w.shape()) + ", b " +
                              shape_string(b.shape()));
  const std::size_t rows = x.dim(0), in = x.dim(1), outd = w.dim(0);
  std::vector<double> out(rows * outd);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t e = 0; e < outd; ++e)
      out[r * outd + e] = b.data()[e] + dot(x.data().data() + r * in, w.data().data() + e * in, in);
  NodePtr px = x.node(), pw = w.node(), pb = b.node();
  return make_result({rows, outd}, std::move(out), {x, w, b}, [px, pw, pb, rows, in, outd](TensorNode& o) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t e = 0; e < outd; ++e) {
        const double go = o.grad[r * outd + e];
        if (px->requires_grad) axpy(go, pw->data.data() + e * in, px->grad_buffer().data() + r * in, in);
        if (pw->requires_grad) axpy(go, px->data.data() + r * in, pw->grad_buffer().data() + e * in, in);
        if (pb->requires_grad) pb->grad_buffer()[e] += go;
      }
    }
  });
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    shape_error("backward", "loss must be a scalar, got " + (loss.defined() ? shape_string(loss.shape()) : "null"));
  if (!std::isfinite(loss.item())) fail(ErrorCode::kDegenerateData, "loss", "non-finite loss");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS; reversed it is a topological order.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (TensorNode* n : order)
    if (n->backward) n->grad.assign(n->data.size(), 0.0);
  loss.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward) (*it)->backward(**it);
}

AdamState AdamState::for_param(const Tensor& param, const AdamConfig& cfg) {
  AdamState s;
  s.m.assign(param.size(), 0.0);
  s.v.assign(param.size(), 0.0);
  s.lr = cfg.lr;
  s.beta1 = cfg.beta1;
  s.beta2 = cfg.beta2;
  s.eps = cfg.eps;
  return s;
}

void adam_step(std::span<Tensor> params, std::span<AdamState> states) {
  if (params.size() != states.size())
    fail(ErrorCode::kInvalidArgument, "states", "one AdamState per parameter required");
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].has_grad())
      fail(ErrorCode::kInvalidArgument, "grad", "parameter " + std::to_string(p) + " has no gradient");
    if (states[p].m.size() != params[p].size() || states[p].v.size() != params[p].size())
      fail(ErrorCode::kShapeMismatch, "state", "Adam moments do not match parameter " + std::to_string(p));
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    AdamState& s = states[p];
    ++s.step_count;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step_count));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step_count));
    auto theta = params[p].mutable_data();
    auto grad = params[p].mutable_grad();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i];
      s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
      s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
      const double m_hat = s.m[i] / c1;
      const double v_hat = s.v[i] / c2;
      theta[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
    }
    std::fill(grad.begin(), grad.end(), 0.0);
  }
}

}  // namespace protoaudio::ad

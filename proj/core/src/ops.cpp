#include "spdnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spdnet {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

std::size_t product(const std::vector<std::size_t>& v, std::size_t from, std::size_t to) {
  std::size_t p = 1;
  for (std::size_t i = from; i < to; ++i) p *= v[i];
  return p;
}

void check_finite(const std::vector<double>& v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::runtime_error(std::string(op) + " produced a non-finite value");
    }
  }
}

Tensor make_result(std::vector<std::size_t> shape, std::vector<double> values, OpKind op,
                   const char* op_name, std::vector<NodePtr> parents,
                   std::function<void(Node&)> backward) {
  check_finite(values, op_name);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->op = op;
  bool needs_grad = false;
  for (const auto& p : parents) {
    if (p && p->requires_grad) needs_grad = true;
  }
  node->requires_grad = needs_grad;
  if (needs_grad) {
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward);
  }
  return Tensor(std::move(node));
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor operand");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                " vs " + shape_string(b.shape()));
  }
}

bool is_suffix(const std::vector<std::size_t>& small, const std::vector<std::size_t>& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// Adds `count` doubles from src into dst.
void axpy(double* dst, const double* src, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) dst[i] += src[i];
}

}  // namespace

// ============================================================================
// Elementwise
// ============================================================================

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  if (a.shape() == b.shape()) {
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    NodePtr an = a.node(), bn = b.node();
    return make_result(a.shape(), std::move(out), OpKind::kAdd, "add", {an, bn},
                       [an, bn](Node& self) {
                         if (an->requires_grad) {
                           an->ensure_grad();
                           axpy(an->grad.data(), self.grad.data(), self.grad.size());
                         }
                         if (bn->requires_grad) {
                           bn->ensure_grad();
                           axpy(bn->grad.data(), self.grad.data(), self.grad.size());
                         }
                       });
  }
  if (!is_suffix(b.shape(), a.shape())) {
    throw std::invalid_argument("add: shape mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()) + " (rhs must equal lhs or a trailing suffix)");
  }
  const auto& av = a.values();
  const auto& bv = b.values();
  const std::size_t bn_count = bv.size();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i % bn_count];
  NodePtr an = a.node(), bn = b.node();
  return make_result(a.shape(), std::move(out), OpKind::kAdd, "add", {an, bn},
                     [an, bn, bn_count](Node& self) {
                       if (an->requires_grad) {
                         an->ensure_grad();
                         axpy(an->grad.data(), self.grad.data(), self.grad.size());
                       }
                       if (bn->requires_grad) {
                         bn->ensure_grad();
                         for (std::size_t i = 0; i < self.grad.size(); ++i) {
                           bn->grad[i % bn_count] += self.grad[i];
                         }
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_defined(a, "sub");
  require_defined(b, "sub");
  require_same_shape(a, b, "sub");
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  NodePtr an = a.node(), bn = b.node();
  return make_result(a.shape(), std::move(out), OpKind::kSub, "sub", {an, bn},
                     [an, bn](Node& self) {
                       if (an->requires_grad) {
                         an->ensure_grad();
                         axpy(an->grad.data(), self.grad.data(), self.grad.size());
                       }
                       if (bn->requires_grad) {
                         bn->ensure_grad();
                         for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
                       }
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  require_same_shape(a, b, "mul");
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  NodePtr an = a.node(), bn = b.node();
  return make_result(a.shape(), std::move(out), OpKind::kMul, "mul", {an, bn},
                     [an, bn](Node& self) {
                       if (an->requires_grad) {
                         an->ensure_grad();
                         for (std::size_t i = 0; i < self.grad.size(); ++i) {
                           an->grad[i] += self.grad[i] * bn->values[i];
                         }
                       }
                       if (bn->requires_grad) {
                         bn->ensure_grad();
                         for (std::size_t i = 0; i < self.grad.size(); ++i) {
                           bn->grad[i] += self.grad[i] * an->values[i];
                         }
                       }
                     });
}

Tensor scale(const Tensor& x, double factor) {
  require_defined(x, "scale");
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factor;
  NodePtr xn = x.node();
  return make_result(x.shape(), std::move(out), OpKind::kScale, "scale", {xn},
                     [xn, factor](Node& self) {
                       if (!xn->requires_grad) return;
                       xn->ensure_grad();
                       for (std::size_t i = 0; i < self.grad.size(); ++i) {
                         xn->grad[i] += self.grad[i] * factor;
                       }
                     });
}

Tensor scale_by(const Tensor& x, const Tensor& factor) {
  require_defined(x, "scale_by");
  require_defined(factor, "scale_by");
  if (factor.numel() != 1) {
    throw std::invalid_argument("scale_by: factor must be a single-element tensor, got shape " +
                                shape_string(factor.shape()));
  }
  const double f = factor.values()[0];
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * f;
  NodePtr xn = x.node(), fn = factor.node();
  return make_result(x.shape(), std::move(out), OpKind::kScaleBy, "scale_by", {xn, fn},
                     [xn, fn, f](Node& self) {
                       if (xn->requires_grad) {
                         xn->ensure_grad();
                         for (std::size_t i = 0; i < self.grad.size(); ++i) {
                           xn->grad[i] += self.grad[i] * f;
                         }
                       }
                       if (fn->requires_grad) {
                         fn->ensure_grad();
                         double acc = 0.0;
                         for (std::size_t i = 0; i < self.grad.size(); ++i) {
                           acc += self.grad[i] * xn->values[i];
                         }
                         fn->grad[0] += acc;
                       }
                     });
}

// ============================================================================
// Matrix product
// ============================================================================

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) {
    throw std::invalid_argument("matmul: operands must have rank >= 2, got " + shape_string(sa) +
                                " and " + shape_string(sb));
  }
  const std::size_t m = sa[sa.size() - 2];
  const std::size_t k = sa[sa.size() - 1];
  const std::size_t kb = sb[sb.size() - 2];
  const std::size_t n = sb[sb.size() - 1];
  if (k != kb) {
    throw std::invalid_argument("matmul: inner extents disagree, " + shape_string(sa) + " x " +
                                shape_string(sb));
  }
  std::vector<std::size_t> batch_a(sa.begin(), sa.end() - 2);
  std::vector<std::size_t> batch_b(sb.begin(), sb.end() - 2);
  std::vector<std::size_t> batch_shape;
  if (!batch_a.empty() && !batch_b.empty()) {
    if (batch_a != batch_b) {
      throw std::invalid_argument("matmul: batch extents disagree, " + shape_string(sa) + " x " +
                                  shape_string(sb));
    }
    batch_shape = batch_a;
  } else if (!batch_a.empty()) {
    batch_shape = batch_a;
  } else {
    batch_shape = batch_b;
  }
  const std::size_t batch = product(batch_shape, 0, batch_shape.size());
  const bool a_batched = !batch_a.empty();
  const bool b_batched = !batch_b.empty();

  std::vector<std::size_t> out_shape = batch_shape;
  out_shape.push_back(m);
  out_shape.push_back(n);

  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(batch * m * n, 0.0);
  for (std::size_t t = 0; t < batch; ++t) {
    const double* A = av.data() + (a_batched ? t * m * k : 0);
    const double* B = bv.data() + (b_batched ? t * k * n : 0);
    double* O = out.data() + t * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double aik = A[i * k + kk];
        if (aik == 0.0) continue;
        const double* Brow = B + kk * n;
        double* Orow = O + i * n;
        for (std::size_t j = 0; j < n; ++j) Orow[j] += aik * Brow[j];
      }
    }
  }

  NodePtr an = a.node(), bn = b.node();
  auto backward = [an, bn, batch, m, k, n, a_batched, b_batched](Node& self) {
    const double* G = self.grad.data();
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t t = 0; t < batch; ++t) {
        const double* Gt = G + t * m * n;
        const double* B = bn->values.data() + (b_batched ? t * k * n : 0);
        double* gA = an->grad.data() + (a_batched ? t * m * k : 0);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t kk = 0; kk < k; ++kk) {
            const double* Brow = B + kk * n;
            const double* Grow = Gt + i * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += Grow[j] * Brow[j];
            gA[i * k + kk] += acc;
          }
        }
      }
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t t = 0; t < batch; ++t) {
        const double* Gt = G + t * m * n;
        const double* A = an->values.data() + (a_batched ? t * m * k : 0);
        double* gB = bn->grad.data() + (b_batched ? t * k * n : 0);
        for (std::size_t i = 0; i < m; ++i) {
          const double* Grow = Gt + i * n;
          for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = A[i * k + kk];
            if (aik == 0.0) continue;
            double* gBrow = gB + kk * n;
            for (std::size_t j = 0; j < n; ++j) gBrow[j] += aik * Grow[j];
          }
        }
      }
    }
  };
  return make_result(std::move(out_shape), std::move(out), OpKind::kMatmul, "matmul", {an, bn},
                     std::move(backward));
}

// ============================================================================
// Convolutions (cross-correlation convention)
// ============================================================================

namespace {

std::size_t same_pad_left(std::size_t kernel) { return (kernel - 1) / 2; }

void check_valid_kernel(std::size_t kernel, std::size_t length, const char* op) {
  if (kernel > length) {
    throw std::invalid_argument(std::string(op) + ": kernel extent " + std::to_string(kernel) +
                                " wider than input extent " + std::to_string(length));
  }
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& kernel, Padding padding) {
  require_defined(x, "conv1d");
  require_defined(kernel, "conv1d");
  if (x.rank() != 3 || kernel.rank() != 3) {
    throw std::invalid_argument("conv1d: expected x [B,C,L] and kernel [OC,C,KW], got " +
                                shape_string(x.shape()) + " and " + shape_string(kernel.shape()));
  }
  const std::size_t B = x.extent(0), C = x.extent(1), L = x.extent(2);
  const std::size_t OC = kernel.extent(0), KC = kernel.extent(1), KW = kernel.extent(2);
  if (KC != C) {
    throw std::invalid_argument("conv1d: channel mismatch, x " + shape_string(x.shape()) +
                                " vs kernel " + shape_string(kernel.shape()));
  }
  std::size_t pad = 0, Lout = 0;
  if (padding == Padding::kSame) {
    pad = same_pad_left(KW);
    Lout = L;
  } else {
    check_valid_kernel(KW, L, "conv1d");
    Lout = L - KW + 1;
  }

  const auto& xv = x.values();
  const auto& wv = kernel.values();
  std::vector<double> out(B * OC * Lout, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t oc = 0; oc < OC; ++oc) {
      double* orow = out.data() + (b * OC + oc) * Lout;
      for (std::size_t c = 0; c < C; ++c) {
        const double* xrow = xv.data() + (b * C + c) * L;
        const double* wrow = wv.data() + (oc * C + c) * KW;
        for (std::size_t i = 0; i < Lout; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < KW; ++j) {
            const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(i + j) - static_cast<std::ptrdiff_t>(pad);
            if (t >= 0 && t < static_cast<std::ptrdiff_t>(L)) acc += wrow[j] * xrow[t];
          }
          orow[i] += acc;
        }
      }
    }
  }

  NodePtr xn = x.node(), wn = kernel.node();
  auto backward = [xn, wn, B, C, L, OC, KW, Lout, pad](Node& self) {
    const double* G = self.grad.data();
    const bool need_x = xn->requires_grad;
    const bool need_w = wn->requires_grad;
    if (need_x) xn->ensure_grad();
    if (need_w) wn->ensure_grad();
    if (!need_x && !need_w) return;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t oc = 0; oc < OC; ++oc) {
        const double* grow = G + (b * OC + oc) * Lout;
        for (std::size_t c = 0; c < C; ++c) {
          const double* xrow = xn->values.data() + (b * C + c) * L;
          const double* wrow = wn->values.data() + (oc * C + c) * KW;
          double* gx = need_x ? xn->grad.data() + (b * C + c) * L : nullptr;
          double* gw = need_w ? wn->grad.data() + (oc * C + c) * KW : nullptr;
          for (std::size_t i = 0; i < Lout; ++i) {
            const double g = grow[i];
            if (g == 0.0) continue;
            for (std::size_t j = 0; j < KW; ++j) {
              const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(i + j) - static_cast<std::ptrdiff_t>(pad);
              if (t < 0 || t >= static_cast<std::ptrdiff_t>(L)) continue;
              if (need_w) gw[j] += g * xrow[t];
              if (need_x) gx[t] += g * wrow[j];
            }
          }
        }
      }
    }
  };
  return make_result({B, OC, Lout}, std::move(out), OpKind::kConv1d, "conv1d", {xn, wn},
                     std::move(backward));
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel, Padding padding) {
  require_defined(x, "depthwise_conv1d");
  require_defined(kernel, "depthwise_conv1d");
  if (x.rank() != 3 || kernel.rank() != 2) {
    throw std::invalid_argument("depthwise_conv1d: expected x [B,C,L] and kernel [C,KW], got " +
                                shape_string(x.shape()) + " and " + shape_string(kernel.shape()));
  }
  const std::size_t B = x.extent(0), C = x.extent(1), L = x.extent(2);
  const std::size_t KC = kernel.extent(0), KW = kernel.extent(1);
  if (KC != C) {
    throw std::invalid_argument("depthwise_conv1d: channel mismatch, x " + shape_string(x.shape()) +
                                " vs kernel " + shape_string(kernel.shape()));
  }
  std::size_t pad = 0, Lout = 0;
  if (padding == Padding::kSame) {
    pad = same_pad_left(KW);
    Lout = L;
  } else {
    check_valid_kernel(KW, L, "depthwise_conv1d");
    Lout = L - KW + 1;
  }

  const auto& xv = x.values();
  const auto& wv = kernel.values();
  std::vector<double> out(B * C * Lout, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const double* xrow = xv.data() + (b * C + c) * L;
      const double* wrow = wv.data() + c * KW;
      double* orow = out.data() + (b * C + c) * Lout;
      for (std::size_t i = 0; i < Lout; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < KW; ++j) {
          const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(i + j) - static_cast<std::ptrdiff_t>(pad);
          if (t >= 0 && t < static_cast<std::ptrdiff_t>(L)) acc += wrow[j] * xrow[t];
        }
        orow[i] = acc;
      }
    }
  }

  NodePtr xn = x.node(), wn = kernel.node();
  auto backward = [xn, wn, B, C, L, KW, Lout, pad](Node& self) {
    const bool need_x = xn->requires_grad;
    const bool need_w = wn->requires_grad;
    if (need_x) xn->ensure_grad();
    if (need_w) wn->ensure_grad();
    if (!need_x && !need_w) return;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        const double* xrow = xn->values.data() + (b * C + c) * L;
        const double* wrow = wn->values.data() + c * KW;
        const double* grow = self.grad.data() + (b * C + c) * Lout;
        double* gx = need_x ? xn->grad.data() + (b * C + c) * L : nullptr;
        double* gw = need_w ? wn->grad.data() + c * KW : nullptr;
        for (std::size_t i = 0; i < Lout; ++i) {
          const double g = grow[i];
          if (g == 0.0) continue;
          for (std::size_t j = 0; j < KW; ++j) {
            const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(i + j) - static_cast<std::ptrdiff_t>(pad);
            if (t < 0 || t >= static_cast<std::ptrdiff_t>(L)) continue;
            if (need_w) gw[j] += g * xrow[t];
            if (need_x) gx[t] += g * wrow[j];
          }
        }
      }
    }
  };
  return make_result({B, C, Lout}, std::move(out), OpKind::kDepthwiseConv1d, "depthwise_conv1d",
                     {xn, wn}, std::move(backward));
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, Padding padding) {
  require_defined(x, "conv2d");
  require_defined(kernel, "conv2d");
  if (x.rank() != 4 || kernel.rank() != 4) {
    throw std::invalid_argument("conv2d: expected x [B,C,H,W] and kernel [OC,C,KH,KW], got " +
                                shape_string(x.shape()) + " and " + shape_string(kernel.shape()));
  }
  const std::size_t B = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
  const std::size_t OC = kernel.extent(0), KC = kernel.extent(1);
  const std::size_t KH = kernel.extent(2), KW = kernel.extent(3);
  if (KC != C) {
    throw std::invalid_argument("conv2d: channel mismatch, x " + shape_string(x.shape()) +
                                " vs kernel " + shape_string(kernel.shape()));
  }
  std::size_t pad_h = 0, pad_w = 0, Hout = 0, Wout = 0;
  if (padding == Padding::kSame) {
    pad_h = same_pad_left(KH);
    pad_w = same_pad_left(KW);
    Hout = H;
    Wout = W;
  } else {
    check_valid_kernel(KH, H, "conv2d");
    check_valid_kernel(KW, W, "conv2d");
    Hout = H - KH + 1;
    Wout = W - KW + 1;
  }

  const auto& xv = x.values();
  const auto& wv = kernel.values();
  std::vector<double> out(B * OC * Hout * Wout, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t oc = 0; oc < OC; ++oc) {
      double* oplane = out.data() + (b * OC + oc) * Hout * Wout;
      for (std::size_t c = 0; c < C; ++c) {
        const double* xplane = xv.data() + (b * C + c) * H * W;
        const double* wplane = wv.data() + (oc * C + c) * KH * KW;
        for (std::size_t i = 0; i < Hout; ++i) {
          for (std::size_t j = 0; j < Wout; ++j) {
            double acc = 0.0;
            for (std::size_t u = 0; u < KH; ++u) {
              const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(i + u) - static_cast<std::ptrdiff_t>(pad_h);
              if (r < 0 || r >= static_cast<std::ptrdiff_t>(H)) continue;
              for (std::size_t v = 0; v < KW; ++v) {
                const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(j + v) - static_cast<std::ptrdiff_t>(pad_w);
                if (s < 0 || s >= static_cast<std::ptrdiff_t>(W)) continue;
                acc += wplane[u * KW + v] * xplane[r * W + s];
              }
            }
            oplane[i * Wout + j] += acc;
          }
        }
      }
    }
  }

  NodePtr xn = x.node(), wn = kernel.node();
  auto backward = [xn, wn, B, C, H, W, OC, KH, KW, Hout, Wout, pad_h, pad_w](Node& self) {
    const bool need_x = xn->requires_grad;
    const bool need_w = wn->requires_grad;
    if (need_x) xn->ensure_grad();
    if (need_w) wn->ensure_grad();
    if (!need_x && !need_w) return;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t oc = 0; oc < OC; ++oc) {
        const double* gplane = self.grad.data() + (b * OC + oc) * Hout * Wout;
        for (std::size_t c = 0; c < C; ++c) {
          const double* xplane = xn->values.data() + (b * C + c) * H * W;
          const double* wplane = wn->values.data() + (oc * C + c) * KH * KW;
          double* gx = need_x ? xn->grad.data() + (b * C + c) * H * W : nullptr;
          double* gw = need_w ? wn->grad.data() + (oc * C + c) * KH * KW : nullptr;
          for (std::size_t i = 0; i < Hout; ++i) {
            for (std::size_t j = 0; j < Wout; ++j) {
              const double g = gplane[i * Wout + j];
              if (g == 0.0) continue;
              for (std::size_t u = 0; u < KH; ++u) {
                const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(i + u) - static_cast<std::ptrdiff_t>(pad_h);
                if (r < 0 || r >= static_cast<std::ptrdiff_t>(H)) continue;
                for (std::size_t v = 0; v < KW; ++v) {
                  const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(j + v) - static_cast<std::ptrdiff_t>(pad_w);
                  if (s < 0 || s >= static_cast<std::ptrdiff_t>(W)) continue;
                  if (need_w) gw[u * KW + v] += g * xplane[r * W + s];
                  if (need_x) gx[r * W + s] += g * wplane[u * KW + v];
                }
              }
            }
          }
        }
      }
    }
  };
  return make_result({B, OC, Hout, Wout}, std::move(out), OpKind::kConv2d, "conv2d", {xn, wn},
                     std::move(backward));
}

// ============================================================================
// Normalization and activations
// ============================================================================

Tensor softmax(const Tensor& x, std::size_t axis) {
  require_defined(x, "softmax");
  const auto& s = x.shape();
  if (axis >= s.size()) {
    throw std::invalid_argument("softmax: axis " + std::to_string(axis) + " out of range for shape " +
                                shape_string(s));
  }
  const std::size_t outer = product(s, 0, axis);
  const std::size_t mid = s[axis];
  const std::size_t inner = product(s, axis + 1, s.size());

  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * mid * inner + in;
      double mx = xv[base];
      for (std::size_t a = 1; a < mid; ++a) mx = std::max(mx, xv[base + a * inner]);
      double sum = 0.0;
      for (std::size_t a = 0; a < mid; ++a) {
        const double e = std::exp(xv[base + a * inner] - mx);
        out[base + a * inner] = e;
        sum += e;
      }
      for (std::size_t a = 0; a < mid; ++a) out[base + a * inner] /= sum;
    }
  }

  NodePtr xn = x.node();
  auto backward = [xn, outer, mid, inner](Node& self) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * mid * inner + in;
        double dot = 0.0;
        for (std::size_t a = 0; a < mid; ++a) {
          const std::size_t idx = base + a * inner;
          dot += self.grad[idx] * self.values[idx];
        }
        for (std::size_t a = 0; a < mid; ++a) {
          const std::size_t idx = base + a * inner;
          xn->grad[idx] += self.values[idx] * (self.grad[idx] - dot);
        }
      }
    }
  };
  return make_result(s, std::move(out), OpKind::kSoftmax, "softmax", {xn}, std::move(backward));
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_defined(x, "layer_norm");
  require_defined(gain, "layer_norm");
  require_defined(bias, "layer_norm");
  if (eps <= 0.0) throw std::invalid_argument("layer_norm: eps must be positive");
  const auto& s = x.shape();
  const std::size_t D = s.back();
  if (gain.numel() != D || bias.numel() != D) {
    throw std::invalid_argument("layer_norm: gain/bias must match last extent " + std::to_string(D) +
                                ", got " + shape_string(gain.shape()) + " and " + shape_string(bias.shape()));
  }
  const std::size_t lanes = x.numel() / D;
  const auto& xv = x.values();
  const auto& gv = gain.values();
  const auto& bv = bias.values();

  std::vector<double> out(xv.size());
  std::vector<double> xhat(xv.size());
  std::vector<double> inv_std(lanes);
  for (std::size_t l = 0; l < lanes; ++l) {
    const double* row = xv.data() + l * D;
    double mu = 0.0;
    for (std::size_t d = 0; d < D; ++d) mu += row[d];
    mu /= static_cast<double>(D);
    double var = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      const double c = row[d] - mu;
      var += c * c;
    }
    var /= static_cast<double>(D);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[l] = inv;
    for (std::size_t d = 0; d < D; ++d) {
      const double h = (row[d] - mu) * inv;
      xhat[l * D + d] = h;
      out[l * D + d] = h * gv[d] + bv[d];
    }
  }

  NodePtr xn = x.node(), gn = gain.node(), bn = bias.node();
  auto backward = [xn, gn, bn, lanes, D, xhat = std::move(xhat),
                   inv_std = std::move(inv_std)](Node& self) {
    const double* G = self.grad.data();
    if (gn->requires_grad) gn->ensure_grad();
    if (bn->requires_grad) bn->ensure_grad();
    if (xn->requires_grad) xn->ensure_grad();
    for (std::size_t l = 0; l < lanes; ++l) {
      const double* g = G + l * D;
      const double* h = xhat.data() + l * D;
      if (gn->requires_grad || bn->requires_grad) {
        for (std::size_t d = 0; d < D; ++d) {
          if (gn->requires_grad) gn->grad[d] += g[d] * h[d];
          if (bn->requires_grad) bn->grad[d] += g[d];
        }
      }
      if (xn->requires_grad) {
        double mean_t = 0.0, mean_th = 0.0;
        for (std::size_t d = 0; d < D; ++d) {
          const double t = g[d] * gn->values[d];
          mean_t += t;
          mean_th += t * h[d];
        }
        mean_t /= static_cast<double>(D);
        mean_th /= static_cast<double>(D);
        double* gx = xn->grad.data() + l * D;
        for (std::size_t d = 0; d < D; ++d) {
          const double t = g[d] * gn->values[d];
          gx[d] += inv_std[l] * (t - mean_t - h[d] * mean_th);
        }
      }
    }
  };
  return make_result(s, std::move(out), OpKind::kLayerNorm, "layer_norm", {xn, gn, bn},
                     std::move(backward));
}

Tensor gelu(const Tensor& x) {
  require_defined(x, "gelu");
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * kInvSqrt2));
  }
  NodePtr xn = x.node();
  return make_result(x.shape(), std::move(out), OpKind::kGelu, "gelu", {xn},
                     [xn](Node& self) {
                       if (!xn->requires_grad) return;
                       xn->ensure_grad();
                       for (std::size_t i = 0; i < self.grad.size(); ++i) {
                         const double v = xn->values[i];
                         const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
                         const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
                         xn->grad[i] += self.grad[i] * (cdf + v * pdf);
                       }
                     });
}

Tensor relu(const Tensor& x) {
  require_defined(x, "relu");
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  NodePtr xn = x.node();
  return make_result(x.shape(), std::move(out), OpKind::kRelu, "relu", {xn},
                     [xn](Node& self) {
                       if (!xn->requires_grad) return;
                       xn->ensure_grad();
                       for (std::size_t i = 0; i < self.grad.size(); ++i) {
                         if (xn->values[i] > 0.0) xn->grad[i] += self.grad[i];
                       }
                     });
}

// ============================================================================
// Reductions
// ============================================================================

Tensor mean_all(const Tensor& x) {
  require_defined(x, "mean");
  const auto& xv = x.values();
  const double n = static_cast<double>(xv.size());
  double acc = 0.0;
  for (double v : xv) acc += v;
  NodePtr xn = x.node();
  return make_result({1}, {acc / n}, OpKind::kMean, "mean", {xn},
                     [xn, n](Node& self) {
                       if (!xn->requires_grad) return;
                       xn->ensure_grad();
                       const double g = self.grad[0] / n;
                       for (double& v : xn->grad) v += g;
                     });
}

Tensor sum_all(const Tensor& x) {
  require_defined(x, "sum");
  const auto& xv = x.values();
  double acc = 0.0;
  for (double v : xv) acc += v;
  NodePtr xn = x.node();
  return make_result({1}, {acc}, OpKind::kSum, "sum", {xn},
                     [xn](Node& self) {
                       if (!xn->requires_grad) return;
                       xn->ensure_grad();
                       const double g = self.grad[0];
                       for (double& v : xn->grad) v += g;
                     });
}

// ============================================================================
// Layout
// ============================================================================

Tensor reshape(const Tensor& x, std::vector<std::size_t> new_shape) {
  require_defined(x, "reshape");
  std::size_t n = 1;
  for (std::size_t e : new_shape) n *= e;
  if (new_shape.empty() || n != x.numel()) {
    throw std::invalid_argument("reshape: element count mismatch, " + shape_string(x.shape()) +
                                " -> " + shape_string(new_shape));
  }
  NodePtr xn = x.node();
  return make_result(std::move(new_shape), x.values(), OpKind::kReshape, "reshape", {xn},
                     [xn](Node& self) {
                       if (!xn->requires_grad) return;
                       xn->ensure_grad();
                       axpy(xn->grad.data(), self.grad.data(), self.grad.size());
                     });
}

namespace {

std::vector<std::size_t> row_major_strides(const std::vector<std::size_t>& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

}  // namespace

Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  require_defined(x, "permute");
  const auto& s = x.shape();
  if (axes.size() != s.size()) {
    throw std::invalid_argument("permute: axes " + shape_string(axes) + " do not match rank of " +
                                shape_string(s));
  }
  std::vector<bool> seen(s.size(), false);
  for (std::size_t a : axes) {
    if (a >= s.size() || seen[a]) {
      throw std::invalid_argument("permute: invalid axis list " + shape_string(axes));
    }
    seen[a] = true;
  }
  std::vector<std::size_t> out_shape(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out_shape[i] = s[axes[i]];

  const auto in_strides = row_major_strides(s);
  // src stride to walk for each output axis
  std::vector<std::size_t> walk(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) walk[i] = in_strides[axes[i]];

  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  const std::size_t rank = s.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src = 0;
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    out[flat] = xv[src];
    // increment odometer over out_shape, tracking src offset
    for (std::size_t d = rank; d-- > 0;) {
      idx[d]++;
      src += walk[d];
      if (idx[d] < out_shape[d]) break;
      src -= walk[d] * out_shape[d];
      idx[d] = 0;
    }
  }

  NodePtr xn = x.node();
  auto backward = [xn, out_shape, walk, rank](Node& self) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    std::vector<std::size_t> idx(rank, 0);
    std::size_t src = 0;
    for (std::size_t flat = 0; flat < self.grad.size(); ++flat) {
      xn->grad[src] += self.grad[flat];
      for (std::size_t d = rank; d-- > 0;) {
        idx[d]++;
        src += walk[d];
        if (idx[d] < out_shape[d]) break;
        src -= walk[d] * out_shape[d];
        idx[d] = 0;
      }
    }
  };
  return make_result(std::move(out_shape), std::move(out), OpKind::kPermute, "permute", {xn},
                     std::move(backward));
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t count) {
  require_defined(x, "slice");
  const auto& s = x.shape();
  if (axis >= s.size()) {
    throw std::invalid_argument("slice: axis " + std::to_string(axis) + " out of range for shape " +
                                shape_string(s));
  }
  if (count == 0 || start + count > s[axis]) {
    throw std::invalid_argument("slice: range [" + std::to_string(start) + "," +
                                std::to_string(start + count) + ") invalid for shape " + shape_string(s));
  }
  const std::size_t outer = product(s, 0, axis);
  const std::size_t mid = s[axis];
  const std::size_t inner = product(s, axis + 1, s.size());

  std::vector<std::size_t> out_shape = s;
  out_shape[axis] = count;
  const auto& xv = x.values();
  std::vector<double> out(outer * count * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    const double* src = xv.data() + (o * mid + start) * inner;
    double* dst = out.data() + o * count * inner;
    std::copy(src, src + count * inner, dst);
  }

  NodePtr xn = x.node();
  auto backward = [xn, outer, mid, inner, start, count](Node& self) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (std::size_t o = 0; o < outer; ++o) {
      double* dst = xn->grad.data() + (o * mid + start) * inner;
      const double* src = self.grad.data() + o * count * inner;
      axpy(dst, src, count * inner);
    }
  };
  return make_result(std::move(out_shape), std::move(out), OpKind::kSlice, "slice", {xn},
                     std::move(backward));
}

Tensor pad_to(const Tensor& x, std::size_t axis, std::size_t new_extent) {
  require_defined(x, "pad_zeros");
  const auto& s = x.shape();
  if (axis >= s.size()) {
    throw std::invalid_argument("pad_zeros: axis " + std::to_string(axis) + " out of range for shape " +
                                shape_string(s));
  }
  if (new_extent < s[axis]) {
    throw std::invalid_argument("pad_zeros: target extent " + std::to_string(new_extent) +
                                " smaller than current in " + shape_string(s));
  }
  const std::size_t outer = product(s, 0, axis);
  const std::size_t mid = s[axis];
  const std::size_t inner = product(s, axis + 1, s.size());

  std::vector<std::size_t> out_shape = s;
  out_shape[axis] = new_extent;
  const auto& xv = x.values();
  std::vector<double> out(outer * new_extent * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    const double* src = xv.data() + o * mid * inner;
    double* dst = out.data() + o * new_extent * inner;
    std::copy(src, src + mid * inner, dst);
  }

  NodePtr xn = x.node();
  auto backward = [xn, outer, mid, inner, new_extent](Node& self) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (std::size_t o = 0; o < outer; ++o) {
      double* dst = xn->grad.data() + o * mid * inner;
      const double* src = self.grad.data() + o * new_extent * inner;
      axpy(dst, src, mid * inner);
    }
  };
  return make_result(std::move(out_shape), std::move(out), OpKind::kPad, "pad_zeros", {xn},
                     std::move(backward));
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no operands");
  for (const auto& p : parts) require_defined(p, "concat");
  const auto& s0 = parts[0].shape();
  if (axis >= s0.size()) {
    throw std::invalid_argument("concat: axis " + std::to_string(axis) + " out of range for shape " +
                                shape_string(s0));
  }
  std::size_t total_mid = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (s.size() != s0.size()) {
      throw std::invalid_argument("concat: rank mismatch " + shape_string(s0) + " vs " + shape_string(s));
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != s0[i]) {
        throw std::invalid_argument("concat: shape mismatch off-axis, " + shape_string(s0) + " vs " +
                                    shape_string(s));
      }
    }
    total_mid += s[axis];
  }
  const std::size_t outer = product(s0, 0, axis);
  const std::size_t inner = product(s0, axis + 1, s0.size());

  std::vector<std::size_t> out_shape = s0;
  out_shape[axis] = total_mid;
  std::vector<double> out(outer * total_mid * inner);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t mid = p.shape()[axis];
    const auto& pv = p.values();
    for (std::size_t o = 0; o < outer; ++o) {
      const double* src = pv.data() + o * mid * inner;
      double* dst = out.data() + (o * total_mid + offset) * inner;
      std::copy(src, src + mid * inner, dst);
    }
    offset += mid;
  }

  std::vector<NodePtr> parents;
  std::vector<std::size_t> mids;
  parents.reserve(parts.size());
  for (const auto& p : parts) {
    parents.push_back(p.node());
    mids.push_back(p.shape()[axis]);
  }
  auto backward = [parents, mids, outer, inner, total_mid](Node& self) {
    std::size_t offset = 0;
    for (std::size_t pi = 0; pi < parents.size(); ++pi) {
      const std::size_t mid = mids[pi];
      const auto& pn = parents[pi];
      if (pn->requires_grad) {
        pn->ensure_grad();
        for (std::size_t o = 0; o < outer; ++o) {
          double* dst = pn->grad.data() + o * mid * inner;
          const double* src = self.grad.data() + (o * total_mid + offset) * inner;
          axpy(dst, src, mid * inner);
        }
      }
      offset += mid;
    }
  };
  return make_result(std::move(out_shape), std::move(out), OpKind::kConcat, "concat", parents,
                     std::move(backward));
}

}  // namespace spdnet

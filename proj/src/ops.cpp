#include "neurotube/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

#include "neurotube/error.hpp"

namespace neurotube::ops {

namespace {

using MatR = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;
using Node = detail::Node;

struct Geom {
  std::size_t c, d, h, w;
  std::size_t spatial() const { return d * h * w; }
};

Geom geom4(const Tensor& t, const char* op) {
  if (t.rank() != 4)
    throw DimensionError(std::string(op) + ": expected [C,D,H,W], got " + shape_str(t.shape()));
  const auto& s = t.shape();
  return {s[0], s[1], s[2], s[3]};
}

struct ConvGeom {
  Geom in;
  std::size_t cout, kd, kh, kw, pad, stride;
  std::size_t od, oh, ow;
  std::size_t k_rows() const { return in.c * kd * kh * kw; }
  std::size_t n_cols() const { return od * oh * ow; }
  bool pointwise() const { return kd == 1 && kh == 1 && kw == 1 && pad == 0 && stride == 1; }
};

// col[r][n] with r = ((ci*kd + a)*kh + b)*kw + c and n the output voxel.
void im2col(const ConvGeom& g, const real* in, real* col) {
  const std::size_t n = g.n_cols();
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  const auto st = static_cast<std::ptrdiff_t>(g.stride);
  std::size_t r = 0;
  for (std::size_t ci = 0; ci < g.in.c; ++ci) {
    const real* src = in + ci * g.in.spatial();
    for (std::size_t a = 0; a < g.kd; ++a)
      for (std::size_t b = 0; b < g.kh; ++b)
        for (std::size_t c = 0; c < g.kw; ++c, ++r) {
          real* row = col + r * n;
          for (std::size_t z = 0; z < g.od; ++z) {
            const std::ptrdiff_t iz = static_cast<std::ptrdiff_t>(z) * st - pad + a;
            for (std::size_t y = 0; y < g.oh; ++y) {
              real* dst = row + (z * g.oh + y) * g.ow;
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y) * st - pad + b;
              if (iz < 0 || iz >= static_cast<std::ptrdiff_t>(g.in.d) || iy < 0 ||
                  iy >= static_cast<std::ptrdiff_t>(g.in.h)) {
                std::fill(dst, dst + g.ow, real(0));
                continue;
              }
              const real* line = src + (iz * g.in.h + iy) * g.in.w;
              for (std::size_t x = 0; x < g.ow; ++x) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x) * st - pad + c;
                dst[x] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in.w)) ? real(0) : line[ix];
              }
            }
          }
        }
  }
}

void col2im_add(const ConvGeom& g, const real* col, real* in) {
  const std::size_t n = g.n_cols();
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  const auto st = static_cast<std::ptrdiff_t>(g.stride);
  std::size_t r = 0;
  for (std::size_t ci = 0; ci < g.in.c; ++ci) {
    real* dst = in + ci * g.in.spatial();
    for (std::size_t a = 0; a < g.kd; ++a)
      for (std::size_t b = 0; b < g.kh; ++b)
        for (std::size_t c = 0; c < g.kw; ++c, ++r) {
          const real* row = col + r * n;
          for (std::size_t z = 0; z < g.od; ++z) {
            const std::ptrdiff_t iz = static_cast<std::ptrdiff_t>(z) * st - pad + a;
            if (iz < 0 || iz >= static_cast<std::ptrdiff_t>(g.in.d)) continue;
            for (std::size_t y = 0; y < g.oh; ++y) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y) * st - pad + b;
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in.h)) continue;
              const real* src = row + (z * g.oh + y) * g.ow;
              real* line = dst + (iz * g.in.h + iy) * g.in.w;
              for (std::size_t x = 0; x < g.ow; ++x) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x) * st - pad + c;
                if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.in.w)) line[ix] += src[x];
              }
            }
          }
        }
  }
}

std::size_t conv_out(std::size_t n, std::size_t k, std::size_t pad, std::size_t stride,
                     const char* axis) {
  if (n + 2 * pad < k)
    throw DimensionError(std::string("conv3d: ") + axis + " extent " + std::to_string(n) +
                         " with padding " + std::to_string(pad) + " is smaller than kernel " +
                         std::to_string(k));
  return (n + 2 * pad - k) / stride + 1;
}

}  // namespace

Tensor conv3d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t padding,
              std::size_t stride) {
  const Geom in = geom4(input, "conv3d");
  if (weight.rank() != 5)
    throw DimensionError("conv3d: weight must be [C_out,C_in,kd,kh,kw], got " +
                         shape_str(weight.shape()));
  const auto& ws = weight.shape();
  if (ws[1] != in.c)
    throw DimensionError("conv3d: input has " + std::to_string(in.c) +
                         " channels but weight expects " + std::to_string(ws[1]));
  if (stride == 0) throw ArgumentError("conv3d: stride must be positive");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != ws[0]))
    throw DimensionError("conv3d: bias must be [" + std::to_string(ws[0]) + "], got " +
                         shape_str(bias.shape()));

  ConvGeom g{in, ws[0], ws[2], ws[3], ws[4], padding, stride, 0, 0, 0};
  g.od = conv_out(in.d, g.kd, padding, stride, "depth");
  g.oh = conv_out(in.h, g.kh, padding, stride, "height");
  g.ow = conv_out(in.w, g.kw, padding, stride, "width");

  const std::size_t K = g.k_rows(), N = g.n_cols();
  std::shared_ptr<std::vector<real>> col;
  const real* colp = input.data().data();
  if (!g.pointwise()) {
    col = std::make_shared<std::vector<real>>(K * N);
    im2col(g, input.data().data(), col->data());
    colp = col->data();
  }

  std::vector<real> out(g.cout * N);
  {
    MapR y(out.data(), g.cout, N);
    y.noalias() = CMapR(weight.data().data(), g.cout, K) * CMapR(colp, K, N);
    if (bias.defined()) {
      const auto bd = bias.data();
      for (std::size_t co = 0; co < g.cout; ++co) y.row(co).array() += bd[co];
    }
  }

  std::vector<Tensor> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return detail::make_result(
      Shape{g.cout, g.od, g.oh, g.ow}, std::move(out), std::move(inputs),
      [g, col, has_bias](Node& self) {
        Node& x = *self.inputs[0];
        Node& w = *self.inputs[1];
        const std::size_t K = g.k_rows(), N = g.n_cols();
        CMapR dy(self.grad.data(), g.cout, N);
        const real* colp = col ? col->data() : x.data.data();
        if (w.requires_grad) {
          MapR dw(w.ensure_grad().data(), g.cout, K);
          dw.noalias() += dy * CMapR(colp, K, N).transpose();
        }
        if (has_bias && self.inputs[2]->requires_grad) {
          auto& db = self.inputs[2]->ensure_grad();
          // Plain loop: Eigen's vectorized sum depends on buffer alignment.
          for (std::size_t co = 0; co < g.cout; ++co) {
            const real* row = self.grad.data() + co * N;
            double acc = 0;
            for (std::size_t i = 0; i < N; ++i) acc += row[i];
            db[co] += static_cast<real>(acc);
          }
        }
        if (x.requires_grad) {
          auto& dx = x.ensure_grad();
          if (g.pointwise()) {
            MapR(dx.data(), K, N).noalias() += CMapR(w.data.data(), g.cout, K).transpose() * dy;
          } else {
            std::vector<real> dcol(K * N);
            MapR(dcol.data(), K, N).noalias() = CMapR(w.data.data(), g.cout, K).transpose() * dy;
            col2im_add(g, dcol.data(), dx.data());
          }
        }
      });
}

Tensor maxpool3d(const Tensor& input, std::size_t window) {
  return maxpool3d(input, Window3{window, window, window});
}

Tensor maxpool3d(const Tensor& input, Window3 win) {
  const Geom in = geom4(input, "maxpool3d");
  if (win.d == 0 || win.h == 0 || win.w == 0) throw ArgumentError("maxpool3d: zero window");
  if (in.d % win.d || in.h % win.h || in.w % win.w)
    throw DimensionError("maxpool3d: spatial dims " + shape_str(input.shape()) +
                         " not divisible by window");
  const std::size_t od = in.d / win.d, oh = in.h / win.h, ow = in.w / win.w;
  std::vector<real> out(in.c * od * oh * ow);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  const auto src = input.data();
  std::size_t o = 0;
  for (std::size_t c = 0; c < in.c; ++c)
    for (std::size_t z = 0; z < od; ++z)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x, ++o) {
          std::size_t best = ((c * in.d + z * win.d) * in.h + y * win.h) * in.w + x * win.w;
          real best_v = src[best];
          for (std::size_t a = 0; a < win.d; ++a)
            for (std::size_t b = 0; b < win.h; ++b)
              for (std::size_t e = 0; e < win.w; ++e) {
                const std::size_t i =
                    ((c * in.d + z * win.d + a) * in.h + y * win.h + b) * in.w + x * win.w + e;
                if (src[i] > best_v) {
                  best_v = src[i];
                  best = i;
                }
              }
          out[o] = best_v;
          (*argmax)[o] = best;
        }
  return detail::make_result(Shape{in.c, od, oh, ow}, std::move(out), {input},
                             [argmax](Node& self) {
                               auto& dx = self.inputs[0]->ensure_grad();
                               for (std::size_t i = 0; i < argmax->size(); ++i)
                                 dx[(*argmax)[i]] += self.grad[i];
                             });
}

Tensor transconv3d(const Tensor& input, const Tensor& weight, std::size_t stride) {
  const Geom in = geom4(input, "transconv3d");
  if (weight.rank() != 5)
    throw DimensionError("transconv3d: weight must be [C_in,C_out,k,k,k], got " +
                         shape_str(weight.shape()));
  const auto& ws = weight.shape();
  if (ws[0] != in.c)
    throw DimensionError("transconv3d: input has " + std::to_string(in.c) +
                         " channels but weight expects " + std::to_string(ws[0]));
  const std::size_t cout = ws[1], kd = ws[2], kh = ws[3], kw = ws[4];
  if (kd != stride || kh != stride || kw != stride)
    throw ArgumentError("transconv3d: stride must equal the kernel size");
  const std::size_t kk = kd * kh * kw, N = in.spatial(), M = cout * kk;
  const std::size_t od = in.d * kd, oh = in.h * kh, ow = in.w * kw;

  // Scatter map: row (co, a, b, c) and column (z, y, x) of the GEMM result
  // land at output voxel (co, z*kd+a, y*kh+b, x*kw+c).
  auto scatter_index = [=](std::size_t row, std::size_t col) {
    const std::size_t co = row / kk, r = row % kk;
    const std::size_t a = r / (kh * kw), b = (r / kw) % kh, c = r % kw;
    const std::size_t z = col / (in.h * in.w), y = (col / in.w) % in.h, x = col % in.w;
    return ((co * od + z * kd + a) * oh + y * kh + b) * ow + x * kw + c;
  };

  std::vector<real> tmp(M * N);
  MapR(tmp.data(), M, N).noalias() =
      CMapR(weight.data().data(), in.c, M).transpose() * CMapR(input.data().data(), in.c, N);
  std::vector<real> out(cout * od * oh * ow);
  for (std::size_t row = 0; row < M; ++row)
    for (std::size_t col = 0; col < N; ++col) out[scatter_index(row, col)] = tmp[row * N + col];

  return detail::make_result(
      Shape{cout, od, oh, ow}, std::move(out), {input, weight},
      [=](Node& self) {
        Node& x = *self.inputs[0];
        Node& w = *self.inputs[1];
        std::vector<real> dtmp(M * N);
        for (std::size_t row = 0; row < M; ++row)
          for (std::size_t col = 0; col < N; ++col)
            dtmp[row * N + col] = self.grad[scatter_index(row, col)];
        CMapR dy(dtmp.data(), M, N);
        if (x.requires_grad)
          MapR(x.ensure_grad().data(), in.c, N).noalias() += CMapR(w.data.data(), in.c, M) * dy;
        if (w.requires_grad)
          MapR(w.ensure_grad().data(), in.c, M).noalias() +=
              CMapR(x.data.data(), in.c, N) * dy.transpose();
      });
}

Tensor activation(const Tensor& input, Activation kind) {
  const auto x = input.data();
  std::vector<real> out(x.size());
  switch (kind) {
    case Activation::relu: {
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0 ? x[i] : real(0);
      return detail::make_result(input.shape(), std::move(out), {input}, [](Node& self) {
        Node& in = *self.inputs[0];
        auto& dx = in.ensure_grad();
        for (std::size_t i = 0; i < dx.size(); ++i)
          if (in.data[i] > 0) dx[i] += self.grad[i];
      });
    }
    case Activation::sigmoid: {
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] >= 0) {
          out[i] = real(1) / (real(1) + std::exp(-x[i]));
        } else {
          const real e = std::exp(x[i]);
          out[i] = e / (real(1) + e);
        }
      }
      return detail::make_result(input.shape(), std::move(out), {input}, [](Node& self) {
        auto& dx = self.inputs[0]->ensure_grad();
        for (std::size_t i = 0; i < dx.size(); ++i)
          dx[i] += self.grad[i] * self.data[i] * (real(1) - self.data[i]);
      });
    }
    case Activation::softmax_lastdim: {
      if (input.rank() < 1) throw DimensionError("softmax: rank must be >= 1");
      const std::size_t n = input.shape().back();
      const std::size_t rows = x.size() / n;
      for (std::size_t r = 0; r < rows; ++r) {
        const real* in = x.data() + r * n;
        real* o = out.data() + r * n;
        const real m = *std::max_element(in, in + n);
        double total = 0;
        for (std::size_t i = 0; i < n; ++i) {
          o[i] = std::exp(in[i] - m);
          total += o[i];
        }
        for (std::size_t i = 0; i < n; ++i) o[i] = static_cast<real>(o[i] / total);
      }
      return detail::make_result(input.shape(), std::move(out), {input}, [n, rows](Node& self) {
        auto& dx = self.inputs[0]->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          const real* y = self.data.data() + r * n;
          const real* g = self.grad.data() + r * n;
          double dot = 0;
          for (std::size_t i = 0; i < n; ++i) dot += static_cast<double>(g[i]) * y[i];
          for (std::size_t i = 0; i < n; ++i)
            dx[r * n + i] += y[i] * static_cast<real>(g[i] - dot);
        }
      });
    }
  }
  throw ArgumentError("activation: unknown kind");
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 1) throw DimensionError("dense: input must be [F], got " + shape_str(input.shape()));
  if (weight.rank() != 2 || weight.dim(1) != input.dim(0))
    throw DimensionError("dense: weight " + shape_str(weight.shape()) + " incompatible with input " +
                         shape_str(input.shape()));
  const std::size_t G = weight.dim(0), F = weight.dim(1);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != G))
    throw DimensionError("dense: bias must be [" + std::to_string(G) + "]");
  std::vector<real> out(G);
  using VecMap = Eigen::Map<Eigen::Matrix<real, Eigen::Dynamic, 1>>;
  using CVecMap = Eigen::Map<const Eigen::Matrix<real, Eigen::Dynamic, 1>>;
  VecMap(out.data(), G).noalias() =
      CMapR(weight.data().data(), G, F) * CVecMap(input.data().data(), F);
  if (bias.defined())
    for (std::size_t i = 0; i < G; ++i) out[i] += bias.data()[i];

  std::vector<Tensor> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return detail::make_result(Shape{G}, std::move(out), std::move(inputs), [G, F, has_bias](Node& self) {
    Node& x = *self.inputs[0];
    Node& w = *self.inputs[1];
    CVecMap g(self.grad.data(), G);
    if (x.requires_grad)
      VecMap(x.ensure_grad().data(), F).noalias() += CMapR(w.data.data(), G, F).transpose() * g;
    if (w.requires_grad)
      MapR(w.ensure_grad().data(), G, F).noalias() += g * CVecMap(x.data.data(), F).transpose();
    if (has_bias && self.inputs[2]->requires_grad) {
      auto& db = self.inputs[2]->ensure_grad();
      for (std::size_t i = 0; i < G; ++i) db[i] += self.grad[i];
    }
  });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != sb.size() || sa.empty() || !std::equal(sa.begin() + 1, sa.end(), sb.begin() + 1))
    throw DimensionError("concat_channels: " + shape_str(sa) + " vs " + shape_str(sb));
  Shape s = sa;
  s[0] += sb[0];
  std::vector<real> out;
  out.reserve(a.numel() + b.numel());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  const std::size_t na = a.numel();
  return detail::make_result(std::move(s), std::move(out), {a, b}, [na](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (x.requires_grad) {
      auto& dx = x.ensure_grad();
      for (std::size_t i = 0; i < na; ++i) dx[i] += self.grad[i];
    }
    if (y.requires_grad) {
      auto& dy = y.ensure_grad();
      for (std::size_t i = 0; i < dy.size(); ++i) dy[i] += self.grad[na + i];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  std::vector<real> out(x.data().begin(), x.data().end());
  return detail::make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    auto& dx = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError("add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      Node& in = *self.inputs[k];
      if (!in.requires_grad) continue;
      auto& d = in.ensure_grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
    }
  });
}

Tensor scale(const Tensor& x, real factor) {
  std::vector<real> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * factor;
  return detail::make_result(x.shape(), std::move(out), {x}, [factor](Node& self) {
    auto& dx = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * factor;
  });
}

Tensor sum(const Tensor& x) {
  double total = 0;
  for (real v : x.data()) total += v;
  return detail::make_result(Shape{1}, {static_cast<real>(total)}, {x}, [](Node& self) {
    auto& dx = self.inputs[0]->ensure_grad();
    for (auto& d : dx) d += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  double total = 0;
  for (real v : x.data()) total += v;
  const double n = static_cast<double>(x.numel());
  return detail::make_result(Shape{1}, {static_cast<real>(total / n)}, {x}, [n](Node& self) {
    auto& dx = self.inputs[0]->ensure_grad();
    const real g = static_cast<real>(self.grad[0] / n);
    for (auto& d : dx) d += g;
  });
}

Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, std::size_t groups,
                  real eps) {
  if (x.rank() < 2) throw DimensionError("group_norm: expected [C, ...]");
  const std::size_t C = x.dim(0);
  if (groups == 0 || C % groups)
    throw DimensionError("group_norm: " + std::to_string(C) + " channels not divisible into " +
                         std::to_string(groups) + " groups");
  if (gamma.numel() != C || beta.numel() != C)
    throw DimensionError("group_norm: gamma/beta must have " + std::to_string(C) + " entries");
  const std::size_t S = x.numel() / C, cpg = C / groups, n = cpg * S;
  auto xhat = std::make_shared<std::vector<real>>(x.numel());
  auto inv_std = std::make_shared<std::vector<real>>(groups);
  std::vector<real> out(x.numel());
  const auto xd = x.data();
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t off = g * n;
    double m = 0;
    for (std::size_t i = 0; i < n; ++i) m += xd[off + i];
    m /= static_cast<double>(n);
    double var = 0;
    for (std::size_t i = 0; i < n; ++i) var += (xd[off + i] - m) * (xd[off + i] - m);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[g] = static_cast<real>(is);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = (off + i) / S;
      const real h = static_cast<real>((xd[off + i] - m) * is);
      (*xhat)[off + i] = h;
      out[off + i] = gamma.data()[c] * h + beta.data()[c];
    }
  }
  return detail::make_result(
      x.shape(), std::move(out), {x, gamma, beta}, [=](Node& self) {
        Node& in = *self.inputs[0];
        Node& ga = *self.inputs[1];
        Node& be = *self.inputs[2];
        const auto& dy = self.grad;
        if (ga.requires_grad || be.requires_grad) {
          for (std::size_t c = 0; c < C; ++c) {
            double sg = 0, sb = 0;
            for (std::size_t i = c * S; i < (c + 1) * S; ++i) {
              sg += static_cast<double>(dy[i]) * (*xhat)[i];
              sb += dy[i];
            }
            if (ga.requires_grad) ga.ensure_grad()[c] += static_cast<real>(sg);
            if (be.requires_grad) be.ensure_grad()[c] += static_cast<real>(sb);
          }
        }
        if (!in.requires_grad) return;
        auto& dx = in.ensure_grad();
        for (std::size_t g = 0; g < groups; ++g) {
          const std::size_t off = g * n;
          double mean_d = 0, mean_dh = 0;
          for (std::size_t i = off; i < off + n; ++i) {
            const double d = static_cast<double>(dy[i]) * ga.data[i / S];
            mean_d += d;
            mean_dh += d * (*xhat)[i];
          }
          mean_d /= static_cast<double>(n);
          mean_dh /= static_cast<double>(n);
          for (std::size_t i = off; i < off + n; ++i) {
            const double d = static_cast<double>(dy[i]) * ga.data[i / S];
            dx[i] += static_cast<real>((*inv_std)[g] * (d - mean_d - (*xhat)[i] * mean_dh));
          }
        }
      });
}

}  // namespace neurotube::ops

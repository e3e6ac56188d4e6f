#include "panoptix/graph.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace panoptix::nn {

namespace {

using MatRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapCM = Eigen::Map<const MatRM>;
using VecMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;
using VecCMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;

int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

void require_hwc(const Tensor& t, const char* what) {
  if (t.rank() != 3) throw std::invalid_argument(std::string(what) + ": expected (H, W, C) tensor");
}

/// Gathers conv patches: col is (OH*OW, kh*kw*Cin) row-major.
std::vector<Scalar> im2col(const Tensor& x, int kh, int kw, int stride, int pad, int oh, int ow) {
  const int H = x.dim(0), W = x.dim(1), C = x.dim(2);
  const int patch = kh * kw * C;
  std::vector<Scalar> col(static_cast<size_t>(oh) * ow * patch, Scalar{0});
  const Scalar* src = x.data();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      Scalar* row = col.data() + (static_cast<size_t>(oy) * ow + ox) * patch;
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= H) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride - pad + kx;
          if (ix < 0 || ix >= W) continue;
          const Scalar* px = src + (static_cast<size_t>(iy) * W + ix) * C;
          Scalar* dst = row + (ky * kw + kx) * C;
          for (int c = 0; c < C; ++c) dst[c] = px[c];
        }
      }
    }
  }
  return col;
}

/// Scatter-adds col-layout gradients back onto the input image.
void col2im_add(const std::vector<Scalar>& col, Tensor& dx, int kh, int kw, int stride, int pad,
                int oh, int ow) {
  const int H = dx.dim(0), W = dx.dim(1), C = dx.dim(2);
  const int patch = kh * kw * C;
  Scalar* dst = dx.data();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const Scalar* row = col.data() + (static_cast<size_t>(oy) * ow + ox) * patch;
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= H) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride - pad + kx;
          if (ix < 0 || ix >= W) continue;
          Scalar* px = dst + (static_cast<size_t>(iy) * W + ix) * C;
          const Scalar* g = row + (ky * kw + kx) * C;
          for (int c = 0; c < C; ++c) px[c] += g[c];
        }
      }
    }
  }
}

}  // namespace

Graph::Node& Graph::node(Var v) {
  if (!v.valid() || v.idx >= static_cast<int>(nodes_.size())) {
    throw std::out_of_range("invalid graph variable");
  }
  return nodes_[static_cast<size_t>(v.idx)];
}

Tensor& Graph::grad_of(Var v) { return node(v).grad; }

bool Graph::needs_grad(Var v) const { return nodes_[static_cast<size_t>(v.idx)].requires_grad; }

const Tensor& Graph::value(Var v) const { return nodes_.at(static_cast<size_t>(v.idx)).value; }

Scalar Graph::scalar_value(Var v) const {
  const Tensor& t = value(v);
  if (t.size() != 1) throw std::invalid_argument("scalar_value: tensor has size > 1");
  return t[0];
}

Var Graph::emit(Tensor value, bool requires_grad, std::function<void(Graph&, Node&)> backward_fn) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backward_fn = std::move(backward_fn);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::input(Tensor value) { return emit(std::move(value), false, nullptr); }

Var Graph::param(ParamStore& store, const std::string& name) {
  Var v = emit(store.get(name), true, nullptr);
  node(v).grad_sink = &store.grad(name);
  return v;
}

Var Graph::detach(Var x) { return emit(value(x), false, nullptr); }

Var Graph::conv2d(Var x, Var w, Var b, int stride, int pad) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  const Tensor& bv = value(b);
  require_hwc(xv, "conv2d input");
  if (wv.rank() != 4) throw std::invalid_argument("conv2d weight: expected (kh, kw, Cin, Cout)");
  const int kh = wv.dim(0), kw = wv.dim(1), cin = wv.dim(2), cout = wv.dim(3);
  if (xv.dim(2) != cin) {
    throw std::invalid_argument("conv2d: input channels " + std::to_string(xv.dim(2)) +
                                " != weight Cin " + std::to_string(cin));
  }
  if (bv.rank() != 1 || bv.dim(0) != cout) throw std::invalid_argument("conv2d bias shape");
  const int oh = conv_out_dim(xv.dim(0), kh, stride, pad);
  const int ow = conv_out_dim(xv.dim(1), kw, stride, pad);
  if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv2d: output would be empty");

  const int patch = kh * kw * cin;
  std::vector<Scalar> col = im2col(xv, kh, kw, stride, pad, oh, ow);
  Tensor out({oh, ow, cout});
  {
    MapCM col_m(col.data(), static_cast<int64_t>(oh) * ow, patch);
    MapCM w_m(wv.data(), patch, cout);
    MapM out_m(out.data(), static_cast<int64_t>(oh) * ow, cout);
    out_m.noalias() = col_m * w_m;
    VecCMap b_v(bv.data(), cout);
    out_m.rowwise() += b_v.transpose();
  }

  const int xi = x.idx, wi = w.idx, bi = b.idx;
  const bool rg = needs_grad(x) || needs_grad(w) || needs_grad(b);
  return emit(std::move(out), rg, [xi, wi, bi, kh, kw, stride, pad, oh, ow, patch, cout](
                                      Graph& g, Node& self) {
    const Tensor& xv = g.nodes_[xi].value;
    MapCM dy(self.grad.data(), static_cast<int64_t>(oh) * ow, cout);
    std::vector<Scalar> col = im2col(xv, kh, kw, stride, pad, oh, ow);
    MapCM col_m(col.data(), static_cast<int64_t>(oh) * ow, patch);
    if (g.nodes_[wi].requires_grad) {
      MapM dw(g.nodes_[wi].grad.data(), patch, cout);
      dw.noalias() += col_m.transpose() * dy;
    }
    if (g.nodes_[bi].requires_grad) {
      VecMap db(g.nodes_[bi].grad.data(), cout);
      db.noalias() += dy.colwise().sum().transpose();
    }
    if (g.nodes_[xi].requires_grad) {
      const Tensor& wv = g.nodes_[wi].value;
      std::vector<Scalar> dcol(col.size());
      MapM dcol_m(dcol.data(), static_cast<int64_t>(oh) * ow, patch);
      MapCM w_m(wv.data(), patch, cout);
      dcol_m.noalias() = dy * w_m.transpose();
      col2im_add(dcol, g.nodes_[xi].grad, kh, kw, stride, pad, oh, ow);
    }
  });
}

Var Graph::linear(Var x, Var w, Var b) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  const Tensor& bv = value(b);
  if (xv.rank() != 1 || wv.rank() != 2 || bv.rank() != 1) {
    throw std::invalid_argument("linear: expected vector input, (N, M) weight, (M) bias");
  }
  const int n = xv.dim(0), m = wv.dim(1);
  if (wv.dim(0) != n || bv.dim(0) != m) throw std::invalid_argument("linear: shape mismatch");

  Tensor out({m});
  {
    MapCM w_m(wv.data(), n, m);
    VecCMap x_v(xv.data(), n);
    VecCMap b_v(bv.data(), m);
    VecMap out_v(out.data(), m);
    out_v.noalias() = w_m.transpose() * x_v + b_v;
  }
  const int xi = x.idx, wi = w.idx, bi = b.idx;
  const bool rg = needs_grad(x) || needs_grad(w) || needs_grad(b);
  return emit(std::move(out), rg, [xi, wi, bi, n, m](Graph& g, Node& self) {
    VecCMap dy(self.grad.data(), m);
    if (g.nodes_[wi].requires_grad) {
      MapM dw(g.nodes_[wi].grad.data(), n, m);
      VecCMap x_v(g.nodes_[xi].value.data(), n);
      dw.noalias() += x_v * dy.transpose();
    }
    if (g.nodes_[bi].requires_grad) {
      VecMap db(g.nodes_[bi].grad.data(), m);
      db.noalias() += dy;
    }
    if (g.nodes_[xi].requires_grad) {
      VecMap dx(g.nodes_[xi].grad.data(), n);
      MapCM w_m(g.nodes_[wi].value.data(), n, m);
      dx.noalias() += w_m * dy;
    }
  });
}

Var Graph::relu(Var x) {
  const Tensor& xv = value(x);
  Tensor out(xv.shape());
  for (int64_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0 ? xv[i] : 0;
  const int xi = x.idx;
  return emit(std::move(out), needs_grad(x), [xi](Graph& g, Node& self) {
    if (!g.nodes_[xi].requires_grad) return;
    const Tensor& xv = g.nodes_[xi].value;
    Tensor& dx = g.nodes_[xi].grad;
    for (int64_t i = 0; i < xv.size(); ++i) {
      if (xv[i] > 0) dx[i] += self.grad[i];
    }
  });
}

Var Graph::leaky_relu(Var x, Scalar slope) {
  const Tensor& xv = value(x);
  Tensor out(xv.shape());
  for (int64_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0 ? xv[i] : slope * xv[i];
  const int xi = x.idx;
  return emit(std::move(out), needs_grad(x), [xi, slope](Graph& g, Node& self) {
    if (!g.nodes_[xi].requires_grad) return;
    const Tensor& xv = g.nodes_[xi].value;
    Tensor& dx = g.nodes_[xi].grad;
    for (int64_t i = 0; i < xv.size(); ++i) {
      dx[i] += self.grad[i] * (xv[i] > 0 ? Scalar{1} : slope);
    }
  });
}

Var Graph::tanh_act(Var x) {
  const Tensor& xv = value(x);
  Tensor out(xv.shape());
  for (int64_t i = 0; i < xv.size(); ++i) out[i] = std::tanh(xv[i]);
  const int xi = x.idx;
  return emit(std::move(out), needs_grad(x), [xi](Graph& g, Node& self) {
    if (!g.nodes_[xi].requires_grad) return;
    Tensor& dx = g.nodes_[xi].grad;
    for (int64_t i = 0; i < self.value.size(); ++i) {
      dx[i] += self.grad[i] * (1.0 - self.value[i] * self.value[i]);
    }
  });
}

Var Graph::sigmoid(Var x) {
  const Tensor& xv = value(x);
  Tensor out(xv.shape());
  for (int64_t i = 0; i < xv.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-xv[i]));
  const int xi = x.idx;
  return emit(std::move(out), needs_grad(x), [xi](Graph& g, Node& self) {
    if (!g.nodes_[xi].requires_grad) return;
    Tensor& dx = g.nodes_[xi].grad;
    for (int64_t i = 0; i < self.value.size(); ++i) {
      dx[i] += self.grad[i] * self.value[i] * (1.0 - self.value[i]);
    }
  });
}

Var Graph::abs_act(Var x) {
  const Tensor& xv = value(x);
  Tensor out(xv.shape());
  for (int64_t i = 0; i < xv.size(); ++i) out[i] = std::abs(xv[i]);
  const int xi = x.idx;
  return emit(std::move(out), needs_grad(x), [xi](Graph& g, Node& self) {
    if (!g.nodes_[xi].requires_grad) return;
    const Tensor& xv = g.nodes_[xi].value;
    Tensor& dx = g.nodes_[xi].grad;
    for (int64_t i = 0; i < xv.size(); ++i) {
      if (xv[i] > 0) dx[i] += self.grad[i];
      else if (xv[i] < 0) dx[i] -= self.grad[i];
    }
  });
}

Var Graph::instance_norm(Var x) {
  const Tensor& xv = value(x);
  require_hwc(xv, "instance_norm");
  const int H = xv.dim(0), W = xv.dim(1), C = xv.dim(2);
  const int64_t spatial = static_cast<int64_t>(H) * W;
  const Scalar eps = 1e-5;

  std::vector<Scalar> mean(C, 0), inv_std(C, 0);
  for (int64_t i = 0; i < spatial; ++i) {
    for (int c = 0; c < C; ++c) mean[static_cast<size_t>(c)] += xv[i * C + c];
  }
  for (int c = 0; c < C; ++c) mean[static_cast<size_t>(c)] /= static_cast<Scalar>(spatial);
  for (int64_t i = 0; i < spatial; ++i) {
    for (int c = 0; c < C; ++c) {
      Scalar d = xv[i * C + c] - mean[static_cast<size_t>(c)];
      inv_std[static_cast<size_t>(c)] += d * d;
    }
  }
  for (int c = 0; c < C; ++c) {
    inv_std[static_cast<size_t>(c)] =
        1.0 / std::sqrt(inv_std[static_cast<size_t>(c)] / static_cast<Scalar>(spatial) + eps);
  }

  Tensor out(xv.shape());
  for (int64_t i = 0; i < spatial; ++i) {
    for (int c = 0; c < C; ++c) {
      out[i * C + c] =
          (xv[i * C + c] - mean[static_cast<size_t>(c)]) * inv_std[static_cast<size_t>(c)];
    }
  }

  const int xi = x.idx;
  return emit(std::move(out), needs_grad(x),
              [xi, C, spatial, inv_std](Graph& g, Node& self) {
                if (!g.nodes_[xi].requires_grad) return;
                Tensor& dx = g.nodes_[xi].grad;
                const Tensor& y = self.value;
                std::vector<Scalar> mean_dy(C, 0), mean_dyy(C, 0);
                for (int64_t i = 0; i < spatial; ++i) {
                  for (int c = 0; c < C; ++c) {
                    mean_dy[static_cast<size_t>(c)] += self.grad[i * C + c];
                    mean_dyy[static_cast<size_t>(c)] += self.grad[i * C + c] * y[i * C + c];
                  }
                }
                for (int c = 0; c < C; ++c) {
                  mean_dy[static_cast<size_t>(c)] /= static_cast<Scalar>(spatial);
                  mean_dyy[static_cast<size_t>(c)] /= static_cast<Scalar>(spatial);
                }
                for (int64_t i = 0; i < spatial; ++i) {
                  for (int c = 0; c < C; ++c) {
                    dx[i * C + c] += inv_std[static_cast<size_t>(c)] *
                                     (self.grad[i * C + c] - mean_dy[static_cast<size_t>(c)] -
                                      y[i * C + c] * mean_dyy[static_cast<size_t>(c)]);
                  }
                }
              });
}

Var Graph::channel_affine(Var x, Var scale, Var shift) {
  const Tensor& xv = value(x);
  const Tensor& sv = value(scale);
  const Tensor& tv = value(shift);
  require_hwc(xv, "channel_affine");
  const int C = xv.dim(2);
  if (sv.rank() != 1 || sv.dim(0) != C || tv.rank() != 1 || tv.dim(0) != C) {
    throw std::invalid_argument("channel_affine: scale/shift must be (C) vectors");
  }
  const int64_t spatial = xv.size() / C;
  Tensor out(xv.shape());
  for (int64_t i = 0; i < spatial; ++i) {
    for (int c = 0; c < C; ++c) out[i * C + c] = xv[i * C + c] * sv[c] + tv[c];
  }
  const int xi = x.idx, si = scale.idx, ti = shift.idx;
  const bool rg = needs_grad(x) || needs_grad(scale) || needs_grad(shift);
  return emit(std::move(out), rg, [xi, si, ti, C, spatial](Graph& g, Node& self) {
    const Tensor& xv = g.nodes_[xi].value;
    const Tensor& sv = g.nodes_[si].value;
    if (g.nodes_[xi].requires_grad) {
      Tensor& dx = g.nodes_[xi].grad;
      for (int64_t i = 0; i < spatial; ++i) {
        for (int c = 0; c < C; ++c) dx[i * C + c] += self.grad[i * C + c] * sv[c];
      }
    }
    if (g.nodes_[si].requires_grad) {
      Tensor& ds = g.nodes_[si].grad;
      for (int64_t i = 0; i < spatial; ++i) {
        for (int c = 0; c < C; ++c) ds[c] += self.grad[i * C + c] * xv[i * C + c];
      }
    }
    if (g.nodes_[ti].requires_grad) {
      Tensor& dt = g.nodes_[ti].grad;
      for (int64_t i = 0; i < spatial; ++i) {
        for (int c = 0; c < C; ++c) dt[c] += self.grad[i * C + c];
      }
    }
  });
}

Var Graph::upsample2(Var x) {
  const Tensor& xv = value(x);
  require_hwc(xv, "upsample2");
  const int H = xv.dim(0), W = xv.dim(1), C = xv.dim(2);
  Tensor out({2 * H, 2 * W, C});
  for (int y = 0; y < 2 * H; ++y) {
    for (int xw = 0; xw < 2 * W; ++xw) {
      const Scalar* src = xv.data() + (static_cast<int64_t>(y / 2) * W + xw / 2) * C;
      Scalar* dst = out.data() + (static_cast<int64_t>(y) * 2 * W + xw) * C;
      for (int c = 0; c < C; ++c) dst[c] = src[c];
    }
  }
  const int xi = x.idx;
  return emit(std::move(out), needs_grad(x), [xi, H, W, C](Graph& g, Node& self) {
    if (!g.nodes_[xi].requires_grad) return;
    Tensor& dx = g.nodes_[xi].grad;
    for (int y = 0; y < 2 * H; ++y) {
      for (int xw = 0; xw < 2 * W; ++xw) {
        const Scalar* src = self.grad.data() + (static_cast<int64_t>(y) * 2 * W + xw) * C;
        Scalar* dst = dx.data() + (static_cast<int64_t>(y / 2) * W + xw / 2) * C;
        for (int c = 0; c < C; ++c) dst[c] += src[c];
      }
    }
  });
}

Var Graph::global_avg_pool(Var x) {
  const Tensor& xv = value(x);
  require_hwc(xv, "global_avg_pool");
  const int C = xv.dim(2);
  const int64_t spatial = xv.size() / C;
  Tensor out({C});
  for (int64_t i = 0; i < spatial; ++i) {
    for (int c = 0; c < C; ++c) out[c] += xv[i * C + c];
  }
  for (int c = 0; c < C; ++c) out[c] /= static_cast<Scalar>(spatial);
  const int xi = x.idx;
  return emit(std::move(out), needs_grad(x), [xi, C, spatial](Graph& g, Node& self) {
    if (!g.nodes_[xi].requires_grad) return;
    Tensor& dx = g.nodes_[xi].grad;
    for (int64_t i = 0; i < spatial; ++i) {
      for (int c = 0; c < C; ++c) dx[i * C + c] += self.grad[c] / static_cast<Scalar>(spatial);
    }
  });
}

Var Graph::concat_channels(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: empty list");
  const Tensor& first = value(xs[0]);
  require_hwc(first, "concat_channels");
  const int H = first.dim(0), W = first.dim(1);
  int total_c = 0;
  bool rg = false;
  for (Var v : xs) {
    const Tensor& t = value(v);
    require_hwc(t, "concat_channels");
    if (t.dim(0) != H || t.dim(1) != W) {
      throw std::invalid_argument("concat_channels: spatial shape mismatch");
    }
    total_c += t.dim(2);
    rg = rg || needs_grad(v);
  }
  Tensor out({H, W, total_c});
  const int64_t spatial = static_cast<int64_t>(H) * W;
  int offset = 0;
  std::vector<int> idxs;
  std::vector<int> channels;
  for (Var v : xs) {
    const Tensor& t = value(v);
    const int C = t.dim(2);
    for (int64_t i = 0; i < spatial; ++i) {
      for (int c = 0; c < C; ++c) out[i * total_c + offset + c] = t[i * C + c];
    }
    idxs.push_back(v.idx);
    channels.push_back(C);
    offset += C;
  }
  return emit(std::move(out), rg, [idxs, channels, spatial, total_c](Graph& g, Node& self) {
    int offset = 0;
    for (size_t k = 0; k < idxs.size(); ++k) {
      const int C = channels[k];
      if (g.nodes_[idxs[k]].requires_grad) {
        Tensor& dx = g.nodes_[idxs[k]].grad;
        for (int64_t i = 0; i < spatial; ++i) {
          for (int c = 0; c < C; ++c) dx[i * C + c] += self.grad[i * total_c + offset + c];
        }
      }
      offset += C;
    }
  });
}

Var Graph::slice_vec(Var x, int offset, int len) {
  const Tensor& xv = value(x);
  if (xv.rank() != 1) throw std::invalid_argument("slice_vec: expected rank-1 tensor");
  if (offset < 0 || len <= 0 || offset + len > xv.dim(0)) {
    throw std::invalid_argument("slice_vec: range out of bounds");
  }
  Tensor out({len});
  for (int i = 0; i < len; ++i) out[i] = xv[offset + i];
  const int xi = x.idx;
  return emit(std::move(out), needs_grad(x), [xi, offset, len](Graph& g, Node& self) {
    if (!g.nodes_[xi].requires_grad) return;
    Tensor& dx = g.nodes_[xi].grad;
    for (int i = 0; i < len; ++i) dx[offset + i] += self.grad[i];
  });
}

Var Graph::add(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("add: shape mismatch");
  Tensor out(av.shape());
  for (int64_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  const int ai = a.idx, bi = b.idx;
  return emit(std::move(out), needs_grad(a) || needs_grad(b), [ai, bi](Graph& g, Node& self) {
    if (g.nodes_[ai].requires_grad) {
      Tensor& da = g.nodes_[ai].grad;
      for (int64_t i = 0; i < self.grad.size(); ++i) da[i] += self.grad[i];
    }
    if (g.nodes_[bi].requires_grad) {
      Tensor& db = g.nodes_[bi].grad;
      for (int64_t i = 0; i < self.grad.size(); ++i) db[i] += self.grad[i];
    }
  });
}

Var Graph::sub(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("sub: shape mismatch");
  Tensor out(av.shape());
  for (int64_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  const int ai = a.idx, bi = b.idx;
  return emit(std::move(out), needs_grad(a) || needs_grad(b), [ai, bi](Graph& g, Node& self) {
    if (g.nodes_[ai].requires_grad) {
      Tensor& da = g.nodes_[ai].grad;
      for (int64_t i = 0; i < self.grad.size(); ++i) da[i] += self.grad[i];
    }
    if (g.nodes_[bi].requires_grad) {
      Tensor& db = g.nodes_[bi].grad;
      for (int64_t i = 0; i < self.grad.size(); ++i) db[i] -= self.grad[i];
    }
  });
}

Var Graph::mul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("mul: shape mismatch");
  Tensor out(av.shape());
  for (int64_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  const int ai = a.idx, bi = b.idx;
  return emit(std::move(out), needs_grad(a) || needs_grad(b), [ai, bi](Graph& g, Node& self) {
    const Tensor& av = g.nodes_[ai].value;
    const Tensor& bv = g.nodes_[bi].value;
    if (g.nodes_[ai].requires_grad) {
      Tensor& da = g.nodes_[ai].grad;
      for (int64_t i = 0; i < self.grad.size(); ++i) da[i] += self.grad[i] * bv[i];
    }
    if (g.nodes_[bi].requires_grad) {
      Tensor& db = g.nodes_[bi].grad;
      for (int64_t i = 0; i < self.grad.size(); ++i) db[i] += self.grad[i] * av[i];
    }
  });
}

Var Graph::add_scalar(Var x, Scalar v) {
  const Tensor& xv = value(x);
  Tensor out(xv.shape());
  for (int64_t i = 0; i < xv.size(); ++i) out[i] = xv[i] + v;
  const int xi = x.idx;
  return emit(std::move(out), needs_grad(x), [xi](Graph& g, Node& self) {
    if (!g.nodes_[xi].requires_grad) return;
    Tensor& dx = g.nodes_[xi].grad;
    for (int64_t i = 0; i < self.grad.size(); ++i) dx[i] += self.grad[i];
  });
}

Var Graph::mul_scalar(Var x, Scalar v) {
  const Tensor& xv = value(x);
  Tensor out(xv.shape());
  for (int64_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * v;
  const int xi = x.idx;
  return emit(std::move(out), needs_grad(x), [xi, v](Graph& g, Node& self) {
    if (!g.nodes_[xi].requires_grad) return;
    Tensor& dx = g.nodes_[xi].grad;
    for (int64_t i = 0; i < self.grad.size(); ++i) dx[i] += self.grad[i] * v;
  });
}

Var Graph::sum_all(Var x) {
  const Tensor& xv = value(x);
  Scalar s = 0;
  for (int64_t i = 0; i < xv.size(); ++i) s += xv[i];
  const int xi = x.idx;
  return emit(Tensor::scalar(s), needs_grad(x), [xi](Graph& g, Node& self) {
    if (!g.nodes_[xi].requires_grad) return;
    Tensor& dx = g.nodes_[xi].grad;
    for (int64_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[0];
  });
}

Var Graph::mean_all(Var x) {
  const Tensor& xv = value(x);
  Scalar s = 0;
  for (int64_t i = 0; i < xv.size(); ++i) s += xv[i];
  const Scalar inv_n = Scalar{1} / static_cast<Scalar>(xv.size());
  const int xi = x.idx;
  return emit(Tensor::scalar(s * inv_n), needs_grad(x), [xi, inv_n](Graph& g, Node& self) {
    if (!g.nodes_[xi].requires_grad) return;
    Tensor& dx = g.nodes_[xi].grad;
    for (int64_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[0] * inv_n;
  });
}

Var Graph::add_all(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("add_all: empty list");
  Var acc = xs[0];
  for (size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return acc;
}

Var Graph::soft_union(const std::vector<Var>& masks) {
  if (masks.empty()) throw std::invalid_argument("soft_union: empty mask list");
  Var acc = one_minus(masks[0]);
  for (size_t i = 1; i < masks.size(); ++i) acc = mul(acc, one_minus(masks[i]));
  return one_minus(acc);
}

void Graph::backward(Var loss) {
  Node& ln = node(loss);
  if (ln.value.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
  if (!ln.requires_grad) return;  // nothing depends on parameters

  const int last = loss.idx;
  for (int i = 0; i <= last; ++i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.requires_grad) n.grad = Tensor(n.value.shape());
  }
  nodes_[static_cast<size_t>(last)].grad.fill(1.0);

  for (int i = last; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.requires_grad && n.backward_fn) n.backward_fn(*this, n);
  }
  for (int i = 0; i <= last; ++i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.grad_sink != nullptr && n.requires_grad) {
      Tensor& sink = *n.grad_sink;
      for (int64_t k = 0; k < sink.size(); ++k) sink[k] += n.grad[k];
    }
  }
}

}  // namespace panoptix::nn

#include "msunet/nn/ops.h"

#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <string>

#include "msunet/error.h"

namespace msunet::nn {
namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

struct Dims {
  int n, c, h, w;
  size_t plane() const { return static_cast<size_t>(h) * w; }
  size_t image() const { return plane() * c; }
};

Dims Nchw(const Tensor& t, const char* op) {
  if (t.rank() != 4) throw ShapeError(std::string(op) + ": expected NCHW, got " + ShapeString(t.shape()));
  return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

void Im2Col(const float* x, int c, int h, int w, int k, int pad, float* col) {
  const size_t hw = static_cast<size_t>(h) * w;
  for (int ci = 0; ci < c; ++ci) {
    const float* plane = x + ci * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = col + ((static_cast<size_t>(ci) * k + ky) * k + kx) * hw;
        const int dy = ky - pad, dx = kx - pad;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          float* out = row + static_cast<size_t>(y) * w;
          if (sy < 0 || sy >= h) {
            std::fill(out, out + w, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<size_t>(sy) * w;
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          for (int x = 0; x < x0; ++x) out[x] = 0.0f;
          for (int x = x0; x < x1; ++x) out[x] = src[x + dx];
          for (int x = std::max(x1, x0); x < w; ++x) out[x] = 0.0f;
        }
      }
    }
  }
}

void Col2ImAdd(const float* col, int c, int h, int w, int k, int pad, float* dx_img) {
  const size_t hw = static_cast<size_t>(h) * w;
  for (int ci = 0; ci < c; ++ci) {
    float* plane = dx_img + ci * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = col + ((static_cast<size_t>(ci) * k + ky) * k + kx) * hw;
        const int dy = ky - pad, dx = kx - pad;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          const float* in = row + static_cast<size_t>(y) * w;
          float* dst = plane + static_cast<size_t>(sy) * w;
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          for (int x = x0; x < x1; ++x) dst[x + dx] += in[x];
        }
      }
    }
  }
}

void RequireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + ShapeString(a.shape()) + " vs " +
                     ShapeString(b.shape()));
  }
}

}  // namespace

Var Conv2d(Tape& tape, Var xv, Var wv, Var bv, int pad) {
  const Tensor& x = tape.value(xv);
  const Tensor& wt = tape.value(wv);
  const Dims d = Nchw(x, "conv2d");
  if (wt.rank() != 4 || wt.dim(1) != d.c || wt.dim(2) != wt.dim(3)) {
    throw ShapeError("conv2d: weight " + ShapeString(wt.shape()) + " incompatible with input " +
                     ShapeString(x.shape()));
  }
  const int cout = wt.dim(0), k = wt.dim(2);
  if (2 * pad != k - 1) throw ShapeError("conv2d: only 'same' padding is supported");
  if (bv.valid() && tape.value(bv).size() != static_cast<size_t>(cout)) {
    throw ShapeError("conv2d: bias length does not match output channels");
  }
  const int kdim = d.c * k * k;
  const size_t hw = d.plane();
  const bool pointwise = (k == 1);

  Tensor y({d.n, cout, d.h, d.w});
  std::vector<float> col(pointwise ? 0 : static_cast<size_t>(kdim) * hw);
  ConstMatMap wm(wt.data(), cout, kdim);
  for (int n = 0; n < d.n; ++n) {
    const float* xin = x.data() + n * d.image();
    const float* colp = xin;
    if (!pointwise) {
      Im2Col(xin, d.c, d.h, d.w, k, pad, col.data());
      colp = col.data();
    }
    MatMap ym(y.data() + n * static_cast<size_t>(cout) * hw, cout, static_cast<Eigen::Index>(hw));
    ym.noalias() = wm * ConstMatMap(colp, kdim, static_cast<Eigen::Index>(hw));
    if (bv.valid()) {
      const Tensor& b = tape.value(bv);
      for (int co = 0; co < cout; ++co) ym.row(co).array() += b[co];
    }
  }

  return tape.Push(std::move(y), {xv, wv, bv}, [=](Tape& t, int self) {
    const Tensor& x = t.value(xv);
    const Tensor& wt = t.value(wv);
    const Tensor& gy = t.grad(Var{self});
    const bool need_x = t.needs_grad(xv);
    const bool need_w = t.needs_grad(wv);
    const bool need_b = bv.valid() && t.needs_grad(bv);
    std::vector<float> col(pointwise ? 0 : static_cast<size_t>(kdim) * hw);
    std::vector<float> dcol(pointwise || !need_x ? 0 : static_cast<size_t>(kdim) * hw);
    ConstMatMap wm(wt.data(), cout, kdim);
    Tensor* gw = need_w ? &t.grad(wv) : nullptr;
    Tensor* gx = need_x ? &t.grad(xv) : nullptr;
    Tensor* gb = need_b ? &t.grad(bv) : nullptr;
    for (int n = 0; n < d.n; ++n) {
      ConstMatMap gym(gy.data() + n * static_cast<size_t>(cout) * hw, cout, static_cast<Eigen::Index>(hw));
      const float* xin = x.data() + n * d.image();
      if (gw) {
        const float* colp = xin;
        if (!pointwise) {
          Im2Col(xin, d.c, d.h, d.w, k, pad, col.data());
          colp = col.data();
        }
        MatMap gwm(gw->data(), cout, kdim);
        gwm.noalias() += gym * ConstMatMap(colp, kdim, static_cast<Eigen::Index>(hw)).transpose();
      }
      if (gb) {
        // Plain loop: Eigen's vectorised reductions depend on pointer alignment.
        for (int co = 0; co < cout; ++co) {
          const float* row = gy.data() + (n * static_cast<size_t>(cout) + co) * hw;
          double acc = 0.0;
          for (size_t i = 0; i < hw; ++i) acc += row[i];
          (*gb)[co] += static_cast<float>(acc);
        }
      }
      if (gx) {
        float* gxin = gx->data() + n * d.image();
        if (pointwise) {
          MatMap(gxin, kdim, static_cast<Eigen::Index>(hw)).noalias() += wm.transpose() * gym;
        } else {
          MatMap(dcol.data(), kdim, static_cast<Eigen::Index>(hw)).noalias() = wm.transpose() * gym;
          Col2ImAdd(dcol.data(), d.c, d.h, d.w, k, pad, gxin);
        }
      }
    }
  });
}

Var BatchNorm2d(Tape& tape, Var xv, Var gv, Var bv, Tensor& running_mean, Tensor& running_var,
                bool training, float momentum, float eps) {
  const Tensor& x = tape.value(xv);
  const Dims d = Nchw(x, "batchnorm");
  const Tensor& gamma = tape.value(gv);
  const Tensor& beta = tape.value(bv);
  if (gamma.size() != static_cast<size_t>(d.c) || beta.size() != static_cast<size_t>(d.c) ||
      running_mean.size() != static_cast<size_t>(d.c) || running_var.size() != static_cast<size_t>(d.c)) {
    throw ShapeError("batchnorm: parameter length does not match " + std::to_string(d.c) + " channels");
  }
  const size_t hw = d.plane();
  const double m = static_cast<double>(d.n) * hw;

  auto xhat = std::make_shared<Tensor>(x.shape());
  auto invstd = std::make_shared<std::vector<float>>(d.c);
  Tensor y(x.shape());
  for (int c = 0; c < d.c; ++c) {
    double mean, var;
    if (training) {
      double s = 0.0;
      for (int n = 0; n < d.n; ++n) {
        const float* p = x.data() + n * d.image() + c * hw;
        for (size_t i = 0; i < hw; ++i) s += p[i];
      }
      mean = s / m;
      double ss = 0.0;
      for (int n = 0; n < d.n; ++n) {
        const float* p = x.data() + n * d.image() + c * hw;
        for (size_t i = 0; i < hw; ++i) {
          const double dv = p[i] - mean;
          ss += dv * dv;
        }
      }
      var = ss / m;
      const double unbiased = m > 1 ? ss / (m - 1) : var;
      running_mean[c] = static_cast<float>((1.0 - momentum) * running_mean[c] + momentum * mean);
      running_var[c] = static_cast<float>((1.0 - momentum) * running_var[c] + momentum * unbiased);
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const float is = static_cast<float>(1.0 / std::sqrt(var + eps));
    (*invstd)[c] = is;
    const float mu = static_cast<float>(mean);
    for (int n = 0; n < d.n; ++n) {
      const size_t off = n * d.image() + c * hw;
      for (size_t i = 0; i < hw; ++i) {
        const float xh = (x[off + i] - mu) * is;
        (*xhat)[off + i] = xh;
        y[off + i] = gamma[c] * xh + beta[c];
      }
    }
  }

  return tape.Push(std::move(y), {xv, gv, bv}, [=](Tape& t, int self) {
    const Tensor& gy = t.grad(Var{self});
    const Tensor& gamma = t.value(gv);
    const bool need_x = t.needs_grad(xv);
    Tensor* gg = t.needs_grad(gv) ? &t.grad(gv) : nullptr;
    Tensor* gbeta = t.needs_grad(bv) ? &t.grad(bv) : nullptr;
    Tensor* gx = need_x ? &t.grad(xv) : nullptr;
    for (int c = 0; c < d.c; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int n = 0; n < d.n; ++n) {
        const size_t off = n * d.image() + c * hw;
        for (size_t i = 0; i < hw; ++i) {
          sum_dy += gy[off + i];
          sum_dy_xhat += static_cast<double>(gy[off + i]) * (*xhat)[off + i];
        }
      }
      if (gg) (*gg)[c] += static_cast<float>(sum_dy_xhat);
      if (gbeta) (*gbeta)[c] += static_cast<float>(sum_dy);
      if (!gx) continue;
      const float scale = gamma[c] * (*invstd)[c];
      if (training) {
        const float mean_dy = static_cast<float>(sum_dy / m);
        const float mean_dy_xhat = static_cast<float>(sum_dy_xhat / m);
        for (int n = 0; n < d.n; ++n) {
          const size_t off = n * d.image() + c * hw;
          for (size_t i = 0; i < hw; ++i) {
            (*gx)[off + i] += scale * (gy[off + i] - mean_dy - (*xhat)[off + i] * mean_dy_xhat);
          }
        }
      } else {
        for (int n = 0; n < d.n; ++n) {
          const size_t off = n * d.image() + c * hw;
          for (size_t i = 0; i < hw; ++i) (*gx)[off + i] += scale * gy[off + i];
        }
      }
    }
  });
}

Var Relu(Tape& tape, Var xv) {
  Tensor y = tape.value(xv);
  for (float& v : y.storage()) v = v <= 0.0f ? 0.0f : v;
  return tape.Push(std::move(y), {xv}, [=](Tape& t, int self) {
    const Tensor& x = t.value(xv);
    const Tensor& gy = t.grad(Var{self});
    Tensor& gx = t.grad(xv);
    for (size_t i = 0; i < x.size(); ++i) {
      if (x[i] > 0.0f) gx[i] += gy[i];
    }
  });
}

Var Sigmoid(Tape& tape, Var xv) {
  Tensor y = tape.value(xv);
  for (float& v : y.storage()) v = 1.0f / (1.0f + std::exp(-v));
  return tape.Push(std::move(y), {xv}, [=](Tape& t, int self) {
    const Tensor& s = t.value(Var{self});
    const Tensor& gy = t.grad(Var{self});
    Tensor& gx = t.grad(xv);
    for (size_t i = 0; i < s.size(); ++i) gx[i] += gy[i] * s[i] * (1.0f - s[i]);
  });
}

Var Dropout(Tape& tape, Var xv, float rate, Rng* rng) {
  if (rate <= 0.0f || rng == nullptr) return xv;
  if (rate >= 1.0f) throw Error("dropout rate must be < 1");
  const Tensor& x = tape.value(xv);
  auto mask = std::make_shared<std::vector<float>>(x.size());
  const float keep_scale = 1.0f / (1.0f - rate);
  Tensor y(x.shape());
  for (size_t i = 0; i < x.size(); ++i) {
    const float mk = rng->Uniform() < rate ? 0.0f : keep_scale;
    (*mask)[i] = mk;
    y[i] = x[i] * mk;
  }
  return tape.Push(std::move(y), {xv}, [=](Tape& t, int self) {
    const Tensor& gy = t.grad(Var{self});
    Tensor& gx = t.grad(xv);
    for (size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * (*mask)[i];
  });
}

Var MaxPool2(Tape& tape, Var xv) {
  const Tensor& x = tape.value(xv);
  const Dims d = Nchw(x, "maxpool");
  if (d.h % 2 || d.w % 2) throw ShapeError("maxpool: spatial dims must be even, got " + ShapeString(x.shape()));
  const int oh = d.h / 2, ow = d.w / 2;
  Tensor y({d.n, d.c, oh, ow});
  auto argmax = std::make_shared<std::vector<uint32_t>>(y.size());
  for (int nc = 0; nc < d.n * d.c; ++nc) {
    const float* in = x.data() + nc * d.plane();
    const size_t in_off = nc * d.plane();
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        size_t best = static_cast<size_t>(2 * oy) * d.w + 2 * ox;
        const size_t cands[3] = {best + 1, best + d.w, best + d.w + 1};
        for (size_t c : cands) {
          if (in[c] > in[best]) best = c;
        }
        const size_t o = static_cast<size_t>(nc) * oh * ow + static_cast<size_t>(oy) * ow + ox;
        y[o] = in[best];
        (*argmax)[o] = static_cast<uint32_t>(in_off + best);
      }
    }
  }
  return tape.Push(std::move(y), {xv}, [=](Tape& t, int self) {
    const Tensor& gy = t.grad(Var{self});
    Tensor& gx = t.grad(xv);
    for (size_t i = 0; i < gy.size(); ++i) gx[(*argmax)[i]] += gy[i];
  });
}

Var Upsample2(Tape& tape, Var xv) {
  const Tensor& x = tape.value(xv);
  const Dims d = Nchw(x, "upsample");
  const int oh = d.h * 2, ow = d.w * 2;
  Tensor y({d.n, d.c, oh, ow});
  for (int nc = 0; nc < d.n * d.c; ++nc) {
    const float* in = x.data() + nc * d.plane();
    float* out = y.data() + static_cast<size_t>(nc) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) out[oy * ow + ox] = in[(oy / 2) * d.w + ox / 2];
    }
  }
  return tape.Push(std::move(y), {xv}, [=](Tape& t, int self) {
    const Tensor& gy = t.grad(Var{self});
    Tensor& gx = t.grad(xv);
    for (int nc = 0; nc < d.n * d.c; ++nc) {
      const float* g = gy.data() + static_cast<size_t>(nc) * oh * ow;
      float* out = gx.data() + nc * d.plane();
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) out[(oy / 2) * d.w + ox / 2] += g[oy * ow + ox];
      }
    }
  });
}

Var Concat(Tape& tape, Var av, Var bv) {
  const Tensor& a = tape.value(av);
  const Tensor& b = tape.value(bv);
  const Dims da = Nchw(a, "concat"), db = Nchw(b, "concat");
  if (da.n != db.n || da.h != db.h || da.w != db.w) {
    throw ShapeError("concat: " + ShapeString(a.shape()) + " vs " + ShapeString(b.shape()));
  }
  const int c = da.c + db.c;
  Tensor y({da.n, c, da.h, da.w});
  for (int n = 0; n < da.n; ++n) {
    float* out = y.data() + n * da.plane() * c;
    std::copy_n(a.data() + n * da.image(), da.image(), out);
    std::copy_n(b.data() + n * db.image(), db.image(), out + da.image());
  }
  return tape.Push(std::move(y), {av, bv}, [=](Tape& t, int self) {
    const Tensor& gy = t.grad(Var{self});
    const bool need_a = t.needs_grad(av), need_b = t.needs_grad(bv);
    for (int n = 0; n < da.n; ++n) {
      const float* g = gy.data() + n * da.plane() * c;
      if (need_a) {
        float* ga = t.grad(av).data() + n * da.image();
        for (size_t i = 0; i < da.image(); ++i) ga[i] += g[i];
      }
      if (need_b) {
        float* gb = t.grad(bv).data() + n * db.image();
        for (size_t i = 0; i < db.image(); ++i) gb[i] += g[da.image() + i];
      }
    }
  });
}

Var Add(Tape& tape, Var av, Var bv) {
  RequireSameShape(tape.value(av), tape.value(bv), "add");
  Tensor y = tape.value(av);
  y.Add(tape.value(bv));
  return tape.Push(std::move(y), {av, bv}, [=](Tape& t, int self) {
    const Tensor& gy = t.grad(Var{self});
    if (t.needs_grad(av)) t.grad(av).Add(gy);
    if (t.needs_grad(bv)) t.grad(bv).Add(gy);
  });
}

Var MulChannelBroadcast(Tape& tape, Var xv, Var gv) {
  const Tensor& x = tape.value(xv);
  const Tensor& g = tape.value(gv);
  const Dims d = Nchw(x, "gate");
  const Dims dg = Nchw(g, "gate");
  if (dg.c != 1 || dg.n != d.n || dg.h != d.h || dg.w != d.w) {
    throw ShapeError("gate: " + ShapeString(g.shape()) + " cannot gate " + ShapeString(x.shape()));
  }
  const size_t hw = d.plane();
  Tensor y(x.shape());
  for (int n = 0; n < d.n; ++n) {
    const float* gp = g.data() + n * hw;
    for (int c = 0; c < d.c; ++c) {
      const size_t off = n * d.image() + c * hw;
      for (size_t i = 0; i < hw; ++i) y[off + i] = x[off + i] * gp[i];
    }
  }
  return tape.Push(std::move(y), {xv, gv}, [=](Tape& t, int self) {
    const Tensor& x = t.value(xv);
    const Tensor& g = t.value(gv);
    const Tensor& gy = t.grad(Var{self});
    Tensor* gx = t.needs_grad(xv) ? &t.grad(xv) : nullptr;
    Tensor* gg = t.needs_grad(gv) ? &t.grad(gv) : nullptr;
    for (int n = 0; n < d.n; ++n) {
      const size_t goff = n * hw;
      for (int c = 0; c < d.c; ++c) {
        const size_t off = n * d.image() + c * hw;
        for (size_t i = 0; i < hw; ++i) {
          if (gx) (*gx)[off + i] += gy[off + i] * g[goff + i];
          if (gg) (*gg)[goff + i] += gy[off + i] * x[off + i];
        }
      }
    }
  });
}

}  // namespace msunet::nn

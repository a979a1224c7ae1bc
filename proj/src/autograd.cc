// Copyright (c) 2026 The oskdft Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "oskdft/autograd.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace oskdft::ag {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;
using StridedConst = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using StridedMut = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;

int64_t rows_of(const Tensor& t) {
  if (t.rank() == 0) return 1;
  return t.size() / t.dim(-1);
}

void require_rank(const Tensor& t, int rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_str(t.shape()));
  }
}

}  // namespace

const Tensor& Var::value() const {
  if (!tape_) throw std::logic_error("value() on an unbound Var");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

void Tape::check_owned(Var v) const {
  if (v.tape() != this) throw std::logic_error("Var belongs to a different tape");
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::push(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  bool needs = false;
  for (const Var& v : inputs) {
    check_owned(v);
    needs = needs || requires_grad(v.id());
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_ && needs;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Tensor& Tape::grad_ref(Var v) {
  check_owned(v);
  Node& n = nodes_[static_cast<size_t>(v.id())];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(Var v, const Tensor& g) {
  if (!v.requires_grad()) return;
  Tensor& acc = grad_ref(v);
  require_same_shape(acc, g, "gradient accumulation");
  for (int64_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

void Tape::backward(Var loss) {
  check_owned(loss);
  if (!record_) throw std::logic_error("backward() on a non-recording tape");
  if (loss.value().size() != 1) {
    throw DimensionError("backward() needs a scalar loss, got shape " +
                         shape_str(loss.shape()));
  }
  if (!requires_grad(loss.id())) return;
  grad_ref(loss)[0] += 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.has_grad && n.backward) n.backward(*this, n.grad);
  }
}

Tensor Tape::grad(Var v) const {
  check_owned(v);
  const Node& n = nodes_[static_cast<size_t>(v.id())];
  if (n.has_grad) return n.grad;
  return Tensor(n.value.shape(), 0.0);
}

bool Tape::has_grad(Var v) const {
  check_owned(v);
  return nodes_[static_cast<size_t>(v.id())].has_grad;
}

// ---- elementary ops -------------------------------------------------------

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank(bv, 2, "matmul");
  if (av.rank() < 1 || av.dim(-1) != bv.dim(0)) {
    throw DimensionError("matmul: " + shape_str(av.shape()) + " x " +
                         shape_str(bv.shape()));
  }
  const int64_t n = rows_of(av), k = bv.dim(0), m = bv.dim(1);
  Shape out_shape = av.shape();
  out_shape.back() = m;
  Tensor out(out_shape);
  MutMap(out.data(), n, m).noalias() =
      ConstMap(av.data(), n, k) * ConstMap(bv.data(), k, m);
  return a.tape()->push(std::move(out), {a, b}, [a, b, n, k, m](Tape& t, const Tensor& g) {
    ConstMap gm(g.data(), n, m);
    if (a.requires_grad()) {
      MutMap(t.grad_ref(a).data(), n, k).noalias() +=
          gm * ConstMap(b.value().data(), k, m).transpose();
    }
    if (b.requires_grad()) {
      MutMap(t.grad_ref(b).data(), k, m).noalias() +=
          ConstMap(a.value().data(), n, k).transpose() * gm;
    }
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.tape()->push(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.tape()->push(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    if (b.requires_grad()) {
      Tensor& gb = t.grad_ref(b);
      for (int64_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var add_bias(Var a, Var bias) {
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  require_rank(bv, 1, "add_bias");
  if (av.rank() < 1 || av.dim(-1) != bv.dim(0)) {
    throw DimensionError("add_bias: " + shape_str(av.shape()) + " + " +
                         shape_str(bv.shape()));
  }
  const int64_t n = rows_of(av), m = bv.dim(0);
  Tensor out = av;
  for (int64_t r = 0; r < n; ++r)
    for (int64_t j = 0; j < m; ++j) out[r * m + j] += bv[j];
  return a.tape()->push(std::move(out), {a, bias}, [a, bias, n, m](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    if (bias.requires_grad()) {
      Tensor& gb = t.grad_ref(bias);
      for (int64_t r = 0; r < n; ++r)
        for (int64_t j = 0; j < m; ++j) gb[j] += g[r * m + j];
    }
  });
}

Var scale(Var a, double c) {
  Tensor out = a.value();
  for (double& x : out.values()) x *= c;
  return a.tape()->push(std::move(out), {a}, [a, c](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_ref(a);
    for (int64_t i = 0; i < ga.size(); ++i) ga[i] += c * g[i];
  });
}

Var mul_const(Var a, const Tensor& mask) {
  require_same_shape(a.value(), mask, "mul_const");
  Tensor out = a.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return a.tape()->push(std::move(out), {a}, [a, mask](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_ref(a);
    for (int64_t i = 0; i < ga.size(); ++i) ga[i] += mask[i] * g[i];
  });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (double& x : out.values()) x = x > 0.0 ? x : 0.0;
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    const Tensor& x = a.value();
    Tensor& ga = t.grad_ref(a);
    for (int64_t i = 0; i < ga.size(); ++i)
      if (x[i] > 0.0) ga[i] += g[i];
  });
}

Var gelu(Var a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  Tensor out = a.value();
  for (double& x : out.values()) x = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    const Tensor& x = a.value();
    Tensor& ga = t.grad_ref(a);
    for (int64_t i = 0; i < ga.size(); ++i) {
      const double xi = x[i];
      const double cdf = 0.5 * (1.0 + std::erf(xi * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * xi * xi);
      ga[i] += g[i] * (cdf + xi * pdf);
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = x.value();
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  require_rank(gv, 1, "layer_norm gain");
  require_rank(bv, 1, "layer_norm bias");
  const int64_t d = xv.dim(-1);
  if (gv.dim(0) != d || bv.dim(0) != d) {
    throw DimensionError("layer_norm: features " + std::to_string(d) + " vs gain " +
                         shape_str(gv.shape()));
  }
  const int64_t n = rows_of(xv);
  Tensor out(xv.shape());
  Tensor xhat(xv.shape());
  std::vector<double> inv(static_cast<size_t>(n));
  for (int64_t r = 0; r < n; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0.0;
    for (int64_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv[static_cast<size_t>(r)] = is;
    for (int64_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * is;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  return x.tape()->push(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), inv = std::move(inv), n, d](Tape& t,
                                                                          const Tensor& g) {
        const Tensor& gv = gain.value();
        if (gain.requires_grad() || bias.requires_grad()) {
          Tensor* gg = gain.requires_grad() ? &t.grad_ref(gain) : nullptr;
          Tensor* gb = bias.requires_grad() ? &t.grad_ref(bias) : nullptr;
          for (int64_t r = 0; r < n; ++r)
            for (int64_t j = 0; j < d; ++j) {
              if (gg) (*gg)[j] += g[r * d + j] * xhat[r * d + j];
              if (gb) (*gb)[j] += g[r * d + j];
            }
        }
        if (x.requires_grad()) {
          Tensor& gx = t.grad_ref(x);
          const double inv_d = 1.0 / static_cast<double>(d);
          for (int64_t r = 0; r < n; ++r) {
            double sum_dh = 0.0, sum_dh_h = 0.0;
            for (int64_t j = 0; j < d; ++j) {
              const double dh = g[r * d + j] * gv[j];
              sum_dh += dh;
              sum_dh_h += dh * xhat[r * d + j];
            }
            const double is = inv[static_cast<size_t>(r)];
            for (int64_t j = 0; j < d; ++j) {
              const double dh = g[r * d + j] * gv[j];
              gx[r * d + j] +=
                  is * (dh - sum_dh * inv_d - xhat[r * d + j] * sum_dh_h * inv_d);
            }
          }
        }
      });
}

Var frame(Var x, int64_t stride) {
  const Tensor& xv = x.value();
  require_rank(xv, 3, "frame");
  if (stride <= 0) throw DimensionError("frame: stride must be positive");
  const int64_t b = xv.dim(0), l = xv.dim(1), c = xv.dim(2);
  const int64_t frames = l / stride;
  if (frames == 0) {
    throw DimensionError("input too short: " + std::to_string(l) +
                         " steps for stride " + std::to_string(stride));
  }
  // Row-major layout makes each output frame the concatenation of `stride`
  // consecutive input rows, so only the tail is dropped.
  const int64_t keep = frames * stride * c;
  Tensor out(Shape{b, frames, stride * c});
  for (int64_t i = 0; i < b; ++i)
    std::copy_n(xv.data() + i * l * c, keep, out.data() + i * keep);
  return x.tape()->push(std::move(out), {x}, [x, b, l, c, keep](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_ref(x);
    for (int64_t i = 0; i < b; ++i)
      for (int64_t j = 0; j < keep; ++j) gx[i * l * c + j] += g[i * keep + j];
  });
}

Var attention(Var q, Var k, Var v, int n_heads) {
  const Tensor& qv = q.value();
  require_rank(qv, 3, "attention");
  require_same_shape(qv, k.value(), "attention q/k");
  require_same_shape(qv, v.value(), "attention q/v");
  const int64_t b = qv.dim(0), tn = qv.dim(1), d = qv.dim(2);
  if (n_heads <= 0 || d % n_heads != 0) {
    throw DimensionError("attention: width " + std::to_string(d) +
                         " not divisible by heads " + std::to_string(n_heads));
  }
  const int64_t dh = d / n_heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor out(qv.shape());
  // Softmax weights per (batch, head), kept for the backward pass.
  std::vector<RowMat> probs(static_cast<size_t>(b * n_heads));
  for (int64_t i = 0; i < b; ++i) {
    for (int h = 0; h < n_heads; ++h) {
      const int64_t off = i * tn * d + h * dh;
      StridedConst qm(qv.data() + off, tn, dh, Eigen::OuterStride<>(d));
      StridedConst km(k.value().data() + off, tn, dh, Eigen::OuterStride<>(d));
      StridedConst vm(v.value().data() + off, tn, dh, Eigen::OuterStride<>(d));
      RowMat s = (qm * km.transpose()) * sc;
      for (int64_t r = 0; r < tn; ++r) {
        const double mx = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - mx).exp();
        s.row(r) /= s.row(r).sum();
      }
      StridedMut om(out.data() + off, tn, dh, Eigen::OuterStride<>(d));
      om.noalias() = s * vm;
      probs[static_cast<size_t>(i * n_heads + h)] = std::move(s);
    }
  }
  return q.tape()->push(
      std::move(out), {q, k, v},
      [q, k, v, b, tn, d, dh, n_heads, sc, probs = std::move(probs)](Tape& t,
                                                                     const Tensor& g) {
        Tensor* gq = q.requires_grad() ? &t.grad_ref(q) : nullptr;
        Tensor* gk = k.requires_grad() ? &t.grad_ref(k) : nullptr;
        Tensor* gv = v.requires_grad() ? &t.grad_ref(v) : nullptr;
        for (int64_t i = 0; i < b; ++i) {
          for (int h = 0; h < n_heads; ++h) {
            const int64_t off = i * tn * d + h * dh;
            const RowMat& p = probs[static_cast<size_t>(i * n_heads + h)];
            StridedConst go(g.data() + off, tn, dh, Eigen::OuterStride<>(d));
            StridedConst qm(q.value().data() + off, tn, dh, Eigen::OuterStride<>(d));
            StridedConst km(k.value().data() + off, tn, dh, Eigen::OuterStride<>(d));
            StridedConst vm(v.value().data() + off, tn, dh, Eigen::OuterStride<>(d));
            if (gv) {
              StridedMut(gv->data() + off, tn, dh, Eigen::OuterStride<>(d)).noalias() +=
                  p.transpose() * go;
            }
            if (gq || gk) {
              RowMat dp = go * vm.transpose();
              Eigen::VectorXd rs = (dp.array() * p.array()).rowwise().sum();
              RowMat ds = p.array() * (dp.colwise() - rs).array();
              ds *= sc;
              if (gq) {
                StridedMut(gq->data() + off, tn, dh, Eigen::OuterStride<>(d)).noalias() +=
                    ds * km;
              }
              if (gk) {
                StridedMut(gk->data() + off, tn, dh, Eigen::OuterStride<>(d)).noalias() +=
                    ds.transpose() * qm;
              }
            }
          }
        }
      });
}

Var mean_time(Var x) {
  const Tensor& xv = x.value();
  require_rank(xv, 3, "mean_time");
  const int64_t b = xv.dim(0), tn = xv.dim(1), d = xv.dim(2);
  if (tn == 0) throw DimensionError("mean_time: zero frames");
  Tensor out(Shape{b, d});
  for (int64_t i = 0; i < b; ++i)
    for (int64_t f = 0; f < tn; ++f)
      for (int64_t j = 0; j < d; ++j) out.at(i, j) += xv.at(i, f, j);
  const double inv = 1.0 / static_cast<double>(tn);
  for (double& val : out.values()) val *= inv;
  return x.tape()->push(std::move(out), {x}, [x, b, tn, d, inv](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_ref(x);
    for (int64_t i = 0; i < b; ++i)
      for (int64_t f = 0; f < tn; ++f)
        for (int64_t j = 0; j < d; ++j) gx.at(i, f, j) += g.at(i, j) * inv;
  });
}

Var std_time(Var x) {
  const Tensor& xv = x.value();
  require_rank(xv, 3, "std_time");
  const int64_t b = xv.dim(0), tn = xv.dim(1), d = xv.dim(2);
  if (tn == 0) throw DimensionError("std_time: zero frames");
  const double inv = 1.0 / static_cast<double>(tn);
  Tensor mean(Shape{b, d});
  Tensor out(Shape{b, d});
  for (int64_t i = 0; i < b; ++i) {
    for (int64_t j = 0; j < d; ++j) {
      double mu = 0.0;
      for (int64_t f = 0; f < tn; ++f) mu += xv.at(i, f, j);
      mu *= inv;
      double var = 0.0;
      for (int64_t f = 0; f < tn; ++f) {
        const double c = xv.at(i, f, j) - mu;
        var += c * c;
      }
      mean.at(i, j) = mu;
      out.at(i, j) = std::sqrt(var * inv);
    }
  }
  Tensor sd = out;
  return x.tape()->push(std::move(out), {x},
                        [x, b, tn, d, inv, mean = std::move(mean), sd = std::move(sd)](
                            Tape& t, const Tensor& g) {
                          Tensor& gx = t.grad_ref(x);
                          const Tensor& xv = x.value();
                          for (int64_t i = 0; i < b; ++i)
                            for (int64_t j = 0; j < d; ++j) {
                              const double s = sd.at(i, j);
                              if (s <= 0.0) continue;
                              const double k = g.at(i, j) * inv / s;
                              for (int64_t f = 0; f < tn; ++f)
                                gx.at(i, f, j) += k * (xv.at(i, f, j) - mean.at(i, j));
                            }
                        });
}

Var concat_last(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Shape sa = av.shape(), sb = bv.shape();
  if (sa.empty() || sb.empty() || sa.size() != sb.size() ||
      !std::equal(sa.begin(), sa.end() - 1, sb.begin())) {
    throw DimensionError("concat_last: " + shape_str(sa) + " vs " + shape_str(sb));
  }
  const int64_t n = rows_of(av), da = sa.back(), db = sb.back();
  Shape so = sa;
  so.back() = da + db;
  Tensor out(so);
  for (int64_t r = 0; r < n; ++r) {
    std::copy_n(av.data() + r * da, da, out.data() + r * (da + db));
    std::copy_n(bv.data() + r * db, db, out.data() + r * (da + db) + da);
  }
  return a.tape()->push(std::move(out), {a, b}, [a, b, n, da, db](Tape& t, const Tensor& g) {
    if (a.requires_grad()) {
      Tensor& ga = t.grad_ref(a);
      for (int64_t r = 0; r < n; ++r)
        for (int64_t j = 0; j < da; ++j) ga[r * da + j] += g[r * (da + db) + j];
    }
    if (b.requires_grad()) {
      Tensor& gb = t.grad_ref(b);
      for (int64_t r = 0; r < n; ++r)
        for (int64_t j = 0; j < db; ++j) gb[r * db + j] += g[r * (da + db) + da + j];
    }
  });
}

Var cosine_logits(Var emb, Var class_weights, double s) {
  const Tensor& ev = emb.value();
  const Tensor& wv = class_weights.value();
  require_rank(ev, 2, "cosine_logits embeddings");
  require_rank(wv, 2, "cosine_logits class weights");
  if (ev.dim(1) != wv.dim(1)) {
    throw DimensionError("cosine_logits: " + shape_str(ev.shape()) + " vs " +
                         shape_str(wv.shape()));
  }
  const int64_t b = ev.dim(0), c = wv.dim(0), e = ev.dim(1);
  auto normalize_rows = [e](const Tensor& m, const char* what, std::vector<double>& norms) {
    Tensor out = m;
    const int64_t n = m.dim(0);
    norms.assign(static_cast<size_t>(n), 0.0);
    for (int64_t r = 0; r < n; ++r) {
      const double nr = l2_norm({m.data() + r * e, static_cast<size_t>(e)});
      if (!(nr > 0.0)) {
        throw std::invalid_argument(std::string("zero-norm ") + what + " row " +
                                    std::to_string(r));
      }
      norms[static_cast<size_t>(r)] = nr;
      for (int64_t j = 0; j < e; ++j) out[r * e + j] /= nr;
    }
    return out;
  };
  std::vector<double> en_norm, wn_norm;
  Tensor en = normalize_rows(ev, "embedding", en_norm);
  Tensor wn = normalize_rows(wv, "class weight", wn_norm);
  Tensor out(Shape{b, c});
  MutMap(out.data(), b, c).noalias() =
      s * ConstMap(en.data(), b, e) * ConstMap(wn.data(), c, e).transpose();
  return emb.tape()->push(
      std::move(out), {emb, class_weights},
      [emb, class_weights, b, c, e, s, en = std::move(en), wn = std::move(wn),
       en_norm = std::move(en_norm), wn_norm = std::move(wn_norm)](Tape& t, const Tensor& g) {
        ConstMap gm(g.data(), b, c);
        // Back through row normalization: d(x/|x|) = (I - u u^T) / |x|.
        auto project = [e](const RowMat& du, const Tensor& u, const std::vector<double>& norms,
                           Tensor& gx) {
          const int64_t n = u.dim(0);
          for (int64_t r = 0; r < n; ++r) {
            double dot = 0.0;
            for (int64_t j = 0; j < e; ++j) dot += du(r, j) * u[r * e + j];
            const double inv = 1.0 / norms[static_cast<size_t>(r)];
            for (int64_t j = 0; j < e; ++j)
              gx[r * e + j] += (du(r, j) - dot * u[r * e + j]) * inv;
          }
        };
        if (emb.requires_grad()) {
          RowMat den = s * gm * ConstMap(wn.data(), c, e);
          project(den, en, en_norm, t.grad_ref(emb));
        }
        if (class_weights.requires_grad()) {
          RowMat dwn = s * gm.transpose() * ConstMap(en.data(), b, e);
          project(dwn, wn, wn_norm, t.grad_ref(class_weights));
        }
      });
}

Var mse(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mse");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const int64_t n = av.size();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double dlt = av[i] - bv[i];
    acc += dlt * dlt;
  }
  return a.tape()->push(Tensor::scalar(acc / static_cast<double>(n)), {a, b},
                        [a, b, n](Tape& t, const Tensor& g) {
                          const double k = 2.0 * g[0] / static_cast<double>(n);
                          const Tensor& av = a.value();
                          const Tensor& bv = b.value();
                          if (a.requires_grad()) {
                            Tensor& ga = t.grad_ref(a);
                            for (int64_t i = 0; i < n; ++i) ga[i] += k * (av[i] - bv[i]);
                          }
                          if (b.requires_grad()) {
                            Tensor& gb = t.grad_ref(b);
                            for (int64_t i = 0; i < n; ++i) gb[i] -= k * (av[i] - bv[i]);
                          }
                        });
}

Var margin_softmax_xent(Var cosines, const std::vector<int>& labels, double margin,
                        double s) {
  const Tensor& cv = cosines.value();
  require_rank(cv, 2, "margin_softmax_xent");
  const int64_t b = cv.dim(0), c = cv.dim(1);
  if (static_cast<int64_t>(labels.size()) != b) {
    throw DimensionError("margin_softmax_xent: " + std::to_string(labels.size()) +
                         " labels for batch " + std::to_string(b));
  }
  for (int y : labels) {
    if (y < 0 || y >= c) {
      throw std::out_of_range("speaker label " + std::to_string(y) + " outside [0, " +
                              std::to_string(c) + ")");
    }
  }
  const double cos_m = std::cos(margin), sin_m = std::sin(margin);
  // Past theta + m = pi the angular logit stops being monotone in theta; the
  // usual replacement is the linear continuation cos(theta) - m sin(m).
  const double th = std::cos(std::numbers::pi - margin);
  const double mm = std::sin(std::numbers::pi - margin) * margin;
  Tensor probs(Shape{b, c});
  std::vector<double> dphi(static_cast<size_t>(b));
  double total = 0.0;
  for (int64_t i = 0; i < b; ++i) {
    const int y = labels[static_cast<size_t>(i)];
    const double cy = std::clamp(cv.at(i, y), -1.0, 1.0);
    double phi, dp;
    if (cy > th) {
      const double sn = std::sqrt(std::max(0.0, 1.0 - cy * cy));
      phi = cy * cos_m - sn * sin_m;
      dp = sn > 1e-12 ? cos_m + sin_m * cy / sn : cos_m;
    } else {
      phi = cy - mm;
      dp = 1.0;
    }
    dphi[static_cast<size_t>(i)] = dp;
    double mx = -INFINITY;
    for (int64_t j = 0; j < c; ++j) {
      const double z = s * (j == y ? phi : cv.at(i, j));
      probs.at(i, j) = z;
      mx = std::max(mx, z);
    }
    double se = 0.0;
    for (int64_t j = 0; j < c; ++j) se += std::exp(probs.at(i, j) - mx);
    const double lse = mx + std::log(se);
    total += lse - probs.at(i, y);
    for (int64_t j = 0; j < c; ++j) probs.at(i, j) = std::exp(probs.at(i, j) - lse);
  }
  return cosines.tape()->push(
      Tensor::scalar(total / static_cast<double>(b)), {cosines},
      [cosines, labels, b, c, s, probs = std::move(probs), dphi = std::move(dphi)](
          Tape& t, const Tensor& g) {
        Tensor& gc = t.grad_ref(cosines);
        const double k = g[0] / static_cast<double>(b);
        for (int64_t i = 0; i < b; ++i) {
          const int y = labels[static_cast<size_t>(i)];
          for (int64_t j = 0; j < c; ++j) {
            double dz = probs.at(i, j) - (j == y ? 1.0 : 0.0);
            double dcos = s * dz * k;
            if (j == y) dcos *= dphi[static_cast<size_t>(i)];
            gc.at(i, j) += dcos;
          }
        }
      });
}

Var kl_div(Var student_logits, const Tensor& teacher_logits) {
  const Tensor& sv = student_logits.value();
  require_same_shape(sv, teacher_logits, "kl_div");
  require_rank(sv, 2, "kl_div");
  const int64_t b = sv.dim(0), c = sv.dim(1);
  if (c < 2) throw std::invalid_argument("kl_div: need at least 2 classes");
  auto log_softmax_row = [c](const double* z, double* out) {
    double mx = z[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, z[j]);
    double se = 0.0;
    for (int64_t j = 0; j < c; ++j) se += std::exp(z[j] - mx);
    const double lse = mx + std::log(se);
    for (int64_t j = 0; j < c; ++j) out[j] = z[j] - lse;
  };
  Tensor logp(Shape{b, c}), logq(Shape{b, c});
  double total = 0.0;
  for (int64_t i = 0; i < b; ++i) {
    log_softmax_row(teacher_logits.data() + i * c, logp.data() + i * c);
    log_softmax_row(sv.data() + i * c, logq.data() + i * c);
    for (int64_t j = 0; j < c; ++j) {
      const double p = std::exp(logp.at(i, j));
      if (p > 0.0) total += p * (logp.at(i, j) - logq.at(i, j));
    }
  }
  return student_logits.tape()->push(
      Tensor::scalar(total / static_cast<double>(b)), {student_logits},
      [student_logits, b, c, logp = std::move(logp), logq = std::move(logq)](
          Tape& t, const Tensor& g) {
        Tensor& gs = t.grad_ref(student_logits);
        const double k = g[0] / static_cast<double>(b);
        for (int64_t i = 0; i < b; ++i)
          for (int64_t j = 0; j < c; ++j)
            gs.at(i, j) += k * (std::exp(logq.at(i, j)) - std::exp(logp.at(i, j)));
      });
}

Var mask_frames(Var x, const Tensor& frame_mask, Var emb) {
  const Tensor& xv = x.value();
  require_rank(xv, 3, "mask_frames");
  const int64_t b = xv.dim(0), tn = xv.dim(1), d = xv.dim(2);
  if (frame_mask.shape() != Shape{b, tn} || emb.value().shape() != Shape{d}) {
    throw DimensionError("mask_frames: mask " + shape_str(frame_mask.shape()) +
                         ", embedding " + shape_str(emb.value().shape()) + " for input " +
                         shape_str(xv.shape()));
  }
  Tensor out = xv;
  const Tensor& ev = emb.value();
  for (int64_t i = 0; i < b; ++i)
    for (int64_t f = 0; f < tn; ++f)
      if (frame_mask.at(i, f) != 0.0)
        for (int64_t j = 0; j < d; ++j) out.at(i, f, j) = ev[j];
  return x.tape()->push(std::move(out), {x, emb},
                        [x, emb, frame_mask, b, tn, d](Tape& t, const Tensor& g) {
                          Tensor* gx = x.requires_grad() ? &t.grad_ref(x) : nullptr;
                          Tensor* ge = emb.requires_grad() ? &t.grad_ref(emb) : nullptr;
                          for (int64_t i = 0; i < b; ++i)
                            for (int64_t f = 0; f < tn; ++f) {
                              const bool m = frame_mask.at(i, f) != 0.0;
                              for (int64_t j = 0; j < d; ++j) {
                                if (m && ge) (*ge)[j] += g.at(i, f, j);
                                if (!m && gx) gx->at(i, f, j) += g.at(i, f, j);
                              }
                            }
                        });
}

Var masked_mse(Var pred, const Tensor& target, const Tensor& frame_mask) {
  const Tensor& pv = pred.value();
  require_same_shape(pv, target, "masked_mse");
  require_rank(pv, 3, "masked_mse");
  const int64_t b = pv.dim(0), tn = pv.dim(1), k = pv.dim(2);
  if (frame_mask.shape() != Shape{b, tn}) {
    throw DimensionError("masked_mse: mask shape " + shape_str(frame_mask.shape()));
  }
  int64_t count = 0;
  double acc = 0.0;
  for (int64_t i = 0; i < b; ++i)
    for (int64_t f = 0; f < tn; ++f) {
      if (frame_mask.at(i, f) == 0.0) continue;
      ++count;
      for (int64_t j = 0; j < k; ++j) {
        const double dlt = pv.at(i, f, j) - target.at(i, f, j);
        acc += dlt * dlt;
      }
    }
  const double denom = count > 0 ? static_cast<double>(count * k) : 1.0;
  return pred.tape()->push(
      Tensor::scalar(acc / denom), {pred},
      [pred, target, frame_mask, b, tn, k, denom](Tape& t, const Tensor& g) {
        Tensor& gp = t.grad_ref(pred);
        const Tensor& pv = pred.value();
        const double c = 2.0 * g[0] / denom;
        for (int64_t i = 0; i < b; ++i)
          for (int64_t f = 0; f < tn; ++f) {
            if (frame_mask.at(i, f) == 0.0) continue;
            for (int64_t j = 0; j < k; ++j)
              gp.at(i, f, j) += c * (pv.at(i, f, j) - target.at(i, f, j));
          }
      });
}

}  // namespace oskdft::ag

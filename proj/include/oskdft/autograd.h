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

// Minimal reverse-mode differentiation over Tensor values.
//
// A Tape owns every intermediate value of one forward pass. Ops push a node
// holding the forward value and, when the tape records and at least one input
// needs a gradient, a closure that propagates the output gradient into the
// inputs. Tape::backward() walks the nodes in reverse creation order. A tape
// constructed with record=false only evaluates values; no closures are kept.

#ifndef OSKDFT_AUTOGRAD_H_
#define OSKDFT_AUTOGRAD_H_

#include <deque>
#include <functional>
#include <vector>

#include "oskdft/tensor.h"

namespace oskdft::ag {

class Tape;

class Var {
 public:
  Var() = default;
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  // Receives the gradient of the node's output.
  using Backward = std::function<void(Tape&, const Tensor&)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Tensor value);
  // Leaf that collects a gradient (a plain constant when not recording).
  Var variable(Tensor value);

  // Adds a computed node. `backward` is dropped when no input needs a gradient.
  Var push(Tensor value, std::initializer_list<Var> inputs, Backward backward);

  // Gradient accumulator for v, zero-allocated on first use.
  Tensor& grad_ref(Var v);
  void accumulate(Var v, const Tensor& g);

  // Seeds d(loss)/d(loss) = 1 and propagates. loss must hold one element.
  void backward(Var loss);

  // Gradient reached at v, or zeros of v's shape when none arrived.
  Tensor grad(Var v) const;
  bool has_grad(Var v) const;

  const Tensor& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  bool requires_grad(int id) const {
    return nodes_[static_cast<size_t>(id)].requires_grad;
  }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backward backward;
  };
  void check_owned(Var v) const;

  bool record_;
  std::deque<Node> nodes_;
};

// ---- ops ----------------------------------------------------------------
// Shapes follow (batch, frames, channels) for sequence data; "rows" means all
// leading dimensions flattened.

// a: (..., K), b: (K, M) -> (..., M)
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
// Adds bias (M) to every row of a (..., M).
Var add_bias(Var a, Var bias);
Var scale(Var a, double c);
// Elementwise product with a constant mask of the same shape.
Var mul_const(Var a, const Tensor& mask);
Var relu(Var a);
Var gelu(Var a);
// Normalizes over the last dimension, then applies gain and bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
// (B, L, C) -> (B, L / s, s * C); the trailing L % s positions are dropped.
Var frame(Var x, int64_t stride);
// Scaled dot-product attention over (B, T, D) with D split into n_heads.
Var attention(Var q, Var k, Var v, int n_heads);
// (B, T, D) -> (B, D)
Var mean_time(Var x);
// Population standard deviation over time; gradient is zero where it is zero.
Var std_time(Var x);
// Concatenates along the last dimension; leading dims must agree.
Var concat_last(Var a, Var b);
// (B, E), (C, E) -> (B, C) of cos(angle) * s. Rows are normalized internally;
// a zero-norm row is an error.
Var cosine_logits(Var emb, Var class_weights, double s);
// Mean over all elements of (a - b)^2.
Var mse(Var a, Var b);
// Mean over the batch of cross-entropy of additive-angular-margin logits built
// from cosines (B, C). See speaker_head.h for the margin convention.
Var margin_softmax_xent(Var cosines, const std::vector<int>& labels, double margin,
                        double s);
// Mean over the batch of KL(softmax(teacher) || softmax(student)).
Var kl_div(Var student_logits, const Tensor& teacher_logits);
// Replaces frames where mask[b, t] != 0 with emb (D).
Var mask_frames(Var x, const Tensor& frame_mask, Var emb);
// Mean squared error over frames where mask[b, t] != 0.
Var masked_mse(Var pred, const Tensor& target, const Tensor& frame_mask);

}  // namespace oskdft::ag

#endif  // OSKDFT_AUTOGRAD_H_

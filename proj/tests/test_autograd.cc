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

#include <gtest/gtest.h>

#include "oracles.h"
#include "oskdft/autograd.h"

namespace oskdft {
namespace {

using ag::Tape;
using ag::Var;
using oracle::fd_max_rel_error;
using oracle::random_tensor;

constexpr double kTol = 1e-4;

// Scalar with a distinct gradient for every entry of x.
Var probe_loss(Var x, uint64_t seed) {
  Rng rng(seed);
  return ag::mse(x, x.tape()->constant(random_tensor(x.shape(), rng)));
}

TEST(Autograd, MatmulAndBias) {
  Rng rng(1);
  EXPECT_LT(fd_max_rel_error(
                [](Tape&, const std::vector<Var>& v) {
                  return probe_loss(ag::add_bias(ag::matmul(v[0], v[1]), v[2]), 7);
                },
                {random_tensor({2, 3, 4}, rng), random_tensor({4, 5}, rng), random_tensor({5}, rng)}),
            kTol);
}

TEST(Autograd, AddSubScale) {
  Rng rng(2);
  EXPECT_LT(fd_max_rel_error(
                [](Tape&, const std::vector<Var>& v) {
                  return probe_loss(ag::scale(ag::sub(ag::add(v[0], v[1]), v[1]), 3.0), 3);
                },
                {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}),
            kTol);
}

TEST(Autograd, ReluAwayFromKink) {
  Rng rng(3);
  Tensor x = random_tensor({4, 6}, rng);
  for (double& v : x.values()) v += v > 0 ? 0.1 : -0.1;
  EXPECT_LT(fd_max_rel_error([](Tape&, const std::vector<Var>& v) { return probe_loss(ag::relu(v[0]), 4); },
                             {x}),
            kTol);
}

TEST(Autograd, Gelu) {
  Rng rng(4);
  EXPECT_LT(fd_max_rel_error([](Tape&, const std::vector<Var>& v) { return probe_loss(ag::gelu(v[0]), 5); },
                             {random_tensor({3, 5}, rng, 2.0)}),
            kTol);
}

TEST(Autograd, LayerNorm) {
  Rng rng(5);
  EXPECT_LT(fd_max_rel_error(
                [](Tape&, const std::vector<Var>& v) {
                  return probe_loss(ag::layer_norm(v[0], v[1], v[2]), 6);
                },
                {random_tensor({2, 3, 6}, rng), random_tensor({6}, rng), random_tensor({6}, rng)}),
            kTol);
}

TEST(Autograd, FrameDropsTail) {
  Tape t;
  Var x = t.variable(Tensor({1, 7, 2}, 1.0));
  Var y = ag::frame(x, 3);
  EXPECT_EQ(y.shape(), (Shape{1, 2, 6}));
  Rng rng(6);
  EXPECT_LT(fd_max_rel_error([](Tape&, const std::vector<Var>& v) { return probe_loss(ag::frame(v[0], 2), 8); },
                             {random_tensor({2, 5, 3}, rng)}),
            kTol);
}

TEST(Autograd, Attention) {
  Rng rng(7);
  EXPECT_LT(fd_max_rel_error(
                [](Tape&, const std::vector<Var>& v) {
                  return probe_loss(ag::attention(v[0], v[1], v[2], 2), 9);
                },
                {random_tensor({2, 4, 6}, rng), random_tensor({2, 4, 6}, rng), random_tensor({2, 4, 6}, rng)}),
            kTol);
}

TEST(Autograd, PoolingAndConcat) {
  Rng rng(8);
  EXPECT_LT(fd_max_rel_error(
                [](Tape&, const std::vector<Var>& v) {
                  return probe_loss(ag::concat_last(ag::mean_time(v[0]), ag::std_time(v[0])), 10);
                },
                {random_tensor({2, 5, 3}, rng)}),
            kTol);
}

TEST(Autograd, CosineLogits) {
  Rng rng(9);
  EXPECT_LT(fd_max_rel_error(
                [](Tape&, const std::vector<Var>& v) {
                  return probe_loss(ag::cosine_logits(v[0], v[1], 5.0), 11);
                },
                {random_tensor({3, 4}, rng), random_tensor({5, 4}, rng)}),
            kTol);
}

TEST(Autograd, CosineLogitsRejectsZeroRow) {
  Tape t;
  EXPECT_THROW(ag::cosine_logits(t.constant(Tensor({1, 3})), t.constant(Tensor({2, 3}, 1.0)), 1.0),
               std::invalid_argument);
}

TEST(Autograd, MseAndMaskedMse) {
  Rng rng(10);
  const Tensor target = random_tensor({2, 4, 3}, rng);
  Tensor mask({2, 4});
  mask.at(0, 1) = mask.at(1, 3) = 1.0;
  EXPECT_LT(fd_max_rel_error(
                [&](Tape& t, const std::vector<Var>& v) {
                  return ag::add(ag::mse(v[0], t.constant(target)), ag::masked_mse(v[0], target, mask));
                },
                {random_tensor({2, 4, 3}, rng)}),
            kTol);
}

TEST(Autograd, MaskFrames) {
  Rng rng(11);
  Tensor mask({1, 4});
  mask.at(0, 2) = 1.0;
  EXPECT_LT(fd_max_rel_error(
                [&](Tape&, const std::vector<Var>& v) { return probe_loss(ag::mask_frames(v[0], mask, v[1]), 12); },
                {random_tensor({1, 4, 3}, rng), random_tensor({3}, rng)}),
            kTol);
}

TEST(Autograd, MarginSoftmaxBothBranches) {
  Rng rng(12);
  // Row 0 sits near its class (angle branch), row 1 points away from it so
  // theta + m passes pi (linear branch).
  Tensor cos({2, 3});
  cos.at(0, 0) = 0.6, cos.at(0, 1) = -0.2, cos.at(0, 2) = 0.1;
  cos.at(1, 0) = 0.3, cos.at(1, 1) = -0.995, cos.at(1, 2) = 0.2;
  EXPECT_LT(fd_max_rel_error(
                [](Tape&, const std::vector<Var>& v) { return ag::margin_softmax_xent(v[0], {0, 1}, 0.15, 20.0); },
                {cos}),
            kTol);
}

TEST(Autograd, KlDiv) {
  Rng rng(13);
  const Tensor teacher = random_tensor({3, 5}, rng, 2.0);
  EXPECT_LT(fd_max_rel_error([&](Tape&, const std::vector<Var>& v) { return ag::kl_div(v[0], teacher); },
                             {random_tensor({3, 5}, rng, 2.0)}),
            kTol);
}

TEST(Autograd, KlOfIdenticalLogitsIsZero) {
  Tape t;
  Rng rng(14);
  const Tensor z = random_tensor({2, 4}, rng);
  EXPECT_NEAR(ag::kl_div(t.constant(z), z).value().item(), 0.0, 1e-15);
}

TEST(Autograd, NonRecordingTapeKeepsNoGradients) {
  Tape t(false);
  Var x = t.variable(Tensor({2}, 1.0));
  Var y = ag::scale(x, 2.0);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_EQ(y.value()[0], 2.0);
}

TEST(Autograd, BackwardNeedsScalar) {
  Tape t;
  Var x = t.variable(Tensor({2}, 1.0));
  EXPECT_THROW(t.backward(x), std::invalid_argument);
}

TEST(Autograd, ShapeMismatchNamesOp) {
  Tape t;
  try {
    ag::matmul(t.constant(Tensor({2, 3})), t.constant(Tensor({4, 2})));
    FAIL() << "no throw";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
  }
}

}  // namespace
}  // namespace oskdft

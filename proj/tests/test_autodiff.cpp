// rfdiff - RF heatmap generation toolkit
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <catch2/catch_amalgamated.hpp>

#include "rfdiff/checkpoint.hpp"
#include "rfdiff/grad_check.hpp"
#include "rfdiff/nn.hpp"

using namespace rfdiff;

namespace {

Tensor random_tensor(const Shape &shape, uint64_t seed, bool requires_grad = true,
                     double lo = -1.0, double hi = 1.0) {
    Rng rng(split_seed(seed, "adtest"));
    Tensor t = Tensor::zeros(shape, requires_grad);
    for (auto &v : t.value())
        v = float(rng.uniform(lo, hi));
    return t;
}

} // namespace

// ============================================================================
// Contracts and basic analytics
// ============================================================================

TEST_CASE("backward: sum gives all-ones gradient") {
    Tensor x = random_tensor({2, 3}, 1);
    backward(sum_all(x));
    for (float g : x.grad())
        CHECK(g == 1.0f);
}

TEST_CASE("backward: sum of squares matches the analytic gradient") {
    Tensor x = Tensor::from_data({3}, {1.0f, 2.0f, 3.0f}, true);
    backward(sum_all(square(x)));
    CHECK(x.grad()[0] == Catch::Approx(2.0));
    CHECK(x.grad()[1] == Catch::Approx(4.0));
    CHECK(x.grad()[2] == Catch::Approx(6.0));
}

TEST_CASE("backward: repeated calls accumulate") {
    Tensor x = random_tensor({4}, 2);
    backward(sum_all(x));
    backward(sum_all(x));
    for (float g : x.grad())
        CHECK(g == 2.0f);
}

TEST_CASE("backward: non-scalar loss is a contract error") {
    Tensor x = random_tensor({4}, 3);
    const Tensor y = square(x);
    CHECK_THROWS_AS(backward(y), ContractError);
}

TEST_CASE("shape mismatch names both shapes and the operation") {
    Tensor a = random_tensor({2, 3}, 4);
    Tensor b = random_tensor({3, 2}, 5);
    try {
        add(a, b);
        FAIL("expected shape error");
    } catch (const ContractError &e) {
        const std::string msg = e.what();
        CHECK(msg.find("add") != std::string::npos);
        CHECK(msg.find("(2,3)") != std::string::npos);
        CHECK(msg.find("(3,2)") != std::string::npos);
    }
}

TEST_CASE("conv2d: 1x1 identity kernel passes input through") {
    Tensor x = random_tensor({1, 1, 5, 5}, 6);
    Tensor w = Tensor::from_data({1, 1, 1, 1}, {1.0f}, false);
    const Tensor y = conv2d(x, w, Tensor());
    for (size_t i = 0; i < x.value().size(); ++i)
        CHECK(y.value()[i] == x.value()[i]);
}

TEST_CASE("softmax: rows sum to one") {
    Tensor x = random_tensor({7, 9}, 7, true, -4.0, 4.0);
    const Tensor y = softmax(x);
    for (int r = 0; r < 7; ++r) {
        double sum = 0.0;
        for (int c = 0; c < 9; ++c)
            sum += y.value()[size_t(r) * 9 + c];
        CHECK(sum == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("permute then inverse permute is the identity") {
    Tensor x = random_tensor({2, 3, 4, 5}, 8);
    const Tensor y = permute(permute(x, {2, 0, 3, 1}), {1, 3, 0, 2});
    REQUIRE(y.shape() == x.shape());
    for (size_t i = 0; i < x.value().size(); ++i)
        CHECK(y.value()[i] == x.value()[i]);
}

TEST_CASE("forward determinism: same seed, bit-identical values") {
    auto run = [] {
        Tensor x = random_tensor({1, 3, 8, 8}, 99);
        ParamStore ps;
        Rng rng(split_seed(3, "det"));
        Conv2dLayer conv(ps, "c", rng, 3, 4, 3, 1, 1);
        GroupNormLayer norm(ps, "n", 4);
        return silu(norm.forward(conv.forward(x))).value();
    };
    const auto a = run();
    const auto b = run();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(a[i] == b[i]);
}

// ============================================================================
// Finite-difference checks, one per primitive
// ============================================================================

TEST_CASE("grad: elementwise primitives") {
    Tensor x = random_tensor({3, 4}, 10);
    Tensor other = random_tensor({3, 4}, 11, false);

    CHECK(grad_check([&](const Tensor &t) { return sum_all(add(t, other)); }, x) <= 1e-2);
    CHECK(grad_check([&](const Tensor &t) { return sum_all(sub(other, t)); }, x) <= 1e-2);
    CHECK(grad_check([&](const Tensor &t) { return sum_all(mul(t, other)); }, x) <= 1e-2);
    CHECK(grad_check([&](const Tensor &t) { return sum_all(scale(t, -2.5f)); }, x) <= 1e-2);
    CHECK(grad_check([&](const Tensor &t) { return sum_all(add_scalar(t, 0.7f)); }, x) <= 1e-2);
    CHECK(grad_check([&](const Tensor &t) { return sum_all(square(t)); }, x) <= 1e-2);
    CHECK(grad_check([&](const Tensor &t) { return mean_all(square(t)); }, x) <= 1e-2);
    CHECK(grad_check([&](const Tensor &t) { return sum_all(silu(t)); }, x) <= 1e-2);
    CHECK(grad_check([&](const Tensor &t) { return sum_all(tanh_op(t)); }, x) <= 1e-2);
    CHECK(grad_check([&](const Tensor &t) { return sum_all(sigmoid(t)); }, x) <= 1e-2);

    // |x| needs inputs away from the kink
    Tensor far = random_tensor({3, 4}, 12, true, 0.5, 1.5);
    CHECK(grad_check([&](const Tensor &t) { return sum_all(abs_op(t)); }, far) <= 1e-2);
}

TEST_CASE("grad: shape ops") {
    Tensor x = random_tensor({2, 3, 4}, 13);
    Tensor w = random_tensor({2, 3, 4}, 14, false);

    CHECK(grad_check(
              [&](const Tensor &t) { return sum_all(mul(reshape(t, {6, 4}), reshape(w, {6, 4}))); },
              x) <= 1e-2);
    CHECK(grad_check(
              [&](const Tensor &t) {
                  return sum_all(mul(permute(t, {2, 0, 1}), permute(w, {2, 0, 1})));
              },
              x) <= 1e-2);

    Tensor part = random_tensor({2, 2, 4}, 15);
    CHECK(grad_check(
              [&](const Tensor &t) { return sum_all(square(concat({t, part}, 1))); },
              x) <= 1e-2);
    CHECK(grad_check(
              [&](const Tensor &t) { return sum_all(square(concat({x, t}, 1))); },
              part) <= 1e-2);

    Tensor vec = random_tensor({5}, 16);
    Tensor plane_w = random_tensor({1, 5, 3, 4}, 17, false);
    CHECK(grad_check(
              [&](const Tensor &t) { return sum_all(mul(broadcast_to_map(t, 3, 4), plane_w)); },
              vec) <= 1e-2);

    Tensor img = random_tensor({2, 5, 3, 3}, 18);
    Tensor bias = random_tensor({5}, 19);
    CHECK(grad_check(
              [&](const Tensor &t) { return sum_all(square(add_channel_bias(img, t))); },
              bias) <= 1e-2);
    Tensor probe = random_tensor({2, 5, 3, 3}, 190, false);
    CHECK(grad_check(
              [&](const Tensor &t) { return sum_all(mul(add_channel_bias(t, bias), probe)); },
              img) <= 1e-2);

    Tensor seq = random_tensor({2, 3, 4, 2, 2}, 20);
    CHECK(grad_check(
              [&](const Tensor &t) { return sum_all(square(pad_replicate(t, 2, 1, 1))); },
              seq) <= 1e-2);
}

TEST_CASE("grad: matmul and linear") {
    Tensor a = random_tensor({3, 4}, 21);
    Tensor b = random_tensor({4, 5}, 22);
    CHECK(grad_check([&](const Tensor &t) { return sum_all(square(matmul(t, b))); }, a) <= 1e-2);
    CHECK(grad_check([&](const Tensor &t) { return sum_all(square(matmul(a, t))); }, b) <= 1e-2);

    Tensor x = random_tensor({2, 3, 4}, 23);
    Tensor w = random_tensor({4, 6}, 24);
    Tensor bias = random_tensor({6}, 25);
    CHECK(grad_check([&](const Tensor &t) { return sum_all(square(linear(t, w, bias))); }, x) <=
          1e-2);
    CHECK(grad_check([&](const Tensor &t) { return sum_all(square(linear(x, t, bias))); }, w) <=
          1e-2);
    CHECK(grad_check([&](const Tensor &t) { return sum_all(square(linear(x, w, t))); }, bias) <=
          1e-2);
}

TEST_CASE("grad: softmax and attention") {
    Tensor x = random_tensor({4, 6}, 26, true, -2.0, 2.0);
    Tensor w = random_tensor({4, 6}, 27, false);
    CHECK(grad_check([&](const Tensor &t) { return sum_all(mul(softmax(t), w)); }, x) <= 1e-2);

    Tensor q = random_tensor({2, 3, 4}, 28);
    Tensor k = random_tensor({2, 5, 4}, 29);
    Tensor v = random_tensor({2, 5, 6}, 30);
    CHECK(grad_check(
              [&](const Tensor &t) { return sum_all(square(scaled_dot_attention(t, k, v))); },
              q) <= 2e-2);
    CHECK(grad_check(
              [&](const Tensor &t) { return sum_all(square(scaled_dot_attention(q, t, v))); },
              k) <= 2e-2);
    CHECK(grad_check(
              [&](const Tensor &t) { return sum_all(square(scaled_dot_attention(q, k, t))); },
              v) <= 2e-2);
}

TEST_CASE("grad: group_norm") {
    Tensor x = random_tensor({2, 6, 3, 3}, 31);
    Tensor gamma = random_tensor({6}, 32, true, 0.5, 1.5);
    Tensor beta = random_tensor({6}, 33);
    Tensor w = random_tensor({2, 6, 3, 3}, 34, false);
    CHECK(grad_check(
              [&](const Tensor &t) { return sum_all(mul(group_norm(t, 3, gamma, beta), w)); },
              x) <= 2e-2);
    CHECK(grad_check(
              [&](const Tensor &t) { return sum_all(mul(group_norm(x, 3, t, beta), w)); },
              gamma) <= 2e-2);
    CHECK(grad_check(
              [&](const Tensor &t) { return sum_all(mul(group_norm(x, 3, gamma, t), w)); },
              beta) <= 2e-2);
}

TEST_CASE("grad: conv2d with stride and padding") {
    Tensor x = random_tensor({2, 3, 6, 6}, 35);
    Tensor w = random_tensor({4, 3, 3, 3}, 36, true, -0.4, 0.4);
    Tensor b = random_tensor({4}, 37);
    Tensor probe = random_tensor({2, 4, 3, 3}, 370, false);
    auto loss = [&](const Tensor &xx, const Tensor &ww, const Tensor &bb) {
        return sum_all(mul(conv2d(xx, ww, bb, 2, 1), probe));
    };
    CHECK(grad_check([&](const Tensor &t) { return loss(t, w, b); }, x) <= 1e-2);
    CHECK(grad_check([&](const Tensor &t) { return loss(x, t, b); }, w) <= 1e-2);
    CHECK(grad_check([&](const Tensor &t) { return loss(x, w, t); }, b) <= 1e-2);
}

TEST_CASE("grad: conv_transpose2d") {
    Tensor x = random_tensor({1, 3, 4, 4}, 38);
    Tensor w = random_tensor({3, 2, 2, 2}, 39, true, -0.5, 0.5);
    Tensor b = random_tensor({2}, 40);
    Tensor probe = random_tensor({1, 2, 8, 8}, 400, false);
    auto loss = [&](const Tensor &xx, const Tensor &ww, const Tensor &bb) {
        return sum_all(mul(conv_transpose2d(xx, ww, bb, 2), probe));
    };
    CHECK(grad_check([&](const Tensor &t) { return loss(t, w, b); }, x) <= 1e-2);
    CHECK(grad_check([&](const Tensor &t) { return loss(x, t, b); }, w) <= 1e-2);
    CHECK(grad_check([&](const Tensor &t) { return loss(x, w, t); }, b) <= 1e-2);
}

TEST_CASE("grad: conv3d") {
    Tensor x = random_tensor({1, 2, 4, 5, 5}, 41, true, -0.5, 0.5);
    Tensor w = random_tensor({3, 2, 3, 3, 3}, 42, true, -0.3, 0.3);
    Tensor b = random_tensor({3}, 43);
    Tensor probe = random_tensor({1, 3, 2, 3, 3}, 430, false);
    auto loss = [&](const Tensor &xx, const Tensor &ww, const Tensor &bb) {
        return sum_all(mul(conv3d(xx, ww, bb, 2, 1), probe));
    };
    CHECK(grad_check([&](const Tensor &t) { return loss(t, w, b); }, x) <= 1e-2);
    CHECK(grad_check([&](const Tensor &t) { return loss(x, t, b); }, w) <= 1e-2);
    CHECK(grad_check([&](const Tensor &t) { return loss(x, w, t); }, b) <= 1e-2);
}

TEST_CASE("grad: resampling ops") {
    Tensor x = random_tensor({1, 2, 4, 4}, 44);
    Tensor w_up = random_tensor({1, 2, 8, 8}, 45, false);
    CHECK(grad_check(
              [&](const Tensor &t) { return sum_all(mul(upsample_nearest2d(t, 2), w_up)); },
              x) <= 1e-2);
    CHECK(grad_check([&](const Tensor &t) { return sum_all(square(avg_pool2d(t, 2))); }, x) <=
          1e-2);

    Tensor vol = random_tensor({1, 2, 3, 5, 4}, 46);
    CHECK(grad_check([&](const Tensor &t) { return sum_all(square(interp3d(t, 2, 3, 3))); },
                     vol) <= 1e-2);
}

// ============================================================================
// Checkpoint round-trip
// ============================================================================

TEST_CASE("checkpoint: save and load round-trips parameters") {
    ParamStore ps;
    Rng rng(split_seed(9, "ckpt"));
    LinearLayer l1(ps, "layer1", rng, 8, 4);
    Conv2dLayer c1(ps, "conv1", rng, 3, 5, 3, 1, 1);
    const std::string path = "/tmp/rfdiff_test_ckpt.bin";
    save_checkpoint(ps, path);

    ParamStore ps2;
    Rng rng2(split_seed(10, "ckpt2"));
    LinearLayer l2(ps2, "layer1", rng2, 8, 4);
    Conv2dLayer c2(ps2, "conv1", rng2, 3, 5, 3, 1, 1);
    load_checkpoint(ps2, path);
    for (size_t i = 0; i < ps.items().size(); ++i) {
        const auto &a = ps.items()[i].second.value();
        const auto &b = ps2.items()[i].second.value();
        REQUIRE(a.size() == b.size());
        for (size_t j = 0; j < a.size(); ++j)
            CHECK(a[j] == b[j]);
    }

    ParamStore ps3;
    Rng rng3(split_seed(11, "ckpt3"));
    LinearLayer l3(ps3, "layer1", rng3, 8, 5); // wrong width
    CHECK_THROWS_AS(load_checkpoint(ps3, path), DataError);
}

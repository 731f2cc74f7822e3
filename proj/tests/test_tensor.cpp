#include <doctest.h>

#include <random>

#include "bcp/tensor.hpp"
#include "fd_check.hpp"

using namespace bcp;
using bcp::testing::fd_max_rel_err;
using bcp::testing::random_tensor;

namespace {

// Independent nested-loop cross-correlation oracle.
std::vector<double> conv_oracle(const std::vector<double>& in, std::size_t B,
                                std::size_t Cin, std::size_t H, std::size_t W,
                                const std::vector<double>& k, std::size_t Cout,
                                std::size_t kh, std::size_t kw,
                                const std::vector<double>& bias, int stride,
                                int pad, std::size_t Ho, std::size_t Wo) {
    std::vector<double> out(B * Cout * Ho * Wo, 0.0);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t co = 0; co < Cout; ++co)
            for (std::size_t oy = 0; oy < Ho; ++oy)
                for (std::size_t ox = 0; ox < Wo; ++ox) {
                    double acc = bias[co];
                    for (std::size_t ci = 0; ci < Cin; ++ci)
                        for (std::size_t ky = 0; ky < kh; ++ky)
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const long y = static_cast<long>(oy) * stride - pad +
                                               static_cast<long>(ky);
                                const long x = static_cast<long>(ox) * stride - pad +
                                               static_cast<long>(kx);
                                if (y < 0 || y >= (long)H || x < 0 || x >= (long)W) continue;
                                acc += in[((b * Cin + ci) * H + y) * W + x] *
                                       k[((co * Cin + ci) * kh + ky) * kw + kx];
                            }
                    out[((b * Cout + co) * Ho + oy) * Wo + ox] = acc;
                }
    return out;
}

}  // namespace

TEST_CASE("conv2d matches the nested-loop oracle") {
    Tensor in({1, 1, 3, 3}, std::vector<double>(9, 1.0));
    Tensor k({1, 1, 3, 3}, std::vector<double>(9, 1.0));
    Tensor b({1}, {0.0});
    Tensor out = conv2d(in, k, b, 1, 1);
    CHECK(out.shape() == std::vector<std::size_t>{1, 1, 3, 3});
    CHECK(out.values()[4] == doctest::Approx(9.0));  // center sees all nine ones
    auto oracle = conv_oracle(in.values(), 1, 1, 3, 3, k.values(), 1, 3, 3, b.values(),
                              1, 1, 3, 3);
    for (std::size_t i = 0; i < 9; ++i) CHECK(out.values()[i] == doctest::Approx(oracle[i]));
}

TEST_CASE("conv2d identity kernel passes input through") {
    std::mt19937_64 rng(7);
    Tensor in = random_tensor({2, 1, 4, 4}, rng);
    Tensor k({1, 1, 1, 1}, {1.0});
    Tensor b({1}, {0.0});
    Tensor out = conv2d(in, k, b, 1, 0);
    CHECK(out.values() == in.values());
}

TEST_CASE("conv2d random oracle comparison with stride and padding") {
    std::mt19937_64 rng(11);
    Tensor in = random_tensor({2, 3, 7, 7}, rng);
    Tensor k = random_tensor({4, 3, 3, 3}, rng);
    Tensor b = random_tensor({4}, rng);
    Tensor out = conv2d(in, k, b, 2, 1);
    CHECK(out.shape() == std::vector<std::size_t>{2, 4, 4, 4});
    auto oracle = conv_oracle(in.values(), 2, 3, 7, 7, k.values(), 4, 3, 3, b.values(),
                              2, 1, 4, 4);
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        CHECK(out.values()[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv2d rejects shape mismatches by name") {
    Tensor in({1, 2, 4, 4}, std::vector<double>(32, 0.0));
    Tensor k({1, 3, 3, 3}, std::vector<double>(27, 0.0));
    Tensor b({1}, {0.0});
    try {
        conv2d(in, k, b, 1, 1);
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("[1,2,4,4]") != std::string::npos);
        CHECK(std::string(e.what()).find("[1,3,3,3]") != std::string::npos);
    }
}

TEST_CASE("relu forward and zero-gradient cases") {
    Tensor x({3}, {-1.0, 0.0, 2.0}, true);
    Tape tape;
    Tensor y = relu(x);
    CHECK(y.values() == std::vector<double>{0.0, 0.0, 2.0});
    backward(reduce_sum(y), tape);
    CHECK(x.grad() == std::vector<double>{0.0, 0.0, 1.0});

    Tensor neg({4}, {-1.0, -2.0, -0.5, -3.0}, true);
    Tape tape2;
    Tensor yn = relu(neg);
    for (double v : yn.values()) CHECK(v == 0.0);
    backward(reduce_sum(yn), tape2);
    for (double g : neg.grad()) CHECK(g == 0.0);
}

TEST_CASE("softmax closed forms") {
    Tensor x({1, 2, 1, 1}, {1.5, 1.5});
    Tensor q = softmax_channels(x);
    CHECK(q.values()[0] == doctest::Approx(0.5).epsilon(1e-12));

    Tensor x2({1, 2, 1, 1}, {0.0, std::log(3.0)});
    Tensor q2 = softmax_channels(x2);
    CHECK(q2.values()[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(q2.values()[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax shift invariance and normalization") {
    std::mt19937_64 rng(3);
    Tensor x = random_tensor({2, 4, 3, 3}, rng, -5, 5);
    Tensor q = softmax_channels(x);
    std::vector<double> shifted = x.values();
    for (double& v : shifted) v += 17.25;
    Tensor q2 = softmax_channels(Tensor(x.shape(), shifted));
    for (std::size_t i = 0; i < q.size(); ++i) {
        CHECK(q.values()[i] == doctest::Approx(q2.values()[i]).epsilon(1e-12));
        CHECK(q.values()[i] > 0.0);
        CHECK(q.values()[i] < 1.0);
    }
    Tensor sums = sum_channels(q);
    for (double s : sums.values()) CHECK(std::abs(s - 1.0) < 1e-9);
}

TEST_CASE("nearest_upsample2x replicates and round-trips through avg pool") {
    Tensor x({1, 1, 1, 1}, {5.0});
    Tensor up = nearest_upsample2x(x);
    CHECK(up.shape() == std::vector<std::size_t>{1, 1, 2, 2});
    for (double v : up.values()) CHECK(v == 5.0);

    std::mt19937_64 rng(5);
    Tensor y = random_tensor({1, 2, 3, 3}, rng);
    Tensor up2 = nearest_upsample2x(y);
    // 2x2 average pooling undoes nearest upsampling
    const auto& s = up2.shape();
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                double acc = 0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx)
                        acc += up2.values()[(c * s[2] + 2 * i + dy) * s[3] + 2 * j + dx];
                CHECK(acc / 4.0 == doctest::Approx(y.values()[(c * 3 + i) * 3 + j]));
            }
}

TEST_CASE("maxpool2, reduce_mean, concat trivia") {
    Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
    CHECK(maxpool2(x).values() == std::vector<double>{4.0});
    CHECK(reduce_mean(Tensor({2}, {2, 4})).item() == doctest::Approx(3.0));
    Tensor a = Tensor::zeros({1, 2, 4, 4});
    Tensor b = Tensor::zeros({1, 3, 4, 4});
    CHECK(channel_concat(a, b).shape() == std::vector<std::size_t>{1, 5, 4, 4});
}

TEST_CASE("backward basics") {
    Tensor x({4}, {1, 2, 3, 4}, true);
    Tape tape;
    Tensor loss = reduce_mean(x);
    backward(loss, tape);
    for (double g : x.grad()) CHECK(g == doctest::Approx(0.25));

    Tensor y = Tensor::scalar(3.0, true);
    Tape tape2;
    Tensor l2 = reduce_sum(mul(y, y));
    backward(l2, tape2);
    CHECK(y.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("backward rejects non-scalar loss and reuse of a tape") {
    Tensor x({2}, {1, 2}, true);
    Tape tape;
    Tensor y = relu(x);
    CHECK_THROWS_AS(backward(y, tape), std::invalid_argument);
    Tensor l = reduce_sum(y);
    backward(l, tape);
    CHECK_THROWS_AS(backward(l, tape), std::logic_error);
}

TEST_CASE("gradients accumulate across fan-out") {
    Tensor x = Tensor::scalar(2.0, true);
    Tape tape;
    Tensor l = add(mul(x, x), x);  // x^2 + x, d/dx = 2x + 1 = 5
    backward(l, tape);
    CHECK(x.grad()[0] == doctest::Approx(5.0));
}

TEST_CASE("broadcast mul of [B,1,..] weight against [B,K,..]") {
    Tensor w({2, 1, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    Tensor x = Tensor::full({2, 3, 2, 2}, 1.0);
    Tensor y = mul(w, x);
    CHECK(y.shape() == std::vector<std::size_t>{2, 3, 2, 2});
    for (std::size_t k = 0; k < 3; ++k) CHECK(y.values()[k * 4 + 1] == 2.0);
    Tensor bad = Tensor::zeros({2, 3, 2, 3});
    CHECK_THROWS_AS(mul(w, bad), std::invalid_argument);
}

TEST_CASE("finite-difference check across every op, 10 seeds") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        // probe points away from relu/maxpool kinks
        Tensor in = random_tensor({1, 2, 4, 4}, rng, 0.1, 1.0);
        Tensor k = random_tensor({3, 2, 3, 3}, rng, -0.6, 0.6);
        Tensor b = random_tensor({3}, rng, -0.2, 0.2);
        Tensor w = random_tensor({1, 1, 4, 4}, rng, 0.1, 1.0);
        auto f = [](const std::vector<Tensor>& leaves) {
            Tensor conv = conv2d(leaves[0], leaves[1], leaves[2], 1, 1);
            Tensor act = relu(conv);
            Tensor pooled = maxpool2(act);
            Tensor up = nearest_upsample2x(pooled);
            Tensor cat = channel_concat(up, act);
            Tensor q = softmax_channels(cat);
            Tensor weighted = mul(leaves[3], q);
            Tensor ce = neg_log_clamped(slice_channel(q, 1));
            return add(reduce_mean(weighted),
                       add(reduce_mean(ce), reduce_sum(div(sum_channels(q),
                                                           Tensor::scalar(16.0)))));
        };
        CHECK(fd_max_rel_err(f, {in, k, b, w}) < 1e-5);
    }
}

TEST_CASE("forward results are bit-identical across repeated calls") {
    std::mt19937_64 rng(42);
    Tensor in = random_tensor({1, 2, 4, 4}, rng);
    Tensor k = random_tensor({2, 2, 3, 3}, rng);
    Tensor b = random_tensor({2}, rng);
    Tensor a1 = softmax_channels(conv2d(in, k, b, 1, 1));
    Tensor a2 = softmax_channels(conv2d(in, k, b, 1, 1));
    CHECK(a1.values() == a2.values());
}

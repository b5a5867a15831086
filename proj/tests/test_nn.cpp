#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "support.hpp"
#include "ttfuse/errors.hpp"
#include "ttfuse/gradcheck.hpp"
#include "ttfuse/gradsuite.hpp"
#include "ttfuse/nn.hpp"
#include "ttfuse/parallel.hpp"

using namespace ttfuse;
using namespace ttfuse::nn;

namespace {

// Straightforward cross-correlation: accumulate from the bias over taps in
// (ky, kx, ci) order, skipping taps that land in the padding.
Tensor naive_conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, Padding pad) {
    const std::size_t n = x.dim(0), h = x.dim(1), wd = x.dim(2), c = x.dim(3);
    const std::size_t kh = w.dim(0), kw = w.dim(1), co = w.dim(3);
    std::size_t oh, ow, ph = 0, pw = 0;
    if (pad == Padding::Valid) {
        oh = (h - kh) / stride + 1;
        ow = (wd - kw) / stride + 1;
    } else {
        oh = (h + stride - 1) / stride;
        ow = (wd + stride - 1) / stride;
        const long th = std::max<long>(0, static_cast<long>((oh - 1) * stride + kh) - static_cast<long>(h));
        const long tw = std::max<long>(0, static_cast<long>((ow - 1) * stride + kw) - static_cast<long>(wd));
        ph = static_cast<std::size_t>(th / 2);
        pw = static_cast<std::size_t>(tw / 2);
    }
    Tensor y({n, oh, ow, co});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox)
                for (std::size_t o = 0; o < co; ++o) {
                    double acc = b[o];
                    for (std::size_t ky = 0; ky < kh; ++ky)
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(ph);
                            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pw);
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
                            for (std::size_t ci = 0; ci < c; ++ci)
                                acc += x.at({s, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), ci}) *
                                       w.at({ky, kx, ci, o});
                        }
                    y.at({s, oy, ox, o}) = acc;
                }
    return y;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("dense worked examples") {
    Rng rng(1);
    Dense d("d", 2, 2, rng);
    d.weight().value = Tensor({2, 2}, {1, 2, 3, 4});
    d.bias().value = Tensor::vector({1, 1});
    const Tensor y = d.forward(Tensor({1, 2}, {1, 1}));
    CHECK(y[0] == 4.0);
    CHECK(y[1] == 8.0);

    d.weight().value = Tensor({2, 2}, {1, 0, 0, 1});
    d.bias().value.fill(0);
    const Tensor x({3, 2}, {0.5, -2, 3, 7, -1, 0.25});
    CHECK(d.forward(x) == x);
    CHECK_THROWS_AS(d.forward(Tensor({1, 3})), std::invalid_argument);
}

TEST_CASE("he-normal initialization scale") {
    Rng rng(3);
    Tensor t({200, 300});
    he_normal(t, 50, rng);
    double s2 = 0;
    for (double v : t.values()) s2 += v * v;
    CHECK(s2 / t.size() == doctest::Approx(2.0 / 50).epsilon(0.03));
}

TEST_CASE("conv geometry") {
    auto g = conv_geometry(7, 3, 2, Padding::Same);
    CHECK(g.out == 4);
    CHECK(g.pad_before == 1);
    g = conv_geometry(8, 3, 2, Padding::Same);
    CHECK(g.out == 4);
    CHECK(g.pad_before == 0);  // total pad 1, the extra row goes after
    g = conv_geometry(7, 3, 2, Padding::Valid);
    CHECK(g.out == 3);
    CHECK(g.pad_before == 0);
    g = conv_geometry(5, 5, 1, Padding::Valid);
    CHECK(g.out == 1);
    CHECK_THROWS_AS(conv_geometry(4, 5, 1, Padding::Valid), std::invalid_argument);
    CHECK_THROWS_AS(conv_geometry(4, 3, 0, Padding::Valid), std::invalid_argument);
}

TEST_CASE("conv2d worked examples") {
    Rng rng(1);
    Conv c = Conv::conv2d("c", 3, 1, 1, 1, Padding::Valid, rng);
    c.weight().value.fill(1.0);
    c.bias().value.fill(0.0);
    const Tensor y = c.forward(Tensor({1, 3, 3, 1}, 1.0));
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y[0] == 9.0);

    Conv id = Conv::conv2d("id", 1, 3, 3, 1, Padding::Same, rng);
    id.weight().value.fill(0.0);
    for (std::size_t k = 0; k < 3; ++k) id.weight().value.at({0, 0, k, k}) = 1.0;
    id.bias().value.fill(0.0);
    const Tensor x = test::random_tensor({2, 4, 5, 3}, rng);
    CHECK(id.forward(x) == x);

    CHECK_THROWS_AS(c.forward(Tensor({1, 2, 2, 1})), std::invalid_argument);
    CHECK_THROWS_AS(c.forward(Tensor({1, 3, 3, 2})), std::invalid_argument);
}

TEST_CASE("conv1d worked examples") {
    Rng rng(1);
    Conv c = Conv::conv1d("c", 3, 1, 1, 1, Padding::Valid, rng);
    c.weight().value = Tensor({3, 1, 1}, {1, 2, 1});
    c.bias().value.fill(0.0);
    const Tensor y = c.forward(Tensor({1, 4, 1}, {1, 0, 0, 1}));
    CHECK(y.shape() == Shape{1, 2, 1});
    CHECK(y[0] == 1.0);
    CHECK(y[1] == 1.0);

    Conv id = Conv::conv1d("id", 1, 2, 2, 1, Padding::Valid, rng);
    id.weight().value = Tensor({1, 2, 2}, {1, 0, 0, 1});
    id.bias().value.fill(0.0);
    const Tensor x = test::random_tensor({3, 6, 2}, rng);
    CHECK(id.forward(x) == x);
}

TEST_CASE("conv2d matches the naive loop bit for bit") {
    Rng rng(5);
    for (int t = 0; t < 40; ++t) {
        const std::size_t k = 1 + rng.below(4), stride = 1 + rng.below(3);
        const auto pad = rng.below(2) ? Padding::Same : Padding::Valid;
        const std::size_t h = k + rng.below(6), w = k + rng.below(6);
        const std::size_t c = 1 + rng.below(4), co = 1 + rng.below(5), n = 1 + rng.below(3);
        Conv conv = Conv::conv2d("c", k, c, co, stride, pad, rng);
        for (double& b : conv.bias().value.values()) b = rng.normal();
        const Tensor x = test::random_tensor({n, h, w, c}, rng);
        const Tensor want = naive_conv2d(x, conv.weight().value, conv.bias().value, stride, pad);
        CHECK(bit_equal(conv.forward(x), want));
    }
}

TEST_CASE("conv1d matches the naive loop bit for bit") {
    Rng rng(6);
    for (int t = 0; t < 40; ++t) {
        const std::size_t k = 1 + rng.below(6), stride = 1 + rng.below(4);
        const auto pad = rng.below(2) ? Padding::Same : Padding::Valid;
        const std::size_t l = k + rng.below(12), c = 1 + rng.below(4), co = 1 + rng.below(5), n = 1 + rng.below(3);
        Conv conv = Conv::conv1d("c", k, c, co, stride, pad, rng);
        for (double& b : conv.bias().value.values()) b = rng.normal();
        const Tensor x = test::random_tensor({n, l, c}, rng);
        // A 1-D convolution is the 2-D one over a unit-height image.
        const Tensor w2 = conv.weight().value.reshaped({1, k, c, co});
        const Tensor want = naive_conv2d(x.reshaped({n, 1, l, c}), w2, conv.bias().value, stride, pad);
        const Tensor got = conv.forward(x);
        CHECK(bit_equal(got.reshaped({n, 1, got.dim(1), co}), want));
    }
}

TEST_CASE("conv backward is identical for any worker count") {
    Rng rng(8);
    Conv conv = Conv::conv2d("c", 3, 3, 4, 2, Padding::Same, rng);
    const Tensor x = test::random_tensor({11, 9, 9, 3}, rng);
    const Tensor y = conv.forward(x);
    const Tensor g = test::random_tensor(y.shape(), rng);
    auto run = [&](std::size_t workers) {
        set_worker_count(workers);
        ParamList ps;
        conv.collect(ps);
        zero_grads(ps);
        conv.forward(x);
        Tensor gx = conv.backward(g);
        return std::make_pair(gx, conv.weight().grad);
    };
    const auto one = run(1), four = run(4);
    set_worker_count(1);
    CHECK(bit_equal(one.first, four.first));
    CHECK(bit_equal(one.second, four.second));
}

TEST_CASE("batch norm worked examples") {
    BatchNorm bn("bn", 1);
    const Tensor y = bn.forward(Tensor({2, 1}, {1, 3}), Mode::Train);
    CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-5));
    CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-5));
    // running stats: 0.99 * init + 0.01 * batch
    CHECK(bn.running_mean().value[0] == doctest::Approx(0.01 * 2.0));
    CHECK_FALSE(bn.running_mean().trainable);
    CHECK_FALSE(bn.running_var().trainable);

    BatchNorm id("id", 2);
    const Tensor x({4, 2}, {1, -1, -1, 1, 1, -1, -1, 1});  // zero mean, unit variance per channel
    const Tensor z = id.forward(x, Mode::Train);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(z[i] == doctest::Approx(x[i]).epsilon(1e-5));

    BatchNorm inf("inf", 2);
    inf.running_mean().value = Tensor::vector({1.0, -2.0});
    inf.running_var().value = Tensor::vector({4.0, 0.25});
    inf.gamma().value = Tensor::vector({2.0, 1.0});
    inf.beta().value = Tensor::vector({0.5, 0.0});
    const Tensor r = inf.forward(Tensor({1, 2}, {3.0, -1.0}), Mode::Infer);
    CHECK(r[0] == doctest::Approx(0.5 + 2.0 * 2.0 / std::sqrt(4.0 + 1e-5)));
    CHECK(r[1] == doctest::Approx(1.0 / std::sqrt(0.25 + 1e-5)));

    CHECK_THROWS_AS(bn.forward(Tensor({1, 1}, {2.0}), Mode::Train), std::invalid_argument);
    CHECK_NOTHROW(bn.forward(Tensor({1, 1}, {2.0}), Mode::Infer));
    CHECK_THROWS_AS(bn.forward(Tensor({3, 2}), Mode::Train), std::invalid_argument);
}

TEST_CASE("residual block") {
    Rng rng(2);
    for (bool one_d : {false, true}) {
        ResidualBlock block("r", 3, 3, one_d, rng);
        const Tensor x = one_d ? test::random_tensor({2, 7, 3}, rng) : test::random_tensor({2, 5, 4, 3}, rng);
        CHECK(block.forward(x, Mode::Train).shape() == x.shape());

        ParamList ps;
        block.collect(ps);
        for (Param* p : ps)
            if (p->name.find("weight") != std::string::npos) p->value.fill(0.0);
        const Tensor y = block.forward(x, Mode::Train);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == std::max(0.0, x[i]));

        const Tensor wrong = one_d ? Tensor({2, 7, 2}) : Tensor({2, 5, 4, 2});
        CHECK_THROWS_AS(block.forward(wrong, Mode::Train), std::invalid_argument);
    }
}

TEST_CASE("global average pooling") {
    GlobalAvgPool pool;
    const Tensor x({1, 2, 2, 2}, {1, 10, 2, 20, 3, 30, 4, 40});
    const Tensor y = pool.forward(x);
    CHECK(y.shape() == Shape{1, 2});
    CHECK(y[0] == 2.5);
    CHECK(y[1] == 25.0);
    const Tensor g = pool.backward(Tensor({1, 2}, {4.0, 8.0}));
    for (std::size_t i = 0; i < 8; i += 2) {
        CHECK(g[i] == 1.0);
        CHECK(g[i + 1] == 2.0);
    }
}

TEST_CASE("lstm recurrences") {
    Rng rng(4);
    Lstm zero("z", 3, 2, rng);
    zero.input_weights().value.fill(0);
    zero.recurrent_weights().value.fill(0);
    zero.bias().value.fill(0);
    const Tensor out = zero.forward(test::random_tensor({2, 5, 3}, rng), true);
    for (double v : out.values()) CHECK(v == 0.0);

    // Forget gate starts open.
    Lstm fresh("f", 2, 3, rng);
    for (std::size_t k = 0; k < 12; ++k) CHECK(fresh.bias().value[k] == (k >= 3 && k < 6 ? 1.0 : 0.0));

    // One unit, one input, gate order (i, f, g, o).
    Lstm one("o", 1, 1, rng);
    one.input_weights().value = Tensor({4, 1}, {20.0, -20.0, 0.5, 20.0});
    one.recurrent_weights().value = Tensor({4, 1}, {0.0, 0.0, 1.0, 0.0});
    one.bias().value = Tensor::vector({0.0, 0.0, 0.1, 0.0});
    auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    const double x1 = 1.0, x2 = 0.5;
    const double i1 = sig(20.0), f1 = sig(-20.0), g1 = std::tanh(0.5 + 0.1), o1 = sig(20.0);
    const double c1 = f1 * 0.0 + i1 * g1, h1 = o1 * std::tanh(c1);
    const double i2 = sig(10.0), f2 = sig(-10.0), g2 = std::tanh(0.25 + h1 + 0.1), o2 = sig(10.0);
    const double c2 = f2 * c1 + i2 * g2, h2 = o2 * std::tanh(c2);
    const Tensor y = one.forward(Tensor({1, 2, 1}, {x1, x2}), true);
    CHECK(y[0] == doctest::Approx(h1).epsilon(1e-14));
    CHECK(y[1] == doctest::Approx(h2).epsilon(1e-14));
    CHECK(h1 == doctest::Approx(std::tanh(std::tanh(0.6))).epsilon(1e-7));
    const Tensor last = one.forward(Tensor({1, 2, 1}, {x1, x2}), false);
    CHECK(last.shape() == Shape{1, 1});
    CHECK(last[0] == y[1]);

    CHECK_THROWS_AS(one.forward(Tensor({1, 2, 3}), false), std::invalid_argument);
}

TEST_CASE("dropout") {
    Rng rng(12);
    CHECK_THROWS_AS(Dropout(1.0), std::invalid_argument);
    CHECK_THROWS_AS(Dropout(-0.1), std::invalid_argument);
    const Tensor x = test::random_tensor({10, 10}, rng);
    CHECK(Dropout(0.0).forward(x, Mode::Train, rng) == x);
    CHECK(Dropout(0.5).forward(x, Mode::Infer, rng) == x);

    Dropout d(0.2);
    const Tensor ones({1000, 1000}, 1.0);
    const Tensor y = d.forward(ones, Mode::Train, rng);
    std::size_t kept = 0;
    double sum = 0;
    for (double v : y.values()) {
        if (v != 0.0) {
            ++kept;
            CHECK(v == 1.25);
        }
        sum += v;
    }
    CHECK(std::abs(kept / 1e6 - 0.8) < 0.005);
    CHECK(std::abs(sum / 1e6 - 1.0) < 0.01);
    const Tensor g = d.backward(ones);
    CHECK(g == y);
}

TEST_CASE("softmax and weighted cross-entropy") {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        const auto z = test::random_vector(2 + rng.below(8), rng, 5.0);
        const auto p = softmax(z);
        CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
    }
    const std::vector<double> big{1000.0, 1000.0};
    CHECK(softmax(big)[0] == doctest::Approx(0.5));

    const std::vector<double> w3{1, 1, 1}, z3{0.3, 0.3, 0.3};
    CHECK(weighted_softmax_xent(z3, 1, w3).loss == doctest::Approx(std::log(3.0)));
    const std::vector<double> wz{1, 0, 1};
    const LossGrad lg = weighted_softmax_xent(std::vector<double>{1, 2, 3}, 1, wz);
    CHECK(lg.loss == 0.0);
    for (double g : lg.grad) CHECK(g == 0.0);
    CHECK_THROWS_AS(weighted_softmax_xent(z3, 3, w3), std::invalid_argument);

    // gradient = w_t (p - onehot)
    const std::vector<double> w{0.2, 0.5, 0.3}, z{0.1, -1.0, 2.0};
    const LossGrad l = weighted_softmax_xent(z, 2, w);
    const auto p = softmax(z);
    CHECK(l.loss == doctest::Approx(-0.3 * std::log(p[2])));
    CHECK(l.loss >= 0.0);
    for (std::size_t k = 0; k < 3; ++k) CHECK(l.grad[k] == doctest::Approx(0.3 * (p[k] - (k == 2))));

    // batch form divides the summed losses by the summed target weights
    const Tensor logits({2, 3}, {0.1, -1.0, 2.0, 1.0, 1.0, 0.0});
    const std::vector<std::size_t> targets{2, 0};
    const BatchLoss b = weighted_softmax_xent(logits, targets, w);
    const LossGrad second = weighted_softmax_xent(std::vector<double>{1.0, 1.0, 0.0}, 0, w);
    CHECK(b.loss == doctest::Approx((l.loss + second.loss) / (0.3 + 0.2)));
    CHECK(b.grad[4] == doctest::Approx(second.grad[1] / (0.3 + 0.2)));
    // equal weights give the plain mean
    const BatchLoss flat = weighted_softmax_xent(logits, targets, w3);
    CHECK(flat.loss == doctest::Approx((weighted_softmax_xent(z, 2, w3).loss +
                                        weighted_softmax_xent(std::vector<double>{1.0, 1.0, 0.0}, 0, w3).loss) / 2));
    // rescaling every weight leaves the batch loss unchanged
    const std::vector<double> w10{2.0, 5.0, 3.0};
    CHECK(weighted_softmax_xent(logits, targets, w10).loss == doctest::Approx(b.loss));
    const std::vector<std::size_t> bad{0, 3};
    CHECK_THROWS_AS(weighted_softmax_xent(logits, bad, w), std::invalid_argument);
}

TEST_CASE("adam update rule") {
    Param p("theta", Tensor::vector({1.0}));
    ParamList ps{&p};
    AdamState s;
    p.grad[0] = 0.0;
    adam_step(s, ps);
    CHECK(p.value[0] == 1.0);
    CHECK(s.t == 1);

    AdamState a;
    Param q("q", Tensor::vector({0.0}));
    ParamList qs{&q};
    q.grad[0] = 1.0;
    adam_step(a, qs);
    CHECK(q.value[0] == doctest::Approx(-0.0005 / (1.0 + 1e-8)).epsilon(1e-12));

    // Two steps by hand, gradients 1 then -2.
    q.grad[0] = -2.0;
    adam_step(a, qs);
    const double m1 = 0.1, v1 = 0.001;
    const double m2 = 0.9 * m1 + 0.1 * -2.0, v2 = 0.999 * v1 + 0.001 * 4.0;
    const double step1 = 0.0005 * (m1 / 0.1) / (std::sqrt(v1 / 0.001) + 1e-8);
    const double step2 = 0.0005 * (m2 / (1 - 0.81)) / (std::sqrt(v2 / (1 - 0.999 * 0.999)) + 1e-8);
    CHECK(std::abs(q.value[0] - (-step1 - step2)) < 1e-12);

    Param frozen("stats", Tensor::vector({3.0}), false);
    Param r("r", Tensor::vector({1.0, 2.0}));
    ParamList rs{&r, &frozen};
    AdamState b;
    frozen.grad[0] = 5.0;
    r.grad[1] = NAN;
    try {
        adam_step(b, rs);
        FAIL("expected a numeric error");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("'r'") != std::string::npos);
    }
    CHECK(r.value[0] == 1.0);
    r.grad[1] = 1.0;
    adam_step(b, rs);
    CHECK(frozen.value[0] == 3.0);
}

TEST_CASE("grad_check harness") {
    std::vector<double> x{0.3, -1.2, 2.0};
    const std::vector<double> a{2.0, -1.0, 0.5};
    auto lin = [&] { return 2.0 * x[0] - x[1] + 0.5 * x[2] + 7.0; };
    CHECK(grad_check(lin, x, a).max_rel_error <= 1e-10);
    CHECK(x[0] == 0.3);

    auto quad = [&] { return x[0] * x[0] + 3.0 * x[1] * x[2]; };
    const std::vector<double> qa{2 * x[0], 3 * x[2], 3 * x[1]};
    CHECK(grad_check(quad, x, qa).max_rel_error <= 1e-9);

    const std::vector<double> wrong{2 * x[0], 3 * x[2], 0.0};
    CHECK(grad_check(quad, x, wrong).max_rel_error > 0.5);

    // dense + ReLU, away from the kink
    Rng rng(9);
    Dense d("d", 4, 3, rng);
    Relu relu;
    Tensor in = test::random_tensor({2, 4}, rng);
    const Tensor g = test::random_tensor({2, 3}, rng);
    auto f = [&] {
        const Tensor y = relu.forward(d.forward(in));
        double s = 0;
        for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * g[i];
        return s;
    };
    f();
    const Tensor gx = d.backward(relu.backward(g));
    CHECK(grad_check(f, in.values(), gx.values()).max_rel_error <= 1e-4);
}

TEST_CASE("finite-difference suite over every layer") {
    GradSuiteOptions opt;
    opt.seed = 2024;
    opt.include_model = false;
    for (const LayerCheck& c : run_grad_suite(opt)) {
        CAPTURE(c.layer);
        CAPTURE(c.worst);
        CHECK(c.configs >= 20);
        CHECK(c.checked > 0);
        CHECK(c.max_rel_error <= 1e-4);
        CHECK(c.kinks * 10 <= c.checked);
    }
}

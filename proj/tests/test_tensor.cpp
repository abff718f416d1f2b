#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sgm/oracle.hpp"
#include "sgm/rng.hpp"
#include "sgm/tensor.hpp"

using namespace sgm;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true, double lo = -1.5,
                     double hi = 1.5) {
    return Tensor::uniform(std::move(shape), lo, hi, rng, requires_grad);
}

// Reduces an op output to a scalar against fixed weights so every output
// entry gets a distinct adjoint.
Tensor weighted_sum(const Tensor& out, const Tensor& weights) {
    return sum_all(elementwise_mul(out, weights));
}

// Checks d(weighted_sum(f()))/d(param) against central differences for every
// parameter in the list.
void check_grads(const std::function<Tensor()>& forward, std::vector<Tensor> params,
                 double tol = 1e-7) {
    Rng wrng(99);
    Tensor first = forward();
    Tensor weights = random_tensor(first.shape(), wrng, false);

    const auto loss_value = [&] { return weighted_sum(forward(), weights).value(); };

    for (Tensor& p : params) p.zero_grad();
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = weighted_sum(forward(), weights);
    }
    backward(loss, tape);

    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::vector<double> numeric = oracle::finite_diff_grad(loss_value, params[i]);
        const auto report =
            oracle::compare_grads("param" + std::to_string(i), params[i].grad(), numeric);
        INFO("parameter " << i << " worst entry " << report.worst_index);
        CHECK(report.max_rel_err < tol);
    }
}

} // namespace

TEST_CASE("tensor factories and accessors", "[tensor]") {
    Tensor z = Tensor::zeros({2, 3});
    CHECK(z.numel() == 6);
    CHECK(z.shape() == Shape{2, 3});
    CHECK_FALSE(z.requires_grad());

    Tensor f = Tensor::full({2}, 2.5);
    CHECK(f.at(0) == 2.5);
    CHECK(f.at(1) == 2.5);

    Tensor s = Tensor::scalar(-4.0);
    CHECK(s.value() == -4.0);
    CHECK_THROWS_AS(z.value(), ContractError);

    Tensor id = Tensor::identity(3);
    CHECK(id.at(1, 1) == 1.0);
    CHECK(id.at(1, 2) == 0.0);

    CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}), ShapeError);

    Tensor g = Tensor::zeros({2}, true);
    CHECK(g.requires_grad());
    CHECK(g.grad().size() == 2);
    Tensor ng = Tensor::zeros({2});
    CHECK_THROWS_AS(ng.grad(), ContractError);
}

TEST_CASE("uniform factory is deterministic per seed", "[tensor]") {
    Rng a(42), b(42), c(43);
    Tensor ta = Tensor::uniform({4, 4}, -1.0, 1.0, a);
    Tensor tb = Tensor::uniform({4, 4}, -1.0, 1.0, b);
    Tensor tc = Tensor::uniform({4, 4}, -1.0, 1.0, c);
    CHECK(ta.data() == tb.data());
    CHECK(ta.data() != tc.data());
    for (double v : ta.data()) {
        CHECK(v >= -1.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("elementwise forward values", "[tensor]") {
    Tensor a = Tensor::from_data({3}, {1.0, -2.0, 3.0});
    Tensor b = Tensor::from_data({3}, {0.5, 4.0, -1.0});
    CHECK(add(a, b).data() == std::vector<double>{1.5, 2.0, 2.0});
    CHECK(elementwise_mul(a, b).data() == std::vector<double>{0.5, -8.0, -3.0});
    CHECK(scalar_mul(a, -2.0).data() == std::vector<double>{-2.0, 4.0, -6.0});
    CHECK(relu(a).data() == std::vector<double>{1.0, 0.0, 3.0});
    CHECK(leaky_relu(a, 0.1).data() == std::vector<double>{1.0, -0.2, 3.0});

    Tensor c = Tensor::zeros({4});
    CHECK_THROWS_AS(add(a, c), ShapeError);
    CHECK_THROWS_AS(elementwise_mul(a, c), ShapeError);
}

TEST_CASE("matmul forward value and shape errors", "[tensor]") {
    Tensor a = Tensor::from_data({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor b = Tensor::from_data({2, 2}, {5.0, 6.0, 7.0, 8.0});
    Tensor c = matmul(a, b);
    CHECK(c.data() == std::vector<double>{19.0, 22.0, 43.0, 50.0});

    Tensor bad = Tensor::zeros({3, 2});
    try {
        matmul(a, bad);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x2]") != std::string::npos);
        CHECK(msg.find("[3x2]") != std::string::npos);
    }
}

TEST_CASE("linear broadcasts bias over rows", "[tensor]") {
    Tensor x = Tensor::from_data({2, 2}, {1.0, 0.0, 0.0, 1.0});
    Tensor w = Tensor::from_data({2, 3}, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
    Tensor b = Tensor::from_data({3}, {0.1, 0.2, 0.3});
    Tensor y = linear(x, w, b);
    CHECK(y.at(0, 0) == Catch::Approx(1.1));
    CHECK(y.at(0, 2) == Catch::Approx(3.3));
    CHECK(y.at(1, 1) == Catch::Approx(5.2));
    CHECK_THROWS_AS(linear(x, w, Tensor::zeros({2})), ShapeError);
}

TEST_CASE("ops outside a tape scope record nothing", "[tensor]") {
    Tensor a = Tensor::zeros({2}, true);
    Tensor out = add(a, a);
    CHECK_FALSE(out.requires_grad());
    CHECK(active_tape() == nullptr);

    Tape tape;
    {
        TapeScope scope(tape);
        Tensor b = Tensor::zeros({2}); // no grad anywhere: still nothing recorded
        add(b, b);
    }
    CHECK(tape.num_ops() == 0);
}

TEST_CASE("backward contract violations", "[tensor]") {
    Tensor a = Tensor::from_data({2}, {1.0, 2.0}, true);
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = sum_all(a);
    }
    Tensor vec = add(a, a);
    CHECK_THROWS_AS(backward(vec, tape), ContractError);
    backward(loss, tape);
    CHECK(a.grad() == std::vector<double>{1.0, 1.0});
    CHECK_THROWS_AS(backward(loss, tape), ContractError);
}

TEST_CASE("gradients accumulate across uses and passes", "[tensor]") {
    Tensor a = Tensor::from_data({2}, {2.0, -3.0}, true);

    // same tensor used twice in one graph: contributions sum
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = sum_all(add(a, a));
    }
    backward(loss, tape);
    CHECK(a.grad() == std::vector<double>{2.0, 2.0});

    // a second independent pass adds on top until zeroed
    Tape tape2;
    Tensor loss2;
    {
        TapeScope scope(tape2);
        loss2 = sum_all(a);
    }
    backward(loss2, tape2);
    CHECK(a.grad() == std::vector<double>{3.0, 3.0});

    a.zero_grad();
    CHECK(a.grad() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("finite differences agree for elementwise ops", "[tensor]") {
    Rng rng(11);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({3, 4}, rng);
    check_grads([&] { return add(a, b); }, {a, b});
    check_grads([&] { return elementwise_mul(a, b); }, {a, b});
    check_grads([&] { return scalar_mul(a, -1.7); }, {a});
    check_grads([&] { return leaky_relu(a, 0.2); }, {a});

    // keep relu inputs clear of the kink
    Tensor c = Tensor::from_data({4}, {0.8, -0.9, 1.4, -2.0}, true);
    check_grads([&] { return relu(c); }, {c});
}

TEST_CASE("finite differences agree for linear algebra ops", "[tensor]") {
    Rng rng(12);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);
    check_grads([&] { return matmul(a, b); }, {a, b});

    Tensor m = random_tensor({3, 5}, rng);
    Tensor v = random_tensor({5}, rng);
    check_grads([&] { return matvec(m, v); }, {m, v});

    Tensor v2 = random_tensor({3}, rng);
    check_grads([&] { return vecmat(v2, m); }, {v2, m});

    Tensor x = random_tensor({4, 3}, rng);
    Tensor w = random_tensor({3, 2}, rng);
    Tensor bias = random_tensor({2}, rng);
    check_grads([&] { return linear(x, w, bias); }, {x, w, bias});

    Tensor s = random_tensor({4}, rng);
    Tensor d = random_tensor({6}, rng);
    check_grads([&] { return outer_sum(s, d); }, {s, d});
}

TEST_CASE("finite differences agree for reductions and reshapes", "[tensor]") {
    Rng rng(13);
    Tensor x = random_tensor({4, 5}, rng);
    check_grads([&] { return mean_over_axis(x, 0); }, {x});
    check_grads([&] { return mean_over_axis(x, 1); }, {x});
    CHECK_THROWS_AS(mean_over_axis(x, 2), ShapeError);

    Tensor p1 = random_tensor({3, 2}, rng);
    Tensor p2 = random_tensor({3, 4}, rng);
    check_grads([&] { return concat_last_dim({p1, p2}); }, {p1, p2});

    Tensor v = random_tensor({7}, rng);
    check_grads([&] { return slice_vec(v, 2, 4); }, {v});
    CHECK_THROWS_AS(slice_vec(v, 5, 4), IndexError);

    Tensor batch = random_tensor({3, 2, 2}, rng);
    check_grads([&] { return slice_first(batch, 1); }, {batch});
    CHECK_THROWS_AS(slice_first(batch, 3), IndexError);

    Tensor q1 = random_tensor({2, 3}, rng);
    Tensor q2 = random_tensor({2, 3}, rng);
    check_grads([&] { return stack_first({q1, q2}); }, {q1, q2});
    CHECK_THROWS_AS(stack_first({q1, random_tensor({3, 2}, rng)}), ShapeError);
}

TEST_CASE("apply_mask zeroes values and gradients outside the mask", "[tensor]") {
    Rng rng(14);
    Tensor x = random_tensor({3, 3}, rng);
    std::vector<std::uint8_t> mask = {1, 0, 1, 0, 1, 0, 1, 0, 1};

    Tensor y = apply_mask(x, mask);
    for (std::size_t i = 0; i < mask.size(); ++i)
        CHECK(y.data()[i] == (mask[i] ? x.data()[i] : 0.0));

    x.zero_grad();
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = sum_all(apply_mask(x, mask));
    }
    backward(loss, tape);
    for (std::size_t i = 0; i < mask.size(); ++i)
        CHECK(x.grad()[i] == (mask[i] ? 1.0 : 0.0));

    check_grads([&] { return apply_mask(x, mask); }, {x});
    CHECK_THROWS_AS(apply_mask(x, std::vector<std::uint8_t>(4, 1)), ShapeError);
}

TEST_CASE("masked softmax normalizes within masked entries only", "[tensor]") {
    Rng rng(15);
    Tensor scores = random_tensor({3, 3}, rng);
    // row 2 fully masked out
    std::vector<std::uint8_t> mask = {1, 1, 0, 0, 1, 1, 0, 0, 0};

    Tensor p = masked_softmax_rows(scores, mask);
    CHECK(p.at(0, 0) + p.at(0, 1) == Catch::Approx(1.0));
    CHECK(p.at(0, 2) == 0.0);
    CHECK(p.at(1, 1) + p.at(1, 2) == Catch::Approx(1.0));
    CHECK(p.at(2, 0) == 0.0);
    CHECK(p.at(2, 1) == 0.0);
    CHECK(p.at(2, 2) == 0.0);

    check_grads([&] { return masked_softmax_rows(scores, mask); }, {scores});

    // masked-out score entries keep exactly-zero gradients
    scores.zero_grad();
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = sum_all(elementwise_mul(masked_softmax_rows(scores, mask),
                                       Tensor::from_data({3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9})));
    }
    backward(loss, tape);
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (!mask[i]) CHECK(scores.grad()[i] == 0.0);

    CHECK_THROWS_AS(masked_softmax_rows(random_tensor({2, 3}, rng), mask), ShapeError);
}

TEST_CASE("softmax stability under large score offsets", "[tensor]") {
    Tensor scores = Tensor::from_data({2, 2}, {1000.0, 1001.0, -1000.0, -999.0});
    std::vector<std::uint8_t> mask(4, 1);
    Tensor p = masked_softmax_rows(scores, mask);
    const double lo = 1.0 / (1.0 + std::exp(1.0));
    CHECK(p.at(0, 0) == Catch::Approx(lo));
    CHECK(p.at(1, 0) == Catch::Approx(lo));
}

TEST_CASE("cross entropy against a hand computation", "[tensor]") {
    Tensor logits = Tensor::from_data({2, 3}, {2.0, 1.0, 0.5, -1.0, 0.0, 3.0});
    const std::vector<int> labels = {0, 2};

    double expect = 0.0;
    {
        const double z0 = std::exp(2.0) + std::exp(1.0) + std::exp(0.5);
        const double z1 = std::exp(-1.0) + std::exp(0.0) + std::exp(3.0);
        expect = 0.5 * (-std::log(std::exp(2.0) / z0) - std::log(std::exp(3.0) / z1));
    }
    CHECK(cross_entropy_logits(logits, labels).value() == Catch::Approx(expect).epsilon(1e-12));

    CHECK_THROWS_AS(cross_entropy_logits(logits, {0}), ShapeError);
    CHECK_THROWS_AS(cross_entropy_logits(logits, {0, 3}), IndexError);
    CHECK_THROWS_AS(cross_entropy_logits(logits, {-1, 0}), IndexError);
}

TEST_CASE("cross entropy gradient matches finite differences", "[tensor]") {
    Rng rng(16);
    Tensor logits = random_tensor({4, 3}, rng);
    const std::vector<int> labels = {0, 2, 1, 1};

    const auto loss_value = [&] { return cross_entropy_logits(logits, labels).value(); };
    logits.zero_grad();
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = cross_entropy_logits(logits, labels);
    }
    backward(loss, tape);
    const std::vector<double> numeric = oracle::finite_diff_grad(loss_value, logits);
    const auto report = oracle::compare_grads("logits", logits.grad(), numeric);
    CHECK(report.max_rel_err < 1e-7);
}

TEST_CASE("compare_grads reports the worst entry", "[tensor]") {
    const std::vector<double> a = {1.0, 2.0, 0.0};
    const std::vector<double> b = {1.0, 2.2, 0.0};
    const auto r = oracle::compare_grads("x", a, b);
    CHECK(r.worst_index == 1);
    CHECK(r.max_rel_err == Catch::Approx(0.2 / 2.2));
    CHECK(r.max_abs_err == Catch::Approx(0.2));
    CHECK_FALSE(r.pass(1e-3));
    CHECK(r.pass(0.2));
    CHECK_THROWS_AS(oracle::compare_grads("x", a, {1.0}), ContractError);
}

TEST_CASE("rng normal and mix_seed basics", "[tensor]") {
    Rng a(5), b(5);
    for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
    CHECK(mix_seed(1, 2) != mix_seed(1, 3));
    CHECK(mix_seed(1, 2) == mix_seed(1, 2));
    Rng c(6);
    for (int i = 0; i < 1000; ++i) {
        const int v = c.uniform_int(3, 7);
        CHECK(v >= 3);
        CHECK(v <= 7);
    }
}

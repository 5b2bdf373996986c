#include "slowfast/error.hpp"
#include "slowfast/rng.hpp"
#include "slowfast/velocity_model.hpp"

#include "finite_diff.hpp"

#include <doctest.h>

#include <cmath>

using namespace slowfast;
using slowfast::testing::central_difference;
using slowfast::testing::relative_error;

namespace {

ModelSpec small_spec(std::size_t classes = 0) {
    ModelSpec s;
    s.time_embed_dim = 8;
    s.hidden = {16, 12};
    s.num_classes = classes;
    return s;
}

Tensor random_x(std::size_t rows, std::uint64_t seed) {
    Tensor x(rows, 2);
    const CounterRng rng(seed, Stream::eval_noise);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.normal_at(2 * i);
    }
    return x;
}

} // namespace

TEST_CASE("time embedding examples") {
    CHECK(time_embed(0.0, 4) == std::vector<double>{0.0, 1.0, 0.0, 1.0});
    const auto one = time_embed(1.0, 2);
    CHECK(one[0] == doctest::Approx(0.841471).epsilon(1e-6));
    CHECK(one[1] == doctest::Approx(0.540302).epsilon(1e-6));
    for (double v : time_embed(0.73, 16)) {
        CHECK(std::abs(v) <= 1.0);
    }
    const auto e = time_embed(0.5, 8, 100.0);
    CHECK(e[2] == doctest::Approx(std::sin(0.5 / std::pow(100.0, 2.0 / 8.0))));
    CHECK(e[3] == doctest::Approx(std::cos(0.5 / std::pow(100.0, 2.0 / 8.0))));
    CHECK_THROWS_AS(time_embed(1.1, 4), DomainError);
    CHECK_THROWS_AS(time_embed(-0.1, 4), DomainError);
    CHECK_THROWS_AS(time_embed(0.5, 3), ContractError);
}

TEST_CASE("shapes, parameter count and init bounds") {
    const ModelSpec spec;
    const VelocityField m = VelocityField::init(spec, 1);
    CHECK(m.parameter_count() == (34 * 128 + 128) + (128 * 128 + 128) + (128 * 2 + 2));
    const auto layers = m.layers();
    CHECK(layers[0].weight.rows() == 128);
    CHECK(layers[0].weight.cols() == 34);
    CHECK(layers[2].weight.rows() == 2);
    const double bound = 1.0 / std::sqrt(34.0);
    for (double w : layers[0].weight.data()) {
        CHECK(std::abs(w) <= bound);
    }
    for (double b : layers[1].bias.data()) {
        CHECK(b == 0.0);
    }
    for (std::size_t b : {1, 8, 256}) {
        const Tensor v = m.forward(random_x(b, b), 0.3);
        CHECK(v.rows() == b);
        CHECK(v.cols() == 2);
    }
    ModelSpec cond = spec;
    cond.num_classes = 8;
    CHECK(VelocityField::init(cond, 1).parameter_count() == m.parameter_count() + 8 * 32);
    ModelSpec bad = spec;
    bad.time_embed_dim = 7;
    CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("zero weights give zero output") {
    const VelocityField z = VelocityField::zeros(ModelSpec{});
    const Tensor v = z.forward(random_x(5, 3), 0.9);
    for (double e : v.data()) {
        CHECK(e == 0.0);
    }
}

TEST_CASE("forward is pure and matches the graph path") {
    const VelocityField m = VelocityField::init(small_spec(3), 4);
    const Tensor x = random_x(7, 5);
    const std::vector<double> taus = {0.0, 0.1, 0.2, 0.5, 0.7, 0.9, 1.0};
    const std::vector<int> cls = {0, 1, 2, 0, 1, 2, 0};
    const Tensor a = m.forward(x, taus, cls);
    CHECK(bit_equal(a, m.forward(x, taus, cls)));
    CHECK(bit_equal(a, m.forward_graph(x, taus, cls)));
    const std::vector<std::size_t> rows = {3};
    const std::vector<double> one_tau = {0.5};
    const std::vector<int> one_cls = {0};
    CHECK(bit_equal(m.forward(x.gather_rows(rows), one_tau, one_cls), a.gather_rows(rows)));
}

TEST_CASE("conditioning contracts") {
    VelocityField m = VelocityField::init(small_spec(4), 2);
    const Tensor x = random_x(3, 1);
    const std::vector<int> none;
    const std::vector<int> unknown = {4};
    const std::vector<int> wrong_count = {0, 1};
    CHECK_THROWS_AS(m.forward(x, 0.5, none), ConditionError);
    CHECK_THROWS_AS(m.forward(x, 0.5, unknown), ConditionError);
    CHECK_THROWS_AS(m.forward(x, 0.5, wrong_count), ConditionError);
    const VelocityField u = VelocityField::init(small_spec(), 2);
    const std::vector<int> some = {0};
    CHECK_THROWS_AS(u.forward(x, 0.5, some), ConditionError);

    m.cond_table().fill(0.0);
    const std::vector<int> c0 = {0};
    const Tensor ref = m.forward(x, 0.5, c0);
    for (int c = 1; c < 4; ++c) {
        const std::vector<int> cc = {c};
        CHECK(bit_equal(m.forward(x, 0.5, cc), ref));
    }
}

TEST_CASE("input Jacobian matches finite differences") {
    const VelocityField m = VelocityField::init(small_spec(2), 6);
    Tensor x = Tensor::from_rows({{0.3, -0.7}});
    const std::vector<double> tau = {0.42};
    const std::vector<int> cls = {1};
    for (std::size_t out = 0; out < 2; ++out) {
        Graph g;
        const BoundModel bound = m.bind(g, false);
        const Var xv = g.leaf(x);
        const Var v = apply_model(g, m.spec(), bound, xv, tau, cls);
        Tensor pick(1, 2, 0.0);
        pick[out] = 1.0;
        const Var sel = g.hadamard(v, g.constant(pick));
        const Var loss = g.mse(sel, Tensor(1, 2, 0.0));
        g.backward(loss);
        const double value = g.value(v)[out];
        for (std::size_t i = 0; i < 2; ++i) {
            // The loss is v_out²/2, so its x-gradient is v_out·dv_out/dx.
            const double ad = g.grad(xv)[i] / value;
            const double fd = central_difference([&]() { return m.forward(x, tau, cls)[out]; }, x, i);
            CHECK(relative_error(ad, fd) < 1e-6);
        }
    }
}

TEST_CASE("parameter gradients match finite differences") {
    VelocityField m = VelocityField::init(small_spec(3), 8);
    const Tensor x = random_x(4, 9);
    const std::vector<double> taus = {0.1, 0.4, 0.6, 0.95};
    const std::vector<int> cls = {2, 0, 1, 2};
    const Tensor target = random_x(4, 10);
    const auto loss_value = [&]() {
        Graph g;
        const BoundModel b = m.bind(g, false);
        return g.value(g.mse(apply_model(g, m.spec(), b, g.constant(x), taus, cls), target)).item();
    };
    Graph g;
    const BoundModel bound = m.bind(g, true);
    g.backward(g.mse(apply_model(g, m.spec(), bound, g.constant(x), taus, cls), target));
    std::vector<Var> vars;
    for (std::size_t i = 0; i < bound.weights.size(); ++i) {
        vars.push_back(bound.weights[i]);
        vars.push_back(bound.biases[i]);
    }
    vars.push_back(*bound.cond_table);
    const auto params = m.parameters();
    REQUIRE(params.size() == vars.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t i = 0; i < params[p]->size(); ++i) {
            CHECK(relative_error(g.grad(vars[p])[i], central_difference(loss_value, *params[p], i)) < 1e-6);
        }
    }
}

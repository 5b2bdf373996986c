#include "slowfast/error.hpp"
#include "slowfast/lora.hpp"
#include "slowfast/rng.hpp"

#include "finite_diff.hpp"

#include <doctest.h>

using namespace slowfast;
using slowfast::testing::central_difference;
using slowfast::testing::relative_error;

namespace {

VelocityField small_base(std::uint64_t seed = 1) {
    ModelSpec s;
    s.time_embed_dim = 8;
    s.hidden = {16, 16};
    s.num_classes = 2;
    return VelocityField::init(s, seed);
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

TEST_CASE("zero-B adapters leave the model bit-identical") {
    const VelocityField base = small_base();
    const LoraAdapter adapter = LoraAdapter::init(base, 4, 16.0, LoraInit::gaussian_a_zero_b, 3);
    const VelocityField eff = effective_weights(base, adapter);
    CHECK(bit_equal(eff, base));
    const Tensor x = random_x(9, 2);
    const std::vector<int> cls = {1};
    CHECK(bit_equal(eff.forward(x, 0.37, cls), base.forward(x, 0.37, cls)));

    Graph g;
    const BoundModel bound = bind_adapted(g, base, adapter, false);
    const std::vector<double> tau = {0.37};
    const Var v = apply_model(g, base.spec(), bound, g.constant(x), tau, cls);
    CHECK(bit_equal(g.value(v), base.forward(x, 0.37, cls)));
}

TEST_CASE("gaussian_both init perturbs the model") {
    const VelocityField base = small_base();
    const LoraAdapter adapter = LoraAdapter::init(base, 4, 16.0, LoraInit::gaussian_both, 3);
    CHECK_FALSE(bit_equal(effective_weights(base, adapter), base));
}

TEST_CASE("scale factor and rank cap") {
    const VelocityField base = small_base();
    CHECK(LoraAdapter::init(base, 32, 128.0, LoraInit::gaussian_a_zero_b, 0).scale() == 4.0);
    const LoraAdapter a = LoraAdapter::init(base, 8, 32.0, LoraInit::gaussian_a_zero_b, 0);
    CHECK(a.layers[0].a.rows() == 8);
    CHECK(a.layers[0].a.cols() == 10);
    CHECK(a.layers[0].b.rows() == 16);
    CHECK(a.layers.back().a.rows() == 2);
    CHECK(a.layers.back().b.cols() == 2);
    CHECK(layer_rank(8, Tensor(2, 128)) == 2);
    CHECK(layer_rank(8, Tensor(128, 128)) == 8);
}

TEST_CASE("rank-1 delta matches the dense outer product") {
    const LoraLayer l{Tensor::from_rows({{1.0, 0.0}}), Tensor::from_rows({{1.0}, {0.0}})};
    const double alpha = 3.0;
    const Tensor delta = weight_delta(l, alpha / 1.0);
    CHECK(delta == Tensor::from_rows({{3.0, 0.0}, {0.0, 0.0}}));
}

TEST_CASE("doubling B doubles the delta exactly") {
    const VelocityField base = small_base();
    LoraAdapter a = LoraAdapter::init(base, 4, 16.0, LoraInit::gaussian_both, 5);
    const Tensor d1 = weight_delta(a.layers[1], a.scale());
    for (double& v : a.layers[1].b.data()) {
        v *= 2.0;
    }
    const Tensor d2 = weight_delta(a.layers[1], a.scale());
    for (std::size_t i = 0; i < d1.size(); ++i) {
        CHECK(d2[i] == 2.0 * d1[i]);
    }
}

TEST_CASE("adapted graph agrees with effective weights and has correct gradients") {
    const VelocityField base = small_base(2);
    LoraAdapter adapter = LoraAdapter::init(base, 4, 16.0, LoraInit::gaussian_both, 7);
    const Tensor x = random_x(3, 4);
    const std::vector<double> taus = {0.2, 0.5, 0.8};
    const std::vector<int> cls = {0, 1, 0};
    const Tensor target = random_x(3, 5);

    CHECK(max_abs_diff(effective_weights(base, adapter).forward(x, taus, cls), [&] {
              Graph g;
              const BoundModel b = bind_adapted(g, base, adapter, false);
              return g.value(apply_model(g, base.spec(), b, g.constant(x), taus, cls));
          }()) < 1e-12);

    const auto loss_value = [&]() {
        Graph g;
        const BoundModel b = bind_adapted(g, base, adapter, false);
        return g.value(g.mse(apply_model(g, base.spec(), b, g.constant(x), taus, cls), target)).item();
    };
    Graph g;
    BoundAdapter handles;
    const BoundModel b = bind_adapted(g, base, adapter, true, &handles);
    g.backward(g.mse(apply_model(g, base.spec(), b, g.constant(x), taus, cls), target));
    for (std::size_t l = 0; l < adapter.layers.size(); ++l) {
        for (std::size_t i = 0; i < adapter.layers[l].a.size(); ++i) {
            CHECK(relative_error(g.grad(handles.a[l])[i], central_difference(loss_value, adapter.layers[l].a, i)) <
                  1e-6);
        }
        for (std::size_t i = 0; i < adapter.layers[l].b.size(); ++i) {
            CHECK(relative_error(g.grad(handles.b[l])[i], central_difference(loss_value, adapter.layers[l].b, i)) <
                  1e-6);
        }
    }
}

TEST_CASE("incompatible adapters are rejected") {
    const VelocityField base = small_base();
    ModelSpec other = base.spec();
    other.hidden = {8, 16};
    const LoraAdapter wrong = LoraAdapter::init(VelocityField::init(other, 1), 4, 16.0, LoraInit::gaussian_a_zero_b, 0);
    CHECK_THROWS_AS(effective_weights(base, wrong), AdapterError);
    LoraAdapter truncated = LoraAdapter::init(base, 4, 16.0, LoraInit::gaussian_a_zero_b, 0);
    truncated.layers.pop_back();
    CHECK_THROWS_AS(truncated.check_compatible(base), AdapterError);
    CHECK_THROWS_AS(LoraAdapter::init(base, 0, 16.0, LoraInit::gaussian_a_zero_b, 0), AdapterError);
}

TEST_CASE("routing by phase") {
    const TimeGrid grid = TimeGrid::uniform(50);
    const PhaseSchedule sch = allocate(grid, partition(grid), 3, 5);
    const VelocityField base = small_base();
    const LoraAdapter s = LoraAdapter::init(base, 2, 8.0, LoraInit::gaussian_a_zero_b, 1);
    const LoraAdapter f = LoraAdapter::init(base, 2, 8.0, LoraInit::gaussian_a_zero_b, 2);

    const ExpertSet both = ExpertSet::slow_fast(s, f);
    CHECK(route(both, 6, sch) == &*both.slow);
    CHECK(route(both, 26, sch) == &*both.fast);
    CHECK(route_tag(both, 0, sch) == ExpertTag::slow);

    const ExpertSet slow_only = ExpertSet::slow_only(s);
    CHECK(route(slow_only, 20, sch) == nullptr);
    CHECK(route(slow_only, 12, sch) == &*slow_only.slow);

    const ExpertSet fast_only = ExpertSet::fast_only(f);
    CHECK(route(fast_only, 0, sch) == nullptr);
    CHECK(route_tag(fast_only, 44, sch) == ExpertTag::fast);

    const ExpertSet single = ExpertSet::single_adapter(s);
    for (std::size_t idx : sch.executed()) {
        CHECK(route(single, idx, sch) == &*single.single);
    }
    CHECK(route(ExpertSet::bare(), 0, sch) == nullptr);
    CHECK_THROWS_AS(route(both, 1, sch), ContractError);
    CHECK_THROWS_AS(route(both, 50, sch), ContractError);

    ExpertSet broken;
    broken.mode = RoutingMode::slow_fast;
    broken.slow = s;
    CHECK_THROWS_AS(broken.validate(), ConfigError);
}

TEST_CASE("init names parse") {
    CHECK(parse_lora_init("gaussian_both") == LoraInit::gaussian_both);
    CHECK(to_string(LoraInit::gaussian_a_zero_b) == "gaussian_a_zero_b");
    CHECK_THROWS_AS(parse_lora_init("kaiming"), ConfigError);
}

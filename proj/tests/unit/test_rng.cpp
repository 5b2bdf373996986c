#include "slowfast/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace slowfast;

TEST_CASE("counter values are pure functions of their address") {
    const CounterRng a(42, Stream::data, 3);
    const CounterRng b(42, Stream::data, 3);
    for (std::uint64_t c = 0; c < 100; ++c) {
        CHECK(a.bits_at(c) == b.bits_at(c));
    }
    CHECK(a.bits_at(0) != CounterRng(43, Stream::data, 3).bits_at(0));
    CHECK(a.bits_at(0) != CounterRng(42, Stream::init, 3).bits_at(0));
    CHECK(a.bits_at(0) != CounterRng(42, Stream::data, 4).bits_at(0));
}

TEST_CASE("sequential interface walks the same counters") {
    const CounterRng fixed(7, Stream::train_time);
    CounterRng seq(7, Stream::train_time);
    CHECK(seq.uniform() == fixed.uniform_at(0));
    CHECK(seq.normal() == fixed.normal_at(1));
    CHECK(seq.position() == 3);
    seq.seek(10);
    CHECK(seq.next_bits() == fixed.bits_at(10));
}

TEST_CASE("uniform draws lie in the open unit interval with the right moments") {
    const CounterRng rng(1, Stream::eval_noise);
    double sum = 0.0;
    double lo = 1.0;
    double hi = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform_at(i);
        sum += u;
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo > 0.0);
    CHECK(hi < 1.0);
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("normal draws have zero mean and unit variance") {
    const CounterRng rng(2, Stream::eval_noise);
    double s1 = 0.0;
    double s2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal_at(2 * static_cast<std::uint64_t>(i));
        s1 += z;
        s2 += z * z;
    }
    CHECK(std::abs(s1 / n) < 0.01);
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.01));
}

#include <doctest.h>

#include <random>

#include "actsc/calibration.hpp"
#include "actsc/controllers.hpp"
#include "actsc/error.hpp"
#include "support/test_support.hpp"

using namespace actsc;
using testsupport::rec;

TEST_CASE("tau examples") {
    const std::vector<double> p = {0.2, 0.4, 0.6};
    CHECK(calibrate_tau_from_probabilities(p).tau == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(calibrate_tau_from_probabilities(p).n == 3);
    const std::vector<double> one = {0.73};
    CHECK(calibrate_tau_from_probabilities(one, "x").tau == 0.73);
    CHECK(calibrate_tau_from_probabilities(one, "x").dataset_name == "x");
    CHECK_THROWS_AS(calibrate_tau_from_probabilities({}), ValidationError);

    const auto zero = ProbeModel::zero({0, 2});
    std::vector<ActivationRecord> rs = {rec("a", 1, {1, 2, 3}), rec("b", std::nullopt, {-4, 5, 9})};
    CHECK(calibrate_tau(zero, rs).tau == 0.5);
    CHECK_THROWS_AS(calibrate_tau(zero, std::span<const ActivationRecord>{}), ValidationError);
}

TEST_CASE("tau is the exact mean and splits routes") {
    std::mt19937_64 rng(41);
    std::normal_distribution<float> g(0.f, 1.f);
    std::uniform_int_distribution<int> sizes(2, 400);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = sizes(rng);
        std::vector<ActivationRecord> rs;
        for (int i = 0; i < n; ++i) rs.push_back(rec("r" + std::to_string(i), std::nullopt, {g(rng), g(rng)}));
        ProbeModel m = ProbeModel::zero({0, 1});
        m.weights = {g(rng) * 2.0, g(rng) * 2.0};
        m.bias = g(rng);

        const auto serial = predict_all(m, rs, Exec::serial);
        const auto parallel = predict_all(m, rs, Exec::parallel);
        CHECK(serial == parallel);

        long double sum = 0;
        for (double p : serial) sum += p;
        const double ref = static_cast<double>(sum / n);
        const auto tau = calibrate_tau(m, rs, "t", Exec::parallel);
        CHECK(std::abs(tau.tau - ref) <= 1e-12);
        CHECK(tau.n == static_cast<std::size_t>(n));

        const bool constant = std::all_of(serial.begin(), serial.end(), [&](double p) { return p == serial[0]; });
        if (constant) continue;
        int easy = 0, hard = 0;
        for (double p : serial) (route_problem(p, tau.tau).route == Route::easy ? easy : hard)++;
        CHECK(easy > 0);
        CHECK(hard > 0);
    }
}

TEST_CASE("tau does not depend on record order") {
    std::vector<double> p;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(1e-9, 1 - 1e-9);
    for (int i = 0; i < 10000; ++i) p.push_back(u(rng));
    const double a = calibrate_tau_from_probabilities(p).tau;
    std::shuffle(p.begin(), p.end(), rng);
    const double b = calibrate_tau_from_probabilities(p).tau;
    std::reverse(p.begin(), p.end());
    const double c = calibrate_tau_from_probabilities(p).tau;
    CHECK(std::abs(a - b) <= 1e-15);
    CHECK(std::abs(a - c) <= 1e-15);
}

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "actsc/dsn.hpp"
#include "actsc/error.hpp"
#include "support/test_support.hpp"

using namespace actsc;
using testsupport::rec;

namespace {

std::vector<ActivationRecord> random_records(std::mt19937_64& rng, std::size_t n, std::size_t neurons) {
    std::uniform_int_distribution<int> level(1, 5);
    std::normal_distribution<float> act(0.f, 1.f);
    std::vector<ActivationRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> a(neurons);
        for (auto& v : a) v = act(rng);
        out.push_back(rec("r" + std::to_string(i), level(rng), std::move(a)));
    }
    // guarantee every group is populated
    out[0].difficulty = 1;
    out[1].difficulty = 5;
    return out;
}

// Naive two-pass mean difference, written independently of the library.
double naive_gap(const std::vector<ActivationRecord>& rs, std::size_t n, int theta, bool lt_ge) {
    double lo = 0, hi = 0;
    int nlo = 0, nhi = 0;
    for (const auto& r : rs) {
        const bool low = lt_ge ? *r.difficulty < theta : *r.difficulty <= theta;
        if (low) {
            lo += r.activations[n];
            ++nlo;
        } else {
            hi += r.activations[n];
            ++nhi;
        }
    }
    return lo / nlo - hi / nhi;
}

} // namespace

TEST_CASE("group mean examples") {
    std::vector<ActivationRecord> rs = {rec("a", 1, {1, 3}), rec("b", 2, {3, 5})};
    CHECK(group_mean_activation(rs, [](int) { return true; }) == std::vector<double>{2, 4});
    CHECK(group_mean_activation(rs, [](int d) { return d == 2; }) == std::vector<double>{3, 5});
    CHECK_THROWS_AS(group_mean_activation(rs, [](int d) { return d == 5; }), ValidationError);
    rs.push_back(rec("u", std::nullopt, {0, 0}));
    CHECK_THROWS_AS(group_mean_activation(rs, [](int) { return true; }), ValidationError);
}

TEST_CASE("gap examples") {
    std::vector<ActivationRecord> rs = {rec("a", 1, {1.0f, 7.f}), rec("b", 1, {1.0f, 7.f}), rec("c", 5, {0.2f, 7.f}),
                                        rec("d", 5, {0.2f, 7.f})};
    CHECK(gap(rs, 0, 1, Boundary::le_gt) == doctest::Approx(0.8).epsilon(1e-6));
    CHECK(gap(rs, 1, 1, Boundary::le_gt) == 0.0);
    CHECK(gap(rs, 0, 5, Boundary::lt_ge) == doctest::Approx(0.8).epsilon(1e-6));
    // le_gt at 5 leaves the high group empty
    CHECK_THROWS_AS(gap(rs, 0, 5, Boundary::le_gt), ValidationError);
    CHECK_THROWS_AS(gap(rs, 2, 1, Boundary::le_gt), ValidationError);
}

TEST_CASE("antisymmetry: relabeling swaps groups and negates gaps exactly") {
    std::mt19937_64 rng(11);
    auto rs = random_records(rng, 30, 6);
    // map level d to 6-d: le_gt at 1 becomes lt_ge at 5 with groups exchanged
    auto flipped = rs;
    for (auto& r : flipped) r.difficulty = 6 - *r.difficulty;
    for (std::uint32_t n = 0; n < 6; ++n) {
        const double g = gap(rs, n, 1, Boundary::le_gt);
        const double f = gap(flipped, n, 5, Boundary::lt_ge);
        CHECK(f == -g);
    }
}

TEST_CASE("scale equivariance") {
    std::mt19937_64 rng(5);
    auto rs = random_records(rng, 40, 8);
    auto scaled = rs;
    for (auto& r : scaled)
        for (auto& a : r.activations) a *= 4.0f;  // power of two keeps float products exact
    const auto base = identify_dsn(rs, {});
    const auto big = identify_dsn(scaled, {});
    for (std::size_t n = 0; n < 8; ++n) {
        CHECK(big.gaps_easy[n] == doctest::Approx(4 * base.gaps_easy[n]).epsilon(1e-12));
        CHECK(big.gaps_hard[n] == doctest::Approx(4 * base.gaps_hard[n]).epsilon(1e-12));
    }
    CHECK(big.easy_set == base.easy_set);
    CHECK(big.hard_set == base.hard_set);
}

TEST_CASE("identify_dsn hand fixture") {
    std::vector<ActivationRecord> rs = {rec("a", 1, {1.0f, 0.5f, 0.5f, 0.5f}), rec("b", 1, {1.0f, 0.5f, 0.5f, 0.5f}),
                                        rec("c", 5, {0.2f, 0.5f, 0.5f, 0.5f}), rec("d", 5, {0.2f, 0.5f, 0.5f, 0.5f})};
    const auto sel = identify_dsn(rs, {});
    CHECK(std::find(sel.easy_set.begin(), sel.easy_set.end(), 0u) != sel.easy_set.end());
    CHECK(sel.union_set == std::vector<std::uint32_t>{0});

    GapConfig huge;
    huge.margin = 1e9;
    CHECK_THROWS_AS(identify_dsn(rs, huge), ValidationError);
    huge.margin = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(identify_dsn(rs, huge), ValidationError);

    GapConfig all;
    all.mode = SelectionMode::top_k;
    all.top_k = 4;
    CHECK(identify_dsn(rs, all).union_set == std::vector<std::uint32_t>{0, 1, 2, 3});
}

TEST_CASE("selection modes") {
    // neuron 0 higher on easy, neuron 1 higher on hard, neuron 2 flat
    std::vector<ActivationRecord> rs = {rec("a", 1, {2, 0, 1}), rec("b", 3, {1, 1, 1}), rec("c", 5, {0, 2, 1})};
    GapConfig sign;
    CHECK(identify_dsn(rs, sign).union_set == std::vector<std::uint32_t>{0});
    GapConfig abs;
    abs.mode = SelectionMode::abs;
    const auto a = identify_dsn(rs, abs);
    CHECK(a.union_set == std::vector<std::uint32_t>{0, 1});
    GapConfig top;
    top.mode = SelectionMode::top_k;
    top.top_k = 1;
    // |gaps| of neurons 0 and 1 tie; the lower index wins
    CHECK(identify_dsn(rs, top).union_set == std::vector<std::uint32_t>{0});
}

TEST_CASE("config validation") {
    std::vector<ActivationRecord> rs = {rec("a", 1, {1}), rec("b", 5, {0})};
    CHECK_THROWS_AS(identify_dsn(rs, {5, 1}), ConfigError);
    CHECK_THROWS_AS(identify_dsn(rs, {0, 5}), ConfigError);
    CHECK_THROWS_AS(identify_dsn(rs, {1, 6}), ConfigError);
    CHECK_THROWS_AS(identify_dsn(rs, {1, 5, -0.1}), ConfigError);
    CHECK_THROWS_AS(identify_dsn(rs, {1, 5, 0, SelectionMode::top_k, 0}), ConfigError);
    CHECK(parse_selection_mode("abs") == SelectionMode::abs);
    CHECK_THROWS_AS(parse_selection_mode("best"), ConfigError);
}

TEST_CASE("union law, determinism and serial/parallel agreement on random data") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        auto rs = random_records(rng, 25, 16);
        GapConfig cfg;
        cfg.margin = 0.1 * (trial % 4);
        cfg.mode = trial % 3 == 0 ? SelectionMode::abs : SelectionMode::sign;
        DsnSelection par, ser;
        try {
            par = identify_dsn(rs, cfg, Exec::parallel);
            ser = identify_dsn(rs, cfg, Exec::serial);
        } catch (const ValidationError&) {
            continue;  // empty union at this margin
        }
        CHECK(par == ser);
        CHECK(identify_dsn(rs, cfg) == par);
        std::set<std::uint32_t> u(par.easy_set.begin(), par.easy_set.end());
        u.insert(par.hard_set.begin(), par.hard_set.end());
        CHECK(std::vector<std::uint32_t>(u.begin(), u.end()) == par.union_set);
    }
}

TEST_CASE("brute force equivalence on small datasets") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> nrec(2, 10), nneu(1, 8);
    for (int trial = 0; trial < 200; ++trial) {
        auto rs = random_records(rng, nrec(rng), nneu(rng));
        const std::size_t neurons = rs[0].activations.size();
        const double margin = (trial % 5) * 0.2;
        const auto mode = trial % 2 ? SelectionMode::abs : SelectionMode::sign;
        std::vector<std::uint32_t> easy, hard;
        for (std::size_t n = 0; n < neurons; ++n) {
            double ge = naive_gap(rs, n, 1, false), gh = naive_gap(rs, n, 5, true);
            if (mode == SelectionMode::abs) {
                ge = std::abs(ge);
                gh = std::abs(gh);
            }
            if (ge > margin) easy.push_back(static_cast<std::uint32_t>(n));
            if (gh > margin) hard.push_back(static_cast<std::uint32_t>(n));
        }
        GapConfig cfg{1, 5, margin, mode, 1};
        if (easy.empty() && hard.empty()) {
            CHECK_THROWS_AS(identify_dsn(rs, cfg), ValidationError);
            continue;
        }
        const auto sel = identify_dsn(rs, cfg);
        CHECK(sel.easy_set == easy);
        CHECK(sel.hard_set == hard);
    }
}

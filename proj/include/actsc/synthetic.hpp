#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "actsc/activation_store.hpp"
#include "actsc/samplers.hpp"

namespace actsc {

/// Planted-signal problem generator. Planted neurons have mean
/// base + shift * (5 - d) / 4, so level 1 sits `shift` above level 5; every
/// neuron gets i.i.d. Gaussian noise. Each problem also gets a categorical
/// answer distribution whose correct-answer mass depends on its level.
struct SyntheticConfig {
    std::string name = "synthetic";
    std::string id_prefix = "p";
    std::size_t problems = 500;
    std::uint32_t neurons = 64;
    std::vector<std::uint32_t> planted = {3, 11, 17, 24, 30, 41, 50, 59};
    double shift = 1.0;
    double noise = 0.25;
    /// Relative weight of each difficulty level; levels absent here never occur.
    std::map<int, double> level_weights = {{1, 1.0}, {2, 1.0}, {3, 1.0}, {4, 1.0}, {5, 1.0}};
    /// Correct-answer probability per level. The rest is split 50/30/20 over
    /// three wrong answers.
    std::map<int, double> correct_mass = {{1, 0.90}, {2, 0.80}, {3, 0.70}, {4, 0.575}, {5, 0.45}};
    std::uint32_t mean_input_tokens = 150;
    std::uint32_t mean_output_tokens = 400;
    std::uint64_t seed = 7;
    /// Seeds the per-neuron baselines only. Two configs that share it describe
    /// the same population, so a holdout can differ in `seed` alone.
    std::uint64_t population_seed = 7;
};

struct SyntheticProblems {
    Dataset dataset;
    std::vector<SimProblemSpec> sims;
};

SyntheticProblems make_synthetic(const SyntheticConfig& config);

} // namespace actsc

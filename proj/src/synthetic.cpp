#include "actsc/synthetic.hpp"

#include <algorithm>
#include <cstdio>

#include "actsc/error.hpp"

namespace actsc {

SyntheticProblems make_synthetic(const SyntheticConfig& cfg) {
    if (cfg.neurons == 0) throw ConfigError("synthetic dataset needs at least one neuron");
    for (auto k : cfg.planted)
        if (k >= cfg.neurons) throw ConfigError("planted neuron index out of range");
    if (cfg.level_weights.empty()) throw ConfigError("no difficulty levels configured");

    std::vector<bool> is_planted(cfg.neurons, false);
    for (auto k : cfg.planted) is_planted[k] = true;
    std::vector<double> base(cfg.neurons);
    StreamRng base_rng(stream_seed(cfg.population_seed, "baseline"));
    for (auto& b : base) b = base_rng.uniform() * 2.0 - 1.0;
    StreamRng rng(stream_seed(cfg.seed, cfg.name));

    std::vector<std::pair<int, double>> levels(cfg.level_weights.begin(), cfg.level_weights.end());
    double total_weight = 0.0;
    for (const auto& [_, w] : levels) total_weight += w;

    SyntheticProblems out;
    out.dataset.manifest = {cfg.name, cfg.neurons, static_cast<std::uint32_t>(cfg.problems), "synthetic",
                            "planted-signal"};
    const int width = static_cast<int>(std::to_string(cfg.problems).size());
    for (std::size_t i = 0; i < cfg.problems; ++i) {
        double u = rng.uniform() * total_weight;
        int level = levels.back().first;
        for (const auto& [l, w] : levels) {
            if (u < w) {
                level = l;
                break;
            }
            u -= w;
        }

        char id[64];
        std::snprintf(id, sizeof id, "%s%0*zu", cfg.id_prefix.c_str(), width, i);
        ActivationRecord rec;
        rec.problem_id = id;
        rec.difficulty = level;
        rec.gold_answer = "A";
        rec.activations.resize(cfg.neurons);
        for (std::uint32_t k = 0; k < cfg.neurons; ++k) {
            double mean = base[k];
            if (is_planted[k]) mean += cfg.shift * (5.0 - level) / 4.0;
            rec.activations[k] = static_cast<float>(mean + cfg.noise * rng.normal());
        }

        auto mass_it = cfg.correct_mass.find(level);
        if (mass_it == cfg.correct_mass.end()) throw ConfigError("no correct-answer mass for level " + std::to_string(level));
        const double c = mass_it->second;
        const double rest = 1.0 - c;
        SimProblemSpec sim;
        sim.problem_id = rec.problem_id;
        sim.gold_answer = "A";
        sim.answer_distribution = {{"A", c}, {"B", rest * 0.5}, {"C", rest * 0.3}, {"D", rest - rest * 0.5 - rest * 0.3}};
        sim.mean_input_tokens = cfg.mean_input_tokens;
        sim.mean_output_tokens = cfg.mean_output_tokens;

        out.dataset.records.push_back(std::move(rec));
        out.sims.push_back(std::move(sim));
    }
    return out;
}

} // namespace actsc

// Trains a small 2x2 grid for a few episodes and prints the travel-time curve,
// next to the fixed-time baseline on the same flows.
#include "iacolight/iacolight.hpp"

#include <iostream>

int main()
{
    using namespace iacolight;

    ExperimentConfig cfg;
    cfg.network.rows = 2;
    cfg.network.cols = 2;
    cfg.flow.mean_per_bin = 60.0;
    cfg.flow.std_per_bin = 10.0;
    cfg.episodes = 5;
    cfg.steps_per_episode = 120;
    cfg.ia.alpha = 0.6;
    cfg.ia.beta = -0.2;
    cfg.seed = 7;

    const ExperimentResult trained = run_experiment(cfg);

    ExperimentConfig baseline = cfg;
    baseline.controller = Controller::FixedTime;
    const ExperimentResult fixed = run_experiment(baseline);

    std::cout << "episode,dqn_tt_s,fixed_time_tt_s\n";
    for (std::size_t e = 0; e < cfg.episodes; ++e)
        std::cout << e << ',' << format_optional(trained.metrics.episodes[e].avg_travel_time_s) << ','
                  << format_optional(fixed.metrics.episodes[e].avg_travel_time_s) << '\n';
}

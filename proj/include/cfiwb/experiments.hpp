#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfiwb/algebra.hpp"

namespace cfiwb {

struct ExperimentConfig {
    std::uint64_t seed = 1;
    SimilarityBudgets budgets;
    int threads = 1; // accepted for interface stability; execution is sequential
};

struct ExperimentResult {
    std::string name;
    bool pass = false;
    nlohmann::ordered_json report;
    std::string csv;
};

// Canned experiments, one per workbench property suite.
ExperimentResult experiment_iso_oracle(const ExperimentConfig& cfg);
ExperimentResult experiment_aut_group(const ExperimentConfig& cfg);
ExperimentResult experiment_homogeneity(const ExperimentConfig& cfg);
ExperimentResult experiment_cfi_theorem(const ExperimentConfig& cfg);
ExperimentResult experiment_im_prime2(const ExperimentConfig& cfg);
ExperimentResult experiment_prime_sweep(const ExperimentConfig& cfg);
ExperimentResult experiment_cfi_problem(const ExperimentConfig& cfg);

// Larger suites used by the acceptance tests.
ExperimentResult experiment_im_soundness(const ExperimentConfig& cfg);
ExperimentResult experiment_algebra_oracles(const ExperimentConfig& cfg);

std::vector<std::string> experiment_names();
ExperimentResult run_experiment(const std::string& name, const ExperimentConfig& cfg);

} // namespace cfiwb

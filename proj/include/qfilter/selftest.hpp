#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qfilter/simulate.hpp"

namespace qfilter::selftest {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double threshold = 0.0;
    std::string detail;
};

/// Worst Chapman-Kolmogorov residual over random grid-aligned splits.
double max_chapman_kolmogorov_residual(const FilterSynthesis& synth,
                                       const ChannelModel& ch, int n_splits,
                                       std::uint64_t seed);

/// Smallest Gram eigenvalue over random (interval, start point, frequency
/// set) draws on one synthesized filter.
double min_bochner_gram_eigenvalue(const FilterSynthesis& synth, const ChannelModel& ch,
                                   int n_draws, std::uint64_t seed);

/// Runs the full verification suite. Deterministic: repeated runs produce
/// identical results.
std::vector<CriterionResult> run_all();

bool all_passed(const std::vector<CriterionResult>& results);

} // namespace qfilter::selftest

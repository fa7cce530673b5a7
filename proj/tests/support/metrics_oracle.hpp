#pragma once

// Brute-force AUC oracle shared by the unit tests and the acceptance gate.

#include <cstdint>
#include <vector>

namespace testsupport {

// The probabilistic definition: fraction of (positive, negative) pairs the
// positive outscores, ties worth half.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& actual) {
    double wins = 0.0;
    std::int64_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (actual[i] == 0) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (actual[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

}  // namespace testsupport

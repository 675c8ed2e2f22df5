#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "traceauth/observation.hpp"

namespace traceauth {

struct SMModel {
    std::vector<int> training_symbols; // non-empty
};

inline SMModel train_sm(const ObservationSequence& seq) {
    SMModel model{seq.symbol_ids()};
    if (model.training_symbols.empty())
        throw std::invalid_argument("empty training sequence");
    return model;
}

// Single left-to-right scan of the training symbols, advancing a cursor
// into the test window on every symbol match; a full traversal counts one
// complete match and resets the cursor. Match ratio
//   r = (complete_matches * |window| + cursor) / (|training| + |window|),
// clamped to [0, 1].
inline double sm_score(const SMModel& model, std::span<const int> test_window) {
    if (test_window.empty())
        throw std::invalid_argument("empty test window");
    std::size_t complete = 0;
    std::size_t cursor = 0;
    for (int symbol : model.training_symbols) {
        if (symbol != test_window[cursor]) continue;
        if (++cursor == test_window.size()) {
            cursor = 0;
            ++complete;
        }
    }
    const double r =
        (static_cast<double>(complete) * static_cast<double>(test_window.size()) +
         static_cast<double>(cursor)) /
        static_cast<double>(model.training_symbols.size() + test_window.size());
    return std::clamp(r, 0.0, 1.0);
}

} // namespace traceauth

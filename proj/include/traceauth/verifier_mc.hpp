#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "traceauth/observation.hpp"

namespace traceauth {

// First-order Markov chain over the observation vocabulary with add-delta
// smoothing on priors and transition rows.
struct MCModel {
    int vocab_size = 0;
    double delta = 1e-3;
    std::vector<double> prior;       // V, sums to 1
    std::vector<double> transitions; // V x V row-major, rows sum to 1

    double transition(int from, int to) const {
        return transitions[static_cast<std::size_t>(from) * vocab_size + to];
    }
};

// Priors count day-initial symbols: the first symbol of the sequence and
// each symbol immediately following a Null (the per-day terminator).
inline MCModel train_mc(const ObservationSequence& seq, int vocab_size, double delta) {
    if (seq.symbols.size() < 2)
        throw std::invalid_argument("training sequence shorter than 2 symbols");
    if (delta <= 0.0)
        throw std::invalid_argument("delta must be positive");

    MCModel model;
    model.vocab_size = vocab_size;
    model.delta = delta;
    const int V = vocab_size;
    const int null_sym = V - 1; // Null is the trailing symbol by convention

    std::vector<double> initial(V, 0.0);
    std::vector<double> bigram(static_cast<std::size_t>(V) * V, 0.0);
    const auto ids = seq.symbol_ids();
    for (int s : ids)
        if (s < 0 || s >= V)
            throw std::invalid_argument("symbol out of vocabulary");

    initial[ids[0]] += 1.0;
    for (std::size_t t = 1; t < ids.size(); ++t) {
        bigram[static_cast<std::size_t>(ids[t - 1]) * V + ids[t]] += 1.0;
        if (ids[t - 1] == null_sym) initial[ids[t]] += 1.0;
    }

    double init_total = 0.0;
    for (double c : initial) init_total += c;
    model.prior.resize(V);
    for (int i = 0; i < V; ++i)
        model.prior[i] = (initial[i] + delta) / (init_total + V * delta);

    model.transitions.resize(static_cast<std::size_t>(V) * V);
    for (int i = 0; i < V; ++i) {
        double row_total = 0.0;
        for (int j = 0; j < V; ++j) row_total += bigram[static_cast<std::size_t>(i) * V + j];
        for (int j = 0; j < V; ++j)
            model.transitions[static_cast<std::size_t>(i) * V + j] =
                (bigram[static_cast<std::size_t>(i) * V + j] + delta) / (row_total + V * delta);
    }
    return model;
}

// log rho_{w0} + sum_k log t_{w_{k-1}, w_k}
inline double mc_score(const MCModel& model, std::span<const int> window) {
    if (window.empty())
        throw std::invalid_argument("empty test window");
    for (int s : window)
        if (s < 0 || s >= model.vocab_size)
            throw std::invalid_argument("symbol out of vocabulary");
    double ll = std::log(model.prior[window[0]]);
    for (std::size_t k = 1; k < window.size(); ++k)
        ll += std::log(model.transition(window[k - 1], window[k]));
    return ll;
}

} // namespace traceauth

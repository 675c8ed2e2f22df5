#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "traceauth/observation.hpp"
#include "traceauth/rng.hpp"

namespace traceauth {

// How the emission update treats vocabulary symbols absent from the
// training window: `marginal` takes the product of the (location,timezone)
// and (location,daytype) posterior-mass ratios; `laplace` assigns the bare
// smoothing constant.
enum class SmoothingMode { marginal, laplace };

inline const char* to_string(SmoothingMode m) {
    return m == SmoothingMode::marginal ? "marginal" : "laplace";
}

struct MSHMMModel {
    int hidden_states = 10; // H
    int vocab_size = 0;     // V
    std::vector<double> pi; // H
    std::vector<double> a;  // H x H row-major, rows sum to 1
    std::vector<double> b;  // H x V row-major, rows sum to 1
    SmoothingMode mode = SmoothingMode::marginal;
    double delta = 1e-3;

    double trans(int i, int j) const { return a[static_cast<std::size_t>(i) * hidden_states + j]; }
    double emit(int i, int symbol) const { return b[static_cast<std::size_t>(i) * vocab_size + symbol]; }
};

struct ForwardResult {
    double log_likelihood = 0.0;
    std::vector<double> alpha; // T x H, each row normalized to sum 1
    std::vector<double> scale; // T, per-step normalizers; LL = sum of logs
};

namespace detail {

inline void check_window(const MSHMMModel& model, std::span<const int> window) {
    if (window.empty())
        throw std::invalid_argument("empty test window");
    for (int s : window)
        if (s < 0 || s >= model.vocab_size)
            throw std::invalid_argument("symbol out of vocabulary");
}

} // namespace detail

// Scaled forward recursion. exp(log_likelihood) is the total probability
// of the window summed over all hidden paths.
inline ForwardResult forward(const MSHMMModel& model, std::span<const int> window) {
    detail::check_window(model, window);
    const int H = model.hidden_states;
    const std::size_t T = window.size();

    ForwardResult r;
    r.alpha.assign(T * H, 0.0);
    r.scale.assign(T, 0.0);

    double norm = 0.0;
    for (int i = 0; i < H; ++i) {
        const double v = model.pi[i] * model.emit(i, window[0]);
        r.alpha[i] = v;
        norm += v;
    }
    r.scale[0] = norm;
    if (norm <= 0.0) {
        r.log_likelihood = -std::numeric_limits<double>::infinity();
        return r;
    }
    for (int i = 0; i < H; ++i) r.alpha[i] /= norm;
    r.log_likelihood = std::log(norm);

    for (std::size_t t = 1; t < T; ++t) {
        double* cur = &r.alpha[t * H];
        const double* prev = &r.alpha[(t - 1) * H];
        norm = 0.0;
        for (int i = 0; i < H; ++i) {
            double acc = 0.0;
            for (int j = 0; j < H; ++j) acc += prev[j] * model.trans(j, i);
            cur[i] = acc * model.emit(i, window[t]);
            norm += cur[i];
        }
        r.scale[t] = norm;
        if (norm <= 0.0) {
            r.log_likelihood = -std::numeric_limits<double>::infinity();
            return r;
        }
        for (int i = 0; i < H; ++i) cur[i] /= norm;
        r.log_likelihood += std::log(norm);
    }
    return r;
}

// Scaled backward recursion sharing the forward pass's normalizers, so
// sum_i alpha_i(t) * beta_i(t) == 1 at every t.
inline std::vector<double> backward(const MSHMMModel& model, std::span<const int> window,
                                    std::span<const double> scale) {
    detail::check_window(model, window);
    const int H = model.hidden_states;
    const std::size_t T = window.size();

    std::vector<double> beta(T * H, 0.0);
    for (int i = 0; i < H; ++i) beta[(T - 1) * H + i] = 1.0;
    for (std::size_t t = T - 1; t-- > 0;) {
        const double* next = &beta[(t + 1) * H];
        double* cur = &beta[t * H];
        const double c = scale[t + 1];
        for (int i = 0; i < H; ++i) {
            double acc = 0.0;
            for (int j = 0; j < H; ++j)
                acc += model.trans(i, j) * model.emit(j, window[t + 1]) * next[j];
            cur[i] = c > 0.0 ? acc / c : 0.0;
        }
    }
    return beta;
}

inline std::vector<double> backward(const MSHMMModel& model, std::span<const int> window) {
    return backward(model, window, forward(model, window).scale);
}

struct TrellisState {
    std::size_t T = 0;
    int H = 0;
    double log_likelihood = 0.0;
    std::vector<double> alpha; // T x H
    std::vector<double> beta;  // T x H
    std::vector<double> gamma; // T x H, rows sum to 1
    std::vector<double> xi;    // (T-1) x H x H, slices sum to 1

    double gamma_at(std::size_t t, int i) const { return gamma[t * H + i]; }
    double xi_at(std::size_t t, int i, int j) const {
        return xi[(t * H + i) * H + j];
    }
};

inline TrellisState e_step(const MSHMMModel& model, std::span<const int> window) {
    const int H = model.hidden_states;
    const std::size_t T = window.size();

    ForwardResult f = forward(model, window);
    std::vector<double> beta = backward(model, window, f.scale);

    TrellisState s;
    s.T = T;
    s.H = H;
    s.log_likelihood = f.log_likelihood;
    s.gamma.assign(T * H, 0.0);
    s.xi.assign(T > 1 ? (T - 1) * H * H : 0, 0.0);

    for (std::size_t t = 0; t < T; ++t) {
        double norm = 0.0;
        for (int i = 0; i < H; ++i) {
            const double v = f.alpha[t * H + i] * beta[t * H + i];
            s.gamma[t * H + i] = v;
            norm += v;
        }
        if (norm > 0.0)
            for (int i = 0; i < H; ++i) s.gamma[t * H + i] /= norm;
    }

    for (std::size_t t = 0; t + 1 < T; ++t) {
        double norm = 0.0;
        for (int i = 0; i < H; ++i) {
            for (int j = 0; j < H; ++j) {
                const double v = f.alpha[t * H + i] * model.trans(i, j) *
                                 model.emit(j, window[t + 1]) * beta[(t + 1) * H + j];
                s.xi[(t * H + i) * H + j] = v;
                norm += v;
            }
        }
        if (norm > 0.0)
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < H; ++j) s.xi[(t * H + i) * H + j] /= norm;
    }

    s.alpha = std::move(f.alpha);
    s.beta = std::move(beta);
    return s;
}

// Pre-normalization emission estimate, H x V. Symbols present in the
// window take the delta-smoothed expected-count ratio; absent symbols take
// the marginal product or the bare Laplace constant depending on mode.
// Null has no decomposition, so an absent Null always takes the Laplace
// branch.
inline std::vector<double> emission_estimate(const TrellisState& trellis,
                                             std::span<const int> window,
                                             const Vocabulary& vocab,
                                             SmoothingMode mode, double delta) {
    const int H = trellis.H;
    const int V = vocab.size();
    const std::size_t T = trellis.T;
    const int L = vocab.label_count();

    std::vector<int> seen(V, 0);
    for (int s : window) ++seen[s];

    // Per hidden state: posterior mass totals, per-symbol mass, and the
    // (label,tz)/(label,day) marginal masses used by the unseen branch.
    std::vector<double> mass(H, 0.0);
    std::vector<double> sym_mass(static_cast<std::size_t>(H) * V, 0.0);
    std::vector<double> ltz_mass(static_cast<std::size_t>(H) * L * 3, 0.0);
    std::vector<double> lday_mass(static_cast<std::size_t>(H) * L * 2, 0.0);

    for (std::size_t t = 0; t < T; ++t) {
        const int sym = window[t];
        const Vocabulary::Parts p = vocab.decode(sym);
        for (int i = 0; i < H; ++i) {
            const double g = trellis.gamma_at(t, i);
            mass[i] += g;
            sym_mass[static_cast<std::size_t>(i) * V + sym] += g;
            if (!p.is_null) {
                ltz_mass[(static_cast<std::size_t>(i) * L + p.label) * 3 + p.tz] += g;
                lday_mass[(static_cast<std::size_t>(i) * L + p.label) * 2 + p.day] += g;
            }
        }
    }

    std::vector<double> est(static_cast<std::size_t>(H) * V, 0.0);
    for (int i = 0; i < H; ++i) {
        const double denom = mass[i] + static_cast<double>(T) * delta;
        for (int k = 0; k < V; ++k) {
            double value;
            if (seen[k] > 0) {
                value = (sym_mass[static_cast<std::size_t>(i) * V + k] + delta) / denom;
            } else {
                const Vocabulary::Parts p = vocab.decode(k);
                if (mode == SmoothingMode::marginal && !p.is_null) {
                    const double m_tz =
                        ltz_mass[(static_cast<std::size_t>(i) * L + p.label) * 3 + p.tz];
                    const double m_day =
                        lday_mass[(static_cast<std::size_t>(i) * L + p.label) * 2 + p.day];
                    value = ((m_tz + delta) / denom) * ((m_day + delta) / denom);
                } else {
                    value = delta / denom;
                }
            }
            est[static_cast<std::size_t>(i) * V + k] = value;
        }
    }
    return est;
}

struct HMMParams {
    std::vector<double> pi;
    std::vector<double> a;
    std::vector<double> b;
};

namespace detail {

inline void normalize_rows(std::vector<double>& m, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        double total = 0.0;
        for (int c = 0; c < cols; ++c) total += m[static_cast<std::size_t>(r) * cols + c];
        if (total > 0.0) {
            for (int c = 0; c < cols; ++c) m[static_cast<std::size_t>(r) * cols + c] /= total;
        } else {
            for (int c = 0; c < cols; ++c)
                m[static_cast<std::size_t>(r) * cols + c] = 1.0 / cols;
        }
    }
}

} // namespace detail

inline HMMParams m_step(const TrellisState& trellis, std::span<const int> window,
                        const Vocabulary& vocab, SmoothingMode mode, double delta) {
    const int H = trellis.H;
    const std::size_t T = trellis.T;

    HMMParams p;
    p.pi.resize(H);
    for (int i = 0; i < H; ++i) p.pi[i] = trellis.gamma_at(0, i);
    detail::normalize_rows(p.pi, 1, H);

    p.a.assign(static_cast<std::size_t>(H) * H, 0.0);
    for (int i = 0; i < H; ++i) {
        double denom = 0.0;
        for (std::size_t t = 0; t + 1 < T; ++t) denom += trellis.gamma_at(t, i);
        for (int j = 0; j < H; ++j) {
            double num = 0.0;
            for (std::size_t t = 0; t + 1 < T; ++t) num += trellis.xi_at(t, i, j);
            p.a[static_cast<std::size_t>(i) * H + j] = denom > 0.0 ? num / denom : 0.0;
        }
    }
    detail::normalize_rows(p.a, H, H);

    p.b = emission_estimate(trellis, window, vocab, mode, delta);
    detail::normalize_rows(p.b, H, vocab.size());
    return p;
}

struct TrainOptions {
    int hidden_states = 10;
    SmoothingMode mode = SmoothingMode::marginal;
    double delta = 1e-3;
    int max_iters = 200;
    double tol = 1e-6; // relative log-likelihood change
    std::uint64_t seed = 1;
    std::ostream* progress = nullptr; // per-iteration log-likelihood lines
    // Called after each parameter update with the pre-update likelihood.
    std::function<void(int iter, double log_likelihood, const MSHMMModel&)> on_iteration;
};

inline MSHMMModel init_mshmm(int hidden_states, int vocab_size, SmoothingMode mode,
                             double delta, std::uint64_t seed) {
    MSHMMModel model;
    model.hidden_states = hidden_states;
    model.vocab_size = vocab_size;
    model.mode = mode;
    model.delta = delta;
    Rng rng(seed);
    model.pi = rng.dirichlet(hidden_states);
    model.a.reserve(static_cast<std::size_t>(hidden_states) * hidden_states);
    for (int i = 0; i < hidden_states; ++i) {
        auto row = rng.dirichlet(hidden_states);
        model.a.insert(model.a.end(), row.begin(), row.end());
    }
    model.b.reserve(static_cast<std::size_t>(hidden_states) * vocab_size);
    for (int i = 0; i < hidden_states; ++i) {
        auto row = rng.dirichlet(vocab_size);
        model.b.insert(model.b.end(), row.begin(), row.end());
    }
    return model;
}

// Iterated e_step/m_step from a seeded random start, until the relative
// log-likelihood change drops below tol or max_iters is reached.
inline MSHMMModel train_mshmm_window(std::span<const int> window, int vocab_size,
                                     const TrainOptions& opt = {}) {
    if (window.size() < 2)
        throw std::invalid_argument("training sequence shorter than 2 symbols");
    if (vocab_size < 13 || (vocab_size - 1) % 12 != 0)
        throw std::invalid_argument("vocabulary size must be 6*(2N+2)+1");
    for (int s : window)
        if (s < 0 || s >= vocab_size)
            throw std::invalid_argument("symbol out of vocabulary");
    const Vocabulary vocab{((vocab_size - 1) / 6 - 2) / 2};

    MSHMMModel model = init_mshmm(opt.hidden_states, vocab_size, opt.mode, opt.delta, opt.seed);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < opt.max_iters; ++iter) {
        TrellisState trellis = e_step(model, window);
        const double ll = trellis.log_likelihood;
        if (opt.progress)
            *opt.progress << "iter " << iter << " loglik " << ll << '\n';

        HMMParams params = m_step(trellis, window, vocab, opt.mode, opt.delta);
        model.pi = std::move(params.pi);
        model.a = std::move(params.a);
        model.b = std::move(params.b);

        if (opt.on_iteration) opt.on_iteration(iter, ll, model);
        if (iter > 0 && std::abs(ll - prev_ll) < opt.tol * std::max(1.0, std::abs(prev_ll)))
            break;
        prev_ll = ll;
    }
    return model;
}

inline MSHMMModel train_mshmm(const ObservationSequence& seq, int vocab_size,
                              const TrainOptions& opt = {}) {
    return train_mshmm_window(seq.symbol_ids(), vocab_size, opt);
}

// Forward log-likelihood per symbol, comparable across window lengths.
inline double mshmm_score(const MSHMMModel& model, std::span<const int> window) {
    return forward(model, window).log_likelihood / static_cast<double>(window.size());
}

} // namespace traceauth

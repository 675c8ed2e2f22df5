#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <future>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "traceauth/clustering.hpp"
#include "traceauth/format.hpp"
#include "traceauth/geo.hpp"
#include "traceauth/observation.hpp"
#include "traceauth/rng.hpp"
#include "traceauth/time.hpp"
#include "traceauth/verifier_mc.hpp"
#include "traceauth/verifier_mshmm.hpp"
#include "traceauth/verifier_sm.hpp"

namespace traceauth {

// ---------------------------------------------------------------------------
// Windowing
// ---------------------------------------------------------------------------

// Overlapping windows of exactly n symbols at the given stride; a trailing
// remainder shorter than n is dropped. n larger than the sequence yields an
// empty list.
inline std::vector<std::vector<int>> make_windows(std::span<const int> symbols, int n,
                                                  int stride = 1) {
    if (n < 1)
        throw std::invalid_argument("window length must be at least 1");
    if (stride < 1)
        throw std::invalid_argument("stride must be at least 1");
    std::vector<std::vector<int>> out;
    if (symbols.size() < static_cast<std::size_t>(n))
        return out;
    for (std::size_t start = 0; start + static_cast<std::size_t>(n) <= symbols.size();
         start += static_cast<std::size_t>(stride))
        out.emplace_back(symbols.begin() + start, symbols.begin() + start + n);
    return out;
}

inline std::vector<std::vector<int>> make_windows(const ObservationSequence& seq, int n,
                                                  int stride = 1) {
    const std::vector<int> ids = seq.symbol_ids();
    return make_windows(std::span<const int>(ids), n, stride);
}

// ---------------------------------------------------------------------------
// Train/test splits
// ---------------------------------------------------------------------------

inline std::pair<Trace, Trace> chronological_split(const Trace& trace, double fraction = 0.7) {
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw std::invalid_argument("fraction must be in [0, 1]");
    const std::size_t cut = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(trace.points.size())));
    Trace train;
    Trace test;
    train.user_id = trace.user_id;
    test.user_id = trace.user_id;
    train.points.assign(trace.points.begin(), trace.points.begin() + cut);
    test.points.assign(trace.points.begin() + cut, trace.points.end());
    if (!train.points.empty()) train.sessions = {{0, train.points.size()}};
    if (!test.points.empty()) test.sessions = {{0, test.points.size()}};
    return {std::move(train), std::move(test)};
}

inline std::pair<ObservationSequence, ObservationSequence>
chronological_split(const ObservationSequence& seq, double fraction = 0.7) {
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw std::invalid_argument("fraction must be in [0, 1]");
    const std::size_t cut = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(seq.symbols.size())));
    ObservationSequence train;
    ObservationSequence test;
    train.user_id = seq.user_id;
    test.user_id = seq.user_id;
    train.symbols.assign(seq.symbols.begin(), seq.symbols.begin() + cut);
    test.symbols.assign(seq.symbols.begin() + cut, seq.symbols.end());
    return {std::move(train), std::move(test)};
}

namespace detail {

inline void check_weekly_args(int train_weeks, int eval_week) {
    if (train_weeks < 1)
        throw std::invalid_argument("train_weeks must be at least 1");
    if (eval_week <= train_weeks)
        throw std::invalid_argument("eval_week must exceed train_weeks");
}

} // namespace detail

// Calendar-week partition anchored at the user's first observation: week w
// (1-based) covers [first + (w-1)*7d, first + w*7d). Train keeps weeks
// [eval_week - train_weeks, eval_week), test keeps week eval_week.
inline std::pair<Trace, Trace> weekly_split(const Trace& trace, int train_weeks, int eval_week) {
    detail::check_weekly_args(train_weeks, eval_week);
    Trace train;
    Trace test;
    train.user_id = trace.user_id;
    test.user_id = trace.user_id;
    if (trace.points.empty())
        return {std::move(train), std::move(test)};
    const CivilSeconds first = trace.points.front().timestamp;
    const CivilSeconds train_begin =
        first + static_cast<CivilSeconds>(eval_week - train_weeks - 1) * kSecondsPerWeek;
    const CivilSeconds train_end =
        first + static_cast<CivilSeconds>(eval_week - 1) * kSecondsPerWeek;
    const CivilSeconds test_end = first + static_cast<CivilSeconds>(eval_week) * kSecondsPerWeek;
    for (const GeoPoint& p : trace.points) {
        if (p.timestamp >= train_begin && p.timestamp < train_end)
            train.points.push_back(p);
        else if (p.timestamp >= train_end && p.timestamp < test_end)
            test.points.push_back(p);
    }
    if (!train.points.empty()) train.sessions = {{0, train.points.size()}};
    if (!test.points.empty()) test.sessions = {{0, test.points.size()}};
    return {std::move(train), std::move(test)};
}

inline std::pair<ObservationSequence, ObservationSequence>
weekly_split(const ObservationSequence& seq, int train_weeks, int eval_week) {
    detail::check_weekly_args(train_weeks, eval_week);
    ObservationSequence train;
    ObservationSequence test;
    train.user_id = seq.user_id;
    test.user_id = seq.user_id;
    if (seq.symbols.empty())
        return {std::move(train), std::move(test)};
    const CivilSeconds first = seq.symbols.front().timestamp;
    const CivilSeconds train_begin =
        first + static_cast<CivilSeconds>(eval_week - train_weeks - 1) * kSecondsPerWeek;
    const CivilSeconds train_end =
        first + static_cast<CivilSeconds>(eval_week - 1) * kSecondsPerWeek;
    const CivilSeconds test_end = first + static_cast<CivilSeconds>(eval_week) * kSecondsPerWeek;
    for (const Observation& o : seq.symbols) {
        if (o.timestamp >= train_begin && o.timestamp < train_end)
            train.symbols.push_back(o);
        else if (o.timestamp >= train_end && o.timestamp < test_end)
            test.symbols.push_back(o);
    }
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// EER
// ---------------------------------------------------------------------------

enum class Method { sm, mc, mshmm, hmm_lap };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::sm: return "sm";
        case Method::mc: return "mc";
        case Method::mshmm: return "mshmm";
        case Method::hmm_lap: return "hmm-lap";
    }
    return "unknown";
}

inline Method method_from_name(std::string_view name) {
    if (name == "sm") return Method::sm;
    if (name == "mc") return Method::mc;
    if (name == "mshmm") return Method::mshmm;
    if (name == "hmm-lap") return Method::hmm_lap;
    throw std::invalid_argument("unknown method: " + std::string(name));
}

struct ScoreSet {
    std::vector<double> genuine;
    std::vector<double> impostor;
    Method method = Method::mshmm;
    int n = 0;
    double r_max_m = 0.0;
    int hidden_states = 0;
    SmoothingMode mode = SmoothingMode::marginal;
    double delta = 0.0;
};

struct RocPoint {
    double threshold = 0.0;
    double far = 0.0; // fraction of impostor scores >= threshold
    double frr = 0.0; // fraction of genuine scores < threshold
};

struct EerResult {
    double eer = 0.0;
    double threshold = 0.0;
    std::vector<RocPoint> roc;
};

// Threshold sweep over the merged score support plus one sentinel above the
// maximum. The EER is read at the FAR/FRR crossing, linearly interpolated
// between adjacent thresholds when the crossing falls between them. The
// interpolation parameter depends only on the FAR/FRR step values, never on
// threshold magnitudes, so the EER is exactly invariant under strictly
// monotone score transformations.
inline EerResult compute_eer(std::span<const double> genuine, std::span<const double> impostor) {
    if (genuine.empty() || impostor.empty())
        throw std::invalid_argument("insufficient scores");

    std::vector<double> gen(genuine.begin(), genuine.end());
    std::vector<double> imp(impostor.begin(), impostor.end());
    std::sort(gen.begin(), gen.end());
    std::sort(imp.begin(), imp.end());

    std::vector<double> thresholds;
    thresholds.reserve(gen.size() + imp.size() + 1);
    std::merge(gen.begin(), gen.end(), imp.begin(), imp.end(), std::back_inserter(thresholds));
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    thresholds.push_back(
        std::nextafter(thresholds.back(), std::numeric_limits<double>::infinity()));

    EerResult r;
    r.roc.reserve(thresholds.size());
    const double ng = static_cast<double>(gen.size());
    const double ni = static_cast<double>(imp.size());
    for (double th : thresholds) {
        const auto below_g = std::lower_bound(gen.begin(), gen.end(), th) - gen.begin();
        const auto below_i = std::lower_bound(imp.begin(), imp.end(), th) - imp.begin();
        RocPoint p;
        p.threshold = th;
        p.frr = static_cast<double>(below_g) / ng;
        p.far = static_cast<double>(imp.size() - static_cast<std::size_t>(below_i)) / ni;
        r.roc.push_back(p);
    }

    for (std::size_t k = 0; k < r.roc.size(); ++k) {
        const double d1 = r.roc[k].far - r.roc[k].frr;
        if (d1 == 0.0) {
            r.eer = 0.5 * (r.roc[k].far + r.roc[k].frr);
            r.threshold = r.roc[k].threshold;
            return r;
        }
        if (d1 > 0.0 && k + 1 < r.roc.size()) {
            const double d2 = r.roc[k + 1].far - r.roc[k + 1].frr;
            if (d2 < 0.0) {
                const double t = d1 / (d1 - d2);
                r.eer = r.roc[k].far + t * (r.roc[k + 1].far - r.roc[k].far);
                r.threshold =
                    r.roc[k].threshold + t * (r.roc[k + 1].threshold - r.roc[k].threshold);
                return r;
            }
        }
    }

    // FAR - FRR runs from +1 at the lowest threshold to -1 at the sentinel,
    // so a crossing always exists; this is unreachable.
    r.eer = 0.5;
    r.threshold = thresholds.front();
    return r;
}

inline EerResult compute_eer(const ScoreSet& scores) {
    return compute_eer(std::span<const double>(scores.genuine),
                       std::span<const double>(scores.impostor));
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

enum class SplitKind { chronological, weekly };

struct BenchmarkConfig {
    std::vector<Method> methods{Method::sm, Method::mc, Method::mshmm, Method::hmm_lap};
    std::vector<int> window_lengths{16};
    int stride = 1;
    double r_max_m = 20.0;
    int min_pts = 4;
    CivilSeconds resample_interval_s = 180;
    CivilSeconds max_gap_s = 3600;
    int hidden_states = 10;
    double delta = 1e-3;
    int max_iters = 200;
    double tol = 1e-6;
    std::uint64_t seed = 1;
    SplitKind split = SplitKind::chronological;
    double train_fraction = 0.7;
    int train_weeks = 5;
    int eval_week = 6;
    int jobs = 0; // 0 = hardware concurrency
};

struct EvalCell {
    std::string user;
    Method method = Method::mshmm;
    int n = 0;
    double eer = 0.0;
    double threshold = 0.0;
    std::vector<RocPoint> roc;
    std::size_t genuine_count = 0;
    std::size_t impostor_count = 0;
};

struct EvalReport {
    std::vector<EvalCell> cells;  // per enrolled user
    std::vector<EvalCell> pooled; // user "pooled": mean of per-user EERs
    BenchmarkConfig config;
    std::vector<std::string> warnings;
};

namespace detail {

struct UserData {
    std::string id;
    Trace train;
    Trace test;
    bool usable = false;
};

struct UserResult {
    std::vector<EvalCell> cells;
    std::vector<std::string> warnings;
};

inline UserResult evaluate_user(std::size_t u, const std::vector<UserData>& users,
                                const BenchmarkConfig& cfg) {
    UserResult out;
    const UserData& me = users[u];

    ClusterModel cluster_model;
    try {
        cluster_model = build_cluster_model(me.id, me.train.points, cfg.r_max_m, cfg.min_pts);
    } catch (const std::exception& e) {
        out.warnings.push_back("user " + me.id + " excluded: " + e.what());
        return out;
    }
    const Vocabulary vocab{static_cast<int>(cluster_model.clusters.size())};

    const ObservationSequence train_seq = build_sequence(me.train, cluster_model);
    if (train_seq.symbols.size() < 2) {
        out.warnings.push_back("user " + me.id + " excluded: training sequence too short");
        return out;
    }

    const std::vector<int> genuine_ids = build_sequence(me.test, cluster_model).symbol_ids();
    std::vector<std::vector<int>> impostor_ids;
    for (std::size_t v = 0; v < users.size(); ++v) {
        if (v == u || users[v].test.points.empty()) continue;
        impostor_ids.push_back(build_sequence(users[v].test, cluster_model).symbol_ids());
    }

    const std::uint64_t user_seed = splitmix64(cfg.seed + 0x9E3779B97F4A7C15ULL * (u + 1));

    std::optional<SMModel> sm_model;
    std::optional<MCModel> mc_model;
    std::optional<MSHMMModel> marginal_model;
    std::optional<MSHMMModel> laplace_model;
    for (Method m : cfg.methods) {
        try {
            switch (m) {
                case Method::sm:
                    sm_model = train_sm(train_seq);
                    break;
                case Method::mc:
                    mc_model = train_mc(train_seq, vocab.size(), cfg.delta);
                    break;
                case Method::mshmm:
                case Method::hmm_lap: {
                    TrainOptions opt;
                    opt.hidden_states = cfg.hidden_states;
                    opt.mode =
                        m == Method::mshmm ? SmoothingMode::marginal : SmoothingMode::laplace;
                    opt.delta = cfg.delta;
                    opt.max_iters = cfg.max_iters;
                    opt.tol = cfg.tol;
                    opt.seed = user_seed;
                    (m == Method::mshmm ? marginal_model : laplace_model) =
                        train_mshmm(train_seq, vocab.size(), opt);
                    break;
                }
            }
        } catch (const std::exception& e) {
            out.warnings.push_back("user " + me.id + " method " + method_name(m) +
                                   ": training failed: " + e.what());
        }
    }

    auto score_window = [&](Method m, std::span<const int> window) -> double {
        switch (m) {
            case Method::sm: return sm_score(*sm_model, window);
            case Method::mc: return mc_score(*mc_model, window);
            case Method::mshmm: return mshmm_score(*marginal_model, window);
            case Method::hmm_lap: return mshmm_score(*laplace_model, window);
        }
        return 0.0;
    };
    auto has_model = [&](Method m) {
        switch (m) {
            case Method::sm: return sm_model.has_value();
            case Method::mc: return mc_model.has_value();
            case Method::mshmm: return marginal_model.has_value();
            case Method::hmm_lap: return laplace_model.has_value();
        }
        return false;
    };

    for (Method m : cfg.methods) {
        if (!has_model(m)) continue;
        for (int n : cfg.window_lengths) {
            ScoreSet scores;
            scores.method = m;
            scores.n = n;
            scores.r_max_m = cfg.r_max_m;
            scores.hidden_states = cfg.hidden_states;
            scores.delta = cfg.delta;
            for (const auto& w : make_windows(std::span<const int>(genuine_ids), n, cfg.stride))
                scores.genuine.push_back(score_window(m, w));
            for (const auto& ids : impostor_ids)
                for (const auto& w : make_windows(std::span<const int>(ids), n, cfg.stride))
                    scores.impostor.push_back(score_window(m, w));
            if (scores.genuine.empty() || scores.impostor.empty()) {
                out.warnings.push_back("user " + me.id + " method " + method_name(m) + " n=" +
                                       std::to_string(n) + ": insufficient scores, cell skipped");
                continue;
            }
            const EerResult eer = compute_eer(scores);
            EvalCell cell;
            cell.user = me.id;
            cell.method = m;
            cell.n = n;
            cell.eer = eer.eer;
            cell.threshold = eer.threshold;
            cell.roc = eer.roc;
            cell.genuine_count = scores.genuine.size();
            cell.impostor_count = scores.impostor.size();
            out.cells.push_back(std::move(cell));
        }
    }
    return out;
}

} // namespace detail

// Enrolls every user in turn: trains on their split, scores their own test
// windows (genuine) and every other user's test windows re-encoded with the
// enrolled user's clusters (impostor). Deterministic for a fixed corpus and
// seed regardless of the worker count.
inline EvalReport run_benchmark(const std::vector<Trace>& corpus, const BenchmarkConfig& cfg) {
    if (corpus.size() < 2)
        throw std::invalid_argument("need >= 2 users for impostor scores");
    if (cfg.methods.empty())
        throw std::invalid_argument("no methods selected");
    if (cfg.window_lengths.empty())
        throw std::invalid_argument("no window lengths selected");

    EvalReport report;
    report.config = cfg;

    std::vector<detail::UserData> users(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        users[i].id = corpus[i].user_id;
        const Trace resampled = resample(corpus[i], cfg.resample_interval_s, cfg.max_gap_s);
        auto [train, test] = cfg.split == SplitKind::chronological
                                 ? chronological_split(resampled, cfg.train_fraction)
                                 : weekly_split(resampled, cfg.train_weeks, cfg.eval_week);
        users[i].train = std::move(train);
        users[i].test = std::move(test);
        if (users[i].train.points.empty())
            report.warnings.push_back("user " + users[i].id + " excluded: empty train portion");
        else if (users[i].test.points.empty())
            report.warnings.push_back("user " + users[i].id + " excluded: empty test portion");
        else
            users[i].usable = true;
    }

    const std::size_t jobs = cfg.jobs > 0
                                 ? static_cast<std::size_t>(cfg.jobs)
                                 : std::max<std::size_t>(1, std::thread::hardware_concurrency());

    std::vector<detail::UserResult> results(users.size());
    std::vector<std::size_t> pending;
    for (std::size_t u = 0; u < users.size(); ++u)
        if (users[u].usable) pending.push_back(u);

    for (std::size_t base = 0; base < pending.size(); base += jobs) {
        const std::size_t end = std::min(pending.size(), base + jobs);
        std::vector<std::pair<std::size_t, std::future<detail::UserResult>>> futures;
        for (std::size_t k = base; k < end; ++k) {
            const std::size_t u = pending[k];
            futures.emplace_back(u, std::async(std::launch::async, detail::evaluate_user, u,
                                               std::cref(users), std::cref(cfg)));
        }
        for (auto& [u, fut] : futures) results[u] = fut.get();
    }

    for (std::size_t u = 0; u < users.size(); ++u) {
        for (auto& w : results[u].warnings) report.warnings.push_back(std::move(w));
        for (auto& c : results[u].cells) report.cells.push_back(std::move(c));
    }

    for (Method m : cfg.methods) {
        for (int n : cfg.window_lengths) {
            double total = 0.0;
            std::size_t count = 0;
            std::size_t genuine_count = 0;
            std::size_t impostor_count = 0;
            for (const EvalCell& c : report.cells) {
                if (c.method != m || c.n != n) continue;
                total += c.eer;
                ++count;
                genuine_count += c.genuine_count;
                impostor_count += c.impostor_count;
            }
            if (count == 0) continue;
            EvalCell pooled;
            pooled.user = "pooled";
            pooled.method = m;
            pooled.n = n;
            pooled.eer = total / static_cast<double>(count);
            pooled.genuine_count = genuine_count;
            pooled.impostor_count = impostor_count;
            report.pooled.push_back(std::move(pooled));
        }
    }
    return report;
}

// CSV columns: user,method,n,r_max,hidden,mode,eer. Per-user rows first,
// then the pooled rows. Formatting is deterministic for identical inputs.
inline void write_eer_csv(std::ostream& os, const EvalReport& report) {
    os << "user,method,n,r_max,hidden,mode,eer\n";
    auto row = [&](const EvalCell& c) {
        const bool is_hmm = c.method == Method::mshmm || c.method == Method::hmm_lap;
        const char* mode = c.method == Method::mshmm
                               ? "marginal"
                               : (c.method == Method::hmm_lap ? "laplace" : "none");
        os << c.user << ',' << method_name(c.method) << ',' << c.n << ','
           << detail::format_double(report.config.r_max_m) << ','
           << (is_hmm ? report.config.hidden_states : 0) << ',' << mode << ','
           << detail::format_double(c.eer) << '\n';
    };
    for (const EvalCell& c : report.cells) row(c);
    for (const EvalCell& c : report.pooled) row(c);
}

// CSV columns: user,method,n,threshold,far,frr — one row per ROC point of
// every per-user cell.
inline void write_roc_csv(std::ostream& os, const EvalReport& report) {
    os << "user,method,n,threshold,far,frr\n";
    for (const EvalCell& c : report.cells) {
        for (const RocPoint& p : c.roc) {
            os << c.user << ',' << method_name(c.method) << ',' << c.n << ','
               << detail::format_double(p.threshold) << ',' << detail::format_double(p.far) << ','
               << detail::format_double(p.frr) << '\n';
        }
    }
}

} // namespace traceauth

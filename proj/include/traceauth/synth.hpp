#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "traceauth/geo.hpp"
#include "traceauth/observation.hpp"
#include "traceauth/rng.hpp"
#include "traceauth/time.hpp"

namespace traceauth {

struct AnchorPlace {
    double lat = 0.0;
    double lon = 0.0;
};

// A synthetic user: a set of anchor places plus a schedule giving, for each
// of the six (timezone-of-day, daytype) blocks, a probability distribution
// over places. Row index = tz * 2 + daytype, matching the observation
// encoding order.
struct SynthUser {
    std::string id;
    std::vector<AnchorPlace> places;
    std::vector<std::vector<double>> schedule; // 6 rows, each summing to 1
};

// Observation sparsity: short observed bursts separated by heavy-tailed
// unobserved gaps, mimicking phone-unlock session logging. Lengths are in
// ticks of the sampling interval.
struct SparsityModel {
    bool enabled = true;
    double burst_mean_ticks = 8.0;
    double gap_log_mean = 2.4849066497880004; // log(12): median gap of 12 ticks
    double gap_log_sigma = 0.8;
};

struct SynthConfig {
    std::vector<SynthUser> users;
    CivilSeconds start = 0; // fill via civil_seconds(...) or default_synth_config
    int days = 42;
    CivilSeconds interval_s = 180;
    double noise_sigma_m = 5.0;
    double transit_speed_mps = 10.0;
    double redraw_prob = 0.0; // per-tick chance of re-drawing the place mid-block
    SparsityModel sparsity;
    std::uint64_t seed = 1;
};

namespace detail {

inline void validate_synth_user(const SynthUser& user) {
    if (user.places.empty())
        throw std::invalid_argument("synthetic user needs at least one place");
    if (user.schedule.size() != 6)
        throw std::invalid_argument("schedule must have 6 rows (timezone x daytype)");
    for (const auto& row : user.schedule) {
        if (row.size() != user.places.size())
            throw std::invalid_argument("schedule row size must match place count");
        double sum = 0.0;
        for (double p : row) {
            if (p < 0.0)
                throw std::invalid_argument("schedule probabilities must be non-negative");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("schedule row must sum to 1");
    }
}

inline int schedule_row(CivilSeconds t) {
    const int tz = static_cast<int>(timezone_of(t));
    const int day = static_cast<int>(daytype_of(t));
    return tz * 2 + day;
}

} // namespace detail

// Generates one trace per configured user: at each sampling tick the user
// dwells at a scheduled place (re-drawn when the timezone/daytype block
// changes, plus optionally with a small per-tick probability), moves between
// places at the transit speed, and carries Gaussian position noise. The
// sparsity model then keeps only burst-windows of ticks, recorded as
// sessions. Deterministic for a fixed config.
inline std::vector<Trace> synth_generate(const SynthConfig& cfg) {
    if (cfg.days < 1)
        throw std::invalid_argument("days must be at least 1");
    if (cfg.interval_s <= 0)
        throw std::invalid_argument("interval must be positive");
    if (cfg.noise_sigma_m < 0.0)
        throw std::invalid_argument("noise sigma must be non-negative");
    if (cfg.transit_speed_mps <= 0.0)
        throw std::invalid_argument("transit speed must be positive");
    for (const SynthUser& user : cfg.users) detail::validate_synth_user(user);

    const std::size_t total_ticks =
        static_cast<std::size_t>(cfg.days) *
        static_cast<std::size_t>(kSecondsPerDay / cfg.interval_s);

    std::vector<Trace> corpus;
    corpus.reserve(cfg.users.size());
    for (std::size_t ui = 0; ui < cfg.users.size(); ++ui) {
        const SynthUser& user = cfg.users[ui];
        Rng rng(splitmix64(cfg.seed + 0x9E3779B97F4A7C15ULL * (ui + 1)));

        // Phase 1: dense trajectory, one position per tick.
        std::vector<GeoPoint> dense;
        dense.reserve(total_ticks);
        int block = detail::schedule_row(cfg.start);
        int place = static_cast<int>(rng.discrete(user.schedule[block]));
        double cur_lat = user.places[place].lat;
        double cur_lon = user.places[place].lon;
        bool moving = false;
        double from_lat = 0.0, from_lon = 0.0, move_fraction = 0.0, move_dist = 0.0;
        int target = place;

        for (std::size_t k = 0; k < total_ticks; ++k) {
            const CivilSeconds t = cfg.start + static_cast<CivilSeconds>(k) * cfg.interval_s;
            const int now_block = detail::schedule_row(t);
            if (!moving) {
                const bool boundary = now_block != block;
                const bool redraw =
                    cfg.redraw_prob > 0.0 && rng.uniform() < cfg.redraw_prob;
                if (boundary || redraw) {
                    const int drawn = static_cast<int>(rng.discrete(user.schedule[now_block]));
                    if (drawn != place) {
                        target = drawn;
                        from_lat = cur_lat;
                        from_lon = cur_lon;
                        move_dist = geodist({from_lat, from_lon, 0},
                                            {user.places[target].lat, user.places[target].lon, 0});
                        move_fraction = 0.0;
                        moving = move_dist > 0.0;
                        if (!moving) place = target;
                    }
                }
            }
            block = now_block;

            if (moving) {
                move_fraction += cfg.transit_speed_mps * static_cast<double>(cfg.interval_s) /
                                 move_dist;
                if (move_fraction >= 1.0) {
                    moving = false;
                    place = target;
                    cur_lat = user.places[place].lat;
                    cur_lon = user.places[place].lon;
                } else {
                    cur_lat = from_lat + move_fraction * (user.places[target].lat - from_lat);
                    cur_lon = from_lon + move_fraction * (user.places[target].lon - from_lon);
                }
            } else {
                cur_lat = user.places[place].lat;
                cur_lon = user.places[place].lon;
            }

            const double noise_north = rng.normal() * cfg.noise_sigma_m;
            const double noise_east = rng.normal() * cfg.noise_sigma_m;
            GeoPoint p;
            p.lat = cur_lat + noise_north / 110'540.0;
            p.lon = cur_lon + noise_east / (111'320.0 * std::cos(cur_lat * kDegToRad));
            p.timestamp = t;
            dense.push_back(p);
        }

        // Phase 2: keep burst windows of ticks; each burst becomes a session.
        Trace trace;
        trace.user_id = user.id;
        if (!cfg.sparsity.enabled) {
            trace.points = std::move(dense);
            trace.sessions = {{0, trace.points.size()}};
        } else {
            std::size_t k = 0;
            while (k < total_ticks) {
                const double burst_len = rng.exponential(cfg.sparsity.burst_mean_ticks);
                const std::size_t burst =
                    std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(burst_len)));
                const std::size_t end = std::min(total_ticks, k + burst);
                const std::size_t begin_index = trace.points.size();
                for (std::size_t i = k; i < end; ++i) trace.points.push_back(dense[i]);
                trace.sessions.emplace_back(begin_index, trace.points.size());
                const double gap_len = std::exp(cfg.sparsity.gap_log_mean +
                                                cfg.sparsity.gap_log_sigma * rng.normal());
                const std::size_t gap =
                    std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(gap_len)));
                k = end + gap;
            }
        }
        corpus.push_back(std::move(trace));
    }
    return corpus;
}

// A small city-scale cohort: everyone shares one campus anchor; homes and
// leisure spots are distinct per user, arranged on rings around the campus.
// Weekday daytime is mostly campus (overlapping across users); nights and
// weekends are dominated by the user-specific places that make users
// separable.
inline SynthConfig default_synth_config(int n_users = 5, std::uint64_t seed = 1) {
    if (n_users < 1)
        throw std::invalid_argument("need at least one user");
    const double base_lat = 40.0;
    const double base_lon = 116.3;
    const double m_per_deg_lat = 110'540.0;
    const double m_per_deg_lon = 111'320.0 * std::cos(base_lat * kDegToRad);

    SynthConfig cfg;
    cfg.seed = seed;
    cfg.start = civil_seconds(2024, 1, 1, 0, 0, 0); // a Monday
    cfg.days = 42;
    cfg.redraw_prob = 0.02;

    const AnchorPlace campus{base_lat, base_lon};
    for (int i = 0; i < n_users; ++i) {
        const double angle = 2.0 * 3.14159265358979323846 * i / n_users;
        const double home_r = 2'500.0 + 300.0 * i;
        const double leisure_r = 1'200.0 + 200.0 * i;
        AnchorPlace home{base_lat + home_r * std::sin(angle) / m_per_deg_lat,
                         base_lon + home_r * std::cos(angle) / m_per_deg_lon};
        AnchorPlace leisure{base_lat + leisure_r * std::sin(angle + 2.1) / m_per_deg_lat,
                            base_lon + leisure_r * std::cos(angle + 2.1) / m_per_deg_lon};

        SynthUser user;
        char id[16];
        std::snprintf(id, sizeof(id), "u%02d", i + 1);
        user.id = id;
        user.places = {home, campus, leisure};
        const double lp = 0.25 + 0.05 * (i % 3); // leisure appetite varies by user
        user.schedule = {
            {1.0, 0.0, 0.0},           // tz1 weekday: home
            {1.0, 0.0, 0.0},           // tz1 weekend: home
            {0.1, 0.9, 0.0},           // tz2 weekday: campus
            {0.4, 0.0, 0.6},           // tz2 weekend: leisure or home
            {1.0 - lp, 0.0, lp},       // tz3 weekday: evening at home or leisure
            {0.5, 0.0, 0.5},           // tz3 weekend
        };
        cfg.users.push_back(std::move(user));
    }
    return cfg;
}

} // namespace traceauth

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "traceauth/time.hpp"

namespace traceauth {

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

struct GeoPoint {
    double lat = 0.0; // degrees, [-90, 90]
    double lon = 0.0; // degrees, [-180, 180]
    CivilSeconds timestamp = 0;
};

inline bool valid_coordinates(double lat, double lon) {
    return lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0;
}

struct Trace {
    std::string user_id;
    std::vector<GeoPoint> points; // sorted by timestamp, non-decreasing
    // Optional [begin, end) index ranges; empty means one session.
    std::vector<std::pair<std::size_t, std::size_t>> sessions;

    bool sorted() const {
        for (std::size_t i = 1; i < points.size(); ++i)
            if (points[i].timestamp < points[i - 1].timestamp) return false;
        return true;
    }
};

// Great-circle distance in meters (haversine on a sphere).
inline double geodist(const GeoPoint& a, const GeoPoint& b) {
    const double lat1 = a.lat * kDegToRad;
    const double lat2 = b.lat * kDegToRad;
    const double dlat = (b.lat - a.lat) * kDegToRad;
    const double dlon = (b.lon - a.lon) * kDegToRad;
    const double s1 = std::sin(dlat / 2.0);
    const double s2 = std::sin(dlon / 2.0);
    const double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

// Meters per second between two fixes. Order-insensitive; a zero time
// delta has no defined speed.
inline double speed(const GeoPoint& a, const GeoPoint& b) {
    const auto dt = b.timestamp - a.timestamp;
    if (dt == 0)
        throw std::invalid_argument("zero time delta");
    return geodist(a, b) / static_cast<double>(dt < 0 ? -dt : dt);
}

namespace detail {

// Emit one point per `interval` tick, anchored at the segment's first fix;
// each tick carries the most recent fix at or before it.
inline void resample_segment(const std::vector<GeoPoint>& pts,
                             std::size_t begin, std::size_t end,
                             CivilSeconds interval, std::vector<GeoPoint>& out) {
    if (begin >= end) return;
    const CivilSeconds anchor = pts[begin].timestamp;
    const CivilSeconds last = pts[end - 1].timestamp;
    std::size_t cursor = begin;
    for (CivilSeconds tick = anchor; tick <= last; tick += interval) {
        while (cursor + 1 < end && pts[cursor + 1].timestamp <= tick) ++cursor;
        GeoPoint p = pts[cursor];
        p.timestamp = tick;
        if (!out.empty() && out.back().timestamp >= tick) continue;
        out.push_back(p);
    }
}

} // namespace detail

// Temporal resampling: one fix per `interval` seconds within each session,
// repeating the last known fix across covered gaps. A gap longer than
// `max_gap` breaks the segment; the tick grid re-anchors at the next fix.
// No interpolation anywhere.
inline Trace resample(const Trace& trace, CivilSeconds interval = 180,
                      CivilSeconds max_gap = 3600) {
    if (interval <= 0)
        throw std::invalid_argument("resample interval must be positive");
    Trace out;
    out.user_id = trace.user_id;
    if (trace.points.empty()) return out;

    std::vector<std::pair<std::size_t, std::size_t>> sessions = trace.sessions;
    if (sessions.empty()) sessions.emplace_back(0, trace.points.size());

    auto emit = [&](std::size_t begin, std::size_t end) {
        const std::size_t before = out.points.size();
        detail::resample_segment(trace.points, begin, end, interval, out.points);
        if (out.points.size() > before)
            out.sessions.emplace_back(before, out.points.size());
    };
    for (const auto& [sb, se] : sessions) {
        std::size_t seg_begin = sb;
        for (std::size_t i = sb + 1; i < se; ++i) {
            if (trace.points[i].timestamp - trace.points[i - 1].timestamp > max_gap) {
                emit(seg_begin, i);
                seg_begin = i;
            }
        }
        emit(seg_begin, se);
    }
    return out;
}

} // namespace traceauth

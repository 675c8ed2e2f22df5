#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "traceauth/clustering.hpp"
#include "traceauth/geo.hpp"
#include "traceauth/time.hpp"

namespace traceauth {

enum class Timezone { tz1, tz2, tz3 }; // thirds of the civil day
enum class DayType { weekday, weekend };

// TZ1 (00:00, 08:00], TZ2 (08:00, 16:00], TZ3 (16:00, 24:00); midnight
// itself counts as TZ1.
inline Timezone timezone_of(CivilSeconds t) {
    const int s = second_of_day(t);
    if (s <= 8 * 3600) return Timezone::tz1;
    if (s <= 16 * 3600) return Timezone::tz2;
    return Timezone::tz3;
}

inline DayType daytype_of(CivilSeconds t) {
    const int wd = weekday_of(t); // 0 = Sunday, 6 = Saturday
    return (wd == 0 || wd == 6) ? DayType::weekend : DayType::weekday;
}

// Discrete observation vocabulary over a model with N known clusters:
// symbol = label*6 + timezone*2 + daytype, labels ordered
// [known 1..N, near-unknown 1..N, far-unknown, transit], plus one
// trailing Null symbol. V = 6*(2N+2) + 1.
struct Vocabulary {
    int n_clusters = 0;

    int label_count() const { return 2 * n_clusters + 2; }
    int size() const { return 6 * label_count() + 1; }
    int null_symbol() const { return size() - 1; }

    int label_of(const PointAssignment& a) const {
        switch (a.kind) {
        case AssignKind::known:        return a.cluster_id - 1;
        case AssignKind::near_unknown: return n_clusters + a.cluster_id - 1;
        case AssignKind::far_unknown:  return 2 * n_clusters;
        case AssignKind::transit:      return 2 * n_clusters + 1;
        }
        throw std::logic_error("unreachable");
    }

    int encode(int label, Timezone tz, DayType day) const {
        return label * 6 + static_cast<int>(tz) * 2 + static_cast<int>(day);
    }

    struct Parts {
        bool is_null;
        int label; // 0..2N+1, -1 for Null
        int tz;    // 0..2, -1 for Null
        int day;   // 0..1, -1 for Null
    };

    Parts decode(int symbol) const {
        if (symbol < 0 || symbol >= size())
            throw std::out_of_range("symbol out of vocabulary");
        if (symbol == null_symbol()) return {true, -1, -1, -1};
        return {false, symbol / 6, (symbol % 6) / 2, symbol % 2};
    }
};

inline int encode_observation(const PointAssignment& a, const Vocabulary& vocab) {
    return vocab.encode(vocab.label_of(a), timezone_of(a.point.timestamp),
                        daytype_of(a.point.timestamp));
}

struct Observation {
    int symbol = 0;
    CivilSeconds timestamp = 0;
};

struct ObservationSequence {
    std::string user_id;
    std::vector<Observation> symbols; // time-ordered

    std::vector<int> symbol_ids() const {
        std::vector<int> ids;
        ids.reserve(symbols.size());
        for (const auto& o : symbols) ids.push_back(o.symbol);
        return ids;
    }
};

// Encode a resampled trace against a cluster model. One Null closes each
// calendar day that contains observations, stamped one second after the
// day's final observation.
inline ObservationSequence build_sequence(const Trace& trace, const ClusterModel& model) {
    ObservationSequence seq;
    seq.user_id = trace.user_id;
    if (trace.points.empty()) return seq;

    const Vocabulary vocab{static_cast<int>(model.clusters.size())};
    const GeoPoint* prev = nullptr;
    std::int64_t open_day = 0;
    CivilSeconds last_ts = 0;

    for (const auto& point : trace.points) {
        const std::int64_t day = day_index(point.timestamp);
        if (prev != nullptr && day != open_day)
            seq.symbols.push_back({vocab.null_symbol(), last_ts + 1});
        const PointAssignment a = assign_point(model, prev, point);
        seq.symbols.push_back({encode_observation(a, vocab), point.timestamp});
        prev = &point;
        open_day = day;
        last_ts = point.timestamp;
    }
    seq.symbols.push_back({vocab.null_symbol(), last_ts + 1});
    return seq;
}

} // namespace traceauth

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "traceauth/geo.hpp"

namespace traceauth {

struct LocationCluster {
    int id = 0;              // dense 1..N
    double center_lat = 0.0; // member centroid
    double center_lon = 0.0;
    double radius_m = 0.0;   // max member distance to center, <= R_max
};

struct ClusterModel {
    std::string user_id;
    std::vector<LocationCluster> clusters;
    double r_max_m = 20.0;
    double unknown_radius_m = 10'000.0; // M: near-unknown search radius
    double transit_speed_mps = 2.0;

    // 2N+2 assignable labels: N known, N near-unknown, far-unknown, transit.
    int label_count() const { return 2 * static_cast<int>(clusters.size()) + 2; }
};

enum class AssignKind { known, near_unknown, far_unknown, transit };

struct PointAssignment {
    AssignKind kind = AssignKind::far_unknown;
    int cluster_id = 0; // 1-based for known/near_unknown, 0 otherwise
    GeoPoint point;
};

namespace detail {

// Hash grid over lat/lon for eps-radius region queries. Cell height is one
// eps; the longitude span scanned per query widens with latitude so the
// candidate set always covers the true eps-ball.
class GeoGrid {
public:
    GeoGrid(const std::vector<GeoPoint>& pts, const std::vector<std::size_t>& subset,
            double eps_m)
        : pts_(pts), eps_m_(eps_m), dlat_(eps_m / 110'540.0) {
        cells_.reserve(subset.size());
        for (std::size_t idx : subset) cells_[key(pts_[idx])].push_back(idx);
    }

    void neighbors(const GeoPoint& q, std::vector<std::size_t>& out) const {
        out.clear();
        const double coslat = std::max(0.05, std::cos(q.lat * kDegToRad));
        const double dlon = eps_m_ / (111'320.0 * coslat);
        const std::int64_t cy = static_cast<std::int64_t>(std::floor(q.lat / dlat_));
        const std::int64_t cx0 = static_cast<std::int64_t>(std::floor((q.lon - dlon) / dlat_));
        const std::int64_t cx1 = static_cast<std::int64_t>(std::floor((q.lon + dlon) / dlat_));
        for (std::int64_t y = cy - 1; y <= cy + 1; ++y) {
            for (std::int64_t x = cx0 - 1; x <= cx1 + 1; ++x) {
                auto it = cells_.find((y << 32) ^ (x & 0xffffffffLL));
                if (it == cells_.end()) continue;
                for (std::size_t idx : it->second)
                    if (geodist(q, pts_[idx]) <= eps_m_) out.push_back(idx);
            }
        }
    }

private:
    std::int64_t key(const GeoPoint& p) const {
        const auto y = static_cast<std::int64_t>(std::floor(p.lat / dlat_));
        const auto x = static_cast<std::int64_t>(std::floor(p.lon / dlat_));
        return (y << 32) ^ (x & 0xffffffffLL);
    }

    const std::vector<GeoPoint>& pts_;
    double eps_m_;
    double dlat_;
    std::unordered_map<std::int64_t, std::vector<std::size_t>> cells_;
};

// Classic DBSCAN over a subset of points; neighborhoods include the query
// point itself. Returns member index lists, ordered by first discovery.
inline std::vector<std::vector<std::size_t>> dbscan(const std::vector<GeoPoint>& pts,
                                                    const std::vector<std::size_t>& subset,
                                                    double eps_m, int min_pts) {
    const GeoGrid grid(pts, subset, eps_m);
    std::unordered_map<std::size_t, int> label; // -1 noise, 0 unvisited, >0 cluster
    for (std::size_t idx : subset) label[idx] = 0;

    std::vector<std::vector<std::size_t>> clusters;
    std::vector<std::size_t> nbrs;
    for (std::size_t idx : subset) {
        if (label[idx] != 0) continue;
        grid.neighbors(pts[idx], nbrs);
        if (static_cast<int>(nbrs.size()) < min_pts) {
            label[idx] = -1;
            continue;
        }
        const int cid = static_cast<int>(clusters.size()) + 1;
        clusters.emplace_back();
        label[idx] = cid;
        clusters.back().push_back(idx);
        std::deque<std::size_t> frontier(nbrs.begin(), nbrs.end());
        while (!frontier.empty()) {
            const std::size_t cur = frontier.front();
            frontier.pop_front();
            int& l = label[cur];
            if (l == -1) { // noise becomes a border point
                l = cid;
                clusters.back().push_back(cur);
                continue;
            }
            if (l != 0) continue;
            l = cid;
            clusters.back().push_back(cur);
            grid.neighbors(pts[cur], nbrs);
            if (static_cast<int>(nbrs.size()) >= min_pts)
                frontier.insert(frontier.end(), nbrs.begin(), nbrs.end());
        }
    }
    return clusters;
}

struct CenterRadius {
    double lat, lon, radius;
};

inline CenterRadius center_radius(const std::vector<GeoPoint>& pts,
                                  const std::vector<std::size_t>& members) {
    double lat = 0.0, lon = 0.0;
    for (std::size_t idx : members) {
        lat += pts[idx].lat;
        lon += pts[idx].lon;
    }
    lat /= static_cast<double>(members.size());
    lon /= static_cast<double>(members.size());
    const GeoPoint center{lat, lon, 0};
    double radius = 0.0;
    for (std::size_t idx : members)
        radius = std::max(radius, geodist(center, pts[idx]));
    return {lat, lon, radius};
}

// Accept clusters whose radius fits the bound; re-run DBSCAN with halved
// eps on the ones that do not. Terminates: once eps drops below the least
// positive pairwise distance only coincident groups (radius 0) survive.
inline void split_to_bound(const std::vector<GeoPoint>& pts,
                           const std::vector<std::size_t>& members,
                           double eps_m, int min_pts, double r_max,
                           std::vector<std::vector<std::size_t>>& accepted) {
    for (auto& sub : dbscan(pts, members, eps_m, min_pts)) {
        const CenterRadius cr = center_radius(pts, sub);
        if (cr.radius <= r_max)
            accepted.push_back(std::move(sub));
        else
            split_to_bound(pts, sub, eps_m / 2.0, min_pts, r_max, accepted);
    }
}

} // namespace detail

// DBSCAN location clusters with eps = R_max/2 and a hard radius bound:
// over-wide clusters are recursively re-split with smaller eps. Cluster ids
// are dense 1..N, ordered by each cluster's earliest member index.
inline std::vector<LocationCluster> build_clusters(const std::vector<GeoPoint>& points,
                                                   double r_max_m, int min_pts = 4) {
    if (points.empty())
        throw std::invalid_argument("no training points");
    if (r_max_m <= 0.0)
        throw std::invalid_argument("R_max must be positive");
    if (min_pts < 1)
        throw std::invalid_argument("min_pts must be at least 1");

    std::vector<std::size_t> all(points.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

    std::vector<std::vector<std::size_t>> members;
    detail::split_to_bound(points, all, r_max_m / 2.0, min_pts, r_max_m, members);

    std::sort(members.begin(), members.end(),
              [](const auto& a, const auto& b) {
                  return *std::min_element(a.begin(), a.end()) <
                         *std::min_element(b.begin(), b.end());
              });

    std::vector<LocationCluster> out;
    out.reserve(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) {
        const auto cr = detail::center_radius(points, members[i]);
        out.push_back({static_cast<int>(i) + 1, cr.lat, cr.lon, cr.radius});
    }
    return out;
}

inline ClusterModel build_cluster_model(std::string user_id,
                                        const std::vector<GeoPoint>& points,
                                        double r_max_m, int min_pts = 4,
                                        double unknown_radius_m = 10'000.0,
                                        double transit_speed_mps = 2.0) {
    ClusterModel model;
    model.user_id = std::move(user_id);
    model.r_max_m = r_max_m;
    model.unknown_radius_m = unknown_radius_m;
    model.transit_speed_mps = transit_speed_mps;
    model.clusters = build_clusters(points, r_max_m, min_pts);
    return model;
}

// Assignment order: transit wins whenever the fix-to-fix speed reaches the
// threshold; otherwise the nearest cluster decides (known if inside its
// radius, near-unknown within M meters, far-unknown beyond). Equidistant
// centers tie-break to the lowest cluster id.
inline PointAssignment assign_point(const ClusterModel& model, const GeoPoint* prev,
                                    const GeoPoint& point) {
    if (prev != nullptr && prev->timestamp != point.timestamp &&
        speed(*prev, point) >= model.transit_speed_mps)
        return {AssignKind::transit, 0, point};

    int nearest = 0;
    double best = 0.0;
    for (const auto& c : model.clusters) {
        const double d = geodist(point, GeoPoint{c.center_lat, c.center_lon, 0});
        if (nearest == 0 || d < best) {
            nearest = c.id;
            best = d;
        }
    }
    if (nearest != 0) {
        if (best <= model.clusters[static_cast<std::size_t>(nearest) - 1].radius_m)
            return {AssignKind::known, nearest, point};
        if (best <= model.unknown_radius_m)
            return {AssignKind::near_unknown, nearest, point};
    }
    return {AssignKind::far_unknown, 0, point};
}

} // namespace traceauth

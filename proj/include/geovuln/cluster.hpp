#pragma once

#include "geovuln/error.hpp"
#include "geovuln/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace geovuln::cluster {

struct SourcePoint {
    std::string id;
    double lon = 0.0;
    double lat = 0.0;
};

struct ClusterNode {
    std::uint64_t id = 0;
    double lon = 0.0;
    double lat = 0.0;
    std::size_t count = 0;
    std::vector<std::string> member_ids; // source point ids, input order
};

struct ClusterOptions {
    double radius_px = 40.0;
    int max_zoom = 16;
};

/// Zoom-dependent greedy grid clustering of points.
///
/// The hierarchy is built top-down from max_zoom: at max_zoom only exactly
/// coincident points share a node; at each lower zoom the nodes of zoom+1 are
/// bucketed into radius_px cells of the Web Mercator pixel plane and every
/// seed (lowest source index first) absorbs the unassigned nodes of its 3×3
/// cell neighborhood. Nodes at zoom z are therefore unions of nodes at z+1.
class ClusterIndex {
public:
    ClusterIndex(std::vector<SourcePoint> points, ClusterOptions options = {})
        : points_(std::move(points)), options_(options)
    {
        if (!(options_.radius_px > 0.0)) throw DomainError("radius_px must be > 0");
        if (options_.max_zoom < 0 || options_.max_zoom > 30) throw DomainError("max_zoom must be within 0..30");
        for (const auto& p : points_)
            if (!std::isfinite(p.lon) || !std::isfinite(p.lat) || std::abs(p.lon) > 180.0 || std::abs(p.lat) > 90.0)
                throw DomainError("point " + p.id + " outside EPSG:4326 domain");
        build();
    }

    const ClusterOptions& options() const { return options_; }
    std::size_t point_count() const { return points_.size(); }

    /// Nodes at `zoom` whose centroid lies in `bbox`, ordered by id.
    std::vector<ClusterNode> clusters_at(int zoom, const BBox& bbox) const
    {
        if (zoom < 0 || zoom > options_.max_zoom) throw DomainError("zoom out of range");
        std::vector<ClusterNode> out;
        for (auto n : by_zoom_[static_cast<std::size_t>(zoom)]) {
            const auto& node = nodes_[n];
            if (bbox.contains({centroid_lon(node), centroid_lat(node)})) out.push_back(expose(n));
        }
        return out;
    }

    /// Children of a cluster at the first zoom where it splits. Singletons
    /// and clusters that never split return themselves.
    std::vector<ClusterNode> expand_cluster(std::uint64_t cluster_id) const
    {
        if (cluster_id >= nodes_.size()) throw DomainError("no such cluster");
        const auto& node = nodes_[cluster_id];
        if (node.children.empty()) return {expose(cluster_id)};
        std::vector<ClusterNode> out;
        for (auto c : node.children) out.push_back(expose(c));
        return out;
    }

    /// Zoom at which the node splits into its children, if it ever does.
    std::optional<int> split_zoom(std::uint64_t cluster_id) const
    {
        if (cluster_id >= nodes_.size()) throw DomainError("no such cluster");
        const auto& node = nodes_[cluster_id];
        if (node.children.empty()) return std::nullopt;
        return node.formed_at + 1;
    }

    static Coordinate to_pixels(double lon, double lat, int zoom)
    {
        const double world = 256.0 * std::ldexp(1.0, zoom);
        const double clamped = std::clamp(lat, -85.05112878, 85.05112878);
        const double s = std::sin(clamped * std::numbers::pi / 180.0);
        const double x = (lon + 180.0) / 360.0 * world;
        const double y = (0.5 - std::log((1.0 + s) / (1.0 - s)) / (4.0 * std::numbers::pi)) * world;
        return {x, y};
    }

private:
    struct Node {
        double lon_sum = 0.0;
        double lat_sum = 0.0;
        std::vector<std::uint32_t> members; // ascending source indices
        std::vector<std::uint64_t> children;
        int formed_at = 0;
    };

    static double centroid_lon(const Node& n) { return n.lon_sum / static_cast<double>(n.members.size()); }
    static double centroid_lat(const Node& n) { return n.lat_sum / static_cast<double>(n.members.size()); }

    ClusterNode expose(std::uint64_t id) const
    {
        const auto& n = nodes_[id];
        ClusterNode out{id, centroid_lon(n), centroid_lat(n), n.members.size(), {}};
        out.member_ids.reserve(n.members.size());
        for (auto m : n.members) out.member_ids.push_back(points_[m].id);
        return out;
    }

    std::uint64_t add(Node n)
    {
        nodes_.push_back(std::move(n));
        return nodes_.size() - 1;
    }

    void build()
    {
        const auto levels = static_cast<std::size_t>(options_.max_zoom) + 1;
        by_zoom_.assign(levels, {});

        // max_zoom: group exactly coincident coordinates.
        struct CoordKey {
            std::uint64_t x, y;
            bool operator==(const CoordKey&) const = default;
        };
        struct CoordHash {
            std::size_t operator()(const CoordKey& k) const { return std::hash<std::uint64_t>{}(k.x * 31 + k.y); }
        };
        std::unordered_map<CoordKey, std::size_t, CoordHash> groups;
        std::vector<Node> top;
        for (std::uint32_t i = 0; i < points_.size(); ++i) {
            const auto& p = points_[i];
            // +0.0 normalizes -0.0 so both zeros share a key.
            const CoordKey key{std::bit_cast<std::uint64_t>(p.lon + 0.0), std::bit_cast<std::uint64_t>(p.lat + 0.0)};
            auto [it, inserted] = groups.try_emplace(key, top.size());
            if (inserted) top.push_back(Node{0.0, 0.0, {}, {}, options_.max_zoom});
            auto& n = top[it->second];
            n.lon_sum += p.lon;
            n.lat_sum += p.lat;
            n.members.push_back(i);
        }
        auto& level_top = by_zoom_.back();
        for (auto& n : top) level_top.push_back(add(std::move(n)));

        for (int z = options_.max_zoom - 1; z >= 0; --z) {
            const auto& finer = by_zoom_[static_cast<std::size_t>(z) + 1];
            by_zoom_[static_cast<std::size_t>(z)] = cluster_level(finer, z);
        }
    }

    std::vector<std::uint64_t> cluster_level(const std::vector<std::uint64_t>& finer, int zoom)
    {
        // Seeds in order of lowest source index.
        std::vector<std::uint64_t> order = finer;
        std::sort(order.begin(), order.end(),
                  [&](auto a, auto b) { return nodes_[a].members.front() < nodes_[b].members.front(); });

        struct Cell {
            std::int64_t cx, cy;
            bool operator==(const Cell&) const = default;
        };
        struct CellHash {
            std::size_t operator()(const Cell& c) const
            {
                return std::hash<std::uint64_t>{}(static_cast<std::uint64_t>(c.cx) * 0x9E3779B97F4A7C15ULL
                                                 ^ static_cast<std::uint64_t>(c.cy));
            }
        };
        std::unordered_map<Cell, std::vector<std::size_t>, CellHash> buckets; // cell → positions in `order`
        std::vector<Cell> cell_of(order.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            const auto& n = nodes_[order[i]];
            const auto px = to_pixels(centroid_lon(n), centroid_lat(n), zoom);
            cell_of[i] = {static_cast<std::int64_t>(std::floor(px.x / options_.radius_px)),
                          static_cast<std::int64_t>(std::floor(px.y / options_.radius_px))};
            buckets[cell_of[i]].push_back(i);
        }

        std::vector<char> assigned(order.size(), 0);
        std::vector<std::uint64_t> out;
        for (std::size_t i = 0; i < order.size(); ++i) {
            if (assigned[i]) continue;
            std::vector<std::size_t> group;
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                for (std::int64_t dx = -1; dx <= 1; ++dx) {
                    const auto it = buckets.find({cell_of[i].cx + dx, cell_of[i].cy + dy});
                    if (it == buckets.end()) continue;
                    for (auto j : it->second)
                        if (!assigned[j]) group.push_back(j);
                }
            }
            for (auto j : group) assigned[j] = 1;
            if (group.size() == 1) {
                out.push_back(order[i]);
                continue;
            }
            std::sort(group.begin(), group.end());
            Node merged;
            merged.formed_at = zoom;
            for (auto j : group) {
                const auto& child = nodes_[order[j]];
                merged.lon_sum += child.lon_sum;
                merged.lat_sum += child.lat_sum;
                merged.members.insert(merged.members.end(), child.members.begin(), child.members.end());
                merged.children.push_back(order[j]);
            }
            std::sort(merged.members.begin(), merged.members.end());
            std::sort(merged.children.begin(), merged.children.end());
            out.push_back(add(std::move(merged)));
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    std::vector<SourcePoint> points_;
    ClusterOptions options_;
    std::vector<Node> nodes_;
    std::vector<std::vector<std::uint64_t>> by_zoom_;
};

} // namespace geovuln::cluster

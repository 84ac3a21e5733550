#pragma once

#include "iacolight/core/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace iacolight
{
    using NodeId = std::size_t;
    using LinkId = std::size_t;

    // Sides in counter-clockwise order. An approach is named after the side the traffic comes from.
    enum class Side : std::uint8_t
    {
        East = 0,
        North = 1,
        West = 2,
        South = 3,
    };

    enum class LaneType : std::uint8_t
    {
        Left = 0,
        Straight = 1,
        Right = 2,
    };

    inline constexpr std::size_t kSides = 4;
    inline constexpr std::size_t kLanesPerApproach = 3;
    inline constexpr std::size_t kLanesPerIntersection = kSides * kLanesPerApproach;

    inline constexpr std::size_t lane_index(Side approach, LaneType lane) noexcept
    {
        return static_cast<std::size_t>(approach) * kLanesPerApproach + static_cast<std::size_t>(lane);
    }

    inline constexpr Side side_from_index(std::size_t i) noexcept { return static_cast<Side>(i % kSides); }

    /// Turn taken by a vehicle entering from `approach` and leaving through `exit`.
    /// Returns nullopt for a U-turn, which the network does not allow.
    inline constexpr std::optional<LaneType> turn_between(Side approach, Side exit) noexcept
    {
        const auto a = static_cast<std::size_t>(approach);
        const auto x = static_cast<std::size_t>(exit);
        if (x == (a + 1) % kSides)
            return LaneType::Right;
        if (x == (a + 2) % kSides)
            return LaneType::Straight;
        if (x == (a + 3) % kSides)
            return LaneType::Left;
        return std::nullopt;
    }

    struct Intersection
    {
        NodeId id = 0;
        double x = 0.0;
        double y = 0.0;
        std::vector<NodeId> neighbors;

        friend bool operator==(const Intersection &, const Intersection &) = default;
    };

    // Boundary endpoint; vehicles are born and absorbed here.
    struct Terminal
    {
        NodeId id = 0;
        double x = 0.0;
        double y = 0.0;

        friend bool operator==(const Terminal &, const Terminal &) = default;
    };

    struct Link
    {
        LinkId id = 0;
        NodeId from = 0;
        NodeId to = 0;
        double travel_time_s = 0.0;
        std::size_t lanes = kLanesPerApproach;

        friend bool operator==(const Link &, const Link &) = default;
    };

    struct GridOptions
    {
        double link_travel_time_s = 20.0;
        double boundary_travel_time_s = 20.0;
        double spacing = 300.0;
    };

    /// Grid of signalized intersections plus boundary terminals.
    ///
    /// Node ids 0..N-1 are intersections (id = row * cols + col), N.. are terminals.
    /// The constructor validates topology and derives the per-intersection approach tables,
    /// so every instance satisfies the 4-approach / 3-lane invariants.
    class RoadNetwork
    {
    public:
        RoadNetwork(std::size_t rows, std::size_t cols, std::vector<Intersection> intersections,
                    std::vector<Terminal> terminals, std::vector<Link> links)
            : rows_(rows), cols_(cols), intersections_(std::move(intersections)),
              terminals_(std::move(terminals)), links_(std::move(links))
        {
            validate_and_index();
        }

        std::size_t rows() const noexcept { return rows_; }
        std::size_t cols() const noexcept { return cols_; }
        std::size_t intersection_count() const noexcept { return intersections_.size(); }
        std::size_t node_count() const noexcept { return intersections_.size() + terminals_.size(); }

        const std::vector<Intersection> &intersections() const noexcept { return intersections_; }
        const std::vector<Terminal> &terminals() const noexcept { return terminals_; }
        const std::vector<Link> &links() const noexcept { return links_; }
        const Link &link(LinkId id) const { return links_.at(id); }

        bool is_intersection(NodeId n) const noexcept { return n < intersections_.size(); }

        /// Links between two intersections.
        std::size_t internal_link_count() const noexcept
        {
            return static_cast<std::size_t>(std::count_if(links_.begin(), links_.end(), [&](const Link &l)
                                                           { return is_intersection(l.from) && is_intersection(l.to); }));
        }

        LinkId in_link(NodeId k, Side approach) const { return in_links_.at(k)[static_cast<std::size_t>(approach)]; }
        LinkId out_link(NodeId k, Side exit) const { return out_links_.at(k)[static_cast<std::size_t>(exit)]; }

        /// Side of `link.to` through which the link enters; only meaningful when `to` is an intersection.
        Side approach_of(LinkId l) const { return link_approach_.at(l); }
        /// Side of `link.from` through which the link leaves; only meaningful when `from` is an intersection.
        Side exit_of(LinkId l) const { return link_exit_.at(l); }

        /// Number of entering approaches of intersection k.
        std::size_t entrances(NodeId k) const { return in_links_.at(k).size(); }

        std::vector<LinkId> source_links() const
        {
            std::vector<LinkId> out;
            for (const Link &l : links_)
                if (!is_intersection(l.from))
                    out.push_back(l.id);
            return out;
        }

        std::vector<LinkId> sink_links() const
        {
            std::vector<LinkId> out;
            for (const Link &l : links_)
                if (!is_intersection(l.to))
                    out.push_back(l.id);
            return out;
        }

        /// Turn a vehicle takes at the downstream end of `from` when continuing on `to`.
        std::optional<LaneType> movement(LinkId from, LinkId to) const
        {
            const Link &a = links_.at(from);
            const Link &b = links_.at(to);
            if (a.to != b.from || !is_intersection(a.to))
                return std::nullopt;
            return turn_between(approach_of(from), exit_of(to));
        }

        /// Graph neighborhoods for attention, without the self entry.
        std::vector<std::vector<std::size_t>> neighborhoods() const
        {
            std::vector<std::vector<std::size_t>> out;
            out.reserve(intersections_.size());
            for (const Intersection &i : intersections_)
                out.emplace_back(i.neighbors.begin(), i.neighbors.end());
            return out;
        }

        friend bool operator==(const RoadNetwork &a, const RoadNetwork &b)
        {
            return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.intersections_ == b.intersections_ &&
                   a.terminals_ == b.terminals_ && a.links_ == b.links_;
        }

    private:
        struct Point
        {
            double x, y;
        };

        Point position(NodeId n) const
        {
            if (is_intersection(n))
                return {intersections_[n].x, intersections_[n].y};
            const Terminal &t = terminals_[n - intersections_.size()];
            return {t.x, t.y};
        }

        static Side side_towards(Point from, Point to)
        {
            const double dx = to.x - from.x;
            const double dy = to.y - from.y;
            if (std::abs(dx) >= std::abs(dy))
                return dx > 0 ? Side::East : Side::West;
            return dy > 0 ? Side::North : Side::South;
        }

        void validate_and_index()
        {
            if (rows_ == 0 || cols_ == 0)
                throw ValidationError("road network: rows and cols must be >= 1");
            if (intersections_.empty())
                throw ValidationError("road network: intersections list is empty");
            if (intersections_.size() != rows_ * cols_)
                throw ValidationError("road network: expected " + std::to_string(rows_ * cols_) +
                                      " intersections for a " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                                      " grid, found " + std::to_string(intersections_.size()));
            const std::size_t n = intersections_.size();
            for (std::size_t i = 0; i < n; ++i)
                if (intersections_[i].id != i)
                    throw ValidationError("road network: intersections[" + std::to_string(i) + "].id must be " + std::to_string(i));
            for (std::size_t t = 0; t < terminals_.size(); ++t)
                if (terminals_[t].id != n + t)
                    throw ValidationError("road network: terminals[" + std::to_string(t) + "].id must be " + std::to_string(n + t));

            constexpr LinkId kUnset = static_cast<LinkId>(-1);
            std::vector<std::array<LinkId, kSides>> in(n), out(n);
            for (auto &a : in)
                a.fill(kUnset);
            for (auto &a : out)
                a.fill(kUnset);
            link_approach_.assign(links_.size(), Side::East);
            link_exit_.assign(links_.size(), Side::East);
            std::vector<std::vector<NodeId>> linked(n);

            for (std::size_t li = 0; li < links_.size(); ++li)
            {
                const Link &l = links_[li];
                const std::string where = "links[" + std::to_string(li) + "]";
                if (l.id != li)
                    throw ValidationError("road network: " + where + ".id must be " + std::to_string(li));
                if (l.from >= node_count())
                    throw ValidationError("road network: " + where + ".from references unknown node " + std::to_string(l.from));
                if (l.to >= node_count())
                    throw ValidationError("road network: " + where + ".to references unknown node " + std::to_string(l.to));
                if (l.from == l.to)
                    throw ValidationError("road network: " + where + " is a self loop");
                if (!is_intersection(l.from) && !is_intersection(l.to))
                    throw ValidationError("road network: " + where + " connects two terminals");
                if (!(l.travel_time_s > 0.0) || !std::isfinite(l.travel_time_s))
                    throw ValidationError("road network: " + where + ".travel_time_s must be positive");
                if (l.lanes != kLanesPerApproach)
                    throw ValidationError("road network: " + where + ".lanes must be 3 (left/straight/right)");

                const Point pf = position(l.from);
                const Point pt = position(l.to);
                if (is_intersection(l.to))
                {
                    const Side s = side_towards(pt, pf);
                    auto &slot = in[l.to][static_cast<std::size_t>(s)];
                    if (slot != kUnset)
                        throw ValidationError("road network: intersection " + std::to_string(l.to) + " has two links entering from the same side");
                    slot = li;
                    link_approach_[li] = s;
                }
                if (is_intersection(l.from))
                {
                    const Side s = side_towards(pf, pt);
                    auto &slot = out[l.from][static_cast<std::size_t>(s)];
                    if (slot != kUnset)
                        throw ValidationError("road network: intersection " + std::to_string(l.from) + " has two links leaving through the same side");
                    slot = li;
                    link_exit_[li] = s;
                }
                if (is_intersection(l.from) && is_intersection(l.to))
                {
                    linked[l.from].push_back(l.to);
                    linked[l.to].push_back(l.from);
                }
            }

            for (std::size_t k = 0; k < n; ++k)
            {
                for (std::size_t s = 0; s < kSides; ++s)
                {
                    if (in[k][s] == kUnset || out[k][s] == kUnset)
                        throw ValidationError("road network: intersection " + std::to_string(k) +
                                              " needs one entering and one leaving link on every side");
                }
                auto &nb = linked[k];
                std::sort(nb.begin(), nb.end());
                nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
                std::vector<NodeId> declared = intersections_[k].neighbors;
                std::sort(declared.begin(), declared.end());
                if (declared != nb)
                    throw ValidationError("road network: intersection " + std::to_string(k) +
                                          " neighbors do not match its internal links");
                if (declared.size() > kSides)
                    throw ValidationError("road network: intersection " + std::to_string(k) + " has more than 4 neighbors");
                intersections_[k].neighbors = declared;
            }
            // Symmetry follows from building `linked` in both directions.
            in_links_ = std::move(in);
            out_links_ = std::move(out);
        }

        std::size_t rows_;
        std::size_t cols_;
        std::vector<Intersection> intersections_;
        std::vector<Terminal> terminals_;
        std::vector<Link> links_;
        std::vector<std::array<LinkId, kSides>> in_links_;
        std::vector<std::array<LinkId, kSides>> out_links_;
        std::vector<Side> link_approach_;
        std::vector<Side> link_exit_;
    };

    /// Regular rows x cols grid. Every intersection gets four approaches; approaches on the
    /// boundary are fed by (and drain to) a terminal.
    inline RoadNetwork build_grid(std::size_t rows, std::size_t cols, const GridOptions &opt = {})
    {
        if (rows == 0 || cols == 0)
            throw InvalidConfigError("build_grid: rows and cols must be >= 1");
        if (!(opt.link_travel_time_s > 0.0) || !(opt.boundary_travel_time_s > 0.0) || !(opt.spacing > 0.0))
            throw InvalidConfigError("build_grid: travel times and spacing must be positive");

        const std::size_t n = rows * cols;
        auto id_of = [cols](std::size_t r, std::size_t c)
        { return r * cols + c; };
        auto x_of = [&](double c)
        { return c * opt.spacing; };
        auto y_of = [&](double r)
        { return (static_cast<double>(rows) - 1.0 - r) * opt.spacing; };

        std::vector<Intersection> xs(n);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
            {
                Intersection &i = xs[id_of(r, c)];
                i.id = id_of(r, c);
                i.x = x_of(static_cast<double>(c));
                i.y = y_of(static_cast<double>(r));
                if (c + 1 < cols)
                    i.neighbors.push_back(id_of(r, c + 1));
                if (r > 0)
                    i.neighbors.push_back(id_of(r - 1, c));
                if (c > 0)
                    i.neighbors.push_back(id_of(r, c - 1));
                if (r + 1 < rows)
                    i.neighbors.push_back(id_of(r + 1, c));
                std::sort(i.neighbors.begin(), i.neighbors.end());
            }

        std::vector<Link> links;
        auto add_link = [&](NodeId from, NodeId to, double tt)
        {
            links.push_back(Link{links.size(), from, to, tt, kLanesPerApproach});
        };
        for (std::size_t k = 0; k < n; ++k)
            for (NodeId nb : xs[k].neighbors)
                add_link(k, nb, opt.link_travel_time_s);

        // Terminals clockwise from the north-west corner: north edge, east edge, south edge, west edge.
        std::vector<Terminal> terms;
        auto add_terminal = [&](std::size_t attached, double x, double y)
        {
            const NodeId t = n + terms.size();
            terms.push_back(Terminal{t, x, y});
            add_link(t, attached, opt.boundary_travel_time_s);
            add_link(attached, t, opt.boundary_travel_time_s);
        };
        for (std::size_t c = 0; c < cols; ++c)
            add_terminal(id_of(0, c), x_of(static_cast<double>(c)), y_of(-1.0));
        for (std::size_t r = 0; r < rows; ++r)
            add_terminal(id_of(r, cols - 1), x_of(static_cast<double>(cols)), y_of(static_cast<double>(r)));
        for (std::size_t c = cols; c-- > 0;)
            add_terminal(id_of(rows - 1, c), x_of(static_cast<double>(c)), y_of(static_cast<double>(rows)));
        for (std::size_t r = rows; r-- > 0;)
            add_terminal(id_of(r, 0), x_of(-1.0), y_of(static_cast<double>(r)));

        return RoadNetwork(rows, cols, std::move(xs), std::move(terms), std::move(links));
    }

} // namespace iacolight

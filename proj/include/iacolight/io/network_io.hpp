#pragma once

#include "iacolight/core/error.hpp"
#include "iacolight/core/random.hpp"
#include "iacolight/sim/flow.hpp"
#include "iacolight/sim/road_network.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

namespace iacolight
{
    inline constexpr int kRoadnetSchemaVersion = 1;
    inline constexpr int kFlowSchemaVersion = 1;

    namespace json_detail
    {
        using nlohmann::json;

        inline std::string read_text(const std::filesystem::path &path)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
                throw IoError("cannot open '" + path.string() + "'");
            std::ostringstream ss;
            ss << in.rdbuf();
            return ss.str();
        }

        inline void write_text(const std::filesystem::path &path, const std::string &text)
        {
            if (path.has_parent_path())
                std::filesystem::create_directories(path.parent_path());
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            if (!out)
                throw IoError("cannot write '" + path.string() + "'");
            out << text;
            if (!out)
                throw IoError("write failed for '" + path.string() + "'");
        }

        inline json parse(const std::string &text, const std::string &origin)
        {
            try
            {
                return json::parse(text);
            }
            catch (const json::parse_error &e)
            {
                std::size_t line = 1, col = 1;
                const std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
                for (std::size_t i = 0; i < upto; ++i)
                {
                    if (text[i] == '\n')
                    {
                        ++line;
                        col = 1;
                    }
                    else
                        ++col;
                }
                throw ParseError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed document");
            }
        }

        inline const json &field(const json &obj, const char *name, const std::string &where)
        {
            if (!obj.is_object())
                throw ParseError(where + ": expected an object");
            auto it = obj.find(name);
            if (it == obj.end())
                throw ParseError(where + ": missing field '" + name + "'");
            return *it;
        }

        inline double number(const json &obj, const char *name, const std::string &where)
        {
            const json &v = field(obj, name, where);
            if (!v.is_number())
                throw ParseError(where + "." + name + ": expected a number");
            return v.get<double>();
        }

        inline std::size_t count(const json &obj, const char *name, const std::string &where)
        {
            const json &v = field(obj, name, where);
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
                throw ParseError(where + "." + name + ": expected a non-negative integer");
            return v.get<std::size_t>();
        }

        inline const json &array(const json &obj, const char *name, const std::string &where)
        {
            const json &v = field(obj, name, where);
            if (!v.is_array())
                throw ParseError(where + "." + name + ": expected an array");
            return v;
        }

        inline void check_schema(const json &doc, int expected, const std::string &origin)
        {
            const std::size_t v = count(doc, "schema_version", origin);
            if (v != static_cast<std::size_t>(expected))
                throw ParseError(origin + ": unsupported schema_version " + std::to_string(v));
        }
    } // namespace json_detail

    inline nlohmann::json roadnet_to_json(const RoadNetwork &net)
    {
        using nlohmann::json;
        json doc;
        doc["schema_version"] = kRoadnetSchemaVersion;
        doc["rows"] = net.rows();
        doc["cols"] = net.cols();
        json xs = json::array();
        for (const Intersection &i : net.intersections())
            xs.push_back({{"id", i.id}, {"x", i.x}, {"y", i.y}, {"neighbors", i.neighbors}});
        doc["intersections"] = std::move(xs);
        json ts = json::array();
        for (const Terminal &t : net.terminals())
            ts.push_back({{"id", t.id}, {"x", t.x}, {"y", t.y}});
        doc["terminals"] = std::move(ts);
        json ls = json::array();
        for (const Link &l : net.links())
            ls.push_back({{"id", l.id}, {"from", l.from}, {"to", l.to}, {"travel_time_s", l.travel_time_s}, {"lanes", l.lanes}});
        doc["links"] = std::move(ls);
        return doc;
    }

    inline RoadNetwork roadnet_from_json(const nlohmann::json &doc, const std::string &origin = "roadnet")
    {
        using namespace json_detail;
        check_schema(doc, kRoadnetSchemaVersion, origin);
        const std::size_t rows = count(doc, "rows", origin);
        const std::size_t cols = count(doc, "cols", origin);

        std::vector<Intersection> xs;
        const json &jx = array(doc, "intersections", origin);
        for (std::size_t i = 0; i < jx.size(); ++i)
        {
            const std::string where = origin + ".intersections[" + std::to_string(i) + "]";
            Intersection it;
            it.id = count(jx[i], "id", where);
            it.x = number(jx[i], "x", where);
            it.y = number(jx[i], "y", where);
            const json &nb = array(jx[i], "neighbors", where);
            for (std::size_t j = 0; j < nb.size(); ++j)
            {
                if (!nb[j].is_number_unsigned())
                    throw ParseError(where + ".neighbors[" + std::to_string(j) + "]: expected a node id");
                it.neighbors.push_back(nb[j].get<std::size_t>());
            }
            xs.push_back(std::move(it));
        }

        std::vector<Terminal> ts;
        if (doc.contains("terminals"))
        {
            const json &jt = array(doc, "terminals", origin);
            for (std::size_t i = 0; i < jt.size(); ++i)
            {
                const std::string where = origin + ".terminals[" + std::to_string(i) + "]";
                ts.push_back(Terminal{count(jt[i], "id", where), number(jt[i], "x", where), number(jt[i], "y", where)});
            }
        }

        std::vector<Link> ls;
        const json &jl = array(doc, "links", origin);
        for (std::size_t i = 0; i < jl.size(); ++i)
        {
            const std::string where = origin + ".links[" + std::to_string(i) + "]";
            ls.push_back(Link{count(jl[i], "id", where), count(jl[i], "from", where), count(jl[i], "to", where),
                              number(jl[i], "travel_time_s", where), count(jl[i], "lanes", where)});
        }
        return RoadNetwork(rows, cols, std::move(xs), std::move(ts), std::move(ls));
    }

    inline void save_roadnet(const RoadNetwork &net, const std::filesystem::path &path)
    {
        json_detail::write_text(path, roadnet_to_json(net).dump(2) + "\n");
    }

    inline RoadNetwork load_roadnet(const std::filesystem::path &path)
    {
        const std::string text = json_detail::read_text(path);
        return roadnet_from_json(json_detail::parse(text, path.string()), path.string());
    }

    inline nlohmann::json flow_to_json(const FlowSpec &flow)
    {
        using nlohmann::json;
        json doc;
        doc["schema_version"] = kFlowSchemaVersion;
        json fs = json::array();
        for (const FlowEntry &e : flow.entries)
            fs.push_back({{"t", e.t}, {"route", e.route}});
        doc["flows"] = std::move(fs);
        return doc;
    }

    /// Parses, normalizes (stable sort by time) and validates against `net`.
    inline FlowSpec flow_from_json(const nlohmann::json &doc, const RoadNetwork &net, const std::string &origin = "flow")
    {
        using namespace json_detail;
        check_schema(doc, kFlowSchemaVersion, origin);
        FlowSpec flow;
        const json &jf = array(doc, "flows", origin);
        flow.entries.reserve(jf.size());
        for (std::size_t i = 0; i < jf.size(); ++i)
        {
            const std::string where = origin + ".flows[" + std::to_string(i) + "]";
            FlowEntry e;
            e.t = number(jf[i], "t", where);
            const json &r = array(jf[i], "route", where);
            for (std::size_t j = 0; j < r.size(); ++j)
            {
                if (!r[j].is_number_unsigned())
                    throw ParseError(where + ".route[" + std::to_string(j) + "]: expected a link id");
                e.route.push_back(r[j].get<LinkId>());
            }
            flow.entries.push_back(std::move(e));
        }
        normalize_flow(flow);
        validate_flow(flow, net);
        return flow;
    }

    inline void save_flow(const FlowSpec &flow, const std::filesystem::path &path)
    {
        json_detail::write_text(path, flow_to_json(flow).dump() + "\n");
    }

    inline FlowSpec load_flow(const std::filesystem::path &path, const RoadNetwork &net)
    {
        const std::string text = json_detail::read_text(path);
        return flow_from_json(json_detail::parse(text, path.string()), net, path.string());
    }

    struct ArrivalProfile
    {
        double bin_width_s = 300.0;
        // One value per bin, or a single value applied to every bin.
        std::vector<double> mean_per_bin{0.0};
        std::vector<double> std_per_bin{0.0};
        double duration_s = 3600.0;
        // Per source link / per sink link weights in source_links()/sink_links() order; empty = uniform.
        std::vector<double> origin_weights;
        std::vector<double> destination_weights;

        std::size_t bins() const
        {
            return static_cast<std::size_t>(std::ceil(duration_s / bin_width_s - 1e-9));
        }

        double mean_at(std::size_t bin) const { return mean_per_bin.size() == 1 ? mean_per_bin[0] : mean_per_bin.at(bin); }
        double std_at(std::size_t bin) const { return std_per_bin.size() == 1 ? std_per_bin[0] : std_per_bin.at(bin); }

        void validate() const
        {
            if (!(bin_width_s > 0.0) || !std::isfinite(bin_width_s))
                throw InvalidConfigError("arrival profile: bin_width_s must be positive");
            if (!(duration_s >= 0.0) || !std::isfinite(duration_s))
                throw InvalidConfigError("arrival profile: duration_s must be non-negative");
            if (mean_per_bin.empty() || std_per_bin.empty())
                throw InvalidConfigError("arrival profile: mean and std must be given");
            const std::size_t b = bins();
            for (const auto *series : {&mean_per_bin, &std_per_bin})
            {
                if (series->size() != 1 && series->size() != b)
                    throw InvalidConfigError("arrival profile: per-bin series must have 1 or " + std::to_string(b) + " values");
                for (double v : *series)
                    if (!(v >= 0.0) || !std::isfinite(v))
                        throw InvalidConfigError("arrival profile: mean and std must be finite and >= 0");
            }
            for (const auto *w : {&origin_weights, &destination_weights})
                for (double v : *w)
                    if (!(v >= 0.0) || !std::isfinite(v))
                        throw InvalidConfigError("arrival profile: OD weights must be finite and >= 0");
        }
    };

    /// Fastest route from each source link to each sink link, U-turns excluded.
    /// Entry [i][j] is empty when sink j is unreachable from source i.
    inline std::vector<std::vector<std::vector<LinkId>>> shortest_routes(const RoadNetwork &net)
    {
        const auto sources = net.source_links();
        const auto sinks = net.sink_links();
        const std::size_t nl = net.links().size();

        std::vector<std::vector<LinkId>> successors(nl);
        for (const Link &l : net.links())
        {
            if (!net.is_intersection(l.to))
                continue;
            for (std::size_t s = 0; s < kSides; ++s)
            {
                const LinkId next = net.out_link(l.to, side_from_index(s));
                if (net.movement(l.id, next))
                    successors[l.id].push_back(next);
            }
        }

        std::vector<std::vector<std::vector<LinkId>>> routes(sources.size(), std::vector<std::vector<LinkId>>(sinks.size()));
        constexpr double kInf = std::numeric_limits<double>::infinity();
        constexpr LinkId kNone = static_cast<LinkId>(-1);
        for (std::size_t si = 0; si < sources.size(); ++si)
        {
            std::vector<double> dist(nl, kInf);
            std::vector<LinkId> prev(nl, kNone);
            using Item = std::pair<double, LinkId>;
            std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
            dist[sources[si]] = net.link(sources[si]).travel_time_s;
            pq.emplace(dist[sources[si]], sources[si]);
            while (!pq.empty())
            {
                const auto [d, u] = pq.top();
                pq.pop();
                if (d > dist[u])
                    continue;
                for (LinkId v : successors[u])
                {
                    const double nd = d + net.link(v).travel_time_s;
                    // Equal-cost ties resolve to the lower predecessor id so routes are reproducible.
                    if (nd < dist[v] || (nd == dist[v] && u < prev[v]))
                    {
                        const bool improved = nd < dist[v];
                        dist[v] = nd;
                        prev[v] = u;
                        if (improved)
                            pq.emplace(nd, v);
                    }
                }
            }
            for (std::size_t ti = 0; ti < sinks.size(); ++ti)
            {
                if (dist[sinks[ti]] == kInf)
                    continue;
                std::vector<LinkId> path;
                for (LinkId at = sinks[ti]; at != kNone; at = prev[at])
                    path.push_back(at);
                std::reverse(path.begin(), path.end());
                routes[si][ti] = std::move(path);
            }
        }
        return routes;
    }

    /// Synthetic vehicle flow. Per bin the vehicle count is a normal draw truncated at 0 and
    /// rounded; entry instants are uniform within the bin; each vehicle picks a (source, sink)
    /// pair with probability proportional to the product of the OD weights and follows the
    /// fastest legal route.
    inline FlowSpec generate_flow(const ArrivalProfile &profile, const RoadNetwork &net, std::uint64_t seed)
    {
        profile.validate();
        const auto sources = net.source_links();
        const auto sinks = net.sink_links();
        if (sources.empty() || sinks.empty())
            throw GenerationError("generate_flow: network has no boundary sources or sinks");
        if (!profile.origin_weights.empty() && profile.origin_weights.size() != sources.size())
            throw InvalidConfigError("generate_flow: origin_weights must have one entry per source link");
        if (!profile.destination_weights.empty() && profile.destination_weights.size() != sinks.size())
            throw InvalidConfigError("generate_flow: destination_weights must have one entry per sink link");

        const auto routes = shortest_routes(net);
        struct Pair
        {
            const std::vector<LinkId> *route;
            double cumulative;
        };
        std::vector<Pair> pairs;
        double total = 0.0;
        for (std::size_t s = 0; s < sources.size(); ++s)
            for (std::size_t t = 0; t < sinks.size(); ++t)
            {
                if (routes[s][t].empty())
                    continue;
                const double w = (profile.origin_weights.empty() ? 1.0 : profile.origin_weights[s]) *
                                 (profile.destination_weights.empty() ? 1.0 : profile.destination_weights[t]);
                if (w <= 0.0)
                    continue;
                total += w;
                pairs.push_back(Pair{&routes[s][t], total});
            }
        if (pairs.empty())
            throw GenerationError("generate_flow: no reachable origin/destination pair has positive weight");

        Rng rng(seed);
        FlowSpec flow;
        const std::size_t bins = profile.bins();
        for (std::size_t b = 0; b < bins; ++b)
        {
            const double lo = static_cast<double>(b) * profile.bin_width_s;
            const double hi = std::min(lo + profile.bin_width_s, profile.duration_s);
            const double sd = profile.std_at(b);
            const double draw = sd > 0.0 ? rng.normal(profile.mean_at(b), sd) : profile.mean_at(b);
            const auto n = static_cast<std::size_t>(std::llround(std::max(0.0, draw)));
            for (std::size_t i = 0; i < n; ++i)
            {
                FlowEntry e;
                e.t = rng.uniform(lo, hi);
                const double pick = rng.uniform01() * total;
                auto it = std::upper_bound(pairs.begin(), pairs.end(), pick,
                                           [](double v, const Pair &p)
                                           { return v < p.cumulative; });
                if (it == pairs.end())
                    it = std::prev(pairs.end());
                e.route = *it->route;
                flow.entries.push_back(std::move(e));
            }
        }
        normalize_flow(flow);
        return flow;
    }

} // namespace iacolight

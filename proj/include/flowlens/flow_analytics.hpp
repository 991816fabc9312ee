#ifndef FLOWLENS_FLOW_ANALYTICS_HPP
#define FLOWLENS_FLOW_ANALYTICS_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "core_model.hpp"
#include "extraction.hpp"

namespace flowlens
{

class IncompleteMetricsError : public InvalidArgument
{
public:
    IncompleteMetricsError(std::string sequence_id)
        : InvalidArgument("no metric value for sequence '" + sequence_id + "'"), sequence_id_(std::move(sequence_id))
    {}
    const std::string& sequence_id() const noexcept { return sequence_id_; }

private:
    std::string sequence_id_;
};

struct FlowStats
{
    ElementPath   path;
    std::size_t   count = 0;
    double        share = 0.0; // of all unfiltered flows of the task
    double        avg_duration = 0.0;
    std::size_t   total_interactions_per_seq = 0;
    std::vector< double >       edge_mean_dt;
    std::map< Gesture, double > gesture_distribution;
    std::vector< std::string >  sequence_ids;

    bool operator==(const FlowStats&) const = default;
};

/// Partitions sequences by exact element path. Flows come out by count
/// descending, ties broken by lexicographic path.
inline std::vector< Flow > group_into_flows(const SequenceSet& set)
{
    std::map< ElementPath, std::vector< Sequence > > groups;
    for (const auto& s : set.sequences)
        groups[path_of(s)].push_back(s);
    std::vector< Flow > flows;
    flows.reserve(groups.size());
    for (auto& [path, seqs] : groups)
        flows.push_back({path, std::move(seqs)});
    std::stable_sort(flows.begin(), flows.end(),
                     [](const Flow& a, const Flow& b) { return a.sequences.size() > b.sequences.size(); });
    return flows;
}

inline std::vector< FlowStats > flow_statistics(const std::vector< Flow >& flows)
{
    std::size_t total = 0;
    for (const auto& f : flows)
        total += f.sequences.size();

    std::vector< FlowStats > out;
    out.reserve(flows.size());
    for (const auto& f : flows)
    {
        FlowStats st;
        st.path                       = f.path;
        st.count                      = f.sequences.size();
        st.share                      = total ? static_cast< double >(st.count) / static_cast< double >(total) : 0.0;
        st.total_interactions_per_seq = f.path.size();
        st.edge_mean_dt.assign(f.path.empty() ? 0 : f.path.size() - 1, 0.0);

        std::map< Gesture, std::size_t > gestures;
        std::size_t                      n_interactions = 0;
        double                           duration_sum   = 0.0;
        for (const auto& s : f.sequences)
        {
            duration_sum += static_cast< double >(s.duration());
            for (std::size_t i = 0; i + 1 < s.interactions.size(); ++i)
                st.edge_mean_dt[i] += static_cast< double >(s.interactions[i + 1].t - s.interactions[i].t);
            for (const auto& e : s.interactions)
                ++gestures[e.gesture];
            n_interactions += s.interactions.size();
            st.sequence_ids.push_back(s.sequence_id);
        }
        if (st.count)
        {
            const auto n    = static_cast< double >(st.count);
            st.avg_duration = duration_sum / n;
            for (auto& dt : st.edge_mean_dt)
                dt /= n;
        }
        for (const auto& [g, c] : gestures)
            st.gesture_distribution[g] = static_cast< double >(c) / static_cast< double >(n_interactions);
        out.push_back(std::move(st));
    }
    return out;
}

/// Drops flows below min_support, then keeps the top_n by count. Shares keep
/// their unfiltered denominator.
inline std::vector< FlowStats > apply_flow_filters(std::vector< FlowStats > stats, const FilterSpec& filters)
{
    std::erase_if(stats, [&](const FlowStats& s) { return s.share < filters.min_support; });
    std::stable_sort(stats.begin(), stats.end(), [](const FlowStats& a, const FlowStats& b) {
        return std::tie(b.count, a.path) < std::tie(a.count, b.path);
    });
    if (filters.top_n && stats.size() > *filters.top_n)
        stats.resize(*filters.top_n);
    return stats;
}

// ---------------------------------------------------------------------------
// Sankey

struct SankeyNodeKey
{
    std::size_t depth = 0;
    std::string element_id;

    auto operator<=>(const SankeyNodeKey&) const = default;
};

struct SankeyNode
{
    SankeyNodeKey key;
    std::size_t   count = 0;

    bool operator==(const SankeyNode&) const = default;
};

struct SankeyEdge
{
    SankeyNodeKey from;
    SankeyNodeKey to;
    std::size_t   weight  = 0;
    double        mean_dt = 0.0;

    bool operator==(const SankeyEdge&) const = default;
};

/// Layered DAG of (depth, element) nodes. Nodes and edges are sorted by key.
struct SankeyGraph
{
    std::vector< SankeyNode > nodes;
    std::vector< SankeyEdge > edges;

    const SankeyNode* find_node(const SankeyNodeKey& k) const
    {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), k,
                                   [](const SankeyNode& n, const SankeyNodeKey& key) { return n.key < key; });
        return it != nodes.end() && it->key == k ? &*it : nullptr;
    }
    const SankeyEdge* find_edge(const SankeyNodeKey& from, const SankeyNodeKey& to) const
    {
        for (const auto& e : edges)
            if (e.from == from && e.to == to)
                return &e;
        return nullptr;
    }

    bool operator==(const SankeyGraph&) const = default;
};

inline SankeyGraph build_sankey(const std::vector< FlowStats >& stats)
{
    std::map< SankeyNodeKey, std::size_t > nodes;
    struct EdgeAcc
    {
        std::size_t weight = 0;
        double      dt_sum = 0.0;
    };
    std::map< std::pair< SankeyNodeKey, SankeyNodeKey >, EdgeAcc > edges;

    for (const auto& f : stats)
    {
        for (std::size_t i = 0; i < f.path.size(); ++i)
        {
            SankeyNodeKey here{i, f.path[i]};
            nodes[here] += f.count;
            if (i + 1 < f.path.size())
            {
                auto& e = edges[{here, SankeyNodeKey{i + 1, f.path[i + 1]}}];
                e.weight += f.count;
                e.dt_sum += static_cast< double >(f.count) * f.edge_mean_dt.at(i);
            }
        }
    }

    SankeyGraph g;
    g.nodes.reserve(nodes.size());
    for (auto& [k, c] : nodes)
        g.nodes.push_back({k, c});
    g.edges.reserve(edges.size());
    for (auto& [k, e] : edges)
        g.edges.push_back({k.first, k.second, e.weight, e.weight ? e.dt_sum / static_cast< double >(e.weight) : 0.0});
    return g;
}

// ---------------------------------------------------------------------------
// Box plots

struct BoxPoint
{
    std::string sequence_id;
    double      value = 0.0;

    bool operator==(const BoxPoint&) const = default;
};

struct BoxPlotStats
{
    ElementPath path;
    MetricKind  metric = MetricKind::time_on_task;
    std::size_t n      = 0;
    double      min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
    double      whisker_low = 0, whisker_high = 0;
    std::vector< BoxPoint > outliers;
    std::vector< BoxPoint > points; // every member sequence, in flow order

    bool operator==(const BoxPlotStats&) const = default;
};

/// Quantile by linear interpolation between order statistics at position p*(n-1).
/// Uses selection rather than a full sort.
inline double interpolated_quantile(std::vector< double > values, double p)
{
    if (values.empty())
        throw InvalidArgument("quantile of an empty sample");
    const double      h    = p * static_cast< double >(values.size() - 1);
    const auto        k    = static_cast< std::size_t >(std::floor(h));
    const double      frac = h - static_cast< double >(k);
    auto              kth  = values.begin() + static_cast< std::ptrdiff_t >(k);
    std::nth_element(values.begin(), kth, values.end());
    const double lo = *kth;
    if (frac == 0.0 || k + 1 >= values.size())
        return lo;
    const double hi = *std::min_element(kth + 1, values.end());
    return lo + frac * (hi - lo);
}

inline BoxPlotStats box_from_points(ElementPath path, MetricKind metric, std::vector< BoxPoint > points)
{
    if (points.empty())
        throw InvalidArgument("box plot of an empty flow");
    std::vector< double > values;
    values.reserve(points.size());
    for (const auto& p : points)
        values.push_back(p.value);

    BoxPlotStats b;
    b.path   = std::move(path);
    b.metric = metric;
    b.n      = values.size();
    b.min    = *std::min_element(values.begin(), values.end());
    b.max    = *std::max_element(values.begin(), values.end());
    b.q1     = interpolated_quantile(values, 0.25);
    b.median = interpolated_quantile(values, 0.5);
    b.q3     = interpolated_quantile(values, 0.75);

    const double iqr      = b.q3 - b.q1;
    const double fence_lo = b.q1 - 1.5 * iqr;
    const double fence_hi = b.q3 + 1.5 * iqr;
    // Whiskers reach the most extreme inside-fence points but never retreat
    // inside the box.
    b.whisker_low  = b.q1;
    b.whisker_high = b.q3;
    for (const auto& p : points)
    {
        if (p.value < fence_lo || p.value > fence_hi)
        {
            b.outliers.push_back(p);
            continue;
        }
        b.whisker_low  = std::min(b.whisker_low, p.value);
        b.whisker_high = std::max(b.whisker_high, p.value);
    }
    b.points = std::move(points);
    return b;
}

/// One box per flow over the per-sequence metric values.
inline std::vector< BoxPlotStats > boxplot_stats(const std::vector< Flow >& flows, MetricKind metric,
                                                 const std::unordered_map< std::string, double >& metric_values)
{
    std::vector< BoxPlotStats > out;
    out.reserve(flows.size());
    for (const auto& f : flows)
    {
        std::vector< BoxPoint > points;
        points.reserve(f.sequences.size());
        for (const auto& s : f.sequences)
        {
            auto it = metric_values.find(s.sequence_id);
            if (it == metric_values.end())
                throw IncompleteMetricsError(s.sequence_id);
            points.push_back({s.sequence_id, it->second});
        }
        out.push_back(box_from_points(f.path, metric, std::move(points)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(Json& j, const FlowStats& s)
{
    Json gestures = Json::object();
    for (const auto& [g, frac] : s.gesture_distribution)
        gestures[std::string(to_string(g))] = frac;
    j = Json{{"path", s.path},
             {"count", s.count},
             {"share", s.share},
             {"avg_duration", s.avg_duration},
             {"total_interactions_per_seq", s.total_interactions_per_seq},
             {"edge_mean_dt", s.edge_mean_dt},
             {"gesture_distribution", std::move(gestures)},
             {"sequence_ids", s.sequence_ids}};
}

inline void from_json(const Json& j, FlowStats& s)
{
    s                            = FlowStats{};
    s.path                       = detail::require(j, "path").get< ElementPath >();
    s.count                      = static_cast< std::size_t >(detail::get_int(j, "count"));
    s.share                      = detail::get_number(j, "share");
    s.avg_duration               = detail::get_number(j, "avg_duration");
    s.total_interactions_per_seq = static_cast< std::size_t >(detail::get_int(j, "total_interactions_per_seq"));
    s.edge_mean_dt               = detail::require(j, "edge_mean_dt").get< std::vector< double > >();
    for (const auto& [k, v] : detail::require(j, "gesture_distribution").items())
    {
        Gesture g;
        from_json(Json(k), g);
        s.gesture_distribution[g] = v.get< double >();
    }
    if (auto it = j.find("sequence_ids"); it != j.end())
        s.sequence_ids = it->get< std::vector< std::string > >();
}

inline void to_json(Json& j, const SankeyNodeKey& k) { j = Json{{"depth", k.depth}, {"element_id", k.element_id}}; }
inline void from_json(const Json& j, SankeyNodeKey& k)
{
    k.depth      = static_cast< std::size_t >(detail::get_int(j, "depth"));
    k.element_id = detail::get_string(j, "element_id");
}

inline void to_json(Json& j, const SankeyGraph& g)
{
    Json nodes = Json::array();
    for (const auto& n : g.nodes)
        nodes.push_back({{"depth", n.key.depth}, {"element_id", n.key.element_id}, {"count", n.count}});
    Json edges = Json::array();
    for (const auto& e : g.edges)
        edges.push_back({{"from", e.from}, {"to", e.to}, {"weight", e.weight}, {"mean_dt", e.mean_dt}});
    j = Json{{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

inline void from_json(const Json& j, SankeyGraph& g)
{
    g = SankeyGraph{};
    for (const auto& n : detail::require(j, "nodes"))
        g.nodes.push_back({n.get< SankeyNodeKey >(), static_cast< std::size_t >(detail::get_int(n, "count"))});
    for (const auto& e : detail::require(j, "edges"))
        g.edges.push_back({detail::require(e, "from").get< SankeyNodeKey >(),
                           detail::require(e, "to").get< SankeyNodeKey >(),
                           static_cast< std::size_t >(detail::get_int(e, "weight")), detail::get_number(e, "mean_dt")});
}

inline void to_json(Json& j, const BoxPoint& p) { j = Json{{"sequence_id", p.sequence_id}, {"value", p.value}}; }
inline void from_json(const Json& j, BoxPoint& p)
{
    p.sequence_id = detail::get_string(j, "sequence_id");
    p.value       = detail::get_number(j, "value");
}

inline void to_json(Json& j, const BoxPlotStats& b)
{
    j = Json{{"path", b.path},
             {"metric", b.metric},
             {"n", b.n},
             {"min", b.min},
             {"q1", b.q1},
             {"median", b.median},
             {"q3", b.q3},
             {"max", b.max},
             {"whisker_low", b.whisker_low},
             {"whisker_high", b.whisker_high},
             {"outliers", b.outliers},
             {"points", b.points}};
}

inline void from_json(const Json& j, BoxPlotStats& b)
{
    b.path         = detail::require(j, "path").get< ElementPath >();
    b.metric       = detail::require(j, "metric").get< MetricKind >();
    b.n            = static_cast< std::size_t >(detail::get_int(j, "n"));
    b.min          = detail::get_number(j, "min");
    b.q1           = detail::get_number(j, "q1");
    b.median       = detail::get_number(j, "median");
    b.q3           = detail::get_number(j, "q3");
    b.max          = detail::get_number(j, "max");
    b.whisker_low  = detail::get_number(j, "whisker_low");
    b.whisker_high = detail::get_number(j, "whisker_high");
    b.outliers     = detail::require(j, "outliers").get< std::vector< BoxPoint > >();
    b.points       = detail::require(j, "points").get< std::vector< BoxPoint > >();
}

} // namespace flowlens

#endif // FLOWLENS_FLOW_ANALYTICS_HPP

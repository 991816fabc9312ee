#ifndef FLOWLENS_GLANCE_METRICS_HPP
#define FLOWLENS_GLANCE_METRICS_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "core_model.hpp"

namespace flowlens
{

/// Off-road glances strictly longer than this count as long glances.
inline constexpr DurationMs long_glance_threshold_ms = 2000;

inline constexpr DurationMs default_timeline_margin_ms = 5000;

/// Closed time window [lo, hi] in ms.
struct TimeWindow
{
    TimestampMs lo = 0;
    TimestampMs hi = 0;

    DurationMs length() const noexcept { return hi - lo; }
    bool       operator==(const TimeWindow&) const = default;
};

struct ClippedGlance
{
    Aoi         aoi = Aoi::road;
    TimestampMs start = 0;
    DurationMs  duration = 0;
    DurationMs  original_duration = 0;

    bool operator==(const ClippedGlance&) const = default;
};

/// Intersects each glance with the window, keeping those with positive overlap.
/// Glances must be sorted by start and non-overlapping.
inline std::vector< ClippedGlance > clip_glances_to_window(std::span< const GlanceEvent > glances, TimeWindow window)
{
    std::vector< ClippedGlance > out;
    if (window.hi < window.lo)
        throw InvalidArgument("window lo must not exceed hi");
    // Non-overlapping and start-sorted means ends are sorted too.
    auto it = std::upper_bound(glances.begin(), glances.end(), window.lo,
                               [](TimestampMs t, const GlanceEvent& g) { return t < g.t_end(); });
    for (; it != glances.end() && it->t_start < window.hi; ++it)
    {
        const auto lo = std::max(it->t_start, window.lo);
        const auto hi = std::min(it->t_end(), window.hi);
        if (hi > lo)
            out.push_back({it->aoi, lo, hi - lo, it->duration});
    }
    return out;
}

struct GlanceMetrics
{
    std::size_t                glance_count_offroad          = 0;
    DurationMs                 total_glance_duration_offroad = 0;
    std::optional< double >    mean_glance_duration_offroad;
    std::size_t                long_glance_count = 0;

    bool operator==(const GlanceMetrics&) const = default;
};

inline GlanceMetrics sequence_glance_metrics(const Sequence& sequence, std::span< const GlanceEvent > glances,
                                             DurationMs long_threshold = long_glance_threshold_ms)
{
    GlanceMetrics m;
    for (const auto& c : clip_glances_to_window(glances, {sequence.t_first, sequence.t_last}))
    {
        if (!is_offroad(c.aoi))
            continue;
        ++m.glance_count_offroad;
        m.total_glance_duration_offroad += c.duration;
        if (c.duration > long_threshold)
            ++m.long_glance_count;
    }
    if (m.glance_count_offroad)
        m.mean_glance_duration_offroad = static_cast< double >(m.total_glance_duration_offroad) /
                                         static_cast< double >(m.glance_count_offroad);
    return m;
}

/// Plain mean of the speed samples inside [t_first, t_last]; samples must be time-sorted.
inline std::optional< double > sequence_driving_context(const Sequence& sequence, std::span< const DrivingSample > samples)
{
    auto lo = std::lower_bound(samples.begin(), samples.end(), sequence.t_first,
                               [](const DrivingSample& s, TimestampMs t) { return s.t < t; });
    double      sum = 0.0;
    std::size_t n   = 0;
    for (; lo != samples.end() && lo->t <= sequence.t_last; ++lo, ++n)
        sum += lo->speed;
    if (n == 0)
        return std::nullopt;
    return sum / static_cast< double >(n);
}

struct SequenceMetrics
{
    std::string             sequence_id;
    DurationMs              time_on_task   = 0;
    std::size_t             n_interactions = 0;
    std::size_t             glance_count_offroad          = 0;
    DurationMs              total_glance_duration_offroad = 0;
    std::optional< double > mean_glance_duration_offroad;
    std::size_t             long_glance_count = 0;
    std::optional< double > mean_speed;

    bool operator==(const SequenceMetrics&) const = default;
};

inline SequenceMetrics compute_sequence_metrics(const Sequence& sequence, const TripData& trip)
{
    SequenceMetrics m;
    m.sequence_id    = sequence.sequence_id;
    m.time_on_task   = sequence.t_last - sequence.t_first;
    m.n_interactions = sequence.interactions.size();

    const auto g                    = sequence_glance_metrics(sequence, trip.glances);
    m.glance_count_offroad          = g.glance_count_offroad;
    m.total_glance_duration_offroad = g.total_glance_duration_offroad;
    m.mean_glance_duration_offroad  = g.mean_glance_duration_offroad;
    m.long_glance_count             = g.long_glance_count;
    m.mean_speed                    = sequence_driving_context(sequence, trip.driving);
    return m;
}

/// The metric as a plain number; empty for an undefined mean.
inline std::optional< double > metric_value(const SequenceMetrics& m, MetricKind kind)
{
    switch (kind)
    {
    case MetricKind::time_on_task: return static_cast< double >(m.time_on_task);
    case MetricKind::n_interactions: return static_cast< double >(m.n_interactions);
    case MetricKind::glance_count_offroad: return static_cast< double >(m.glance_count_offroad);
    case MetricKind::total_glance_duration_offroad: return static_cast< double >(m.total_glance_duration_offroad);
    case MetricKind::mean_glance_duration_offroad: return m.mean_glance_duration_offroad;
    case MetricKind::long_glance_count: return static_cast< double >(m.long_glance_count);
    case MetricKind::mean_speed: return m.mean_speed;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Sequence detail timeline

struct InteractionMarker
{
    TimestampMs t = 0;
    std::string element_id;
    Gesture     gesture = Gesture::tap;

    bool operator==(const InteractionMarker&) const = default;
};

struct DrivingPoint
{
    TimestampMs t              = 0;
    double      speed          = 0.0;
    double      steering_angle = 0.0;

    bool operator==(const DrivingPoint&) const = default;
};

struct SequenceTimeline
{
    std::string                                   sequence_id;
    TimeWindow                                    window;
    std::map< Aoi, std::vector< ClippedGlance > > glance_lanes;
    std::vector< DrivingPoint >                   driving_series;
    std::vector< InteractionMarker >              interaction_markers;

    bool operator==(const SequenceTimeline&) const = default;
};

inline std::optional< TimestampMs > earliest_record(const TripData& trip)
{
    std::optional< TimestampMs > t;
    auto consider = [&](TimestampMs v) { t = t ? std::min(*t, v) : v; };
    if (!trip.interactions.empty())
        consider(trip.interactions.front().t);
    if (!trip.glances.empty())
        consider(trip.glances.front().t_start);
    if (!trip.driving.empty())
        consider(trip.driving.front().t);
    return t;
}

inline SequenceTimeline build_timeline(const Sequence& sequence, const TripData& trip,
                                       DurationMs margin = default_timeline_margin_ms)
{
    if (margin < 0)
        throw InvalidArgument("timeline margin must be non-negative");
    SequenceTimeline tl;
    tl.sequence_id = sequence.sequence_id;
    tl.window      = {sequence.t_first - margin, sequence.t_last + margin};
    if (auto first = earliest_record(trip))
        tl.window.lo = std::max(tl.window.lo, std::min(*first, sequence.t_first));

    for (auto aoi : all_aois)
        tl.glance_lanes[aoi];
    for (const auto& c : clip_glances_to_window(trip.glances, tl.window))
        tl.glance_lanes[c.aoi].push_back(c);

    for (const auto& d : trip.driving)
        if (d.t >= tl.window.lo && d.t <= tl.window.hi)
            tl.driving_series.push_back({d.t, d.speed, d.steering_angle});

    for (const auto& e : sequence.interactions)
        tl.interaction_markers.push_back({e.t, e.element_id, e.gesture});
    return tl;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(Json& j, const TimeWindow& w) { j = Json::array({w.lo, w.hi}); }
inline void from_json(const Json& j, TimeWindow& w)
{
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
        throw SchemaError("window", "window must be [t_lo, t_hi]");
    w = {j[0].get< TimestampMs >(), j[1].get< TimestampMs >()};
}

inline void to_json(Json& j, const ClippedGlance& c)
{
    j = Json{{"aoi", c.aoi}, {"start", c.start}, {"duration", c.duration}, {"original_duration", c.original_duration}};
}
inline void from_json(const Json& j, ClippedGlance& c)
{
    c.aoi               = detail::require(j, "aoi").get< Aoi >();
    c.start             = detail::get_int(j, "start");
    c.duration          = detail::get_int(j, "duration");
    c.original_duration = detail::get_int(j, "original_duration");
}

namespace detail
{
inline Json optional_number(const std::optional< double >& v) { return v ? Json(*v) : Json(nullptr); }
inline std::optional< double > read_optional_number(const Json& j, const char* field)
{
    auto it = j.find(field);
    if (it == j.end() || it->is_null())
        return std::nullopt;
    return get_number(j, field);
}
} // namespace detail

inline void to_json(Json& j, const SequenceMetrics& m)
{
    j = Json{{"sequence_id", m.sequence_id},
             {"time_on_task", m.time_on_task},
             {"n_interactions", m.n_interactions},
             {"glance_count_offroad", m.glance_count_offroad},
             {"total_glance_duration_offroad", m.total_glance_duration_offroad},
             {"mean_glance_duration_offroad", detail::optional_number(m.mean_glance_duration_offroad)},
             {"long_glance_count", m.long_glance_count},
             {"mean_speed", detail::optional_number(m.mean_speed)}};
}
inline void from_json(const Json& j, SequenceMetrics& m)
{
    m.sequence_id                   = detail::get_string(j, "sequence_id");
    m.time_on_task                  = detail::get_int(j, "time_on_task");
    m.n_interactions                = static_cast< std::size_t >(detail::get_int(j, "n_interactions"));
    m.glance_count_offroad          = static_cast< std::size_t >(detail::get_int(j, "glance_count_offroad"));
    m.total_glance_duration_offroad = detail::get_int(j, "total_glance_duration_offroad");
    m.mean_glance_duration_offroad  = detail::read_optional_number(j, "mean_glance_duration_offroad");
    m.long_glance_count             = static_cast< std::size_t >(detail::get_int(j, "long_glance_count"));
    m.mean_speed                    = detail::read_optional_number(j, "mean_speed");
}

inline void to_json(Json& j, const SequenceTimeline& tl)
{
    Json lanes = Json::object();
    for (const auto& [aoi, list] : tl.glance_lanes)
        lanes[std::string(to_string(aoi))] = list;
    Json series = Json::array();
    for (const auto& d : tl.driving_series)
        series.push_back({{"t", d.t}, {"speed", d.speed}, {"steering_angle", d.steering_angle}});
    Json markers = Json::array();
    for (const auto& m : tl.interaction_markers)
        markers.push_back({{"t", m.t}, {"element_id", m.element_id}, {"gesture", m.gesture}});
    j = Json{{"sequence_id", tl.sequence_id},
             {"window", tl.window},
             {"glance_lanes", std::move(lanes)},
             {"driving_series", std::move(series)},
             {"interaction_markers", std::move(markers)}};
}
inline void from_json(const Json& j, SequenceTimeline& tl)
{
    tl             = SequenceTimeline{};
    tl.sequence_id = detail::get_string(j, "sequence_id");
    tl.window      = detail::require(j, "window").get< TimeWindow >();
    for (const auto& [k, v] : detail::require(j, "glance_lanes").items())
    {
        Aoi aoi;
        from_json(Json(k), aoi);
        tl.glance_lanes[aoi] = v.get< std::vector< ClippedGlance > >();
    }
    for (const auto& d : detail::require(j, "driving_series"))
        tl.driving_series.push_back(
            {detail::get_int(d, "t"), detail::get_number(d, "speed"), detail::get_number(d, "steering_angle")});
    for (const auto& m : detail::require(j, "interaction_markers"))
        tl.interaction_markers.push_back({detail::get_int(m, "t"), detail::get_string(m, "element_id"),
                                          detail::require(m, "gesture").get< Gesture >()});
}

} // namespace flowlens

#endif // FLOWLENS_GLANCE_METRICS_HPP

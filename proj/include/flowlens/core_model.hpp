#ifndef FLOWLENS_CORE_MODEL_HPP
#define FLOWLENS_CORE_MODEL_HPP

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace flowlens
{

using Json = nlohmann::json;

/// Milliseconds since the Unix epoch. Integer so interval arithmetic is exact.
using TimestampMs = std::int64_t;
using DurationMs  = std::int64_t;

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error
{
public:
    using Error::Error;
};

/// A required field is missing, has the wrong JSON type, or breaks a record invariant.
class SchemaError : public Error
{
public:
    SchemaError(std::string field, const std::string& what)
        : Error(what), field_(std::move(field))
    {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// An enumerated field carries a value outside its closed vocabulary.
class UnsupportedValueError : public SchemaError
{
public:
    using SchemaError::SchemaError;
};

// ---------------------------------------------------------------------------
// Closed vocabularies

enum class Gesture
{
    tap,
    double_tap,
    long_press,
    drag,
    swipe
};

enum class Aoi
{
    road,
    center_stack,
    other
};

enum class MetricKind
{
    time_on_task,
    n_interactions,
    glance_count_offroad,
    total_glance_duration_offroad,
    mean_glance_duration_offroad,
    long_glance_count,
    mean_speed
};

inline constexpr std::array all_gestures{Gesture::tap, Gesture::double_tap, Gesture::long_press,
                                         Gesture::drag, Gesture::swipe};
inline constexpr std::array all_aois{Aoi::road, Aoi::center_stack, Aoi::other};
inline constexpr std::array all_metric_kinds{
    MetricKind::time_on_task,         MetricKind::n_interactions,
    MetricKind::glance_count_offroad, MetricKind::total_glance_duration_offroad,
    MetricKind::mean_glance_duration_offroad, MetricKind::long_glance_count,
    MetricKind::mean_speed};

constexpr std::string_view to_string(Gesture g) noexcept
{
    switch (g)
    {
    case Gesture::tap: return "tap";
    case Gesture::double_tap: return "double_tap";
    case Gesture::long_press: return "long_press";
    case Gesture::drag: return "drag";
    case Gesture::swipe: return "swipe";
    }
    return "?";
}

constexpr std::string_view to_string(Aoi a) noexcept
{
    switch (a)
    {
    case Aoi::road: return "road";
    case Aoi::center_stack: return "center_stack";
    case Aoi::other: return "other";
    }
    return "?";
}

constexpr std::string_view to_string(MetricKind m) noexcept
{
    switch (m)
    {
    case MetricKind::time_on_task: return "time_on_task";
    case MetricKind::n_interactions: return "n_interactions";
    case MetricKind::glance_count_offroad: return "glance_count_offroad";
    case MetricKind::total_glance_duration_offroad: return "total_glance_duration_offroad";
    case MetricKind::mean_glance_duration_offroad: return "mean_glance_duration_offroad";
    case MetricKind::long_glance_count: return "long_glance_count";
    case MetricKind::mean_speed: return "mean_speed";
    }
    return "?";
}

namespace detail
{
template < typename Enum, std::size_t N >
std::optional< Enum > parse_enum(std::string_view text, const std::array< Enum, N >& values)
{
    for (auto v : values)
        if (to_string(v) == text)
            return v;
    return std::nullopt;
}
} // namespace detail

inline std::optional< Gesture > parse_gesture(std::string_view s) { return detail::parse_enum(s, all_gestures); }
inline std::optional< Aoi > parse_aoi(std::string_view s) { return detail::parse_enum(s, all_aois); }
inline std::optional< MetricKind > parse_metric_kind(std::string_view s)
{
    return detail::parse_enum(s, all_metric_kinds);
}

constexpr bool is_offroad(Aoi a) noexcept { return a != Aoi::road; }

// ---------------------------------------------------------------------------
// Calendar date, kept apart from timestamps (no timezone logic anywhere).

struct Date
{
    int      year  = 1970;
    unsigned month = 1;
    unsigned day   = 1;

    auto operator<=>(const Date&) const = default;
};

inline std::optional< Date > parse_date(std::string_view s)
{
    if (s.size() != 10 || s[4] != '-' || s[7] != '-')
        return std::nullopt;
    auto field = [&](std::size_t pos, std::size_t len, auto& out) {
        auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
        return ec == std::errc{} && p == s.data() + pos + len;
    };
    Date d;
    if (!field(0, 4, d.year) || !field(5, 2, d.month) || !field(8, 2, d.day))
        return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{d.year}, std::chrono::month{d.month},
                                          std::chrono::day{d.day}};
    if (!ymd.ok())
        return std::nullopt;
    return d;
}

inline std::string to_string(const Date& d)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", d.year, d.month, d.day);
    return buf;
}

// ---------------------------------------------------------------------------
// Records

struct InteractionEvent
{
    std::string trip_id;
    TimestampMs t = 0;
    std::string element_id;
    Gesture     gesture = Gesture::tap;
    std::string screen_id;

    bool operator==(const InteractionEvent&) const = default;
};

struct GlanceEvent
{
    std::string trip_id;
    TimestampMs t_start  = 0;
    DurationMs  duration = 0;
    Aoi         aoi      = Aoi::road;

    TimestampMs t_end() const noexcept { return t_start + duration; }
    bool        operator==(const GlanceEvent&) const = default;
};

struct DrivingSample
{
    std::string trip_id;
    TimestampMs t              = 0;
    double      speed          = 0.0; // m/s
    double      steering_angle = 0.0; // degrees

    bool operator==(const DrivingSample&) const = default;
};

struct TripMeta
{
    std::string trip_id;
    std::string vehicle_id;
    std::string car_model;
    std::string software_version;
    std::string screen_size;
    Date        date;

    bool operator==(const TripMeta&) const = default;
};

struct ConceptEntry
{
    std::string element_id;
    std::string label;
    std::string screen_id;
    std::string description;

    bool operator==(const ConceptEntry&) const = default;
};

/// All records of one trip, each stream sorted by timestamp.
struct TripData
{
    TripMeta                        meta;
    std::vector< InteractionEvent > interactions;
    std::vector< GlanceEvent >      glances;
    std::vector< DrivingSample >    driving;

    bool operator==(const TripData&) const = default;
};

struct TaskDefinition
{
    std::string start_element;
    std::string end_element;

    bool operator==(const TaskDefinition&) const = default;
};

inline void validate(const TaskDefinition& task)
{
    if (task.start_element.empty() || task.end_element.empty())
        throw InvalidArgument("task start and end elements must be nonempty");
    if (task.start_element == task.end_element)
        throw InvalidArgument("task start and end elements must differ");
}

/// One task execution inside one trip. first_index/last_index address the
/// trip's sorted interaction list; the id is derived from them and the
/// snapshot so drill-down links stay stable across identical analyses.
struct Sequence
{
    std::string                     sequence_id;
    std::string                     trip_id;
    std::size_t                     first_index = 0;
    std::size_t                     last_index  = 0;
    std::vector< InteractionEvent > interactions;
    TimestampMs                     t_first = 0;
    TimestampMs                     t_last  = 0;

    DurationMs duration() const noexcept { return t_last - t_first; }
    bool       operator==(const Sequence&) const = default;
};

using ElementPath = std::vector< std::string >;

struct Flow
{
    ElementPath             path;
    std::vector< Sequence > sequences;
};

struct DateRange
{
    Date from;
    Date to;

    bool operator==(const DateRange&) const = default;
};

struct FilterSpec
{
    std::optional< std::set< std::string > > car_models;
    std::optional< std::set< std::string > > software_versions;
    std::optional< std::set< std::string > > screen_sizes;
    std::optional< DateRange >               date_range;
    double                                   min_support = 0.0;
    std::optional< std::size_t >             top_n;

    bool operator==(const FilterSpec&) const = default;
};

inline void validate(const FilterSpec& f)
{
    if (!(f.min_support >= 0.0 && f.min_support <= 1.0))
        throw InvalidArgument("min_support must lie in [0, 1]");
    if (f.date_range && f.date_range->to < f.date_range->from)
        throw InvalidArgument("date_range.from must not be after date_range.to");
    if (f.top_n && *f.top_n == 0)
        throw InvalidArgument("top_n must be positive");
}

/// True when the trip's metadata passes every trip-level filter.
inline bool passes_trip_filters(const TripMeta& meta, const FilterSpec& f)
{
    auto in = [](const std::optional< std::set< std::string > >& s, const std::string& v) {
        return !s || s->contains(v);
    };
    if (!in(f.car_models, meta.car_model) || !in(f.software_versions, meta.software_version) ||
        !in(f.screen_sizes, meta.screen_size))
        return false;
    if (f.date_range && (meta.date < f.date_range->from || f.date_range->to < meta.date))
        return false;
    return true;
}

// ---------------------------------------------------------------------------
// Operations

inline ElementPath path_of(const Sequence& sequence)
{
    ElementPath path;
    path.reserve(sequence.interactions.size());
    for (const auto& i : sequence.interactions)
        path.push_back(i.element_id);
    return path;
}

struct Violation
{
    std::string record; // human-readable locator of the offending record
    std::string rule;

    bool operator==(const Violation&) const = default;
};

/// Checks every record invariant of one trip. Violations are data, never thrown.
inline std::vector< Violation > validate_trip(const TripData& trip)
{
    std::vector< Violation > out;
    const auto&              id = trip.meta.trip_id;
    auto add = [&](std::string record, std::string rule) { out.push_back({std::move(record), std::move(rule)}); };

    if (id.empty())
        add("trip", "trip_id nonempty");

    for (std::size_t i = 0; i < trip.interactions.size(); ++i)
    {
        const auto& e   = trip.interactions[i];
        auto        loc = "interaction[" + std::to_string(i) + "]";
        if (e.trip_id != id)
            add(loc, "trip_id matches trip");
        if (e.t < 0)
            add(loc, "t >= 0");
        if (e.element_id.empty())
            add(loc, "element_id nonempty");
    }

    std::vector< std::size_t > order(trip.glances.size());
    for (std::size_t i = 0; i < order.size(); ++i)
    {
        order[i]        = i;
        const auto& g   = trip.glances[i];
        auto        loc = "glance[" + std::to_string(i) + "]";
        if (g.trip_id != id)
            add(loc, "trip_id matches trip");
        if (g.t_start < 0)
            add(loc, "t_start >= 0");
        if (g.duration <= 0)
            add(loc, "duration > 0");
    }
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return trip.glances[a].t_start < trip.glances[b].t_start;
    });
    for (std::size_t k = 1; k < order.size(); ++k)
    {
        const auto& prev = trip.glances[order[k - 1]];
        const auto& cur  = trip.glances[order[k]];
        if (cur.t_start < prev.t_end())
            add("glance[" + std::to_string(order[k - 1]) + "],glance[" + std::to_string(order[k]) + "]",
                "glance overlap");
    }

    for (std::size_t i = 0; i < trip.driving.size(); ++i)
    {
        const auto& d   = trip.driving[i];
        auto        loc = "driving[" + std::to_string(i) + "]";
        if (d.trip_id != id)
            add(loc, "trip_id matches trip");
        if (d.t < 0)
            add(loc, "t >= 0");
        if (!(d.speed >= 0.0))
            add(loc, "speed >= 0");
    }
    return out;
}

/// Returns the broken rules of a sequence against its task; empty when valid.
inline std::vector< std::string > check_sequence(const Sequence& s, const TaskDefinition& task)
{
    std::vector< std::string > broken;
    const auto&                xs = s.interactions;
    if (xs.size() < 2)
        broken.emplace_back("at least two interactions");
    if (xs.empty())
        return broken;
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (xs[i].t < xs[i - 1].t)
        {
            broken.emplace_back("interactions sorted by t");
            break;
        }
    if (xs.front().element_id != task.start_element)
        broken.emplace_back("first element is task start");
    if (xs.back().element_id != task.end_element)
        broken.emplace_back("last element is task end");
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (xs[i].element_id == task.start_element)
        {
            broken.emplace_back("start element only at position 0");
            break;
        }
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
        if (xs[i].element_id == task.end_element)
        {
            broken.emplace_back("end element only at last position");
            break;
        }
    if (s.t_first != xs.front().t || s.t_last != xs.back().t)
        broken.emplace_back("t_first/t_last match interactions");
    for (const auto& e : xs)
        if (e.trip_id != s.trip_id)
        {
            broken.emplace_back("interactions belong to trip");
            break;
        }
    return broken;
}

// ---------------------------------------------------------------------------
// JSON. Field names are the log-format names; enums serialize as their names.

namespace detail
{
inline const Json& require(const Json& j, const char* field)
{
    if (!j.is_object())
        throw SchemaError("", "record is not a JSON object");
    auto it = j.find(field);
    if (it == j.end() || it->is_null())
        throw SchemaError(field, std::string("missing field '") + field + "'");
    return *it;
}

inline std::string get_string(const Json& j, const char* field)
{
    const auto& v = require(j, field);
    if (!v.is_string())
        throw SchemaError(field, std::string("field '") + field + "' must be a string");
    return v.get< std::string >();
}

inline std::int64_t get_int(const Json& j, const char* field)
{
    const auto& v = require(j, field);
    if (v.is_number_integer())
        return v.get< std::int64_t >();
    throw SchemaError(field, std::string("field '") + field + "' must be an integer");
}

inline double get_number(const Json& j, const char* field)
{
    const auto& v = require(j, field);
    if (!v.is_number())
        throw SchemaError(field, std::string("field '") + field + "' must be a number");
    return v.get< double >();
}

template < typename Enum >
Enum get_enum(const Json& j, const char* field, std::optional< Enum > (*parse)(std::string_view))
{
    auto text = get_string(j, field);
    auto v    = parse(text);
    if (!v)
        throw UnsupportedValueError(field, std::string("unsupported ") + field + " '" + text + "'");
    return *v;
}
} // namespace detail

inline void to_json(Json& j, Gesture g) { j = std::string(to_string(g)); }
inline void to_json(Json& j, Aoi a) { j = std::string(to_string(a)); }
inline void to_json(Json& j, MetricKind m) { j = std::string(to_string(m)); }
inline void to_json(Json& j, const Date& d) { j = to_string(d); }

inline void from_json(const Json& j, Gesture& g)
{
    auto v = j.is_string() ? parse_gesture(j.get< std::string >()) : std::nullopt;
    if (!v)
        throw UnsupportedValueError("gesture", "unsupported gesture " + j.dump());
    g = *v;
}
inline void from_json(const Json& j, Aoi& a)
{
    auto v = j.is_string() ? parse_aoi(j.get< std::string >()) : std::nullopt;
    if (!v)
        throw UnsupportedValueError("aoi", "unsupported aoi " + j.dump());
    a = *v;
}
inline void from_json(const Json& j, MetricKind& m)
{
    auto v = j.is_string() ? parse_metric_kind(j.get< std::string >()) : std::nullopt;
    if (!v)
        throw UnsupportedValueError("metric", "unsupported metric " + j.dump());
    m = *v;
}
inline void from_json(const Json& j, Date& d)
{
    auto v = j.is_string() ? parse_date(j.get< std::string >()) : std::nullopt;
    if (!v)
        throw SchemaError("date", "date must be YYYY-MM-DD, got " + j.dump());
    d = *v;
}

inline void to_json(Json& j, const InteractionEvent& e)
{
    j = Json{{"type", "interaction"}, {"trip_id", e.trip_id},       {"t", e.t},
             {"element_id", e.element_id}, {"gesture", e.gesture}, {"screen_id", e.screen_id}};
}
inline void from_json(const Json& j, InteractionEvent& e)
{
    e.trip_id    = detail::get_string(j, "trip_id");
    e.t          = detail::get_int(j, "t");
    e.element_id = detail::get_string(j, "element_id");
    e.gesture    = detail::get_enum< Gesture >(j, "gesture", &parse_gesture);
    e.screen_id  = detail::get_string(j, "screen_id");
}

inline void to_json(Json& j, const GlanceEvent& g)
{
    j = Json{{"type", "glance"}, {"trip_id", g.trip_id}, {"t_start", g.t_start}, {"duration", g.duration},
             {"aoi", g.aoi}};
}
inline void from_json(const Json& j, GlanceEvent& g)
{
    g.trip_id  = detail::get_string(j, "trip_id");
    g.t_start  = detail::get_int(j, "t_start");
    g.duration = detail::get_int(j, "duration");
    g.aoi      = detail::get_enum< Aoi >(j, "aoi", &parse_aoi);
}

inline void to_json(Json& j, const DrivingSample& d)
{
    j = Json{{"type", "driving"}, {"trip_id", d.trip_id}, {"t", d.t}, {"speed", d.speed},
             {"steering_angle", d.steering_angle}};
}
inline void from_json(const Json& j, DrivingSample& d)
{
    d.trip_id        = detail::get_string(j, "trip_id");
    d.t              = detail::get_int(j, "t");
    d.speed          = detail::get_number(j, "speed");
    d.steering_angle = detail::get_number(j, "steering_angle");
}

inline void to_json(Json& j, const TripMeta& m)
{
    j = Json{{"type", "trip"},
             {"trip_id", m.trip_id},
             {"vehicle_id", m.vehicle_id},
             {"car_model", m.car_model},
             {"software_version", m.software_version},
             {"screen_size", m.screen_size},
             {"date", m.date}};
}
inline void from_json(const Json& j, TripMeta& m)
{
    m.trip_id          = detail::get_string(j, "trip_id");
    m.vehicle_id       = detail::get_string(j, "vehicle_id");
    m.car_model        = detail::get_string(j, "car_model");
    m.software_version = detail::get_string(j, "software_version");
    m.screen_size      = detail::get_string(j, "screen_size");
    from_json(detail::require(j, "date"), m.date);
}

inline void to_json(Json& j, const ConceptEntry& c)
{
    j = Json{{"element_id", c.element_id}, {"label", c.label}, {"screen_id", c.screen_id},
             {"description", c.description}};
}
inline void from_json(const Json& j, ConceptEntry& c)
{
    c.element_id  = detail::get_string(j, "element_id");
    c.label       = detail::get_string(j, "label");
    c.screen_id   = detail::get_string(j, "screen_id");
    c.description = detail::get_string(j, "description");
}

inline void to_json(Json& j, const TaskDefinition& t)
{
    j = Json{{"start_element", t.start_element}, {"end_element", t.end_element}};
}
inline void from_json(const Json& j, TaskDefinition& t)
{
    t.start_element = detail::get_string(j, "start_element");
    t.end_element   = detail::get_string(j, "end_element");
}

inline void to_json(Json& j, const Sequence& s)
{
    Json xs = Json::array();
    for (const auto& e : s.interactions)
        xs.push_back({{"t", e.t}, {"element_id", e.element_id}, {"gesture", e.gesture}, {"screen_id", e.screen_id}});
    j = Json{{"sequence_id", s.sequence_id}, {"trip_id", s.trip_id},       {"first_index", s.first_index},
             {"last_index", s.last_index},   {"interactions", std::move(xs)}, {"t_first", s.t_first},
             {"t_last", s.t_last}};
}
inline void from_json(const Json& j, Sequence& s)
{
    s.sequence_id = detail::get_string(j, "sequence_id");
    s.trip_id     = detail::get_string(j, "trip_id");
    s.first_index = static_cast< std::size_t >(detail::get_int(j, "first_index"));
    s.last_index  = static_cast< std::size_t >(detail::get_int(j, "last_index"));
    s.t_first     = detail::get_int(j, "t_first");
    s.t_last      = detail::get_int(j, "t_last");
    s.interactions.clear();
    for (const auto& x : detail::require(j, "interactions"))
    {
        InteractionEvent e;
        e.trip_id    = s.trip_id;
        e.t          = detail::get_int(x, "t");
        e.element_id = detail::get_string(x, "element_id");
        e.gesture    = detail::get_enum< Gesture >(x, "gesture", &parse_gesture);
        e.screen_id  = detail::get_string(x, "screen_id");
        s.interactions.push_back(std::move(e));
    }
}

inline void to_json(Json& j, const DateRange& r) { j = Json{{"from", r.from}, {"to", r.to}}; }
inline void from_json(const Json& j, DateRange& r)
{
    if (j.is_array() && j.size() == 2)
    {
        from_json(j[0], r.from);
        from_json(j[1], r.to);
        return;
    }
    from_json(detail::require(j, "from"), r.from);
    from_json(detail::require(j, "to"), r.to);
}

inline void to_json(Json& j, const FilterSpec& f)
{
    j                = Json::object();
    auto put_set     = [&](const char* key, const std::optional< std::set< std::string > >& s) {
        j[key] = s ? Json(*s) : Json(nullptr);
    };
    put_set("car_models", f.car_models);
    put_set("software_versions", f.software_versions);
    put_set("screen_sizes", f.screen_sizes);
    j["date_range"]  = f.date_range ? Json(*f.date_range) : Json(nullptr);
    j["min_support"] = f.min_support;
    j["top_n"]       = f.top_n ? Json(*f.top_n) : Json(nullptr);
}

/// Absent or null fields take their defaults; present fields are type-checked.
inline void from_json(const Json& j, FilterSpec& f)
{
    f = FilterSpec{};
    if (j.is_null())
        return;
    if (!j.is_object())
        throw SchemaError("filters", "filters must be a JSON object");
    auto get_set = [&](const char* key) -> std::optional< std::set< std::string > > {
        auto it = j.find(key);
        if (it == j.end() || it->is_null())
            return std::nullopt;
        if (!it->is_array())
            throw SchemaError(key, std::string("field '") + key + "' must be an array of strings");
        std::set< std::string > out;
        for (const auto& v : *it)
        {
            if (!v.is_string())
                throw SchemaError(key, std::string("field '") + key + "' must be an array of strings");
            out.insert(v.get< std::string >());
        }
        return out;
    };
    f.car_models        = get_set("car_models");
    f.software_versions = get_set("software_versions");
    f.screen_sizes      = get_set("screen_sizes");
    if (auto it = j.find("date_range"); it != j.end() && !it->is_null())
        f.date_range = it->get< DateRange >();
    if (auto it = j.find("min_support"); it != j.end() && !it->is_null())
        f.min_support = detail::get_number(j, "min_support");
    if (auto it = j.find("top_n"); it != j.end() && !it->is_null())
    {
        auto n = detail::get_int(j, "top_n");
        if (n <= 0)
            throw SchemaError("top_n", "top_n must be a positive integer");
        f.top_n = static_cast< std::size_t >(n);
    }
}

} // namespace flowlens

#endif // FLOWLENS_CORE_MODEL_HPP

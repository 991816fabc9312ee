#ifndef FLOWLENS_EXTRACTION_HPP
#define FLOWLENS_EXTRACTION_HPP

#include <charconv>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core_model.hpp"
#include "ingest.hpp"

namespace flowlens
{

class InvalidRecordingError : public InvalidArgument
{
public:
    using InvalidArgument::InvalidArgument;
};

struct ExtractionOptions
{
    /// Largest allowed gap between consecutive interactions while a candidate is open.
    std::optional< DurationMs > max_gap;
    /// Re-tapping the start element restarts the open candidate.
    bool restart_on_start = true;

    bool operator==(const ExtractionOptions&) const = default;
};

inline void validate(const ExtractionOptions& o)
{
    if (o.max_gap && *o.max_gap <= 0)
        throw InvalidArgument("max_gap must be positive");
}

struct SequenceSet
{
    TaskDefinition          task;
    std::vector< Sequence > sequences;
    std::size_t             trips_scanned = 0;
    std::size_t             trips_matched = 0;
};

// ---------------------------------------------------------------------------
// Sequence ids: "<snapshot>:<trip_id>:<first>-<last>". The trip id may itself
// contain ':' since the snapshot is split at the first colon and the index
// range at the last.

struct SequenceRef
{
    std::uint64_t snapshot_id = 0;
    std::string   trip_id;
    std::size_t   first_index = 0;
    std::size_t   last_index  = 0;

    bool operator==(const SequenceRef&) const = default;
};

inline std::string make_sequence_id(std::uint64_t snapshot_id, const std::string& trip_id, std::size_t first,
                                    std::size_t last)
{
    return std::to_string(snapshot_id) + ":" + trip_id + ":" + std::to_string(first) + "-" + std::to_string(last);
}

inline std::optional< SequenceRef > parse_sequence_id(std::string_view id)
{
    auto num = [](std::string_view s, auto& out) {
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        return !s.empty() && ec == std::errc{} && p == s.data() + s.size();
    };
    const auto c1 = id.find(':');
    const auto c2 = id.rfind(':');
    if (c1 == std::string_view::npos || c2 == c1)
        return std::nullopt;
    SequenceRef ref;
    const auto  range = id.substr(c2 + 1);
    const auto  dash  = range.find('-');
    if (!num(id.substr(0, c1), ref.snapshot_id) || dash == std::string_view::npos ||
        !num(range.substr(0, dash), ref.first_index) || !num(range.substr(dash + 1), ref.last_index))
        return std::nullopt;
    ref.trip_id = std::string(id.substr(c1 + 1, c2 - c1 - 1));
    if (ref.trip_id.empty())
        return std::nullopt;
    return ref;
}

// ---------------------------------------------------------------------------

inline TaskDefinition task_from_recording(const std::vector< std::string >& recording)
{
    if (recording.size() < 2)
        throw InvalidRecordingError("a recording needs at least two interactions");
    if (recording.front() == recording.back())
        throw InvalidRecordingError("recording starts and ends on the same element '" + recording.front() + "'");
    if (recording.front().empty() || recording.back().empty())
        throw InvalidRecordingError("recording contains an empty element id");
    return {recording.front(), recording.back()};
}

/// Reads an emulator recording document: {"recording": [element_id, ...]}.
inline std::vector< std::string > parse_recording(const Json& j)
{
    auto it = j.is_object() ? j.find("recording") : j.end();
    if (!j.is_object() || it == j.end() || !it->is_array())
        throw InvalidRecordingError("recording document must be {\"recording\": [...]}");
    std::vector< std::string > out;
    for (const auto& v : *it)
    {
        if (!v.is_string())
            throw InvalidRecordingError("recording entries must be element id strings");
        out.push_back(v.get< std::string >());
    }
    return out;
}

inline std::vector< std::string > load_recording(const std::filesystem::path& path)
{
    Json j = Json::parse(detail::read_file(path), nullptr, false);
    if (j.is_discarded())
        throw InvalidRecordingError("recording file " + path.string() + " is not valid JSON");
    return parse_recording(j);
}

namespace detail
{
inline Sequence make_sequence(std::span< const InteractionEvent > xs, const std::vector< std::size_t >& picked,
                              std::uint64_t snapshot_id)
{
    Sequence s;
    s.trip_id     = xs[picked.front()].trip_id;
    s.first_index = picked.front();
    s.last_index  = picked.back();
    s.sequence_id = make_sequence_id(snapshot_id, s.trip_id, s.first_index, s.last_index);
    s.interactions.reserve(picked.size());
    for (auto i : picked)
        s.interactions.push_back(xs[i]);
    s.t_first = s.interactions.front().t;
    s.t_last  = s.interactions.back().t;
    return s;
}
} // namespace detail

/// Left-to-right scan of one trip's sorted interactions. A candidate opens on
/// the start element and closes on the first end element. While a candidate
/// is open: a start element restarts it (restart_on_start) or is skipped; a
/// gap above max_gap between consecutive interactions drops it, and the
/// interaction after the gap is examined afresh. Unclosed candidates are dropped.
inline std::vector< Sequence > match_sequences_in_trip(std::span< const InteractionEvent > interactions,
                                                       const TaskDefinition&               task,
                                                       const ExtractionOptions& options = {},
                                                       std::uint64_t            snapshot_id = 0)
{
    std::vector< Sequence >    out;
    std::vector< std::size_t > open;
    for (std::size_t i = 0; i < interactions.size(); ++i)
    {
        const auto& e = interactions[i];
        if (!open.empty() && options.max_gap && e.t - interactions[i - 1].t > *options.max_gap)
            open.clear();

        if (open.empty())
        {
            if (e.element_id == task.start_element)
                open.push_back(i);
            continue;
        }
        if (e.element_id == task.end_element)
        {
            open.push_back(i);
            out.push_back(detail::make_sequence(interactions, open, snapshot_id));
            open.clear();
        }
        else if (e.element_id == task.start_element)
        {
            if (options.restart_on_start)
                open.assign(1, i);
        }
        else
            open.push_back(i);
    }
    return out;
}

/// Applies the trip-level filters, then matches every surviving trip in trip-id order.
/// min_support and top_n are flow-level and ignored here.
inline SequenceSet extract_sequences(const Corpus& corpus, const TaskDefinition& task, const FilterSpec& filters,
                                     const ExtractionOptions& options = {})
{
    validate(task);
    validate(filters);
    validate(options);
    SequenceSet set;
    set.task = task;
    for (const auto& [trip_id, trip] : corpus.trips)
    {
        if (!passes_trip_filters(trip.meta, filters))
            continue;
        ++set.trips_scanned;
        auto found = match_sequences_in_trip(trip.interactions, task, options, corpus.snapshot_id);
        if (found.empty())
            continue;
        ++set.trips_matched;
        std::move(found.begin(), found.end(), std::back_inserter(set.sequences));
    }
    return set;
}

/// Rebuilds the sequence addressed by an id's index range within a trip: the
/// span's first interaction plus every later one that is not the start element
/// (restart-free scans skip repeated starts). Empty when the range cannot be a
/// task execution.
inline std::optional< Sequence > sequence_from_range(const TripData& trip, std::size_t first, std::size_t last,
                                                     std::uint64_t snapshot_id)
{
    const auto& xs = trip.interactions;
    if (first >= last || last >= xs.size())
        return std::nullopt;
    const auto& start = xs[first].element_id;
    const auto& end   = xs[last].element_id;
    if (start == end)
        return std::nullopt;
    std::vector< std::size_t > picked{first};
    for (auto i = first + 1; i < last; ++i)
    {
        if (xs[i].element_id == end)
            return std::nullopt;
        if (xs[i].element_id != start)
            picked.push_back(i);
    }
    picked.push_back(last);
    return detail::make_sequence(xs, picked, snapshot_id);
}

inline void to_json(Json& j, const ExtractionOptions& o)
{
    j = Json{{"max_gap", o.max_gap ? Json(*o.max_gap) : Json(nullptr)}, {"restart_on_start", o.restart_on_start}};
}

inline void from_json(const Json& j, ExtractionOptions& o)
{
    o = ExtractionOptions{};
    if (j.is_null())
        return;
    if (!j.is_object())
        throw SchemaError("options", "options must be a JSON object");
    if (auto it = j.find("max_gap"); it != j.end() && !it->is_null())
        o.max_gap = detail::get_int(j, "max_gap");
    if (auto it = j.find("restart_on_start"); it != j.end() && !it->is_null())
    {
        if (!it->is_boolean())
            throw SchemaError("restart_on_start", "field 'restart_on_start' must be a boolean");
        o.restart_on_start = it->get< bool >();
    }
}

} // namespace flowlens

#endif // FLOWLENS_EXTRACTION_HPP

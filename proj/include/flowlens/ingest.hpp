#ifndef FLOWLENS_INGEST_HPP
#define FLOWLENS_INGEST_HPP

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "core_model.hpp"

namespace flowlens
{

/// A single log record failed to parse. Carries the 1-based line number.
class IngestError : public Error
{
public:
    IngestError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line)
    {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ParseError : public IngestError
{
public:
    using IngestError::IngestError;
};

class UnsupportedRecordError : public IngestError
{
public:
    using IngestError::IngestError;
};

class RecordSchemaError : public IngestError
{
public:
    RecordSchemaError(std::size_t line, std::string field, const std::string& what)
        : IngestError(line, what), field_(std::move(field))
    {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// An enumerated field (gesture, aoi) carries a value outside its vocabulary.
class UnsupportedFieldValueError : public RecordSchemaError
{
public:
    using RecordSchemaError::RecordSchemaError;
};

/// A file or directory could not be read, or the concept database is malformed.
class LoadError : public Error
{
public:
    using Error::Error;
};

using EventRecord = std::variant< InteractionEvent, GlanceEvent, DrivingSample, TripMeta >;

inline const std::string& trip_id_of(const EventRecord& r)
{
    return std::visit([](const auto& v) -> const std::string& { return v.trip_id; }, r);
}

namespace detail
{
inline EventRecord record_from_json(const Json& j, std::size_t line)
{
    if (!j.is_object())
        throw ParseError(line, "record is not a JSON object");
    auto type_it = j.find("type");
    if (type_it == j.end() || !type_it->is_string())
        throw RecordSchemaError(line, "type", "missing field 'type'");
    const auto& type = type_it->get_ref< const std::string& >();
    try
    {
        if (type == "interaction")
            return j.get< InteractionEvent >();
        if (type == "glance")
        {
            auto g = j.get< GlanceEvent >();
            if (g.duration <= 0)
                throw SchemaError("duration", "duration > 0");
            return g;
        }
        if (type == "driving")
        {
            auto d = j.get< DrivingSample >();
            if (!(d.speed >= 0.0))
                throw SchemaError("speed", "speed >= 0");
            return d;
        }
        if (type == "trip")
            return j.get< TripMeta >();
    }
    catch (const UnsupportedValueError& e)
    {
        throw UnsupportedFieldValueError(line, e.field(), e.what());
    }
    catch (const SchemaError& e)
    {
        throw RecordSchemaError(line, e.field(), e.what());
    }
    throw UnsupportedRecordError(line, "unsupported record type '" + type + "'");
}
} // namespace detail

/// Parses one newline-delimited JSON log record.
inline EventRecord parse_event_line(std::string_view line, std::size_t line_number = 1)
{
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded())
        throw ParseError(line_number, "malformed JSON");
    return detail::record_from_json(j, line_number);
}

// ---------------------------------------------------------------------------

/// Immutable, validated view of the event logs. Trips are keyed (and iterated)
/// by trip_id; every per-trip stream is sorted by timestamp.
struct Corpus
{
    std::map< std::string, TripData >     trips;
    std::map< std::string, ConceptEntry > concepts;
    std::uint64_t                         snapshot_id = 0;

    const TripData* find_trip(const std::string& trip_id) const
    {
        auto it = trips.find(trip_id);
        return it == trips.end() ? nullptr : &it->second;
    }
};

struct RejectedTrip
{
    std::string              trip_id;
    std::vector< Violation > violations;
};

struct RecordError
{
    std::string file;
    std::size_t line = 0;
    std::string message;
};

struct LoadReport
{
    std::vector< RejectedTrip > rejected_trips;
    std::vector< RecordError >  record_errors;
};

struct LoadResult
{
    Corpus     corpus;
    LoadReport report;
};

namespace detail
{
inline std::atomic< std::uint64_t >& snapshot_counter()
{
    static std::atomic< std::uint64_t > counter{0};
    return counter;
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw LoadError("cannot read " + path.string());
    std::string data((std::istreambuf_iterator< char >(in)), std::istreambuf_iterator< char >());
    if (in.bad())
        throw LoadError("error while reading " + path.string());
    return data;
}
} // namespace detail

/// Issues the next process-wide snapshot id (strictly increasing).
inline std::uint64_t next_snapshot_id() { return ++detail::snapshot_counter(); }

inline std::map< std::string, ConceptEntry > load_concepts(const std::filesystem::path& path)
{
    Json j = Json::parse(detail::read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_array())
        throw LoadError("concept database " + path.string() + " must be a JSON array");
    std::map< std::string, ConceptEntry > out;
    for (const auto& item : j)
    {
        ConceptEntry c;
        try
        {
            c = item.get< ConceptEntry >();
        }
        catch (const SchemaError& e)
        {
            throw LoadError("concept database " + path.string() + ": " + e.what());
        }
        if (c.element_id.empty())
            throw LoadError("concept database " + path.string() + ": empty element_id");
        auto id = c.element_id;
        if (!out.emplace(id, std::move(c)).second)
            throw LoadError("concept database " + path.string() + ": duplicate element_id '" + id + "'");
    }
    return out;
}

/// Builds a corpus from event log files and a concept database. Records that
/// fail to parse are reported; a trip with any bad record, any invariant
/// violation, a missing or duplicated trip record is excluded whole.
/// Input file order does not matter: files are processed in sorted path order.
inline LoadResult load_corpus(std::vector< std::filesystem::path > paths, const std::filesystem::path& concept_path)
{
    std::sort(paths.begin(), paths.end());

    struct Accum
    {
        std::vector< TripMeta > metas;
        TripData                data;
        bool                    tainted = false;
    };
    std::unordered_map< std::string, Accum > by_trip;
    LoadResult                               result;

    for (const auto& path : paths)
    {
        const std::string text = detail::read_file(path);
        std::size_t       line_no = 0;
        std::size_t       pos     = 0;
        while (pos < text.size())
        {
            auto nl = text.find('\n', pos);
            if (nl == std::string::npos)
                nl = text.size();
            std::string_view line(text.data() + pos, nl - pos);
            pos = nl + 1;
            ++line_no;
            if (!line.empty() && line.back() == '\r')
                line.remove_suffix(1);
            if (line.find_first_not_of(" \t") == std::string_view::npos)
                continue;

            Json j = Json::parse(line, nullptr, false);
            try
            {
                if (j.is_discarded())
                    throw ParseError(line_no, "malformed JSON");
                auto rec  = detail::record_from_json(j, line_no);
                auto& acc = by_trip[trip_id_of(rec)];
                std::visit(
                    [&](auto&& v) {
                        using T = std::decay_t< decltype(v) >;
                        if constexpr (std::is_same_v< T, TripMeta >)
                            acc.metas.push_back(std::move(v));
                        else if constexpr (std::is_same_v< T, InteractionEvent >)
                            acc.data.interactions.push_back(std::move(v));
                        else if constexpr (std::is_same_v< T, GlanceEvent >)
                            acc.data.glances.push_back(std::move(v));
                        else
                            acc.data.driving.push_back(std::move(v));
                    },
                    std::move(rec));
            }
            catch (const IngestError& e)
            {
                result.report.record_errors.push_back({path.string(), line_no, e.what()});
                if (!j.is_discarded() && j.is_object())
                    if (auto it = j.find("trip_id"); it != j.end() && it->is_string())
                        by_trip[it->get< std::string >()].tainted = true;
            }
        }
    }

    for (auto& [trip_id, acc] : by_trip)
    {
        std::vector< Violation > violations;
        if (acc.tainted)
            violations.push_back({"trip " + trip_id, "all records parse"});
        if (acc.metas.empty())
            violations.push_back({"trip " + trip_id, "trip record present"});
        else if (acc.metas.size() > 1)
            violations.push_back({"trip " + trip_id, "trip_id unique"});
        if (violations.empty())
        {
            acc.data.meta = std::move(acc.metas.front());
            auto& d       = acc.data;
            std::stable_sort(d.interactions.begin(), d.interactions.end(),
                             [](const auto& a, const auto& b) { return a.t < b.t; });
            std::stable_sort(d.glances.begin(), d.glances.end(),
                             [](const auto& a, const auto& b) { return a.t_start < b.t_start; });
            std::stable_sort(d.driving.begin(), d.driving.end(),
                             [](const auto& a, const auto& b) { return a.t < b.t; });
            violations = validate_trip(d);
        }
        if (violations.empty())
            result.corpus.trips.emplace(trip_id, std::move(acc.data));
        else
            result.report.rejected_trips.push_back({trip_id, std::move(violations)});
    }
    std::sort(result.report.rejected_trips.begin(), result.report.rejected_trips.end(),
              [](const auto& a, const auto& b) { return a.trip_id < b.trip_id; });

    result.corpus.concepts     = load_concepts(concept_path);
    result.corpus.snapshot_id = next_snapshot_id();
    return result;
}

/// Lists the event log files (*.jsonl, *.ndjson) of a data directory.
inline std::vector< std::filesystem::path > list_log_files(const std::filesystem::path& data_dir)
{
    std::error_code ec;
    if (!std::filesystem::is_directory(data_dir, ec))
        throw LoadError("data directory " + data_dir.string() + " is not readable");
    std::vector< std::filesystem::path > out;
    std::filesystem::directory_iterator  it(data_dir, ec), end;
    if (ec)
        throw LoadError("data directory " + data_dir.string() + ": " + ec.message());
    for (; it != end; it.increment(ec))
    {
        if (ec)
            throw LoadError("data directory " + data_dir.string() + ": " + ec.message());
        const auto ext = it->path().extension();
        if (it->is_regular_file() && (ext == ".jsonl" || ext == ".ndjson"))
            out.push_back(it->path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline LoadResult load_corpus_dir(const std::filesystem::path& data_dir, const std::filesystem::path& concept_path)
{
    return load_corpus(list_log_files(data_dir), concept_path);
}

// ---------------------------------------------------------------------------

struct DashboardKpis
{
    std::size_t           trip_count        = 0;
    std::size_t           interaction_count = 0;
    std::size_t           vehicle_count     = 0;
    double                glance_hours      = 0.0;
    std::optional< Date > date_min;
    std::optional< Date > date_max;

    bool operator==(const DashboardKpis&) const = default;
};

inline DashboardKpis corpus_kpis(const Corpus& corpus)
{
    DashboardKpis                     k;
    std::unordered_set< std::string > vehicles;
    DurationMs                        glance_ms = 0;
    for (const auto& [id, trip] : corpus.trips)
    {
        ++k.trip_count;
        k.interaction_count += trip.interactions.size();
        vehicles.insert(trip.meta.vehicle_id);
        for (const auto& g : trip.glances)
            glance_ms += g.duration;
        if (!k.date_min || trip.meta.date < *k.date_min)
            k.date_min = trip.meta.date;
        if (!k.date_max || *k.date_max < trip.meta.date)
            k.date_max = trip.meta.date;
    }
    k.vehicle_count = vehicles.size();
    k.glance_hours  = static_cast< double >(glance_ms) / 3.6e6;
    return k;
}

inline void to_json(Json& j, const DashboardKpis& k)
{
    j = Json{{"trip_count", k.trip_count},
             {"interaction_count", k.interaction_count},
             {"vehicle_count", k.vehicle_count},
             {"glance_hours", k.glance_hours},
             {"date_min", k.date_min ? Json(*k.date_min) : Json(nullptr)},
             {"date_max", k.date_max ? Json(*k.date_max) : Json(nullptr)}};
}

inline void from_json(const Json& j, DashboardKpis& k)
{
    k.trip_count        = static_cast< std::size_t >(detail::get_int(j, "trip_count"));
    k.interaction_count = static_cast< std::size_t >(detail::get_int(j, "interaction_count"));
    k.vehicle_count     = static_cast< std::size_t >(detail::get_int(j, "vehicle_count"));
    k.glance_hours      = detail::get_number(j, "glance_hours");
    k.date_min = k.date_max = std::nullopt;
    if (auto it = j.find("date_min"); it != j.end() && !it->is_null())
        k.date_min = it->get< Date >();
    if (auto it = j.find("date_max"); it != j.end() && !it->is_null())
        k.date_max = it->get< Date >();
}

inline void to_json(Json& j, const LoadReport& r)
{
    Json rejected = Json::array();
    for (const auto& t : r.rejected_trips)
    {
        Json vs = Json::array();
        for (const auto& v : t.violations)
            vs.push_back({{"record", v.record}, {"rule", v.rule}});
        rejected.push_back({{"trip_id", t.trip_id}, {"violations", std::move(vs)}});
    }
    Json errors = Json::array();
    for (const auto& e : r.record_errors)
        errors.push_back({{"file", e.file}, {"line", e.line}, {"message", e.message}});
    j = Json{{"rejected_trips", std::move(rejected)}, {"record_errors", std::move(errors)}};
}

} // namespace flowlens

#endif // FLOWLENS_INGEST_HPP

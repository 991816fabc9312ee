#ifndef FLOWLENS_API_SERVICE_HPP
#define FLOWLENS_API_SERVICE_HPP

#include <charconv>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "core_model.hpp"
#include "extraction.hpp"
#include "flow_analytics.hpp"
#include "glance_metrics.hpp"
#include "ingest.hpp"

namespace flowlens
{

/// A request the service refuses; carries the HTTP status to answer with.
class RequestError : public Error
{
public:
    RequestError(int status, const std::string& what) : Error(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

struct ApiResponse
{
    int         status = 200;
    std::string body;
};

struct AnalysisRequest
{
    std::optional< TaskDefinition >             task;
    std::optional< std::vector< std::string > > recording;
    FilterSpec                                  filters;
    ExtractionOptions                           options;
};

struct CompareRequest
{
    AnalysisRequest            analysis;
    std::vector< ElementPath > selected_paths;
    MetricKind                 metric = MetricKind::time_on_task;
};

/// Everything one analysis derives from one snapshot.
struct AnalysisResult
{
    std::uint64_t            snapshot_id = 0;
    TaskDefinition           task;
    SequenceSet              sequences;
    std::vector< Flow >      flows;      // all flows, unfiltered
    std::vector< FlowStats > flow_table; // after min_support / top_n
    SankeyGraph              sankey;
};

namespace detail
{
inline Json parse_body(std::string_view body)
{
    Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded())
        throw RequestError(400, "request body is not valid JSON");
    if (!j.is_object())
        throw RequestError(400, "request body must be a JSON object");
    return j;
}

template < typename F >
auto as_unprocessable(F&& f)
{
    try
    {
        return f();
    }
    catch (const SchemaError& e)
    {
        throw RequestError(422, e.what());
    }
    catch (const InvalidArgument& e)
    {
        throw RequestError(422, e.what());
    }
    catch (const nlohmann::json::exception& e)
    {
        throw RequestError(422, e.what());
    }
}

inline Json error_body(int status, const std::string& message)
{
    return Json{{"status", status}, {"error", message}};
}
} // namespace detail

inline AnalysisRequest parse_analysis_request(const Json& j)
{
    return detail::as_unprocessable([&] {
        AnalysisRequest r;
        const auto      task_it = j.find("task");
        const auto      rec_it  = j.find("recording");
        const bool      has_task = task_it != j.end() && !task_it->is_null();
        const bool      has_rec  = rec_it != j.end() && !rec_it->is_null();
        if (has_task == has_rec)
            throw RequestError(422, "exactly one of 'task' and 'recording' must be given");
        if (has_task)
            r.task = task_it->get< TaskDefinition >();
        else
            r.recording = parse_recording(Json{{"recording", *rec_it}});
        if (auto it = j.find("filters"); it != j.end())
            r.filters = it->get< FilterSpec >();
        if (auto it = j.find("options"); it != j.end())
            r.options = it->get< ExtractionOptions >();
        return r;
    });
}

inline CompareRequest parse_compare_request(const Json& j)
{
    CompareRequest r;
    r.analysis = parse_analysis_request(j);
    detail::as_unprocessable([&] {
        const auto& paths = detail::require(j, "selected_paths");
        if (!paths.is_array() || paths.empty())
            throw RequestError(422, "'selected_paths' must be a nonempty array of element paths");
        for (const auto& p : paths)
        {
            auto path = p.get< ElementPath >();
            if (std::find(r.selected_paths.begin(), r.selected_paths.end(), path) == r.selected_paths.end())
                r.selected_paths.push_back(std::move(path));
        }
        r.metric = detail::require(j, "metric").get< MetricKind >();
        return 0;
    });
    return r;
}

/// Resolves the task and runs extract, group, statistics, filters and Sankey
/// against one corpus.
inline AnalysisResult run_analysis(const Corpus& corpus, const AnalysisRequest& request)
{
    AnalysisResult out;
    out.snapshot_id = corpus.snapshot_id;
    detail::as_unprocessable([&] {
        out.task = request.task ? *request.task : task_from_recording(*request.recording);
        validate(out.task);
        validate(request.filters);
        validate(request.options);
        return 0;
    });
    for (const auto* element : {&out.task.start_element, &out.task.end_element})
        if (!corpus.concepts.contains(*element))
            throw RequestError(422, "unknown element '" + *element + "'");

    out.sequences  = extract_sequences(corpus, out.task, request.filters, request.options);
    out.flows      = group_into_flows(out.sequences);
    out.flow_table = apply_flow_filters(flow_statistics(out.flows), request.filters);
    out.sankey     = build_sankey(out.flow_table);
    return out;
}

inline Json analysis_response_json(const AnalysisResult& r)
{
    return Json{{"snapshot_id", r.snapshot_id},
                {"task", r.task},
                {"flow_table", r.flow_table},
                {"sankey", r.sankey},
                {"totals",
                 {{"sequences_matched", r.sequences.sequences.size()},
                  {"trips_scanned", r.sequences.trips_scanned},
                  {"trips_matched", r.sequences.trips_matched}}}};
}

inline Json run_compare(const Corpus& corpus, const CompareRequest& request)
{
    const auto analysis = run_analysis(corpus, request.analysis);

    std::vector< Flow >      selected;
    std::vector< FlowStats > selected_stats;
    for (const auto& path : request.selected_paths)
    {
        auto st = std::find_if(analysis.flow_table.begin(), analysis.flow_table.end(),
                               [&](const FlowStats& s) { return s.path == path; });
        if (st == analysis.flow_table.end())
            throw RequestError(422, "unknown flow path " + Json(path).dump());
        selected_stats.push_back(*st);
        selected.push_back(*std::find_if(analysis.flows.begin(), analysis.flows.end(),
                                         [&](const Flow& f) { return f.path == path; }));
    }

    // Means over an empty window are undefined; such sequences stay out of the
    // box and are listed instead.
    std::unordered_map< std::string, double > values;
    Json                                      undefined = Json::array();
    for (auto& f : selected)
    {
        std::erase_if(f.sequences, [&](const Sequence& s) {
            const auto* trip = corpus.find_trip(s.trip_id);
            if (auto v = metric_value(compute_sequence_metrics(s, *trip), request.metric))
            {
                values.emplace(s.sequence_id, *v);
                return false;
            }
            undefined.push_back(s.sequence_id);
            return true;
        });
        if (f.sequences.empty())
            throw RequestError(422, "metric " + std::string(to_string(request.metric)) + " is undefined for every sequence of flow " +
                                        Json(f.path).dump());
    }

    std::vector< BoxPlotStats > boxes;
    try
    {
        boxes = boxplot_stats(selected, request.metric, values);
    }
    catch (const IncompleteMetricsError& e)
    {
        throw RequestError(422, e.what());
    }
    return Json{{"snapshot_id", analysis.snapshot_id},
                {"task", analysis.task},
                {"metric", request.metric},
                {"sankey", build_sankey(selected_stats)},
                {"boxplots", boxes},
                {"undefined_metric_sequence_ids", std::move(undefined)}};
}

/// Serves analyses from an immutable corpus snapshot. Readers grab the current
/// snapshot once and keep it for the whole request; reload builds a complete
/// new corpus and swaps the pointer. Reloads are serialized.
class AnalyticsService
{
public:
    struct Paths
    {
        std::filesystem::path data_dir;
        std::filesystem::path concept_db;
    };

    AnalyticsService() = default;
    explicit AnalyticsService(Paths paths) : paths_(std::move(paths)) {}

    std::shared_ptr< const Corpus > snapshot() const
    {
        std::lock_guard lock(snapshot_mutex_);
        return snapshot_;
    }

    void install(std::shared_ptr< const Corpus > corpus)
    {
        std::lock_guard lock(snapshot_mutex_);
        snapshot_ = std::move(corpus);
    }

    ApiResponse reload()
    {
        std::lock_guard writer(reload_mutex_);
        const auto      previous = snapshot();
        LoadResult      loaded;
        try
        {
            loaded = load_corpus_dir(paths_.data_dir, paths_.concept_db);
        }
        catch (const std::exception& e)
        {
            auto body      = detail::error_body(500, e.what());
            body["report"] = Json{{"retained_snapshot_id", previous ? Json(previous->snapshot_id) : Json(nullptr)}};
            return {500, body.dump()};
        }
        auto next = std::make_shared< const Corpus >(std::move(loaded.corpus));
        install(next);
        Json body{{"snapshot_id", next->snapshot_id},
                  {"previous_snapshot_id", previous ? Json(previous->snapshot_id) : Json(nullptr)},
                  {"kpis", corpus_kpis(*next)},
                  {"report", loaded.report}};
        return {200, body.dump()};
    }

    ApiResponse kpis() const
    {
        return guarded([](const Corpus& c) {
            Json j           = corpus_kpis(c);
            j["snapshot_id"] = c.snapshot_id;
            return j;
        });
    }

    ApiResponse elements() const
    {
        return guarded([](const Corpus& c) {
            Json list = Json::array();
            for (const auto& [id, entry] : c.concepts)
                list.push_back(entry);
            return Json{{"snapshot_id", c.snapshot_id}, {"elements", std::move(list)}};
        });
    }

    ApiResponse analysis(std::string_view body) const
    {
        return guarded([&](const Corpus& c) {
            return analysis_response_json(run_analysis(c, parse_analysis_request(detail::parse_body(body))));
        });
    }

    ApiResponse compare(std::string_view body) const
    {
        return guarded([&](const Corpus& c) { return run_compare(c, parse_compare_request(detail::parse_body(body))); });
    }

    ApiResponse sequence(std::string_view id, std::optional< std::string_view > margin_text = std::nullopt) const
    {
        return guarded([&](const Corpus& c) {
            DurationMs margin = default_timeline_margin_ms;
            if (margin_text)
            {
                auto [p, ec] = std::from_chars(margin_text->data(), margin_text->data() + margin_text->size(), margin);
                if (margin_text->empty() || ec != std::errc{} || p != margin_text->data() + margin_text->size() ||
                    margin < 0)
                    throw RequestError(400, "margin must be a non-negative integer number of milliseconds");
            }
            const auto ref = parse_sequence_id(id);
            if (!ref)
                throw RequestError(404, "unknown sequence '" + std::string(id) + "'");
            if (ref->snapshot_id != c.snapshot_id)
                throw RequestError(410, "sequence '" + std::string(id) + "' belongs to snapshot " +
                                            std::to_string(ref->snapshot_id) + "; current snapshot is " +
                                            std::to_string(c.snapshot_id));
            const auto* trip = c.find_trip(ref->trip_id);
            auto seq = trip ? sequence_from_range(*trip, ref->first_index, ref->last_index, c.snapshot_id) : std::nullopt;
            if (!seq)
                throw RequestError(404, "unknown sequence '" + std::string(id) + "'");
            return Json{{"snapshot_id", c.snapshot_id},
                        {"timeline", build_timeline(*seq, *trip, margin)},
                        {"metrics", compute_sequence_metrics(*seq, *trip)}};
        });
    }

private:
    template < typename F >
    ApiResponse guarded(F&& handler) const
    {
        const auto corpus = snapshot();
        if (!corpus)
            return {503, detail::error_body(503, "service not ready: no snapshot loaded").dump()};
        try
        {
            return {200, handler(*corpus).dump()};
        }
        catch (const RequestError& e)
        {
            return {e.status(), detail::error_body(e.status(), e.what()).dump()};
        }
    }

    Paths                           paths_;
    mutable std::mutex              snapshot_mutex_;
    std::mutex                      reload_mutex_;
    std::shared_ptr< const Corpus > snapshot_;
};

} // namespace flowlens

#endif // FLOWLENS_API_SERVICE_HPP

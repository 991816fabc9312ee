// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <flowlens/flowlens.hpp>
#include <flowlens/http_server.hpp>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace flowlens;
using namespace flowlens::testing;

namespace
{

struct Outcome
{
    bool        pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration< double >(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 3)
{
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(digits);
    out << v;
    return out.str();
}

/// A service behind a real HTTP listener on an ephemeral loopback port.
class LiveServer
{
public:
    explicit LiveServer(AnalyticsService& service)
    {
        mount(server_, service);
        port_   = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::jthread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LiveServer() { server_.stop(); }

    httplib::Client client() const
    {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(60, 0);
        return c;
    }

private:
    httplib::Server server_;
    int             port_ = 0;
    std::jthread    thread_;
};

Json post_json(httplib::Client& client, const std::string& path, const std::string& body, int expect = 200)
{
    auto res = client.Post(path, body, "application/json");
    if (!res)
        throw std::runtime_error("POST " + path + " failed: " + httplib::to_string(res.error()));
    if (res->status != expect)
        throw std::runtime_error("POST " + path + " returned " + std::to_string(res->status) + ": " + res->body);
    return Json::parse(res->body);
}

const std::string ac_request = R"({"task":{"start_element":"A","end_element":"C"}})";

GeneratorConfig planted_fixture()
{
    GeneratorConfig c;
    c.seed          = 42;
    c.planted_flows = {{{"A", "B", "C"}, 60}, {{"A", "B", "D", "C"}, 30}, {{"A", "C"}, 10}};
    c.noise_trips   = 100;
    return c;
}

/// Eight flows of distinct sizes, for top_n.
GeneratorConfig eight_flow_fixture()
{
    GeneratorConfig c;
    c.seed = 8;
    const std::vector< std::string > mid{"B", "D", "E", "F", "G", "H", "I", "J"};
    for (std::size_t i = 0; i < mid.size(); ++i)
        c.planted_flows.push_back({{"A", mid[i], "C"}, 3 + 2 * i});
    c.noise_trips = 20;
    return c;
}

std::vector< double > shares_of(const Json& analysis)
{
    std::vector< double > out;
    for (const auto& row : analysis["flow_table"])
        out.push_back(row["share"].get< double >());
    return out;
}

// ---------------------------------------------------------------------------

Outcome planted_share_recovery()
{
    const auto t0 = Clock::now();
    TempDir    dir;
    write_corpus(generate_corpus(planted_fixture()), dir.path());
    AnalyticsService service({dir.path(), dir / "concepts.json"});
    if (service.reload().status != 200)
        return {false, "corpus failed to load"};
    LiveServer server(service);
    auto       client = server.client();
    const auto body   = post_json(client, "/analysis", ac_request);
    const auto elapsed = seconds_since(t0);

    std::vector< ElementPath > paths;
    for (const auto& row : body["flow_table"])
        paths.push_back(row["path"].get< ElementPath >());
    const auto   shares = shares_of(body);
    const double sum    = std::accumulate(shares.begin(), shares.end(), 0.0);
    const bool   exact  = shares == std::vector< double >{0.6, 0.3, 0.1};
    const bool   order  = paths == std::vector< ElementPath >{{"A", "B", "C"}, {"A", "B", "D", "C"}, {"A", "C"}};
    const bool   pass   = exact && order && std::abs(sum - 1.0) <= 1e-9 && elapsed < 10.0;
    return {pass, "paths [A,B,C]/[A,B,D,C]/[A,C] + 100 noise trips, seed 42: shares " + Json(shares).dump() +
                      ", sum " + fmt(sum, 12) + ", " + fmt(elapsed) + " s end to end"};
}

Outcome extraction_oracle_equivalence()
{
    std::mt19937_64 rng(500);
    std::size_t     trips = 0, compared = 0, matches = 0;
    const TaskDefinition task{"A", "C"};
    for (; trips < 500; ++trips)
    {
        const auto xs = random_trip(rng, 20, 5);
        for (bool restart : {true, false})
            for (auto gap : {std::optional< DurationMs >{}, std::optional< DurationMs >{1000}})
            {
                const auto engine = match_sequences_in_trip(xs, task, {gap, restart});
                const auto ref    = oracle::extract(xs, "A", "C", gap, restart);
                ++compared;
                matches += ref.size();
                if (engine.size() != ref.size())
                    return {false, "trip " + std::to_string(trips) + ": count " + std::to_string(engine.size()) +
                                       " vs oracle " + std::to_string(ref.size())};
                for (std::size_t k = 0; k < ref.size(); ++k)
                    if (engine[k].first_index != ref[k].first || engine[k].last_index != ref[k].last ||
                        path_of(engine[k]) != ref[k].path)
                        return {false, "trip " + std::to_string(trips) + ": sequence " + std::to_string(k) + " differs"};
            }
    }
    return {matches > 0, std::to_string(trips) + " trips x 4 option sets (" + std::to_string(compared) +
                             " comparisons, " + std::to_string(matches) + " oracle sequences) identical"};
}

Outcome glance_oracle_equivalence()
{
    auto spanning = [](TimestampMs lo, TimestampMs hi) {
        Sequence s;
        s.interactions = {tap("R", lo, "A"), tap("R", hi, "C")};
        s.t_first      = lo;
        s.t_last       = hi;
        return s;
    };
    std::mt19937_64 rng(1000);
    std::size_t     boundary = 0;
    for (int i = 0; i < 1000; ++i)
    {
        const auto c    = random_glance_case(rng);
        const auto m    = sequence_glance_metrics(spanning(c.lo, c.hi), c.glances);
        const auto grid = oracle::glance_grid(c.glances, c.lo, c.hi);
        if (m.total_glance_duration_offroad != grid.offroad_ms || m.glance_count_offroad != grid.count ||
            m.long_glance_count != grid.long_count)
            return {false, "case " + std::to_string(i) + " differs from the millisecond grid"};
        for (const auto& g : clip_glances_to_window(c.glances, {c.lo, c.hi}))
            boundary += is_offroad(g.aoi) && g.duration == 2000;
    }
    // A 4 s center-stack glance clipped to exactly 2000 ms.
    const auto edge = sequence_glance_metrics(spanning(1000, 3000), std::vector{glance("R", 0, 4000, Aoi::center_stack)});
    const bool edge_ok = edge.total_glance_duration_offroad == 2000 && edge.long_glance_count == 0;
    return {edge_ok && boundary > 0, "1000 cases equal the grid (" + std::to_string(boundary) +
                                         " hit the 2000 ms boundary); clipped 2000 ms counted long: " +
                                         std::to_string(edge.long_glance_count)};
}

Outcome sankey_conservation()
{
    GeneratorConfig c;
    c.seed = 4;
    const std::vector< std::string > mid{"B", "D", "E", "F"};
    std::mt19937_64                  rng(4);
    for (int f = 0; f < 14; ++f)
    {
        ElementPath p{"A"};
        for (std::size_t k = 0, n = rng() % 4; k < n; ++k)
            p.push_back(mid[rng() % mid.size()]);
        p.push_back("C");
        if (std::none_of(c.planted_flows.begin(), c.planted_flows.end(), [&](const auto& x) { return x.path == p; }))
            c.planted_flows.push_back({p, 1 + rng() % 25});
    }
    c.noise_trips = 30;
    c.near_miss   = true;
    TempDir dir;
    write_corpus(generate_corpus(c), dir.path());
    const auto corpus = load_corpus_dir(dir.path(), dir / "concepts.json").corpus;

    std::size_t analyses = 0, nodes_checked = 0;
    for (; analyses < 300; ++analyses)
    {
        AnalysisRequest req;
        req.task                   = TaskDefinition{"A", "C"};
        req.filters.min_support    = static_cast< double >(rng() % 20) / 100.0;
        if (rng() % 2)
            req.filters.top_n = 1 + rng() % 8;
        if (rng() % 3 == 0)
            req.filters.car_models = std::set< std::string >{rng() % 2 ? "Model A" : "Model B"};
        req.options.restart_on_start = rng() % 2;
        if (rng() % 3 == 0)
            req.options.max_gap = 400 + static_cast< DurationMs >(rng() % 1200);
        const auto body = analysis_response_json(run_analysis(corpus, req));

        std::size_t total = 0;
        for (const auto& row : body["flow_table"])
            total += row["count"].get< std::size_t >();
        std::map< std::pair< std::size_t, std::string >, std::size_t > in, out, count;
        for (const auto& n : body["sankey"]["nodes"])
            count[{n["depth"], n["element_id"]}] = n["count"];
        for (const auto& e : body["sankey"]["edges"])
        {
            in[{e["to"]["depth"], e["to"]["element_id"]}] += e["weight"].get< std::size_t >();
            out[{e["from"]["depth"], e["from"]["element_id"]}] += e["weight"].get< std::size_t >();
        }
        std::size_t depth0 = 0, depth1_in = 0;
        for (const auto& [key, n] : count)
        {
            ++nodes_checked;
            if (key.first == 0)
                depth0 += n;
            if (key.first == 1)
                depth1_in += in[key];
            const bool terminal = key.second == "C";
            if (key.first > 0 && in[key] != n)
                return {false, "analysis " + std::to_string(analyses) + ": inflow mismatch at depth " +
                                   std::to_string(key.first)};
            if (!terminal && out[key] != n)
                return {false, "analysis " + std::to_string(analyses) + ": inflow != outflow at " + key.second};
        }
        if (depth0 != total || depth1_in != total)
            return {false, "analysis " + std::to_string(analyses) + ": depth totals differ from flow counts"};
    }
    return {true, std::to_string(analyses) + " randomized analyses, " + std::to_string(nodes_checked) +
                      " nodes conserve flow; depth-1 inflow equals summed counts"};
}

Outcome boxplot_correctness()
{
    std::mt19937_64                          rng(1000);
    std::uniform_real_distribution< double > value(0.0, 10000.0);
    for (int i = 0; i < 1000; ++i)
    {
        std::vector< BoxPoint > pts;
        std::vector< double >   raw;
        for (std::size_t k = 0, n = 1 + rng() % 60; k < n; ++k)
        {
            double v = value(rng);
            if (rng() % 10 == 0)
                v *= 8;
            if (rng() % 5 == 0)
                v = std::round(v / 100) * 100;
            pts.push_back({std::to_string(k), v});
            raw.push_back(v);
        }
        const auto b = box_from_points({}, MetricKind::time_on_task, pts);
        if (b.q1 != oracle::quantile(raw, 0.25) || b.median != oracle::quantile(raw, 0.5) ||
            b.q3 != oracle::quantile(raw, 0.75))
            return {false, "sample " + std::to_string(i) + " quartiles differ from the reference"};
        const double iqr = b.q3 - b.q1;
        for (const auto& p : pts)
        {
            const bool outside = p.value < b.q1 - 1.5 * iqr || p.value > b.q3 + 1.5 * iqr;
            const bool listed  = std::find(b.outliers.begin(), b.outliers.end(), p) != b.outliers.end();
            if (outside != listed)
                return {false, "sample " + std::to_string(i) + " outlier partition is wrong"};
        }
    }
    const auto w = box_from_points({}, MetricKind::time_on_task, {{"a", 1}, {"b", 2}, {"c", 3}, {"d", 4}, {"e", 100}});
    const bool worked = w.q1 == 2 && w.median == 3 && w.q3 == 4 && w.whisker_high == 4 && w.outliers.size() == 1 &&
                        w.outliers[0].value == 100;
    return {worked, "1000 samples match the p*(n-1) reference; [1,2,3,4,100] gives q1 " + fmt(w.q1, 1) + ", median " +
                        fmt(w.median, 1) + ", q3 " + fmt(w.q3, 1) + ", outliers " +
                        std::to_string(w.outliers.size())};
}

Outcome filter_semantics()
{
    TempDir planted;
    write_corpus(generate_corpus(planted_fixture()), planted.path());
    AnalyticsService service({planted.path(), planted / "concepts.json"});
    service.reload();
    LiveServer server(service);
    auto       client = server.client();

    const auto all    = post_json(client, "/analysis", ac_request);
    const auto strict = post_json(
        client, "/analysis", R"({"task":{"start_element":"A","end_element":"C"},"filters":{"min_support":0.5}})");
    const bool support_ok = shares_of(strict) == std::vector< double >{0.6};

    TempDir eight;
    write_corpus(generate_corpus(eight_flow_fixture()), eight.path());
    AnalyticsService service8({eight.path(), eight / "concepts.json"});
    service8.reload();
    const auto full = Json::parse(service8.analysis(ac_request).body);
    const auto top5 =
        Json::parse(service8.analysis(R"({"task":{"start_element":"A","end_element":"C"},"filters":{"top_n":5}})").body);
    std::vector< std::size_t > counts;
    for (const auto& row : top5["flow_table"])
        counts.push_back(row["count"]);
    bool top_ok = counts == std::vector< std::size_t >{17, 15, 13, 11, 9};
    for (std::size_t i = 0; i < top5["flow_table"].size() && top_ok; ++i)
        top_ok = top5["flow_table"][i] == full["flow_table"][i];
    const auto   kept  = shares_of(top5);
    const double share = std::accumulate(kept.begin(), kept.end(), 0.0);

    return {support_ok && top_ok && shares_of(all).size() == 3,
            "min_support 0.5 keeps " + std::to_string(strict["flow_table"].size()) + " flow " +
                Json(shares_of(strict)).dump() + "; top_n 5 of 8 keeps counts " + Json(counts).dump() +
                " with unfiltered shares summing to " + fmt(share)};
}

Outcome snapshot_atomicity()
{
    TempDir dir;
    write_corpus(generate_corpus(planted_fixture()), dir.path());
    AnalyticsService service({dir.path(), dir / "concepts.json"});
    std::map< std::uint64_t, std::size_t > trips_at; // snapshot -> trip count
    {
        const auto first           = Json::parse(service.reload().body);
        trips_at[first["snapshot_id"]] = first["kpis"]["trip_count"];
    }
    LiveServer server(service);

    std::atomic< bool >  done{false};
    std::mutex           results_mutex;
    std::vector< Json >  results;
    std::atomic< int >   failures{0};
    std::vector< std::jthread > readers;
    for (int r = 0; r < 3; ++r)
        readers.emplace_back([&] {
            auto client = server.client();
            while (!done)
            {
                auto res = client.Post("/analysis", ac_request, "application/json");
                if (!res || res->status != 200)
                {
                    ++failures;
                    continue;
                }
                std::lock_guard lock(results_mutex);
                results.push_back(Json::parse(res->body));
            }
        });

    struct StopReaders
    {
        std::atomic< bool >& done;
        ~StopReaders() { done = true; }
    } stop_readers{done};

    auto admin = server.client();
    for (int k = 0; k < 8; ++k)
    {
        // Each reload sees one more trip that holds one more A..C execution.
        const std::string trip = "EXTRA" + std::to_string(k);
        write_file(dir / ("extra_" + std::to_string(k) + ".jsonl"),
                   lines({Json(meta(trip)), Json(tap(trip, 0, "A")), Json(tap(trip, 700, "C"))}));
        auto res = admin.Post("/admin/reload");
        if (!res || res->status != 200)
            return {false, "reload failed"};
        const auto j = Json::parse(res->body);
        trips_at[j["snapshot_id"]] = j["kpis"]["trip_count"];
        std::this_thread::sleep_for(std::chrono::milliseconds(150));
    }
    done = true;
    readers.clear();

    std::set< std::uint64_t > seen;
    for (const auto& body : results)
    {
        const auto id = body["snapshot_id"].get< std::uint64_t >();
        auto       it = trips_at.find(id);
        if (it == trips_at.end())
            return {false, "response carries unknown snapshot " + std::to_string(id)};
        if (body["totals"]["trips_scanned"] != it->second)
            return {false, "snapshot " + std::to_string(id) + " answered with another snapshot's trip count"};
        const std::string prefix = std::to_string(id) + ":";
        for (const auto& row : body["flow_table"])
            for (const auto& sid : row["sequence_ids"])
                if (sid.get< std::string >().rfind(prefix, 0) != 0)
                    return {false, "sequence id " + sid.get< std::string >() + " in a snapshot " + std::to_string(id) +
                                       " response"};
        seen.insert(id);
    }
    return {failures == 0 && seen.size() >= 2,
            std::to_string(results.size()) + " concurrent responses across 8 reloads; " + std::to_string(seen.size()) +
                " distinct snapshots observed, none mixed; " + std::to_string(failures.load()) + " failed requests"};
}

Outcome determinism()
{
    TempDir dir;
    write_corpus(generate_corpus(planted_fixture()), dir.path());
    AnalyticsService service({dir.path(), dir / "concepts.json"});
    service.reload();
    LiveServer server(service);
    auto       client = server.client();

    const std::string analysis =
        R"({"task":{"start_element":"A","end_element":"C"},"filters":{"min_support":0.05,"top_n":3}})";
    const std::string compare =
        R"({"task":{"start_element":"A","end_element":"C"},"selected_paths":[["A","B","C"],["A","C"]],"metric":"glance_count_offroad"})";
    std::set< std::string > analysis_bodies, compare_bodies;
    for (int i = 0; i < 20; ++i)
    {
        analysis_bodies.insert(client.Post("/analysis", analysis, "application/json")->body);
        compare_bodies.insert(client.Post("/analysis/compare", compare, "application/json")->body);
    }
    return {analysis_bodies.size() == 1 && compare_bodies.size() == 1,
            "20 repeats each of /analysis and /analysis/compare: " + std::to_string(analysis_bodies.size()) + " and " +
                std::to_string(compare_bodies.size()) + " distinct bodies"};
}

Outcome desk_scale_throughput()
{
    GeneratorConfig c;
    c.seed          = 7;
    c.planted_flows = {{{"NAV_HOME", "SEARCH_FIELD", "KBD_ENTER", "LETS_GO"}, 4000},
                       {{"NAV_HOME", "RECENT_DEST", "LETS_GO"}, 2000}};
    c.noise_trips                      = 4000;
    c.filler_interactions              = {4, 12};
    c.driving_model.sample_interval_ms = 500;
    TempDir dir;
    const auto generated = generate_corpus(c);
    std::size_t events   = 0;
    for (const auto& [name, text] : generated.files)
        events += static_cast< std::size_t >(std::count(text.begin(), text.end(), '\n'));
    write_corpus(generated, dir.path());

    AnalyticsService service({dir.path(), dir / "concepts.json"});
    const auto       t_load = Clock::now();
    const auto       loaded = service.reload();
    const double     load_s = seconds_since(t_load);
    if (loaded.status != 200)
        return {false, "load failed: " + loaded.body};
    const auto trips = Json::parse(loaded.body)["kpis"]["trip_count"].get< std::size_t >();

    LiveServer server(service);
    auto       client = server.client();
    const auto t_req  = Clock::now();
    const auto body   = post_json(client, "/analysis", R"({"task":{"start_element":"NAV_HOME","end_element":"LETS_GO"}})");
    const double req_s = seconds_since(t_req);
    const bool   sane  = body["totals"]["sequences_matched"] == 6000;
    return {sane && trips == 10000 && load_s < 10.0 && req_s < 2.0,
            std::to_string(trips) + " trips, " + std::to_string(events) + " events: load " + fmt(load_s) +
                " s, /analysis " + fmt(req_s) + " s"};
}

} // namespace

int main()
{
    const std::vector< std::pair< std::string, std::function< Outcome() > > > criteria{
        {"planted-share recovery", planted_share_recovery},
        {"extraction oracle equivalence", extraction_oracle_equivalence},
        {"glance oracle equivalence", glance_oracle_equivalence},
        {"sankey conservation", sankey_conservation},
        {"box-plot correctness", boxplot_correctness},
        {"filter semantics", filter_semantics},
        {"snapshot atomicity", snapshot_atomicity},
        {"determinism", determinism},
        {"desk-scale throughput", desk_scale_throughput},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria)
    {
        Outcome o;
        try
        {
            o = run();
        }
        catch (const std::exception& e)
        {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    std::cout << (criteria.size() - static_cast< std::size_t >(failed)) << "/" << criteria.size()
              << " acceptance criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}

// flowlens: generate synthetic corpora, run one-off analyses, or serve the HTTP API.

#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include <flowlens/flowlens.hpp>
#include <flowlens/http_server.hpp>

namespace
{

httplib::Server* g_server = nullptr;

void on_signal(int)
{
    if (g_server)
        g_server->stop();
}

int run_generate(const std::string& config_path, const std::string& out_dir)
{
    const auto config = flowlens::load_generator_config(config_path);
    const auto corpus = flowlens::generate_corpus(config);
    flowlens::write_corpus(corpus, out_dir);
    std::size_t planted = corpus.planted.size();
    std::cout << "wrote " << corpus.files.size() << " log file(s), " << planted << " planted sequence(s), "
              << config.noise_trips << " noise trip(s) and concepts.json to " << out_dir << "\n";
    return 0;
}

int run_analyze(const std::string& data_dir, const std::string& concept_db, const std::string& request_path)
{
    std::ifstream in(request_path, std::ios::binary);
    if (!in)
    {
        std::cerr << "cannot read " << request_path << "\n";
        return 1;
    }
    std::stringstream body;
    body << in.rdbuf();

    flowlens::AnalyticsService service({data_dir, concept_db});
    if (auto r = service.reload(); r.status != 200)
    {
        std::cerr << r.body << "\n";
        return 1;
    }
    const auto r = service.analysis(body.str());
    std::cout << flowlens::Json::parse(r.body).dump(2) << "\n";
    return r.status == 200 ? 0 : 1;
}

int run_serve(const std::string& data_dir, const std::string& concept_db, const std::string& host, int port,
              int reload_interval)
{
    flowlens::AnalyticsService service({data_dir, concept_db});
    const auto                 first = service.reload();
    if (first.status != 200)
        std::cerr << "initial load failed, serving 503 until a reload succeeds: " << first.body << "\n";
    else
        std::cerr << "loaded snapshot: " << flowlens::Json::parse(first.body)["kpis"].dump() << "\n";

    httplib::Server server;
    flowlens::mount(server, service);

    std::unique_ptr< flowlens::PeriodicReloader > reloader;
    if (reload_interval > 0)
        reloader = std::make_unique< flowlens::PeriodicReloader >(service, std::chrono::seconds(reload_interval));

    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "listening on " << host << ":" << port << "\n";
    if (!server.listen(host, port))
    {
        std::cerr << "cannot listen on " << host << ":" << port << "\n";
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Task-scoped user-flow analytics over in-vehicle touchscreen, glance and driving logs"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    auto*       generate = app.add_subcommand("generate", "Write a seeded synthetic corpus");
    generate->add_option("--config", config_path, "Generator config (JSON)")->required()->check(CLI::ExistingFile);
    generate->add_option("--out", out_dir, "Output directory")->required();

    std::string data_dir, concept_db, host = "0.0.0.0";
    int         port = 8080, reload_interval = 0;
    auto*       serve = app.add_subcommand("serve", "Serve the HTTP API");
    serve->add_option("--data-dir", data_dir, "Directory of *.jsonl event logs")->required();
    serve->add_option("--concept-db", concept_db, "Concept database (JSON array)")->required();
    serve->add_option("--port", port, "TCP port")->check(CLI::Range(0, 65535));
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--reload-interval", reload_interval, "Reload the snapshot every N seconds (0 = off)")
        ->check(CLI::NonNegativeNumber);

    std::string request_path;
    auto*       analyze = app.add_subcommand("analyze", "Run one analysis request against a data directory");
    analyze->add_option("--data-dir", data_dir, "Directory of *.jsonl event logs")->required();
    analyze->add_option("--concept-db", concept_db, "Concept database (JSON array)")->required();
    analyze->add_option("--request", request_path, "Analysis request (JSON)")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*generate)
            return run_generate(config_path, out_dir);
        if (*analyze)
            return run_analyze(data_dir, concept_db, request_path);
        return run_serve(data_dir, concept_db, host, port, reload_interval);
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

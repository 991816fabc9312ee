#ifndef FLOWLENS_HTTP_SERVER_HPP
#define FLOWLENS_HTTP_SERVER_HPP

#include <chrono>
#include <condition_variable>
#include <mutex>
#include <stop_token>
#include <thread>

#include <httplib.h>

#include "api_service.hpp"

namespace flowlens
{

/// Routes the HTTP endpoints onto a service. The service must outlive the server.
inline void mount(httplib::Server& server, AnalyticsService& service)
{
    auto reply = [](httplib::Response& res, const ApiResponse& r) {
        res.status = r.status;
        res.set_content(r.body, "application/json");
    };
    server.Get("/kpis", [&service, reply](const httplib::Request&, httplib::Response& res) {
        reply(res, service.kpis());
    });
    server.Get("/elements", [&service, reply](const httplib::Request&, httplib::Response& res) {
        reply(res, service.elements());
    });
    server.Post("/analysis", [&service, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, service.analysis(req.body));
    });
    server.Post("/analysis/compare", [&service, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, service.compare(req.body));
    });
    server.Get(R"(/sequence/(.+))", [&service, reply](const httplib::Request& req, httplib::Response& res) {
        std::optional< std::string > margin;
        if (req.has_param("margin"))
            margin = req.get_param_value("margin");
        reply(res, service.sequence(req.matches[1].str(), margin ? std::optional< std::string_view >(*margin)
                                                                 : std::nullopt));
    });
    server.Post("/admin/reload", [&service, reply](const httplib::Request&, httplib::Response& res) {
        reply(res, service.reload());
    });
}

/// Calls service.reload() every interval until destroyed.
class PeriodicReloader
{
public:
    PeriodicReloader(AnalyticsService& service, std::chrono::seconds interval)
        : thread_([this, &service, interval](std::stop_token stop) {
              std::unique_lock lock(mutex_);
              while (!wake_.wait_for(lock, stop, interval, [] { return false; }) && !stop.stop_requested())
              {
                  lock.unlock();
                  service.reload();
                  lock.lock();
              }
          })
    {}

private:
    std::mutex                  mutex_;
    std::condition_variable_any wake_;
    std::jthread                thread_;
};

} // namespace flowlens

#endif // FLOWLENS_HTTP_SERVER_HPP

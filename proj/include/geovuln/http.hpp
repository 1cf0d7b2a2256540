#pragma once

// Binds LayerService handlers to HTTP routes. Requires cpp-httplib and a
// threads library at link time.

#include "geovuln/server.hpp"

#include <httplib.h>

#include <memory>
#include <string>

namespace geovuln::server {

namespace detail {

inline Params params_of(const httplib::Request& req)
{
    Params p;
    for (const auto& [k, v] : req.params) p.emplace(k, v); // first value wins for repeated keys
    return p;
}

inline void send(httplib::Response& res, const Response& r)
{
    res.status = r.status;
    res.set_content(r.body, r.content_type);
}

} // namespace detail

/// Installs every API route on `http`. `service` must outlive the server.
inline void mount_routes(httplib::Server& http, const LayerService& service)
{
    using detail::params_of;
    using detail::send;

    http.set_default_headers({{"Access-Control-Allow-Origin", "*"}, {"Access-Control-Allow-Methods", "GET, OPTIONS"}});
    http.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    http.Get("/api/catalog", [&](const httplib::Request&, httplib::Response& res) { send(res, service.handle_catalog()); });
    http.Get(R"(/api/layers/([^/]+))", [&](const httplib::Request& req, httplib::Response& res) {
        send(res, service.handle_layer(req.matches[1], params_of(req)));
    });
    http.Get(R"(/api/raster/([^/]+)/window)", [&](const httplib::Request& req, httplib::Response& res) {
        send(res, service.handle_raster_window(req.matches[1], params_of(req)));
    });
    http.Get(R"(/api/points/([^/]+)/clusters)", [&](const httplib::Request& req, httplib::Response& res) {
        send(res, service.handle_clusters(req.matches[1], params_of(req)));
    });
    http.Get(R"(/api/table/([^/]+)/export)", [&](const httplib::Request& req, httplib::Response& res) {
        auto r = service.handle_export(req.matches[1], params_of(req));
        if (r.status == 200)
            res.set_header("Content-Disposition", "attachment; filename=\"" + std::string(req.matches[1]) + ".csv\"");
        send(res, r);
    });
    http.Get(R"(/api/table/([^/]+))", [&](const httplib::Request& req, httplib::Response& res) {
        send(res, service.handle_table(req.matches[1], params_of(req)));
    });
    http.Get("/api/search", [&](const httplib::Request& req, httplib::Response& res) {
        send(res, service.handle_search(params_of(req)));
    });
    http.Get("/api/state/decode", [&](const httplib::Request& req, httplib::Response& res) {
        send(res, service.handle_state_decode(params_of(req)));
    });

    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string message = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            message = e.what();
        } catch (...) {
        }
        send(res, error_response(500, message));
    });
    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) send(res, error_response(res.status, res.status == 404 ? "not found" : "request failed"));
    });
}

} // namespace geovuln::server

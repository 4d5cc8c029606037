#pragma once

// Binds an Api to cpp-httplib. Kept out of the umbrella header so code that
// only searches does not pull in the HTTP stack.

#include <map>
#include <string>

#include "httplib.h"
#include "trendsearch/search_service.hpp"

namespace trendsearch {

inline void mount_api(httplib::Server& server, const Api& api) {
    server.Get(R"(/api/.*)", [&api](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> params;
        for (const auto& [k, v] : req.params)
            params.emplace(k, v);  // first value wins for repeated keys
        const auto out = api.handle("GET", req.path, params);
        res.status = out.status;
        res.set_content(out.body.dump(), "application/json");
    });
    const auto read_only = [&api](const httplib::Request& req, httplib::Response& res) {
        const auto out = api.handle(req.method, req.path, {});
        res.status = out.status;
        res.set_content(out.body.dump(), "application/json");
    };
    server.Post(R"(/api/.*)", read_only);
    server.Put(R"(/api/.*)", read_only);
    server.Patch(R"(/api/.*)", read_only);
    server.Delete(R"(/api/.*)", read_only);
}

}  // namespace trendsearch

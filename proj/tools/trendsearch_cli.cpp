// trendsearch: fit label models, label a corpus, build the index, and search
// it from the command line or over HTTP.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "trendsearch/http_server.hpp"
#include "trendsearch/trendsearch.hpp"

#ifndef TRENDSEARCH_DATA_DIR
#define TRENDSEARCH_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace trendsearch;

namespace {

std::atomic<bool> g_reload{false};
std::atomic<bool> g_stop{false};

extern "C" void on_sighup(int) { g_reload = true; }
extern "C" void on_sigterm(int) { g_stop = true; }

struct Options {
    std::string config;
    std::string corpus;
    std::string metadata;
    std::string models;
    std::string events;
    std::string labels;
    std::string shapes;
    std::string synonyms = std::string(TRENDSEARCH_DATA_DIR) + "/parser/synonyms.json";
    std::string stop_phrases = std::string(TRENDSEARCH_DATA_DIR) + "/parser/stop_phrases.txt";
    std::string host = "127.0.0.1";
    int port = 8080;
    bool json = false;
    std::optional<int> max_gap;
    std::optional<double> keep;
    std::optional<double> aspect;
    std::string query;
    std::string exclude;
    std::size_t page = 1;
};

Config effective_config(const Options& o) {
    Config c = o.config.empty() ? Config{} : load_config(o.config);
    if (o.max_gap)
        c.max_gap = *o.max_gap;
    if (o.keep)
        c.keep = *o.keep;
    if (o.aspect)
        c.aspect = *o.aspect;
    c.validate();
    return c;
}

void require(const std::string& value, const char* flag) {
    if (value.empty())
        throw InputError(std::string("missing required option ") + flag);
}

SnapshotPaths snapshot_paths(const Options& o) {
    require(o.events, "--events");
    return {o.events, o.models, o.corpus, o.metadata, o.synonyms, o.stop_phrases};
}

int cmd_fit_models(const Options& o) {
    require(o.labels, "--labels");
    require(o.models, "--models");
    const auto cfg = effective_config(o);
    const auto slope = load_slope_labels_csv(o.labels);
    std::vector<ShapeSample> shapes;
    if (!o.shapes.empty())
        shapes = load_shape_labels_csv(o.shapes);
    const auto models = fit_label_models(slope, shapes, cfg.fit_params());
    for (const auto& d : models.diagnostics)
        std::cerr << "warning: " << d << "\n";
    save_models(models, o.models);
    std::cout << "fitted " << models.slope.size() << " slope, " << models.compound.size()
              << " compound and " << models.shape.size() << " shape models; modifier retention "
              << models.modifier_rows_retained << "/" << models.modifier_rows << "\n"
              << "fingerprint " << model_fingerprint(models) << " -> " << o.models << "\n";
    return 0;
}

int cmd_label(const Options& o) {
    require(o.corpus, "--corpus");
    require(o.models, "--models");
    require(o.events, "--events");
    const auto cfg = effective_config(o);
    const auto models = load_models(o.models);
    const auto charts = load_series_csv(o.corpus);
    std::vector<TimeSeries> series;
    for (const auto& [id, s] : charts)
        series.push_back(s);
    const auto events = label_charts(series, models, cfg.labeler_params());
    persist_events(events, o.events, {kEventsFormatVersion, model_fingerprint(models), {}});
    std::cout << "labeled " << series.size() << " charts: " << events.size() << " events -> "
              << o.events << "\n";
    return 0;
}

int cmd_index(const Options& o) {
    require(o.events, "--events");
    const Index idx(load_events(o.events));
    const auto out = postings_path_for(o.events);
    save_postings(idx, events_digest(o.events), out);
    std::cout << "indexed " << idx.size() << " documents, " << idx.word_postings().size()
              << " words, " << idx.trigram_postings().size() << " trigrams -> " << out << "\n";
    return 0;
}

void print_table(const json& r) {
    if (r.contains("notification"))
        std::cout << r["notification"].get<std::string>() << "\n";
    std::cout << r["total_buckets"].get<std::size_t>() << " charts matched\n";
    std::size_t rank = (r["page"].get<std::size_t>() - 1) * r["page_size"].get<std::size_t>();
    for (const auto& b : r["buckets"]) {
        std::printf("%3zu  %-6s  score %.4f  %zu match%s\n", ++rank,
                    b["chart_id"].get<std::string>().c_str(), b["bucket_score"].get<double>(),
                    b["match_count"].get<std::size_t>(),
                    b["match_count"].get<std::size_t>() == 1 ? "" : "es");
        std::cout << "     " << b["snippet_text"].get<std::string>() << "\n";
    }
}

int cmd_query(const Options& o) {
    const auto cfg = effective_config(o);
    SearchService service(load_snapshot(cfg, snapshot_paths(o)));
    SearchRequest req;
    req.q = o.query;
    req.page = o.page;
    req.max_gap = o.max_gap;
    std::stringstream ss(o.exclude);
    for (std::string l; std::getline(ss, l, ',');)
        if (auto t = trim(l); !t.empty())
            req.exclude.insert(to_lower(t));
    const auto r = service.search(req);
    if (o.json)
        std::cout << r.dump(2) << "\n";
    else
        print_table(r);
    return 0;
}

int cmd_stats(const Options& o) {
    require(o.events, "--events");
    const auto loaded = load_events_with_header(o.events);
    std::map<std::string, std::size_t> by_kind;
    std::map<std::pair<std::string, double>, std::size_t> by_level;
    std::set<std::string> charts, labels;
    for (const auto& e : loaded.events) {
        ++by_kind[std::string(to_string(e.kind))];
        if (e.kind != EventKind::Superlative)
            ++by_level[{std::string(to_string(e.kind)), e.epsilon_level}];
        charts.insert(e.chart_id);
        labels.insert(e.label);
    }
    json j = {{"events", loaded.events.size()},
              {"charts", charts.size()},
              {"distinct_labels", labels.size()},
              {"by_kind", by_kind},
              {"model_fingerprint", loaded.header.model_fingerprint}};
    json levels = json::array();
    for (const auto& [k, n] : by_level)
        levels.push_back({{"kind", k.first}, {"epsilon", k.second}, {"events", n}});
    j["by_level"] = levels;
    if (!o.models.empty()) {
        const auto m = load_models(o.models);
        j["modifier_rows"] = m.modifier_rows;
        j["modifier_rows_retained"] = m.modifier_rows_retained;
        j["modifier_retention"] = m.modifier_retention();
        json peaks = json::object();
        for (const auto& [mod, s] : m.modifier_scalars)
            peaks[mod] = s.peak_scalar;
        j["modifier_peak_scalars"] = peaks;
    }
    if (o.json) {
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    std::cout << "events: " << loaded.events.size() << " over " << charts.size() << " charts, "
              << labels.size() << " distinct labels\n";
    for (const auto& [k, n] : by_kind)
        std::cout << "  " << k << ": " << n << "\n";
    for (const auto& [k, n] : by_level)
        std::cout << "  " << k.first << " @ eps " << k.second << ": " << n << "\n";
    if (j.contains("modifier_retention")) {
        std::printf("modifier retention: %zu/%zu (%.1f%%)\n",
                    j["modifier_rows_retained"].get<std::size_t>(),
                    j["modifier_rows"].get<std::size_t>(),
                    100.0 * j["modifier_retention"].get<double>());
        for (const auto& [mod, peak] : j["modifier_peak_scalars"].items())
            std::printf("  %s peak scalar %.3f\n", mod.c_str(), peak.get<double>());
    }
    return 0;
}

int cmd_serve(const Options& o) {
    const auto cfg = effective_config(o);
    const auto paths = snapshot_paths(o);
    SearchService service(load_snapshot(cfg, paths));
    Api api(service);
    httplib::Server server;
    mount_api(server, api);

    std::signal(SIGHUP, on_sighup);
    std::signal(SIGINT, on_sigterm);
    std::signal(SIGTERM, on_sigterm);
    std::thread watcher([&] {
        while (!g_stop) {
            std::this_thread::sleep_for(std::chrono::milliseconds(200));
            if (g_reload.exchange(false)) {
                try {
                    service.reload(load_snapshot(effective_config(o), paths));
                    std::cerr << "reloaded index\n";
                } catch (const std::exception& e) {
                    std::cerr << "reload failed, keeping previous index: " << e.what() << "\n";
                }
            }
        }
        server.stop();
    });
    std::cerr << "listening on http://" << o.host << ":" << o.port << "\n";
    const bool ok = server.listen(o.host, o.port);
    g_stop = true;
    watcher.join();
    if (!ok) {
        std::cerr << "error: cannot listen on " << o.host << ":" << o.port << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semantic trend search over time series"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* c) {
        c->add_option("--config", o.config, "key = value config file");
    };
    auto search_inputs = [&](CLI::App* c) {
        c->add_option("--events", o.events, "labeled events (JSON lines)")->required();
        c->add_option("--models", o.models, "fitted models (enables up/down/flat)");
        c->add_option("--corpus", o.corpus, "series CSV (date,ticker,value)");
        c->add_option("--metadata", o.metadata, "chart metadata CSV (ticker,company,aliases)");
        c->add_option("--synonyms", o.synonyms, "synonym table (JSON)");
        c->add_option("--stop-phrases", o.stop_phrases, "stop-phrase list");
        c->add_option("--max-gap", o.max_gap, "days allowed between sequence events");
    };

    auto* fit = app.add_subcommand("fit-models", "fit label models from label CSVs");
    common(fit);
    fit->add_option("--labels", o.labels, "slope label CSV")->required();
    fit->add_option("--shapes", o.shapes, "shape label CSV");
    fit->add_option("--models", o.models, "output models file")->required();

    auto* label = app.add_subcommand("label", "label a series corpus");
    common(label);
    label->add_option("--corpus", o.corpus, "series CSV")->required();
    label->add_option("--models", o.models, "fitted models")->required();
    label->add_option("--events", o.events, "output events file")->required();
    label->add_option("--keep", o.keep, "fraction of events kept per kind and level");
    label->add_option("--aspect", o.aspect, "chart aspect ratio (width / height)");

    auto* index = app.add_subcommand("index", "write the postings sidecar for an events file");
    common(index);
    index->add_option("--events", o.events, "events file")->required();

    auto* serve = app.add_subcommand("serve", "serve the HTTP API (SIGHUP reloads)");
    common(serve);
    search_inputs(serve);
    serve->add_option("--host", o.host, "bind address");
    serve->add_option("--port", o.port, "port");

    auto* query = app.add_subcommand("query", "run one search");
    common(query);
    search_inputs(query);
    query->add_option("text", o.query, "query text")->required();
    query->add_flag("--json", o.json, "print the full JSON response");
    query->add_option("--exclude", o.exclude, "comma-separated labels to exclude");
    query->add_option("--page", o.page, "result page (20 charts per page)");

    auto* stats = app.add_subcommand("stats", "corpus counts and model retention");
    common(stats);
    stats->add_option("--events", o.events, "events file")->required();
    stats->add_option("--models", o.models, "fitted models");
    stats->add_flag("--json", o.json, "JSON output");

    CLI11_PARSE(app, argc, argv);
    try {
        if (fit->parsed()) return cmd_fit_models(o);
        if (label->parsed()) return cmd_label(o);
        if (index->parsed()) return cmd_index(o);
        if (serve->parsed()) return cmd_serve(o);
        if (query->parsed()) return cmd_query(o);
        if (stats->parsed()) return cmd_stats(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

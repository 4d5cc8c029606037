#include <gtest/gtest.h>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <random>
#include <thread>

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>

#include "httplib.h"
#include "test_support.hpp"

extern char** environ;

using namespace trendsearch;
using ts_test::data_path;
using ts_test::fixture_corpus;
using ts_test::fixture_models;
using ts_test::make_event;
using ts_test::scratch_dir;
using ts_test::ymd;

namespace fs = std::filesystem;

namespace {

// Bundled corpus labeled with the fixture models, written once per process.
struct Pipeline {
    fs::path dir;
    SnapshotPaths paths;
};

const Pipeline& pipeline() {
    static const Pipeline p = [] {
        Pipeline out;
        out.dir = scratch_dir("server");
        save_models(fixture_models(), out.dir / "models.json");
        std::vector<TimeSeries> charts;
        for (const auto& [id, s] : fixture_corpus())
            charts.push_back(s);
        persist_events(label_charts(charts, fixture_models()), out.dir / "events.jsonl",
                       {kEventsFormatVersion, model_fingerprint(fixture_models()), {}});
        out.paths = {out.dir / "events.jsonl",          out.dir / "models.json",
                     data_path("corpus/series.csv"),    data_path("corpus/metadata.csv"),
                     data_path("parser/synonyms.json"), data_path("parser/stop_phrases.txt")};
        return out;
    }();
    return p;
}

std::shared_ptr<const Snapshot> corpus_snapshot() {
    static const auto s = load_snapshot(Config{}, pipeline().paths);
    return s;
}

ApiResponse get(const Api& api, const std::string& path,
                const std::map<std::string, std::string>& params = {}) {
    return api.handle("GET", path, params);
}

struct RunResult {
    int status = -1;
    std::string output;
};

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s)
        out += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return out + "'";
}

RunResult run_cli(const std::vector<std::string>& args, bool merge_stderr = false) {
    std::string cmd = shell_quote(TRENDSEARCH_CLI_PATH);
    for (const auto& a : args)
        cmd += " " + shell_quote(a);
    cmd += merge_stderr ? " 2>&1" : " 2>/dev/null";
    RunResult r;
    FILE* f = popen(cmd.c_str(), "r");
    if (!f)
        return r;
    char buf[4096];
    for (std::size_t n; (n = fread(buf, 1, sizeof buf, f)) > 0;)
        r.output.append(buf, n);
    const int st = pclose(f);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

std::vector<std::string> search_args(const SnapshotPaths& p) {
    return {"--events", p.events.string(), "--models", p.models.string(),
            "--corpus", p.corpus.string(), "--metadata", p.metadata.string()};
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace

// ---------------------------------------------------------------------------
// API contract

TEST(Api, EmptyQueryIs400) {
    SearchService svc(corpus_snapshot());
    Api api(svc);
    EXPECT_EQ(get(api, "/api/search", {{"q", ""}}).status, 400);
    EXPECT_EQ(get(api, "/api/search", {{"q", "   "}}).status, 400);
    EXPECT_EQ(get(api, "/api/search").status, 400);
    EXPECT_EQ(get(api, "/api/search", {{"q", "show me the"}}).status, 400);
}

TEST(Api, NotLoadedIs503) {
    SearchService svc;
    Api api(svc);
    EXPECT_EQ(get(api, "/api/search", {{"q", "soaring"}}).status, 503);
    EXPECT_EQ(get(api, "/api/labels").status, 503);
    EXPECT_EQ(get(api, "/api/charts/ALK").status, 503);
}

TEST(Api, UnknownRoutesAndMethods) {
    SearchService svc(corpus_snapshot());
    Api api(svc);
    EXPECT_EQ(get(api, "/api/nothing").status, 404);
    EXPECT_EQ(api.handle("POST", "/api/search", {{"q", "soaring"}}).status, 405);
    EXPECT_EQ(get(api, "/api/search", {{"q", "soaring"}, {"page", "0"}}).status, 400);
    EXPECT_EQ(get(api, "/api/search", {{"q", "soaring"}, {"page", "two"}}).status, 400);
}

TEST(Api, WentUpNotifiesAndShowsPositiveFamilies) {
    SearchService svc(corpus_snapshot());
    Api api(svc);
    const auto r = get(api, "/api/search", {{"q", "stocks that went up"}});
    ASSERT_EQ(r.status, 200);
    ASSERT_TRUE(r.body.contains("notification"));
    EXPECT_NE(r.body["notification"].get<std::string>().find("'up'"), std::string::npos);
    EXPECT_EQ(r.body["query_echo"]["inexact_terms"], json::array({"up"}));
    std::set<std::string> positive;
    for (const auto& l : select_family("+slope", corpus_snapshot()->stats))
        positive.insert(descriptor_of(l));
    ASSERT_FALSE(r.body["facet_tree"].empty());
    for (const auto& node : r.body["facet_tree"])
        EXPECT_TRUE(positive.contains(descriptor_of(node["label"].get<std::string>())))
            << node["label"];
    EXPECT_GT(r.body["total_buckets"].get<std::size_t>(), 0u);
}

TEST(Api, ModelLabelsMissingFromTheCorpusStayTrendTerms) {
    SearchService svc(corpus_snapshot());
    Api api(svc);
    ASSERT_FALSE(corpus_snapshot()->index.vocabulary().contains("rising"));
    const auto r = get(api, "/api/search", {{"q", "rising then falling"}});
    ASSERT_EQ(r.status, 200);
    const auto& qe = r.body["query_echo"];
    EXPECT_EQ(qe["event_type"], "sequence");
    EXPECT_EQ(qe["trend_terms"], json::parse(R"([["rising"], ["falling"]])"));
    EXPECT_EQ(qe["inexact_terms"], json::parse(R"(["rising"])"));
    EXPECT_TRUE(r.body.contains("notification"));
}

TEST(Api, ExactQueryHasNoNotification) {
    SearchService svc(corpus_snapshot());
    Api api(svc);
    const auto r = get(api, "/api/search", {{"q", "climbing"}});
    ASSERT_EQ(r.status, 200);
    EXPECT_FALSE(r.body.contains("notification"));
    EXPECT_TRUE(r.body["query_echo"]["inexact_terms"].empty());
}

TEST(Api, ResponsesAreDeterministic) {
    SearchService a(corpus_snapshot());
    SearchService b(load_snapshot(Config{}, pipeline().paths));
    Api api_a(a), api_b(b);
    for (const std::string q : {"stocks that went up", "slow climbing", "up, down, up",
                                "Show me when Alaska Airlines was tanking before November 2016"}) {
        const std::map<std::string, std::string> params{{"q", q}, {"exclude", "soaring"}};
        const auto x = get(api_a, "/api/search", params).body.dump();
        EXPECT_EQ(x, get(api_a, "/api/search", params).body.dump()) << q;
        EXPECT_EQ(x, get(api_b, "/api/search", params).body.dump()) << q;
    }
}

TEST(Api, BucketsSnippetsAndScores) {
    SearchService svc(corpus_snapshot());
    Api api(svc);
    const auto r = get(api, "/api/search", {{"q", "climbing"}});
    ASSERT_EQ(r.status, 200);
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& b : r.body["buckets"]) {
        const double score = b["bucket_score"].get<double>();
        EXPECT_LE(score, prev);
        prev = score;
        EXPECT_EQ(b["match_count"].get<std::size_t>(), b["events"].size());
        double sum = 0.0;
        for (const auto& e : b["events"])
            sum += e["composite"].get<double>();
        EXPECT_NEAR(sum, score, 1e-12);
        ASSERT_LE(b["snippets"].size(), 3u);
        ASSERT_GE(b["snippets"].size(), 1u);
        std::set<std::string> distinct;
        double last = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < b["snippets"].size(); ++k) {
            const auto idx = b["snippet_events"][k].get<std::size_t>();
            const auto& ev = b["events"][idx];
            EXPECT_LE(ev["composite"].get<double>(), last);
            last = ev["composite"].get<double>();
            const auto s = b["snippets"][k].get<std::string>();
            EXPECT_TRUE(s.starts_with("This stock was " + ev["label"].get<std::string>() + " from "))
                << s;
            EXPECT_TRUE(distinct.insert(s).second);
        }
        EXPECT_TRUE(b["snippet_text"].get<std::string>().starts_with("This stock "));
    }
}

TEST(Api, SequenceEventsCarrySlots) {
    SearchService svc(corpus_snapshot());
    Api api(svc);
    const auto r = get(api, "/api/search", {{"q", "up, down, up"}});
    ASSERT_EQ(r.status, 200);
    EXPECT_EQ(r.body["query_echo"]["event_type"], "sequence");
    ASSERT_FALSE(r.body["buckets"].empty());
    for (const auto& b : r.body["buckets"])
        for (const auto& e : b["events"]) {
            ASSERT_TRUE(e.contains("slot_index"));
            EXPECT_LT(e["slot_index"].get<int>(), 3);
        }
}

TEST(Api, ExclusionRemovesFamilyAndUnchecksNode) {
    SearchService svc(corpus_snapshot());
    Api api(svc);
    const auto all = get(api, "/api/search", {{"q", "stocks that went up"}});
    const auto cut = get(api, "/api/search", {{"q", "stocks that went up"}, {"exclude", "Climbing"}});
    ASSERT_EQ(cut.status, 200);
    std::size_t before = 0;
    for (const auto& b : all.body["buckets"])
        for (const auto& e : b["events"])
            before += descriptor_of(e["label"].get<std::string>()) == "climbing";
    EXPECT_GT(before, 0u);
    for (const auto& b : cut.body["buckets"])
        for (const auto& e : b["events"])
            EXPECT_NE(descriptor_of(e["label"].get<std::string>()), "climbing");
    bool found = false;
    for (const auto& n : cut.body["facet_tree"])
        if (n["label"] == "climbing") {
            found = true;
            EXPECT_FALSE(n["checked"].get<bool>());
        }
    EXPECT_TRUE(found);
    EXPECT_EQ(get(api, "/api/search", {{"q", "stocks that went up"}, {"exclude", ""}}).body.dump(),
              all.body.dump());
}

TEST(Api, Pagination) {
    Config cfg;
    cfg.page_size = 2;
    SearchService svc(load_snapshot(cfg, pipeline().paths));
    Api api(svc);
    const auto p1 = get(api, "/api/search", {{"q", "climbing"}});
    const auto p2 = get(api, "/api/search", {{"q", "climbing"}, {"page", "2"}});
    ASSERT_GT(p1.body["total_buckets"].get<std::size_t>(), 2u);
    EXPECT_EQ(p1.body["buckets"].size(), 2u);
    EXPECT_EQ(p2.body["page"], 2);
    EXPECT_NE(p1.body["buckets"][0]["chart_id"], p2.body["buckets"][0]["chart_id"]);
    EXPECT_TRUE(get(api, "/api/search", {{"q", "climbing"}, {"page", "99"}}).body["buckets"].empty());
}

TEST(Api, FastFallingIsSteeperThanSlowFalling) {
    // ten charts, each with a quick, a plain and a slow decline
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> sal(0.6, 1.0), jitter(-5.0, 5.0);
    std::vector<LabeledEvent> evs;
    for (int c = 0; c < 10; ++c) {
        const std::string id = "C" + std::to_string(c);
        const std::vector<std::pair<std::string, double>> kinds{
            {"quickly falling", -65}, {"falling", -40}, {"slowly falling", -15}};
        for (std::size_t k = 0; k < kinds.size(); ++k) {
            auto e = make_event(id, kinds[k].first, ymd(2015, 1, 1) + static_cast<long>(60 * k),
                                ymd(2015, 2, 1) + static_cast<long>(60 * k), sal(rng));
            e.angle = kinds[k].second + jitter(rng);
            evs.push_back(e);
        }
    }
    auto snap = build_snapshot(Config{}, Index(evs), {}, {},
                               load_synonyms(data_path("parser/synonyms.json")),
                               load_stop_phrases(data_path("parser/stop_phrases.txt")), {});
    SearchService svc(snap);
    Api api(svc);
    auto top_angles = [&](const std::string& q) {
        const auto r = get(api, "/api/search", {{"q", q}});
        std::vector<double> out;
        for (const auto& b : r.body["buckets"])
            out.push_back(snap->index.doc(b["events"][0]["doc_id"].get<DocId>()).event.angle);
        return out;
    };
    const auto fast = top_angles("fast falling");
    const auto slow = top_angles("slow falling");
    ASSERT_EQ(fast.size(), 10u);
    ASSERT_EQ(slow.size(), 10u);
    EXPECT_LT(median(fast), median(slow));
}

TEST(Api, FastDecliningIsSteeperOnLabeledCorpus) {
    SearchService svc(corpus_snapshot());
    Api api(svc);
    const auto& idx = corpus_snapshot()->index;
    auto top_angles = [&](const std::string& q) {
        std::vector<double> out;
        const auto r = get(api, "/api/search", {{"q", q}});
        for (const auto& b : r.body["buckets"])
            out.push_back(idx.doc(b["events"][0]["doc_id"].get<DocId>()).event.angle);
        return out;
    };
    const auto fast = top_angles("fast declining");
    const auto slow = top_angles("slow declining");
    ASSERT_FALSE(fast.empty());
    ASSERT_FALSE(slow.empty());
    EXPECT_LT(median(fast), median(slow));
}

TEST(Api, ChartRanges) {
    SearchService svc(corpus_snapshot());
    Api api(svc);
    const auto& alk = fixture_corpus().at("ALK");
    const auto full = get(api, "/api/charts/ALK");
    ASSERT_EQ(full.status, 200);
    EXPECT_EQ(full.body["points"].size(), alk.points.size());
    EXPECT_EQ(full.body["company"], "Alaska Airlines");
    EXPECT_EQ(full.body["points"][0]["date"], alk.points.front().date.iso());
    const auto d = alk.points[10].date.iso();
    EXPECT_TRUE(get(api, "/api/charts/ALK", {{"from", d}, {"to", d}}).body["points"].empty());
    const auto clipped =
        get(api, "/api/charts/ALK", {{"from", alk.points[5].date.iso()}, {"to", alk.points[15].date.iso()}});
    EXPECT_EQ(clipped.body["points"].size(), 10u);
    EXPECT_EQ(get(api, "/api/charts/NOPE").status, 404);
    EXPECT_EQ(get(api, "/api/charts/ALK", {{"from", "2015-02-30"}}).status, 400);
    EXPECT_EQ(get(api, "/api/charts/ALK", {{"from", "2016-01-01"}, {"to", "2015-01-01"}}).status, 400);
}

TEST(Api, LabelsAndHierarchy) {
    SearchService svc(corpus_snapshot());
    Api api(svc);
    const auto l = get(api, "/api/labels");
    ASSERT_EQ(l.status, 200);
    EXPECT_FALSE(l.body["vocabulary"].empty());
    EXPECT_EQ(l.body["labels"].size(), corpus_snapshot()->index.labels().size());
    for (const auto& e : l.body["labels"]) {
        EXPECT_FALSE(e["kinds"].empty());
        EXPECT_EQ(e["family"], descriptor_of(e["label"].get<std::string>()));
    }
    const auto h = get(api, "/api/hierarchy");
    ASSERT_EQ(h.status, 200);
    EXPECT_FALSE(h.body["edges"].empty());
}

TEST(Service, ReloadSwapsWholeSnapshot) {
    SearchService svc(corpus_snapshot());
    const auto held = svc.snapshot();
    const auto full_total = svc.search({"soaring", {}, 1, {}})["total_buckets"].get<std::size_t>();
    ASSERT_GT(full_total, 1u);
    auto tiny = build_snapshot(Config{}, Index({make_event("ZZZ", "soaring", ymd(2015, 1, 1), ymd(2015, 2, 1))}),
                               {}, {}, {}, {}, {});
    std::atomic<bool> stop{false};
    std::atomic<int> bad{0}, done{0};
    std::vector<std::thread> readers;
    for (int t = 0; t < 4; ++t)
        readers.emplace_back([&] {
            while (!stop) {
                const auto n = svc.search({"soaring", {}, 1, {}})["total_buckets"].get<std::size_t>();
                if (n != 1 && n != full_total)
                    ++bad;
                ++done;
            }
        });
    for (int i = 0; i < 50; ++i) {
        svc.reload(i % 2 ? corpus_snapshot() : tiny);
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    stop = true;
    for (auto& t : readers)
        t.join();
    EXPECT_EQ(bad, 0);
    EXPECT_GT(done, 0);
    EXPECT_EQ(held->index.size(), corpus_snapshot()->index.size());
    svc.reload(tiny);
    EXPECT_EQ(svc.search({"soaring", {}, 1, {}})["buckets"][0]["chart_id"], "ZZZ");
}

// ---------------------------------------------------------------------------
// Command line

TEST(Cli, QueryJsonScoresSlowClimbing) {
    const auto dir = scratch_dir("cli_slow");
    persist_events({make_event("AAA", "slow climbing", ymd(2015, 1, 1), ymd(2015, 3, 1), 1.0),
                    make_event("BBB", "climbing", ymd(2015, 1, 1), ymd(2015, 3, 1), 0.5),
                    make_event("CCC", "fast falling", ymd(2015, 1, 1), ymd(2015, 3, 1), 0.9)},
                   dir / "e.jsonl");
    const auto r = run_cli({"query", "--events", (dir / "e.jsonl").string(), "slow climbing", "--json"});
    ASSERT_EQ(r.status, 0) << r.output;
    const auto j = json::parse(r.output);
    const auto& first = j["buckets"][0]["events"][0];
    EXPECT_EQ(first["label"], "slow climbing");
    EXPECT_NEAR(first["label_score"].get<double>(), 2.0 / std::sqrt(12.0), 1e-9);
    EXPECT_NEAR(first["label_score"].get<double>(), 0.577, 5e-4);
}

TEST(Cli, QueryOutputEqualsApi) {
    const auto& p = pipeline().paths;
    SearchService svc(corpus_snapshot());
    Api api(svc);
    for (const std::string q : {"stocks that went up", "up, down, up", "tankng"}) {
        auto args = search_args(p);
        args.insert(args.begin(), "query");
        args.push_back(q);
        args.push_back("--json");
        args.push_back("--exclude");
        args.push_back("soaring");
        const auto r = run_cli(args);
        ASSERT_EQ(r.status, 0) << r.output;
        EXPECT_EQ(json::parse(r.output), get(api, "/api/search", {{"q", q}, {"exclude", "soaring"}}).body)
            << q;
    }
}

TEST(Cli, TableOutputAndStats) {
    const auto& p = pipeline().paths;
    auto args = search_args(p);
    args.insert(args.begin(), "query");
    args.push_back("stocks that went up");
    const auto t = run_cli(args);
    ASSERT_EQ(t.status, 0);
    EXPECT_NE(t.output.find("No exact matches for 'up'"), std::string::npos);
    EXPECT_NE(t.output.find("charts matched"), std::string::npos);

    const auto s = run_cli({"stats", "--events", p.events.string(), "--models", p.models.string(), "--json"});
    ASSERT_EQ(s.status, 0) << s.output;
    const auto j = json::parse(s.output);
    EXPECT_EQ(j["events"].get<std::size_t>(), corpus_snapshot()->index.size());
    EXPECT_EQ(j["charts"].get<std::size_t>(), fixture_corpus().size());
    EXPECT_EQ(j["modifier_rows_retained"].get<std::size_t>(), fixture_models().modifier_rows_retained);
}

TEST(Cli, FullPipelineFromLabelFiles) {
    const auto dir = scratch_dir("cli_pipeline");
    const auto m = (dir / "m.json").string(), e = (dir / "e.jsonl").string();
    ASSERT_EQ(run_cli({"fit-models", "--labels", data_path("labels/slope_labels.csv"), "--shapes",
                       data_path("labels/shape_labels.csv"), "--models", m})
                  .status,
              0);
    ASSERT_EQ(run_cli({"label", "--corpus", data_path("corpus/series.csv"), "--models", m, "--events", e})
                  .status,
              0);
    ASSERT_EQ(run_cli({"index", "--events", e}).status, 0);
    EXPECT_TRUE(fs::exists(postings_path_for(e)));
    EXPECT_EQ(events_digest(e), events_digest(pipeline().paths.events));
    bool used = false;
    load_index(e, &used);
    EXPECT_TRUE(used);
}

TEST(Cli, ErrorsExitNonZeroWithMessage) {
    const auto r = run_cli({"query", "--events", "/nonexistent/e.jsonl", "soaring"}, true);
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.output.find("error:"), std::string::npos);
    const auto bad = run_cli({"label", "--corpus", data_path("corpus/series.csv"), "--models",
                              "/nonexistent/m.json", "--events", "/tmp/x.jsonl"},
                             true);
    EXPECT_NE(bad.status, 0);
    EXPECT_NE(run_cli({"frobnicate"}, true).status, 0);
    const auto empty = run_cli({"query", "--events", pipeline().paths.events.string(), "  "}, true);
    EXPECT_NE(empty.status, 0);
    EXPECT_NE(empty.output.find("error:"), std::string::npos);
}

TEST(Cli, ServeAnswersHttpAndReloadsOnSighup) {
    const auto& p = pipeline().paths;
    const auto dir = scratch_dir("cli_serve");
    fs::copy_file(p.events, dir / "e.jsonl");
    const int port = 20000 + static_cast<int>(::getpid() % 20000);
    std::vector<std::string> args{TRENDSEARCH_CLI_PATH, "serve", "--events", (dir / "e.jsonl").string(),
                                  "--models", p.models.string(), "--corpus", p.corpus.string(),
                                  "--port", std::to_string(port)};
    std::vector<char*> argv;
    for (auto& a : args)
        argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    ASSERT_EQ(posix_spawn(&pid, TRENDSEARCH_CLI_PATH, nullptr, nullptr, argv.data(), environ), 0);

    httplib::Client cli("127.0.0.1", port);
    cli.set_connection_timeout(1);
    httplib::Result res;
    for (int i = 0; i < 100 && !res; ++i) {
        res = cli.Get("/api/labels");
        if (!res)
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_FALSE(json::parse(res->body)["vocabulary"].empty());

    auto search = cli.Get("/api/search?q=stocks%20that%20went%20up");
    ASSERT_TRUE(search);
    EXPECT_EQ(search->status, 200);
    SearchService svc(corpus_snapshot());
    EXPECT_EQ(json::parse(search->body), get(Api(svc), "/api/search", {{"q", "stocks that went up"}}).body);
    EXPECT_EQ(cli.Get("/api/search?q=")->status, 400);
    EXPECT_EQ(cli.Get("/api/charts/NOPE")->status, 404);
    EXPECT_EQ(cli.Post("/api/search", "", "text/plain")->status, 405);

    // replace the events file and signal a reload
    persist_events({make_event("ZZZ", "soaring", ymd(2015, 1, 1), ymd(2015, 2, 1))}, dir / "e.jsonl");
    ::kill(pid, SIGHUP);
    bool swapped = false;
    for (int i = 0; i < 50 && !swapped; ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        auto r = cli.Get("/api/search?q=soaring");
        swapped = r && json::parse(r->body)["total_buckets"] == 1;
    }
    EXPECT_TRUE(swapped);

    ::kill(pid, SIGTERM);
    int st = 0;
    ::waitpid(pid, &st, 0);
    EXPECT_TRUE(WIFEXITED(st));
    EXPECT_EQ(WEXITSTATUS(st), 0);
}

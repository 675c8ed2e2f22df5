#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "traceauth/evaluation.hpp"
#include "traceauth/rng.hpp"

using namespace traceauth;

namespace {

Trace dense_user(const std::string& id, double lat, double lon, int days, std::uint64_t seed) {
    Rng rng(seed);
    Trace trace;
    trace.user_id = id;
    const CivilSeconds t0 = civil_seconds(2024, 1, 1);
    const int ticks = days * (86'400 / 180);
    for (int i = 0; i < ticks; ++i) {
        const double jitter_lat = rng.uniform(-2.0, 2.0) / 111'194.9;
        const double jitter_lon = rng.uniform(-2.0, 2.0) / 111'194.9;
        trace.points.push_back({lat + jitter_lat, lon + jitter_lon, t0 + i * 180});
    }
    return trace;
}

std::string eer_csv(const EvalReport& report) {
    std::ostringstream os;
    write_eer_csv(os, report);
    return os.str();
}

} // namespace

TEST_CASE("window extraction") {
    const std::vector<int> symbols = {1, 2, 3, 4, 5};

    SECTION("unit stride") {
        const auto w = make_windows(symbols, 2);
        REQUIRE(w.size() == 4);
        CHECK(w[0] == std::vector<int>{1, 2});
        CHECK(w[1] == std::vector<int>{2, 3});
        CHECK(w[3] == std::vector<int>{4, 5});
    }
    SECTION("window equal to the sequence") {
        const auto w = make_windows(symbols, 5);
        REQUIRE(w.size() == 1);
        CHECK(w[0] == symbols);
    }
    SECTION("window longer than the sequence") {
        const std::vector<int> four = {1, 2, 3, 4};
        CHECK(make_windows(four, 5).empty());
    }
    SECTION("stride two") {
        const std::vector<int> six = {1, 2, 3, 4, 5, 6};
        const auto w = make_windows(six, 2, 2);
        REQUIRE(w.size() == 3);
        CHECK(w[1] == std::vector<int>{3, 4});
    }
    SECTION("sequence overload") {
        ObservationSequence seq;
        for (int s : symbols) seq.symbols.push_back({s, s});
        CHECK(make_windows(seq, 3).size() == 3);
    }
    SECTION("validation") {
        CHECK_THROWS_WITH(make_windows(symbols, 0), "window length must be at least 1");
        CHECK_THROWS_WITH(make_windows(symbols, 2, 0), "stride must be at least 1");
    }
}

TEST_CASE("chronological split") {
    Trace trace;
    trace.user_id = "u";
    for (int i = 0; i < 10; ++i) trace.points.push_back({0, 0, i * 100});

    SECTION("seventy percent") {
        const auto [train, test] = chronological_split(trace, 0.7);
        CHECK(train.points.size() == 7);
        CHECK(test.points.size() == 3);
        CHECK(train.points.back().timestamp == 600);
        CHECK(test.points.front().timestamp == 700);
        CHECK(train.user_id == "u");
        CHECK(test.user_id == "u");
    }
    SECTION("everything or nothing") {
        const auto [all_train, no_test] = chronological_split(trace, 1.0);
        CHECK(all_train.points.size() == 10);
        CHECK(no_test.points.empty());
        const auto [no_train, all_test] = chronological_split(trace, 0.0);
        CHECK(no_train.points.empty());
        CHECK(all_test.points.size() == 10);
    }
    SECTION("sequence overload") {
        ObservationSequence seq;
        for (int i = 0; i < 10; ++i) seq.symbols.push_back({i, i * 100});
        const auto [train, test] = chronological_split(seq, 0.7);
        CHECK(train.symbols.size() == 7);
        CHECK(test.symbols.size() == 3);
    }
    SECTION("validation") {
        CHECK_THROWS_WITH(chronological_split(trace, 1.5), "fraction must be in [0, 1]");
        CHECK_THROWS_WITH(chronological_split(trace, -0.1), "fraction must be in [0, 1]");
    }
}

TEST_CASE("weekly split") {
    // One point per day at noon for eight weeks, starting on a Monday.
    Trace trace;
    trace.user_id = "u";
    const CivilSeconds first = civil_seconds(2024, 1, 1, 12, 0, 0);
    for (int d = 0; d < 56; ++d) trace.points.push_back({0, 0, first + d * kSecondsPerDay});

    SECTION("four training weeks before evaluation week six") {
        const auto [train, test] = weekly_split(trace, 4, 6);
        REQUIRE(train.points.size() == 28); // weeks 2..5 = days 7..34
        REQUIRE(test.points.size() == 7);   // week 6 = days 35..41
        CHECK(train.points.front().timestamp == first + 7 * kSecondsPerDay);
        CHECK(train.points.back().timestamp == first + 34 * kSecondsPerDay);
        CHECK(test.points.front().timestamp == first + 35 * kSecondsPerDay);
        CHECK(test.points.back().timestamp == first + 41 * kSecondsPerDay);
    }
    SECTION("single training week") {
        const auto [train, test] = weekly_split(trace, 1, 6);
        REQUIRE(train.points.size() == 7); // week 5 = days 28..34
        CHECK(train.points.front().timestamp == first + 28 * kSecondsPerDay);
        CHECK(test.points.size() == 7);
    }
    SECTION("sequence overload agrees") {
        ObservationSequence seq;
        for (const auto& p : trace.points) seq.symbols.push_back({0, p.timestamp});
        const auto [train, test] = weekly_split(seq, 4, 6);
        CHECK(train.symbols.size() == 28);
        CHECK(test.symbols.size() == 7);
    }
    SECTION("short history leaves the evaluation portion empty") {
        // With train_weeks = eval_week - 1 the training window starts at the
        // very first fix, so a 14-day history lands entirely in training and
        // the week-6 evaluation window holds nothing.
        Trace young;
        young.user_id = "y";
        for (int d = 0; d < 14; ++d) young.points.push_back({0, 0, first + d * kSecondsPerDay});
        const auto [train, test] = weekly_split(young, 5, 6);
        CHECK(train.points.size() == 14);
        CHECK(test.points.empty());

        // A narrower training window far in the future misses it entirely.
        const auto [train2, test2] = weekly_split(young, 1, 6);
        CHECK(train2.points.empty());
        CHECK(test2.points.empty());
    }
    SECTION("validation") {
        CHECK_THROWS_WITH(weekly_split(trace, 0, 6), "train_weeks must be at least 1");
        CHECK_THROWS_WITH(weekly_split(trace, 4, 4), "eval_week must exceed train_weeks");
    }
}

TEST_CASE("method names round trip") {
    for (Method m : {Method::sm, Method::mc, Method::mshmm, Method::hmm_lap})
        CHECK(method_from_name(method_name(m)) == m);
    CHECK_THROWS_WITH(method_from_name("qda"), "unknown method: qda");
}

TEST_CASE("equal error rate on the worked examples") {
    SECTION("clean crossing at a shared threshold") {
        const std::vector<double> genuine = {0.9, 0.8, 0.4};
        const std::vector<double> impostor = {0.6, 0.3, 0.2};
        const EerResult r = compute_eer(genuine, impostor);
        CHECK(r.eer == 1.0 / 3.0);
        CHECK(r.threshold == 0.6);
    }
    SECTION("identical score multisets") {
        const std::vector<double> s = {0.5, 0.7};
        const EerResult r = compute_eer(s, s);
        CHECK(r.eer == 0.5);
    }
    SECTION("perfect separation") {
        const std::vector<double> genuine = {0.9, 0.8};
        const std::vector<double> impostor = {0.1, 0.2};
        CHECK(compute_eer(genuine, impostor).eer == 0.0);
    }
    SECTION("perfectly inverted scores") {
        const std::vector<double> genuine = {0.1};
        const std::vector<double> impostor = {0.9};
        CHECK(compute_eer(genuine, impostor).eer == 1.0);
    }
    SECTION("validation") {
        const std::vector<double> some = {0.5};
        CHECK_THROWS_WITH(compute_eer(std::vector<double>{}, some), "insufficient scores");
        CHECK_THROWS_WITH(compute_eer(some, std::vector<double>{}), "insufficient scores");
    }
}

TEST_CASE("ROC curves are monotone and anchored") {
    Rng rng(61);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> genuine(3 + rng.below(20));
        std::vector<double> impostor(3 + rng.below(20));
        for (auto& s : genuine) s = rng.uniform(-3, 3);
        for (auto& s : impostor) s = rng.uniform(-3, 3);
        const EerResult r = compute_eer(genuine, impostor);

        REQUIRE(r.roc.size() >= 2);
        CHECK(r.roc.front().far == 1.0); // lowest threshold accepts everyone
        CHECK(r.roc.front().frr == 0.0);
        CHECK(r.roc.back().far == 0.0); // sentinel rejects everyone
        CHECK(r.roc.back().frr == 1.0);
        for (std::size_t k = 1; k < r.roc.size(); ++k) {
            CHECK(r.roc[k].threshold > r.roc[k - 1].threshold);
            CHECK(r.roc[k].far <= r.roc[k - 1].far);
            CHECK(r.roc[k].frr >= r.roc[k - 1].frr);
        }
        CHECK(r.eer >= 0.0);
        CHECK(r.eer <= 1.0);
    }
}

TEST_CASE("EER is invariant under strictly monotone score transforms") {
    Rng rng(62);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> genuine(5 + rng.below(25));
        std::vector<double> impostor(5 + rng.below(25));
        for (auto& s : genuine) s = rng.uniform(-3, 3);
        for (auto& s : impostor) s = rng.uniform(-3, 3);
        const double base = compute_eer(genuine, impostor).eer;

        const auto transformed = [&](double (*f)(double)) {
            std::vector<double> g = genuine;
            std::vector<double> i = impostor;
            for (auto& s : g) s = f(s);
            for (auto& s : i) s = f(s);
            return compute_eer(g, i).eer;
        };
        CHECK(transformed([](double x) { return 2.0 * x + 1.0; }) == base);
        CHECK(transformed([](double x) { return x * x * x; }) == base);
        CHECK(transformed([](double x) { return std::tanh(x); }) == base);
        CHECK(transformed([](double x) { return std::exp(x); }) == base);
    }
}

TEST_CASE("benchmark on a two-user corpus") {
    const std::vector<Trace> corpus = {dense_user("u1", 40.0, 116.3, 3, 71),
                                       dense_user("u2", 40.2, 116.5, 3, 72)};
    BenchmarkConfig cfg;
    cfg.methods = {Method::sm, Method::mc};
    cfg.window_lengths = {4};
    cfg.stride = 4;
    cfg.jobs = 2;

    const EvalReport report = run_benchmark(corpus, cfg);
    CHECK(report.warnings.empty());
    REQUIRE(report.cells.size() == 4); // 2 users x 2 methods
    for (const EvalCell& c : report.cells) {
        CHECK(c.genuine_count > 0);
        CHECK(c.impostor_count > 0);
        CHECK(c.eer >= 0.0);
        CHECK(c.eer <= 1.0);
        CHECK(!c.roc.empty());
    }
    REQUIRE(report.pooled.size() == 2);
    for (const EvalCell& p : report.pooled) {
        CHECK(p.user == "pooled");
        double total = 0.0;
        std::size_t count = 0;
        for (const EvalCell& c : report.cells)
            if (c.method == p.method && c.n == p.n) {
                total += c.eer;
                ++count;
            }
        REQUIRE(count == 2);
        CHECK(p.eer == total / 2.0);
    }

    SECTION("CSV layout") {
        const std::string csv = eer_csv(report);
        CHECK(csv.rfind("user,method,n,r_max,hidden,mode,eer\n", 0) == 0);
        CHECK(csv.find("u1,sm,4,20,0,none,") != std::string::npos);
        CHECK(csv.find("u2,mc,4,20,0,none,") != std::string::npos);
        CHECK(csv.find("pooled,sm,4,") != std::string::npos);

        std::ostringstream roc;
        write_roc_csv(roc, report);
        CHECK(roc.str().rfind("user,method,n,threshold,far,frr\n", 0) == 0);
        CHECK(roc.str().size() > 100);
    }

    SECTION("deterministic across repeat runs and worker counts") {
        const std::string once = eer_csv(report);
        CHECK(eer_csv(run_benchmark(corpus, cfg)) == once);
        BenchmarkConfig serial = cfg;
        serial.jobs = 1;
        CHECK(eer_csv(run_benchmark(corpus, serial)) == once);
    }
}

TEST_CASE("benchmark validation and exclusions") {
    const std::vector<Trace> one = {dense_user("u1", 40.0, 116.3, 1, 73)};
    BenchmarkConfig cfg;
    cfg.methods = {Method::sm};
    CHECK_THROWS_WITH(run_benchmark(one, cfg), "need >= 2 users for impostor scores");

    const std::vector<Trace> corpus = {dense_user("u1", 40.0, 116.3, 1, 73),
                                       dense_user("u2", 40.2, 116.5, 1, 74)};
    BenchmarkConfig empty_methods = cfg;
    empty_methods.methods = {};
    CHECK_THROWS_WITH(run_benchmark(corpus, empty_methods), "no methods selected");
    BenchmarkConfig empty_windows = cfg;
    empty_windows.window_lengths = {};
    CHECK_THROWS_WITH(run_benchmark(corpus, empty_windows), "no window lengths selected");

    // One day of history cannot fill a five-week training window.
    BenchmarkConfig weekly = cfg;
    weekly.split = SplitKind::weekly;
    weekly.train_weeks = 5;
    weekly.eval_week = 6;
    const EvalReport report = run_benchmark(corpus, weekly);
    CHECK(report.cells.empty());
    REQUIRE(!report.warnings.empty());
    for (const std::string& w : report.warnings)
        CHECK(w.find("excluded") != std::string::npos);
}

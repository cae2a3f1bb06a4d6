#include "doctest.h"

#include "vpr/detector.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace vpr;

TEST_SUITE("detector") {

TEST_CASE("change-evidence comparison is strict") {
    CHECK(criterion_e(0.5, 0.3));
    CHECK(!criterion_e(0.3, 0.5));
    CHECK(!criterion_e(0.4, 0.4)); // ties do not fire
    CHECK(!criterion_e(0.0, 0.0));
    CHECK(criterion_e(1e-12, 0.0));
}

TEST_CASE("unpredictability fires strictly above the scaled window mean") {
    DetectorConfig cfg;
    cfg.gamma = 1.1;
    CuWindow w(4);
    for (int i = 0; i < 4; ++i) w.push(1.0);
    REQUIRE(w.full());
    REQUIRE(w.mean() == 1.0);

    CuResult hit = criterion_u(1.2, w, cfg);
    CHECK(hit.fired);
    CHECK(hit.threshold == doctest::Approx(1.1).epsilon(1e-15));

    CuResult miss = criterion_u(1.05, w, cfg);
    CHECK(!miss.fired);
    CHECK(miss.threshold == doctest::Approx(1.1).epsilon(1e-15));

    // Exactly at the threshold does not fire.
    CuWindow unit(1);
    unit.push(1.0);
    cfg.gamma = 1.0;
    CHECK(!criterion_u(1.0, unit, cfg).fired);
    CHECK(criterion_u(1.0 + 1e-12, unit, cfg).fired);
}

TEST_CASE("empty window counts as an event under the averaging policy") {
    DetectorConfig cfg;
    cfg.warmup = "mean_available";
    CuWindow w(8);
    CuResult r = criterion_u(0.0, w, cfg);
    CHECK(r.fired);
    CHECK(r.threshold == 0.0);

    cfg.warmup = "skip_until_full";
    CuResult r2 = criterion_u(100.0, w, cfg);
    CHECK(!r2.fired);
    CHECK(r2.threshold == 0.0);
}

TEST_CASE("partial windows average under one policy and stay silent under the other") {
    DetectorConfig cfg;
    cfg.gamma = 1.0;
    CuWindow w(4);
    w.push(1.0);
    w.push(3.0); // mean 2.0, window half full

    cfg.warmup = "mean_available";
    CHECK(criterion_u(2.5, w, cfg).fired);
    CHECK(criterion_u(2.5, w, cfg).threshold == doctest::Approx(2.0));
    CHECK(!criterion_u(1.5, w, cfg).fired);

    cfg.warmup = "skip_until_full";
    CHECK(!criterion_u(100.0, w, cfg).fired);
    CHECK(criterion_u(100.0, w, cfg).threshold == 0.0);

    w.push(1.0);
    w.push(3.0); // now full: mean 2.0, policy no longer matters
    REQUIRE(w.full());
    CHECK(criterion_u(2.5, w, cfg).fired);
    CHECK(!criterion_u(1.5, w, cfg).fired);
    CHECK(criterion_u(2.5, w, cfg).threshold == doctest::Approx(2.0));
}

TEST_CASE("a constant stream never fires once the window has content") {
    DetectorConfig cfg;
    cfg.gamma = 1.1;
    CuWindow w(10);
    int fires = 0;
    for (int t = 0; t < 50; ++t) {
        CuResult r = criterion_u(5.0, w, cfg);
        if (r.fired) ++fires;
        w.push(5.0);
    }
    CHECK(fires == 1); // only the very first, empty-window step

    // Even with gamma exactly 1 the strict comparison keeps it quiet.
    DetectorConfig tight;
    tight.gamma = 1.0;
    CuWindow w2(10);
    w2.push(5.0);
    for (int t = 0; t < 50; ++t) {
        CHECK(!criterion_u(5.0, w2, tight).fired);
        w2.push(5.0);
    }
}

TEST_CASE("ring eviction keeps the newest values and the configured capacity") {
    CuWindow w(3);
    CHECK(w.count() == 0);
    CHECK(w.mean() == 0.0); // defined as zero when empty
    w.push(1.0);
    w.push(2.0);
    CHECK(!w.full());
    w.push(3.0);
    CHECK(w.full());
    CHECK(w.mean() == doctest::Approx(2.0));
    w.push(10.0); // evicts 1.0
    CHECK(w.count() == 3);
    CHECK(w.snapshot() == std::vector<double>{2.0, 3.0, 10.0});
    CHECK(w.mean() == doctest::Approx(5.0));
    w.clear();
    CHECK(w.count() == 0);
    CHECK(w.capacity() == 3);

    // Degenerate capacity: pushes are ignored rather than growing unbounded.
    CuWindow none(0);
    none.push(1.0);
    CHECK(none.count() == 0);
}

TEST_CASE("snapshot and restore reproduce the detector state exactly") {
    CuWindow w(5);
    for (double v : {0.5, 1.5, 2.5, 3.5}) w.push(v);
    auto snap = w.snapshot();
    CHECK(snap == std::vector<double>{0.5, 1.5, 2.5, 3.5});

    CuWindow w2;
    w2.restore(5, snap);
    CHECK(w2.capacity() == 5);
    CHECK(w2.count() == 4);
    CHECK(w2.mean() == w.mean());
    CHECK(w2.snapshot() == snap);

    // The restored ring keeps evicting from the oldest end.
    w2.push(4.5);
    w2.push(5.5);
    CHECK(w2.snapshot() == std::vector<double>{1.5, 2.5, 3.5, 4.5, 5.5});

    DetectorConfig cfg;
    cfg.gamma = 1.0;
    CHECK(criterion_u(3.5, w2, cfg).threshold == doctest::Approx(3.5));
}

TEST_CASE("telemetry rows serialize to the fixed csv layout") {
    namespace fs = std::filesystem;
    const std::string path =
        (fs::temp_directory_path() / "vpr_test_detector_trace.csv").string();

    std::vector<TraceRow> rows(2);
    rows[0].episode = 0;
    rows[0].t = 3;
    rows[0].level = 2;
    rows[0].d_st = 1.25;
    rows[0].d_ch = 0.5;
    rows[0].cu_threshold = 1.1;
    rows[0].fired_ce = true;
    rows[0].fired_cu = false;
    rows[0].mask = true;
    rows[1].episode = 1;
    rows[1].t = 0;
    rows[1].level = 1;
    rows[1].d_st = 0.1 + 0.2; // checks full round-trip precision
    rows[1].mask = true;

    write_trace_csv(path, rows);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);
    CHECK(line == "episode,t,level,d_st,d_ch,cu_threshold,fired_ce,fired_cu,mask");
    std::getline(in, line);
    CHECK(line == "0,3,2,1.25,0.5,1.1000000000000001,1,0,1");
    std::getline(in, line);
    CHECK(line == "1,0,1,0.30000000000000004,0,0,0,0,1");
    CHECK(!std::getline(in, line)); // exactly two data rows

    CHECK_THROWS_AS(write_trace_csv("/nonexistent/dir/trace.csv", rows),
                    std::runtime_error);
    std::remove(path.c_str());
}

} // TEST_SUITE

#include <catch2/catch_amalgamated.hpp>

#include "icdet/decision.hpp"
#include "icdet/rng.hpp"

using namespace icdet;

TEST_CASE("single integration step follows the update rule exactly") {
    IntegratorState s{0.5, 0.9, 0.65, Label::Inc};
    integrate_step(s, 1.0);
    CHECK(s.d == Catch::Approx(0.55).margin(1e-12));
}

TEST_CASE("worked threshold crossing: first IC at step 4") {
    IntegratorState s{0.5, 0.9, 0.65, Label::Inc};
    std::vector<Label> emitted;
    std::vector<double> ds;
    for (int i = 0; i < 6; ++i) {
        emitted.push_back(integrate_step(s, 1.0));
        ds.push_back(s.d);
    }
    // D_t = 1 - 0.5 * 0.9^t
    CHECK(ds[3] == Catch::Approx(0.67195).margin(1e-10));
    CHECK(emitted[0] == Label::Inc);
    CHECK(emitted[1] == Label::Inc);
    CHECK(emitted[2] == Label::Inc);
    CHECK(emitted[3] == Label::Ic);
}

TEST_CASE("labels hold inside the hysteresis band") {
    // start inside IC, drift D downward; the label must not flip above 1-th
    IntegratorState s{0.7, 0.9, 0.65, Label::Ic};
    while (s.d > 0.36) {
        const Label l = integrate_step(s, 0.0);
        if (s.d >= 0.35 + 1e-12) REQUIRE(l == Label::Ic);
    }
    // once D < 1-th the label flips
    while (s.d >= 0.35) integrate_step(s, 0.0);
    CHECK(integrate_step(s, 0.0) == Label::Inc);
}

TEST_CASE("no label change strictly inside the band (property)") {
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const double alpha = rng.uniform(0.0, 0.95);
        const double th = rng.uniform(0.55, 0.9);
        IntegratorState s{0.5, alpha, th, Label::Inc};
        Label prev = s.label;
        for (int i = 0; i < 300; ++i) {
            const Label l = integrate_step(s, rng.uniform());
            if (s.d < th - 1e-12 && s.d > 1.0 - th + 1e-12) REQUIRE(l == prev);
            REQUIRE(s.d >= 0.0);
            REQUIRE(s.d <= 1.0);
            prev = l;
        }
    }
}

TEST_CASE("posterior outside [0,1] is rejected") {
    IntegratorState s;
    CHECK_THROWS(integrate_step(s, 1.5));
    CHECK_THROWS(integrate_step(s, -0.1));
}

TEST_CASE("run_trace basics") {
    CHECK(run_trace({}, 0.9, 0.65).size() == 0);

    // alpha = 0 reduces to per-frame thresholding with hysteresis
    const std::vector<double> p = {0.9, 0.6, 0.4, 0.2, 0.6, 0.95};
    const auto trace = run_trace(p, 0.0, 0.65);
    for (std::size_t i = 0; i < p.size(); ++i) REQUIRE(trace.d[i] == p[i]);
    CHECK(trace.label[0] == Label::Ic);   // 0.9 > 0.65
    CHECK(trace.label[1] == Label::Ic);   // in band, keep
    CHECK(trace.label[2] == Label::Ic);   // in band, keep
    CHECK(trace.label[3] == Label::Inc);  // 0.2 < 0.35
    CHECK(trace.label[4] == Label::Inc);  // in band, keep
    CHECK(trace.label[5] == Label::Ic);

    // convexity bounds
    Rng rng(7);
    std::vector<double> ps(200);
    for (auto& v : ps) v = rng.uniform(0.2, 0.8);
    const auto tr = run_trace(ps, 0.85, 0.7, 0.5);
    double lo = 0.2, hi = 0.8;
    for (double d : tr.d) {
        REQUIRE(d >= std::min(0.5, lo) - 1e-12);
        REQUIRE(d <= std::max(0.5, hi) + 1e-12);
    }
}

TEST_CASE("concatenated traces equal resumed traces") {
    Rng rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<double> s1(1 + rng.below(50)), s2(1 + rng.below(50));
        for (auto& v : s1) v = rng.uniform();
        for (auto& v : s2) v = rng.uniform();
        const double alpha = rng.uniform(0.0, 0.99);
        const double th = rng.uniform(0.51, 0.99);

        std::vector<double> joined = s1;
        joined.insert(joined.end(), s2.begin(), s2.end());
        const auto full = run_trace(joined, alpha, th);

        const auto first = run_trace(s1, alpha, th);
        const auto second = run_trace(s2, alpha, th, first.d.back(), first.label.back());
        for (std::size_t i = 0; i < s1.size(); ++i) {
            REQUIRE(full.d[i] == first.d[i]);
            REQUIRE(full.label[i] == first.label[i]);
        }
        for (std::size_t i = 0; i < s2.size(); ++i) {
            REQUIRE(full.d[s1.size() + i] == second.d[i]);
            REQUIRE(full.label[s1.size() + i] == second.label[i]);
        }
    }
}

TEST_CASE("calibration: single pair, tie-break, empty grid") {
    CalibrationGrid single;
    single.alphas = {0.7};
    single.ths = {0.6};
    CalibrationStream s;
    s.posteriors = {0.1, 0.1, 0.1};
    s.labels = {Label::Inc, Label::Inc, Label::Inc};
    const auto res = calibrate({s}, single);
    CHECK(res.alpha == 0.7);
    CHECK(res.th == 0.6);
    CHECK(res.accuracy == 1.0);

    // all-INC noiseless stream scores 1.0 everywhere -> max alpha, max th
    const auto grid = CalibrationGrid::canonical();
    const auto tie = calibrate({s}, grid);
    CHECK(tie.alpha == Catch::Approx(0.95));
    CHECK(tie.th == Catch::Approx(0.90));
    CHECK(tie.accuracy == 1.0);

    CHECK_THROWS_WITH(calibrate({s}, CalibrationGrid{}), Catch::Matchers::ContainsSubstring("empty"));
}

TEST_CASE("noisy posteriors calibrate to a smoothing alpha >= 0.8") {
    // Block truth with confidently-wrong posterior bursts, the error
    // structure that overlapping analysis windows produce. Deep smoothing
    // absorbs short bursts, so the grid prefers a large alpha.
    Rng rng(13);
    std::vector<CalibrationStream> streams;
    for (int run = 0; run < 3; ++run) {
        CalibrationStream s;
        for (int block = 0; block < 8; ++block) {
            const Label truth = block % 2 ? Label::Ic : Label::Inc;
            int i = 0;
            while (i < 80) {
                int len = 1;
                double base = truth == Label::Ic ? 0.8 : 0.2;
                if (rng.uniform() < 0.08) {  // burst of wrong frames
                    len = 3 + static_cast<int>(rng.below(4));
                    base = 1.0 - base;
                }
                for (int k = 0; k < len && i < 80; ++k, ++i) {
                    double p = base + rng.normal(0.0, 0.08);
                    s.posteriors.push_back(std::min(1.0, std::max(0.0, p)));
                    s.labels.push_back(truth);
                }
            }
        }
        streams.push_back(std::move(s));
    }
    const auto res = calibrate(streams, CalibrationGrid::canonical());
    CHECK(res.alpha >= 0.8);
    CHECK(res.accuracy > 0.7);
}

TEST_CASE("trace CSV is written with the documented header") {
    const auto trace = run_trace({0.9, 0.1}, 0.5, 0.65);
    const auto path = std::string("/tmp/icdet_trace_test.csv");
    write_trace_csv(path, trace);
    std::ifstream f(path);
    std::string line;
    std::getline(f, line);
    CHECK(line == "t,p_ic,D,label");
    std::getline(f, line);
    CHECK(line.find(",0.900000,") != std::string::npos);
}

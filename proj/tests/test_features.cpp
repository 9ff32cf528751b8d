#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "icdet/features.hpp"
#include "icdet/rng.hpp"

using namespace icdet;

TEST_CASE("frame indices follow the closed form") {
    FramerSpec spec;
    const auto one = frame_indices(768, spec, 512);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == std::pair<std::size_t, std::size_t>{0, 768});

    const auto two = frame_indices(832, spec, 512);
    REQUIRE(two.size() == 2);
    CHECK(two[1] == std::pair<std::size_t, std::size_t>{64, 832});

    CHECK(frame_indices(5120, spec, 512).size() == 69);
    CHECK_THROWS_WITH(frame_indices(767, spec, 512), Catch::Matchers::ContainsSubstring("shorter"));
}

TEST_CASE("frame timestamps advance by exactly the shift") {
    Recording rec;
    rec.sample_rate = 512;
    rec.channels = {"a", "b"};
    rec.samples = Matrix(1024, 2);
    Rng rng(2);
    for (auto& v : rec.samples.data()) v = rng.normal();
    const auto feats = extract_entropy_features(rec, {{8.0, 13.0, "8-13"}}, FramerSpec{}, EntropySpec{});
    REQUIRE(feats.size() == 5);
    for (std::size_t i = 0; i < feats.size(); ++i) {
        CHECK(feats[i].t_end == Catch::Approx(1.5 + 0.125 * static_cast<double>(i)).margin(1e-12));
        CHECK(feats[i].frame_index == i);
    }
}

TEST_CASE("entropy kernel: degenerate, dyadic, uniform") {
    EntropySpec spec;  // k = 32
    CHECK(shannon_entropy(std::vector<double>(100, 3.25), spec) == 0.0);

    std::vector<double> two_level;
    for (int i = 0; i < 64; ++i) two_level.push_back(i % 2 == 0 ? 0.0 : 1.0);
    CHECK(shannon_entropy(two_level, spec) == Catch::Approx(0.2).margin(1e-12));

    Rng rng(17);
    std::vector<double> uniform(10000);
    for (auto& v : uniform) v = rng.uniform();
    const double h = shannon_entropy(uniform, spec);
    CHECK(h >= 0.985);
    CHECK(h <= 1.0);
}

TEST_CASE("entropy is amplitude-affine invariant and permutation invariant") {
    EntropySpec spec;
    Rng rng(29);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(300);
        for (auto& v : x) v = rng.normal();
        const double a = std::exp(rng.uniform(-3.0, 3.0));
        const double b = rng.uniform(-10.0, 10.0);
        std::vector<double> mapped(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) mapped[i] = a * x[i] + b;
        REQUIRE(shannon_entropy(mapped, spec) == Catch::Approx(shannon_entropy(x, spec)).margin(1e-12));

        auto shuffled = x;
        rng.shuffle(shuffled);
        REQUIRE(shannon_entropy(shuffled, spec) == shannon_entropy(x, spec));
    }
}

TEST_CASE("entropy stays in [0,1] on random data") {
    Rng rng(31);
    EntropySpec spec;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(2 + static_cast<std::size_t>(rng.below(500)));
        for (auto& v : x) v = rng.normal(0.0, std::exp(rng.uniform(-2.0, 4.0)));
        const double h = shannon_entropy(x, spec);
        REQUIRE(h >= 0.0);
        REQUIRE(h <= 1.0);
    }
}

TEST_CASE("noise channel has higher band entropy than a pure tone") {
    Recording rec;
    rec.sample_rate = 512;
    rec.channels = {"tone", "noise"};
    rec.samples = Matrix(768, 2);
    Rng rng(41);
    for (std::size_t i = 0; i < 768; ++i) {
        rec.samples(i, 0) = 5.0 * std::sin(2.0 * M_PI * 10.5 * static_cast<double>(i) / 512.0);
        rec.samples(i, 1) = rng.normal();
    }
    FeatureOptions opts;
    opts.apply_car = false;  // keep the channels independent for this check
    const auto feats =
        extract_entropy_features(rec, {{8.0, 13.0, "8-13"}}, FramerSpec{}, EntropySpec{}, opts);
    REQUIRE(feats.size() == 1);
    CHECK(feats[0].values(1, 0) > feats[0].values(0, 0));
}

TEST_CASE("identical channels produce identical feature rows") {
    Recording rec;
    rec.sample_rate = 512;
    rec.channels = {"a", "b", "c"};
    rec.samples = Matrix(768, 3);
    Rng rng(43);
    for (std::size_t i = 0; i < 768; ++i) {
        const double v = rng.normal();
        rec.samples(i, 0) = v;
        rec.samples(i, 1) = v;
        rec.samples(i, 2) = rng.normal();
    }
    const auto feats = extract_entropy_features(rec, canonical_bands(), FramerSpec{}, EntropySpec{});
    for (std::size_t b = 0; b < 6; ++b) REQUIRE(feats[0].values(0, b) == feats[0].values(1, b));
}

TEST_CASE("full grid is 16 channels x 6 bands") {
    Recording rec;
    rec.sample_rate = 512;
    rec.channels = Montage::mc().labels;
    rec.samples = Matrix(768, 16);
    Rng rng(47);
    for (auto& v : rec.samples.data()) v = rng.normal();
    const auto feats = extract_entropy_features(rec, canonical_bands(), FramerSpec{}, EntropySpec{});
    REQUIRE(feats.size() == 1);
    CHECK(feats[0].values.rows() == 16);
    CHECK(feats[0].values.cols() == 6);
    for (double v : feats[0].values.data()) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
    }

    const auto table = flatten_features(feats);
    CHECK(table.X.cols() == 96);
    CHECK(table.names[0].channel == 0);
    CHECK(table.names[5].band == 5);
    CHECK(table.names[6].channel == 1);
}

TEST_CASE("parallel extraction matches single-threaded output") {
    Recording rec;
    rec.sample_rate = 512;
    rec.channels = {"a", "b", "c", "d"};
    rec.samples = Matrix(1536, 4);
    Rng rng(53);
    for (auto& v : rec.samples.data()) v = rng.normal();
    FeatureOptions seq;
    seq.threads = 1;
    FeatureOptions par;
    par.threads = 2;
    const auto f1 = extract_entropy_features(rec, canonical_bands(), FramerSpec{}, EntropySpec{}, seq);
    const auto f2 = extract_entropy_features(rec, canonical_bands(), FramerSpec{}, EntropySpec{}, par);
    REQUIRE(f1.size() == f2.size());
    for (std::size_t f = 0; f < f1.size(); ++f)
        for (std::size_t i = 0; i < f1[f].values.data().size(); ++i)
            REQUIRE(f1[f].values.data()[i] == f2[f].values.data()[i]);
}

TEST_CASE("selected extractor agrees with the full grid") {
    Recording rec;
    rec.sample_rate = 512;
    rec.channels = {"a", "b", "c"};
    rec.samples = Matrix(896, 3);
    Rng rng(59);
    for (auto& v : rec.samples.data()) v = rng.normal();
    const auto bands = canonical_bands();
    const auto full = extract_entropy_features(rec, bands, FramerSpec{}, EntropySpec{});

    const std::vector<FeatureId> picks = {{0, 2}, {2, 0}, {1, 5}, {2, 4}};
    const SelectedFeatureExtractor ex(bands, FramerSpec{}, EntropySpec{}, picks, 512);
    const auto frames = frame_indices(rec.n_samples(), FramerSpec{}, 512);
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const auto x = ex.compute(rec.samples, frames[f].first, frames[f].second);
        for (std::size_t j = 0; j < picks.size(); ++j) {
            REQUIRE(x[j] ==
                    Catch::Approx(full[f].values(static_cast<std::size_t>(picks[j].channel),
                                                 static_cast<std::size_t>(picks[j].band)))
                        .margin(1e-12));
        }
    }
}

TEST_CASE("PSD baseline: peak location, scaling law") {
    Recording rec;
    rec.sample_rate = 512;
    rec.channels = {"tone", "pad"};
    rec.samples = Matrix(768, 2);
    for (std::size_t i = 0; i < 768; ++i) {
        rec.samples(i, 0) = 4.0 * std::sin(2.0 * M_PI * 10.0 * static_cast<double>(i) / 512.0);
        rec.samples(i, 1) = 0.001 * std::sin(2.0 * M_PI * 30.0 * static_cast<double>(i) / 512.0);
    }
    FeatureOptions opts;
    opts.apply_car = false;
    const PsdSpec psd;
    const auto feats = extract_psd_features(rec, FramerSpec{}, psd, opts);
    REQUIRE(feats.size() == 1);
    const auto freqs = psd.bin_frequencies(512);
    REQUIRE(freqs.size() == 23);
    CHECK(freqs.front() == Catch::Approx(4.0));
    CHECK(freqs.back() == Catch::Approx(48.0));

    std::size_t argmax = 0;
    for (std::size_t j = 1; j < freqs.size(); ++j)
        if (feats[0].values(0, j) > feats[0].values(0, argmax)) argmax = j;
    CHECK(freqs[argmax] == Catch::Approx(10.0));

    // doubling the amplitude adds ln(4) to every log-power bin
    Recording rec2 = rec;
    for (auto& v : rec2.samples.data()) v *= 2.0;
    const auto feats2 = extract_psd_features(rec2, FramerSpec{}, psd, opts);
    for (std::size_t j = 0; j < freqs.size(); ++j)
        REQUIRE(feats2[0].values(0, j) - feats[0].values(0, j) ==
                Catch::Approx(std::log(4.0)).margin(1e-9));
}

TEST_CASE("PSD of white noise is flat within 3 dB over a long window") {
    Recording rec;
    rec.sample_rate = 512;
    rec.channels = {"w1", "w2"};
    rec.samples = Matrix(5120, 2);
    Rng rng(61);
    for (auto& v : rec.samples.data()) v = rng.normal();
    FramerSpec framer;
    framer.window_seconds = 10.0;
    framer.shift_seconds = 10.0;
    FeatureOptions opts;
    opts.apply_car = false;
    const auto feats = extract_psd_features(rec, framer, PsdSpec{}, opts);
    REQUIRE(feats.size() == 1);
    const double ln_3db = 3.0 / 10.0 * std::log(10.0);
    for (std::size_t c = 0; c < 2; ++c) {
        double mean = 0.0;
        for (std::size_t j = 0; j < feats[0].values.cols(); ++j) mean += feats[0].values(c, j);
        mean /= static_cast<double>(feats[0].values.cols());
        for (std::size_t j = 0; j < feats[0].values.cols(); ++j)
            REQUIRE(std::abs(feats[0].values(c, j) - mean) <= ln_3db);
    }
}

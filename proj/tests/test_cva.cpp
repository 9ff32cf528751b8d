#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>

#include "icdet/cva.hpp"
#include "icdet/rng.hpp"

using namespace icdet;

namespace {

/// Reference Fisher direction via Gauss-Jordan inversion of the pooled
/// within-class covariance, no shrinkage. Independent of the library path.
std::vector<double> fisher_oracle(const LabeledFeatureSet& data) {
    const std::size_t n = data.X.rows(), p = data.X.cols();
    std::vector<double> mu0(p, 0.0), mu1(p, 0.0);
    std::size_t n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (data.y[i] == Label::Ic) {
            ++n1;
            for (std::size_t j = 0; j < p; ++j) mu1[j] += data.X(i, j);
        } else {
            ++n0;
            for (std::size_t j = 0; j < p; ++j) mu0[j] += data.X(i, j);
        }
    }
    for (std::size_t j = 0; j < p; ++j) {
        mu0[j] /= static_cast<double>(n0);
        mu1[j] /= static_cast<double>(n1);
    }
    std::vector<double> sw(p * p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& mu = data.y[i] == Label::Ic ? mu1 : mu0;
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t k = 0; k < p; ++k)
                sw[j * p + k] += (data.X(i, j) - mu[j]) * (data.X(i, k) - mu[k]);
    }
    // Gauss-Jordan inverse
    std::vector<double> inv(p * p, 0.0);
    for (std::size_t j = 0; j < p; ++j) inv[j * p + j] = 1.0;
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < p; ++r)
            if (std::abs(sw[r * p + col]) > std::abs(sw[piv * p + col])) piv = r;
        for (std::size_t c = 0; c < p; ++c) {
            std::swap(sw[col * p + c], sw[piv * p + c]);
            std::swap(inv[col * p + c], inv[piv * p + c]);
        }
        const double d = sw[col * p + col];
        for (std::size_t c = 0; c < p; ++c) {
            sw[col * p + c] /= d;
            inv[col * p + c] /= d;
        }
        for (std::size_t r = 0; r < p; ++r) {
            if (r == col) continue;
            const double f = sw[r * p + col];
            for (std::size_t c = 0; c < p; ++c) {
                sw[r * p + c] -= f * sw[col * p + c];
                inv[r * p + c] -= f * inv[col * p + c];
            }
        }
    }
    std::vector<double> w(p, 0.0);
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t k = 0; k < p; ++k) w[j] += inv[j * p + k] * (mu1[k] - mu0[k]);
    double norm = 0.0;
    for (double v : w) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : w) v /= norm;
    return w;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
}

/// Random well-conditioned two-class instance: covariance close to the
/// identity plus a mild random mixing, distinct class means.
LabeledFeatureSet random_instance(Rng& rng, std::size_t p, std::size_t n_per_class) {
    std::vector<double> A(p * p);
    const double mix = 0.3 / std::sqrt(static_cast<double>(p));
    for (auto& v : A) v = rng.normal(0.0, mix);
    std::vector<double> mean_delta(p);
    for (auto& v : mean_delta) v = rng.normal(0.0, 1.0);

    LabeledFeatureSet data;
    data.X = Matrix(2 * n_per_class, p);
    data.y.resize(2 * n_per_class);
    std::vector<double> z(p);
    for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
        const bool ic = i >= n_per_class;
        data.y[i] = ic ? Label::Ic : Label::Inc;
        for (auto& v : z) v = rng.normal();
        for (std::size_t j = 0; j < p; ++j) {
            double acc = z[j];
            for (std::size_t k = 0; k < p; ++k) acc += A[j * p + k] * z[k];
            data.X(i, j) = acc + (ic ? mean_delta[j] : 0.0);
        }
    }
    for (std::size_t j = 0; j < p; ++j)
        data.feature_names.push_back({static_cast<int>(j), 0});
    return data;
}

} // namespace

TEST_CASE("axis-aligned separation concentrates on feature 1") {
    Rng rng(71);
    LabeledFeatureSet data;
    data.X = Matrix(800, 2);
    data.y.resize(800);
    for (std::size_t i = 0; i < 800; ++i) {
        const bool ic = i % 2 == 1;
        data.y[i] = ic ? Label::Ic : Label::Inc;
        data.X(i, 0) = rng.normal() + (ic ? 3.0 : 0.0);
        data.X(i, 1) = rng.normal();
    }
    const CvaModel model = fit_cva(data);
    CHECK(std::abs(model.cdsp[0]) > 0.99);
    CHECK(std::abs(model.cdsp[1]) < 0.15);
    CHECK(model.discrimination[0] > 0.9);
    CHECK(model.discrimination[1] < 0.1);
    CHECK(model.ranking[0] == 0);
}

TEST_CASE("two-class direction is collinear with the Fisher oracle") {
    Rng rng(73);
    for (int trial = 0; trial < 50; ++trial) {
        const auto data = random_instance(rng, 2 + rng.below(6), 150);
        const CvaModel model = fit_cva(data);
        const auto oracle = fisher_oracle(data);
        REQUIRE(std::abs(cosine(model.cdsp, oracle)) > 0.999);
    }
}

TEST_CASE("discrimination ranking is invariant to positive per-feature scaling") {
    Rng rng(79);
    for (int trial = 0; trial < 20; ++trial) {
        const auto data = random_instance(rng, 5, 120);
        const CvaModel base = fit_cva(data);

        LabeledFeatureSet scaled = data;
        std::vector<double> scale(5);
        for (auto& s : scale) s = std::exp(rng.uniform(-2.0, 2.0));
        for (std::size_t i = 0; i < scaled.X.rows(); ++i)
            for (std::size_t j = 0; j < 5; ++j) scaled.X(i, j) *= scale[j];
        const CvaModel after = fit_cva(scaled);
        REQUIRE(after.ranking == base.ranking);
    }
}

TEST_CASE("label swap leaves direction magnitude and scores unchanged") {
    Rng rng(83);
    const auto data = random_instance(rng, 4, 100);
    LabeledFeatureSet swapped = data;
    for (auto& l : swapped.y) l = l == Label::Ic ? Label::Inc : Label::Ic;
    const CvaModel a = fit_cva(data);
    const CvaModel b = fit_cva(swapped);
    for (std::size_t j = 0; j < 4; ++j) {
        REQUIRE(std::abs(a.cdsp[j]) == Catch::Approx(std::abs(b.cdsp[j])).margin(1e-12));
        REQUIRE(a.discrimination[j] == Catch::Approx(b.discrimination[j]).margin(1e-12));
    }
}

TEST_CASE("duplicating every frame leaves the model unchanged") {
    Rng rng(89);
    const auto data = random_instance(rng, 4, 80);
    LabeledFeatureSet doubled;
    doubled.feature_names = data.feature_names;
    doubled.X = Matrix(2 * data.X.rows(), 4);
    doubled.y.resize(2 * data.y.size());
    for (std::size_t i = 0; i < data.X.rows(); ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            doubled.X(2 * i, j) = data.X(i, j);
            doubled.X(2 * i + 1, j) = data.X(i, j);
        }
        doubled.y[2 * i] = data.y[i];
        doubled.y[2 * i + 1] = data.y[i];
    }
    const CvaModel a = fit_cva(data);
    const CvaModel b = fit_cva(doubled);
    for (std::size_t j = 0; j < 4; ++j) {
        REQUIRE(a.cdsp[j] == Catch::Approx(b.cdsp[j]).margin(1e-9));
        REQUIRE(a.discrimination[j] == Catch::Approx(b.discrimination[j]).margin(1e-9));
    }
}

TEST_CASE("scores are in [0,1] and sum to one component") {
    Rng rng(97);
    const auto data = random_instance(rng, 6, 60);
    const CvaModel model = fit_cva(data);
    double sum = 0.0;
    for (double d : model.discrimination) {
        REQUIRE(d >= 0.0);
        REQUIRE(d <= 1.0);
        sum += d;
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("shrinkage keeps rank-deficient inputs finite") {
    Rng rng(101);
    LabeledFeatureSet data;
    data.X = Matrix(40, 10);
    data.y.resize(40);
    for (std::size_t i = 0; i < 40; ++i) {
        data.y[i] = i % 2 ? Label::Ic : Label::Inc;
        const double base = rng.normal() + (i % 2 ? 1.0 : 0.0);
        for (std::size_t j = 0; j < 10; ++j)
            data.X(i, j) = j < 2 ? base : 0.5 * base + 0.01 * static_cast<double>(j);  // collinear columns
    }
    const CvaModel model = fit_cva(data);
    for (double v : model.cdsp) REQUIRE(std::isfinite(v));
    for (double v : model.discrimination) REQUIRE(std::isfinite(v));
}

TEST_CASE("degenerate inputs raise errors") {
    LabeledFeatureSet one_class;
    one_class.X = Matrix(10, 2, 1.0);
    one_class.y.assign(10, Label::Ic);
    CHECK_THROWS_WITH(fit_cva(one_class), Catch::Matchers::ContainsSubstring("each class"));

    LabeledFeatureSet constant;
    constant.X = Matrix(10, 2, 3.0);
    constant.y.resize(10);
    for (std::size_t i = 0; i < 10; ++i) constant.y[i] = i % 2 ? Label::Ic : Label::Inc;
    CHECK_THROWS_WITH(fit_cva(constant), Catch::Matchers::ContainsSubstring("constant"));
}

TEST_CASE("selection policy: mass, floor, cap") {
    CvaModel model;
    // uniform scores over 10 features, tau = 0.8 -> first 8
    model.discrimination.assign(10, 0.1);
    model.ranking.resize(10);
    std::iota(model.ranking.begin(), model.ranking.end(), std::size_t{0});
    CHECK(select_features(model).size() == 8);

    // one feature holds all the mass -> only it is selected
    model.discrimination.assign(10, 0.0);
    model.discrimination[4] = 1.0;
    std::iota(model.ranking.begin(), model.ranking.end(), std::size_t{0});
    std::stable_sort(model.ranking.begin(), model.ranking.end(),
                     [&](std::size_t a, std::size_t b) { return model.discrimination[a] > model.discrimination[b]; });
    const auto only = select_features(model);
    REQUIRE(only.size() == 1);
    CHECK(only[0] == 4);

    // floor pads with positive-score features
    model.discrimination = {0.80, 0.10, 0.06, 0.03, 0.01};
    model.ranking = {0, 1, 2, 3, 4};
    const auto floored = select_features(model);
    REQUIRE(floored.size() == 3);
    CHECK(floored == std::vector<std::size_t>{0, 1, 2});

    // cap truncates
    model.discrimination.assign(96, 1.0 / 96.0);
    model.ranking.resize(96);
    std::iota(model.ranking.begin(), model.ranking.end(), std::size_t{0});
    SelectionPolicy all;
    all.tau = 1.0;
    CHECK(select_features(model, all).size() == 12);
}

TEST_CASE("discrimination map covers the grid in band-major order") {
    Rng rng(103);
    LabeledFeatureSet data;
    const std::size_t n_ch = 16, n_bands = 6;
    data.X = Matrix(100, n_ch * n_bands);
    data.y.resize(100);
    for (std::size_t i = 0; i < 100; ++i) {
        data.y[i] = i % 2 ? Label::Ic : Label::Inc;
        for (std::size_t j = 0; j < n_ch * n_bands; ++j)
            data.X(i, j) = rng.normal() + (i % 2 && j == 7 ? 1.0 : 0.0);
    }
    for (std::size_t c = 0; c < n_ch; ++c)
        for (std::size_t b = 0; b < n_bands; ++b)
            data.feature_names.push_back({static_cast<int>(c), static_cast<int>(b)});

    const CvaModel model = fit_cva(data);
    const auto channels = Montage::mc().labels;
    std::vector<std::string> band_names;
    for (const auto& b : canonical_bands()) band_names.push_back(b.name);
    const auto rows = discrimination_map(model, data.feature_names, channels, band_names);
    REQUIRE(rows.size() == 96);
    CHECK(rows[0].band == "8-13");
    CHECK(rows[0].channel == "Fz");
    CHECK(rows[1].channel == "FC3");
    CHECK(rows[16].band == "14-22");
    // scores reproduce the model exactly
    for (const auto& row : rows) {
        bool found = false;
        for (std::size_t j = 0; j < data.feature_names.size(); ++j) {
            const auto& id = data.feature_names[j];
            if (channels[static_cast<std::size_t>(id.channel)] == row.channel &&
                band_names[static_cast<std::size_t>(id.band)] == row.band) {
                REQUIRE(row.score == model.discrimination[j]);
                found = true;
            }
        }
        REQUIRE(found);
    }
}

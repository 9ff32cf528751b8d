#include <catch2/catch_amalgamated.hpp>

#include "icdet/classifier.hpp"
#include "icdet/rng.hpp"

using namespace icdet;

namespace {

Matrix blob(Rng& rng, std::size_t n, std::vector<double> center, double spread) {
    Matrix X(n, center.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < center.size(); ++j) X(i, j) = center[j] + spread * rng.normal();
    return X;
}

Matrix vstack(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() + b.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(a.rows() + i, j) = b(i, j);
    return out;
}

GaussianClassifier fixed_classifier() {
    GaussianClassifier clf;
    clf.n_p = 1;
    clf.dim = 1;
    clf.prototypes[0] = {{{-2.0}, {1.0}}};
    clf.prototypes[1] = {{{2.0}, {1.0}}};
    clf.feature_norm.mean = {0.0};
    clf.feature_norm.stddev = {1.0};
    return clf;
}

} // namespace

TEST_CASE("prototype init recovers repeated points with floored variances") {
    Rng rng(7);
    Matrix X(100, 2);
    for (std::size_t i = 0; i < 100; ++i) {
        const bool second = i % 2 == 1;
        X(i, 0) = second ? 5.0 : 0.0;
        X(i, 1) = second ? 5.0 : 0.0;
    }
    const auto protos = init_prototypes(X, 2, rng);
    REQUIRE(protos.size() == 2);
    const bool order = protos[0].mean[0] < protos[1].mean[0];
    const auto& low = order ? protos[0] : protos[1];
    const auto& high = order ? protos[1] : protos[0];
    CHECK(low.mean[0] == Catch::Approx(0.0).margin(1e-6));
    CHECK(high.mean[0] == Catch::Approx(5.0).margin(1e-6));
    for (const auto& p : protos)
        for (double v : p.variance) REQUIRE(v == kVarianceFloor);
}

TEST_CASE("single-prototype init matches sample moments") {
    Rng rng(11);
    const Matrix X = blob(rng, 4000, {1.5, -0.5}, 2.0);
    Rng init_rng(1);
    const auto protos = init_prototypes(X, 1, init_rng);
    REQUIRE(protos.size() == 1);
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(std::abs(protos[0].mean[j] - (j == 0 ? 1.5 : -0.5)) < 3.0 * 2.0 / std::sqrt(4000.0));
        CHECK(protos[0].variance[j] > 4.0 * 0.8);
        CHECK(protos[0].variance[j] < 4.0 * 1.2);
    }
}

TEST_CASE("two separated blobs are recovered") {
    Rng rng(13);
    const Matrix a = blob(rng, 200, {0.0, 0.0}, 0.5);
    const Matrix b = blob(rng, 200, {10.0, 10.0}, 0.5);
    Rng init_rng(2);
    const auto protos = init_prototypes(vstack(a, b), 2, init_rng);
    const double sep = std::sqrt(200.0);
    const bool order = protos[0].mean[0] < protos[1].mean[0];
    const auto& low = order ? protos[0] : protos[1];
    const auto& high = order ? protos[1] : protos[0];
    CHECK(std::hypot(low.mean[0], low.mean[1]) < 0.1 * sep);
    CHECK(std::hypot(high.mean[0] - 10.0, high.mean[1] - 10.0) < 0.1 * sep);
}

TEST_CASE("init rejects fewer rows than prototypes") {
    Rng rng(17);
    CHECK_THROWS_WITH(init_prototypes(Matrix(3, 2, 1.0), 4, rng),
                      Catch::Matchers::ContainsSubstring("fewer"));
}

TEST_CASE("posterior: symmetry, domination, normalization") {
    const auto clf = fixed_classifier();
    const auto mid = posterior(clf, {0.0});
    CHECK(mid[0] == Catch::Approx(0.5).margin(1e-12));
    CHECK(mid[1] == Catch::Approx(0.5).margin(1e-12));

    const auto far = posterior(clf, {12.0});  // 10 sigma past the IC prototype
    CHECK(far[1] > 0.999);

    Rng rng(19);
    GaussianClassifier big;
    big.n_p = 3;
    big.dim = 4;
    for (int c = 0; c < 2; ++c)
        for (std::size_t m = 0; m < 3; ++m) {
            GaussianPrototype p;
            for (std::size_t k = 0; k < 4; ++k) {
                p.mean.push_back(rng.normal());
                p.variance.push_back(0.2 + rng.uniform());
            }
            big.prototypes[static_cast<std::size_t>(c)].push_back(p);
        }
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> x(4);
        for (auto& v : x) v = rng.normal(0.0, 3.0);
        const auto p = posterior(big, x);
        REQUIRE(p[0] + p[1] == Catch::Approx(1.0).margin(1e-12));
        REQUIRE(p[0] >= 0.0);
        REQUIRE(p[1] >= 0.0);
    }
    // no overflow far out in normalized units
    const auto extreme = posterior(big, {1e3, -1e3, 1e3, -1e3});
    CHECK(std::isfinite(extreme[0]));
    CHECK(extreme[0] + extreme[1] == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("dimension mismatch is rejected") {
    const auto clf = fixed_classifier();
    CHECK_THROWS_WITH(posterior(clf, {1.0, 2.0}), Catch::Matchers::ContainsSubstring("dimension mismatch"));
}

TEST_CASE("feature normalization: zero mean unit variance after transform") {
    Rng rng(23);
    Matrix X(500, 3);
    for (std::size_t i = 0; i < 500; ++i) {
        X(i, 0) = rng.normal(5.0, 3.0);
        X(i, 1) = rng.normal(-2.0, 0.1);
        X(i, 2) = rng.uniform();
    }
    const auto norm = FeatureNormalizer::fit(X);
    const Matrix Z = norm.apply(X);
    for (std::size_t j = 0; j < 3; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 500; ++i) mean += Z(i, j);
        mean /= 500.0;
        double var = 0.0;
        for (std::size_t i = 0; i < 500; ++i) var += (Z(i, j) - mean) * (Z(i, j) - mean);
        var /= 499.0;
        REQUIRE(std::abs(mean) < 1e-9);
        REQUIRE(std::abs(std::sqrt(var) - 1.0) < 1e-9);
    }
}

TEST_CASE("lr = 0 leaves the classifier unchanged bit for bit") {
    Rng rng(29);
    const Matrix a = blob(rng, 60, {0.0}, 1.0);
    const Matrix b = blob(rng, 60, {2.0}, 1.0);
    std::vector<Label> y(120);
    for (std::size_t i = 0; i < 120; ++i) y[i] = i < 60 ? Label::Inc : Label::Ic;
    GaussianClassifier clf = make_classifier(vstack(a, b), y, 2, 5);
    const GaussianClassifier before = clf;
    TrainOptions opts;
    opts.learning_rate = 0.0;
    opts.epochs = 3;
    train(clf, clf.feature_norm.apply(vstack(a, b)), y, opts);
    for (int c = 0; c < 2; ++c)
        for (std::size_t m = 0; m < clf.n_p; ++m)
            for (std::size_t k = 0; k < clf.dim; ++k) {
                REQUIRE(clf.prototypes[c][m].mean[k] == before.prototypes[c][m].mean[k]);
                REQUIRE(clf.prototypes[c][m].variance[k] == before.prototypes[c][m].variance[k]);
            }
}

TEST_CASE("epochs = 0 is the identity") {
    Rng rng(31);
    const Matrix X = blob(rng, 40, {0.0, 1.0}, 1.0);
    std::vector<Label> y(40);
    for (std::size_t i = 0; i < 40; ++i) y[i] = i % 2 ? Label::Ic : Label::Inc;
    GaussianClassifier clf = make_classifier(X, y, 2, 5);
    const GaussianClassifier before = clf;
    TrainOptions opts;
    opts.epochs = 0;
    const auto mse = train(clf, clf.feature_norm.apply(X), y, opts);
    CHECK(mse.empty());
    for (int c = 0; c < 2; ++c)
        for (std::size_t m = 0; m < clf.n_p; ++m)
            REQUIRE(clf.prototypes[c][m].mean == before.prototypes[c][m].mean);
}

TEST_CASE("separable blobs: trained classifier generalizes") {
    Rng rng(37);
    const Matrix train_a = blob(rng, 300, {0.0, 0.0}, 0.7);
    const Matrix train_b = blob(rng, 300, {3.0, 3.0}, 0.7);
    std::vector<Label> y(600);
    for (std::size_t i = 0; i < 600; ++i) y[i] = i < 300 ? Label::Inc : Label::Ic;
    const Matrix X = vstack(train_a, train_b);

    GaussianClassifier clf = make_classifier(X, y, 4, 11);
    TrainOptions opts;
    opts.seed = 12;
    const auto mse = train(clf, clf.feature_norm.apply(X), y, opts);
    REQUIRE(mse.size() == 20);
    CHECK(mse.back() <= mse.front());

    const Matrix test_a = blob(rng, 200, {0.0, 0.0}, 0.7);
    const Matrix test_b = blob(rng, 200, {3.0, 3.0}, 0.7);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < 200; ++i) {
        const std::vector<double> xa = {test_a(i, 0), test_a(i, 1)};
        const std::vector<double> xb = {test_b(i, 0), test_b(i, 1)};
        if (posterior_ic(clf, clf.feature_norm.apply(xa)) < 0.5) ++correct;
        if (posterior_ic(clf, clf.feature_norm.apply(xb)) > 0.5) ++correct;
    }
    CHECK(static_cast<double>(correct) / 400.0 >= 0.95);
}

TEST_CASE("training MSE decreases over epoch averages on a separable set") {
    Rng rng(41);
    const Matrix a = blob(rng, 150, {0.0, 0.0}, 0.5);
    const Matrix b = blob(rng, 150, {4.0, 4.0}, 0.5);
    std::vector<Label> y(300);
    for (std::size_t i = 0; i < 300; ++i) y[i] = i < 150 ? Label::Inc : Label::Ic;
    const Matrix X = vstack(a, b);
    GaussianClassifier clf = make_classifier(X, y, 2, 3);
    TrainOptions opts;
    opts.seed = 4;
    const auto mse = train(clf, clf.feature_norm.apply(X), y, opts);
    for (std::size_t e = 1; e < mse.size(); ++e) REQUIRE(mse[e] <= mse[e - 1] + 1e-9);
}

TEST_CASE("analytic gradient matches central finite differences") {
    Rng rng(43);
    for (int trial = 0; trial < 20; ++trial) {
        GaussianClassifier clf;
        clf.n_p = 2;
        clf.dim = 3;
        for (int c = 0; c < 2; ++c)
            for (std::size_t m = 0; m < 2; ++m) {
                GaussianPrototype p;
                for (std::size_t k = 0; k < 3; ++k) {
                    p.mean.push_back(rng.normal());
                    p.variance.push_back(0.3 + rng.uniform());
                }
                clf.prototypes[static_cast<std::size_t>(c)].push_back(p);
            }
        std::vector<double> x(3);
        for (auto& v : x) v = rng.normal();
        const Label target = rng.uniform() < 0.5 ? Label::Inc : Label::Ic;

        const auto grad = gradient_single(clf, x, target);
        const double h = 1e-5;
        for (int c = 0; c < 2; ++c)
            for (std::size_t m = 0; m < 2; ++m)
                for (std::size_t k = 0; k < 3; ++k) {
                    auto perturbed = clf;
                    perturbed.prototypes[c][m].mean[k] += h;
                    const double up = mse_single(perturbed, x, target);
                    perturbed.prototypes[c][m].mean[k] -= 2.0 * h;
                    const double down = mse_single(perturbed, x, target);
                    const double fd = (up - down) / (2.0 * h);
                    const double an = grad.mean[c][m][k];
                    const double denom = std::max(std::abs(fd), 1e-6);
                    REQUIRE(std::abs(an - fd) / denom < 1e-4);
                }
    }
}

TEST_CASE("variance gradient matches finite differences when enabled") {
    Rng rng(47);
    GaussianClassifier clf;
    clf.n_p = 1;
    clf.dim = 2;
    for (int c = 0; c < 2; ++c) {
        GaussianPrototype p;
        p.mean = {rng.normal(), rng.normal()};
        p.variance = {0.5 + rng.uniform(), 0.5 + rng.uniform()};
        clf.prototypes[static_cast<std::size_t>(c)].push_back(p);
    }
    const std::vector<double> x = {0.3, -0.8};
    const auto grad = gradient_single(clf, x, Label::Ic);
    const double h = 1e-6;
    for (int c = 0; c < 2; ++c)
        for (std::size_t k = 0; k < 2; ++k) {
            auto perturbed = clf;
            perturbed.prototypes[c][0].variance[k] += h;
            const double up = mse_single(perturbed, x, Label::Ic);
            perturbed.prototypes[c][0].variance[k] -= 2.0 * h;
            const double down = mse_single(perturbed, x, Label::Ic);
            const double fd = (up - down) / (2.0 * h);
            REQUIRE(std::abs(grad.variance[c][0][k] - fd) / std::max(std::abs(fd), 1e-6) < 1e-3);
        }
}

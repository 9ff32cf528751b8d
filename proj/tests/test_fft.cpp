#include <catch2/catch_amalgamated.hpp>

#include "icdet/fft.hpp"
#include "icdet/rng.hpp"

using namespace icdet;

namespace {

// Reference O(n^2) DFT, independent of the transform under test.
std::vector<cplx> naive_dft(const std::vector<cplx>& x) {
    const std::size_t n = x.size();
    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc(0.0, 0.0);
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = -2.0 * M_PI * static_cast<double>(k * t % n) / static_cast<double>(n);
            acc += x[t] * cplx(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

std::vector<cplx> random_signal(std::size_t n, Rng& rng) {
    std::vector<cplx> x(n);
    for (auto& v : x) v = cplx(rng.normal(), rng.normal());
    return x;
}

} // namespace

TEST_CASE("fft matches the naive DFT for mixed-radix and Bluestein sizes") {
    Rng rng(42);
    for (std::size_t n : {8u, 12u, 15u, 64u, 100u, 243u, 768u, 769u, 1000u}) {
        auto x = random_signal(n, rng);
        const auto expected = naive_dft(x);
        auto got = x;
        fft_forward(got);
        double worst = 0.0, scale = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            worst = std::max(worst, std::abs(got[k] - expected[k]));
            scale = std::max(scale, std::abs(expected[k]));
        }
        INFO("n = " << n);
        CHECK(worst / scale < 1e-9);
    }
}

TEST_CASE("inverse undoes forward") {
    Rng rng(7);
    for (std::size_t n : {9u, 32u, 768u, 771u}) {
        const auto x = random_signal(n, rng);
        auto y = x;
        fft_forward(y);
        fft_inverse(y);
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(y[i] - x[i]));
        INFO("n = " << n);
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("Parseval energy identity") {
    Rng rng(3);
    const auto x = random_signal(768, rng);
    auto y = x;
    fft_forward(y);
    double ex = 0.0, ey = 0.0;
    for (const auto& v : x) ex += std::norm(v);
    for (const auto& v : y) ey += std::norm(v);
    CHECK(ey / static_cast<double>(x.size()) == Catch::Approx(ex).epsilon(1e-12));
}

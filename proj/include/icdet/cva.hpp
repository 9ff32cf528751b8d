#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "icdet/core.hpp"
#include "icdet/features.hpp"

namespace icdet {

enum class Label : int { Inc = 0, Ic = 1 };

inline const char* label_name(Label l) { return l == Label::Ic ? "IC" : "INC"; }

struct LabeledFeatureSet {
    Matrix X;                        // [n_frames x n_features]
    std::vector<Label> y;
    std::vector<FeatureId> feature_names;
};

/// Two-class canonical variate analysis. With two classes there is a
/// single canonical component; `cdsp` is its direction. `ranking` holds
/// all feature indices sorted by descending discrimination score.
struct CvaModel {
    std::vector<double> cdsp;
    std::vector<double> discrimination;  // per-feature, in [0,1], sums to 1
    std::vector<std::size_t> ranking;
};

namespace detail {

/// Cholesky solve of the symmetric positive-definite system A x = b.
/// A is row-major [n x n] and is overwritten with its factor.
inline std::vector<double> cholesky_solve(std::vector<double>& A, const std::vector<double>& b,
                                          std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double d = A[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= A[j * n + k] * A[j * n + k];
        if (!(d > 0.0)) throw std::runtime_error("within-class scatter not positive definite");
        const double s = std::sqrt(d);
        A[j * n + j] = s;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = A[i * n + j];
            for (std::size_t k = 0; k < j; ++k) v -= A[i * n + k] * A[j * n + k];
            A[i * n + j] = v / s;
        }
    }
    std::vector<double> x(b);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) x[i] -= A[i * n + k] * x[k];
        x[i] /= A[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t k = ii + 1; k < n; ++k) x[ii] -= A[k * n + ii] * x[k];
        x[ii] /= A[ii * n + ii];
    }
    return x;
}

} // namespace detail

/// Fits the canonical direction by the two-class closed form: the within-
/// class scatter is shrunk toward a scaled identity (gamma = 1e-3) and the
/// direction solves S_w w = mu_ic - mu_inc. The discrimination index is
/// the squared pooled within-class correlation between each feature and
/// the canonical projection, normalized to unit total mass.
inline CvaModel fit_cva(const LabeledFeatureSet& data, double shrinkage = 1e-3) {
    const std::size_t n = data.X.rows();
    const std::size_t p = data.X.cols();
    require(n == data.y.size(), "label count must match frame count");
    require(p >= 1, "need at least one feature");

    std::size_t n0 = 0, n1 = 0;
    for (Label l : data.y) (l == Label::Ic ? n1 : n0)++;
    if (n0 < 2 || n1 < 2)
        throw std::runtime_error("CVA needs at least 2 frames of each class (have " +
                                 std::to_string(n0) + " INC, " + std::to_string(n1) + " IC)");

    std::vector<double> mu0(p, 0.0), mu1(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = data.X.row_ptr(i);
        auto& mu = (data.y[i] == Label::Ic) ? mu1 : mu0;
        for (std::size_t j = 0; j < p; ++j) mu[j] += row[j];
    }
    for (std::size_t j = 0; j < p; ++j) {
        mu0[j] /= static_cast<double>(n0);
        mu1[j] /= static_cast<double>(n1);
    }

    // Pooled within-class scatter, normalized by n - 2.
    std::vector<double> sw(p * p, 0.0);
    std::vector<double> centered(p);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = data.X.row_ptr(i);
        const auto& mu = (data.y[i] == Label::Ic) ? mu1 : mu0;
        for (std::size_t j = 0; j < p; ++j) centered[j] = row[j] - mu[j];
        for (std::size_t j = 0; j < p; ++j) {
            const double cj = centered[j];
            if (cj == 0.0) continue;
            double* swr = sw.data() + j * p;
            for (std::size_t k = j; k < p; ++k) swr[k] += cj * centered[k];
        }
    }
    const double norm = 1.0 / static_cast<double>(n - 2);
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t k = j; k < p; ++k) {
            sw[j * p + k] *= norm;
            sw[k * p + j] = sw[j * p + k];
        }

    double trace = 0.0;
    for (std::size_t j = 0; j < p; ++j) trace += sw[j * p + j];
    if (!(trace > 0.0)) throw std::runtime_error("all features are constant within classes");

    // Solve in correlation form: scaling by the pooled standard deviations
    // makes the shrinkage ridge act on a unit-diagonal matrix, so feature
    // scaling drops out of the solution exactly.
    std::vector<double> stddev(p);
    for (std::size_t j = 0; j < p; ++j) {
        stddev[j] = std::sqrt(sw[j * p + j]);
        if (!(stddev[j] > 0.0)) stddev[j] = 1.0;
    }
    std::vector<double> corr(p * p);
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t k = 0; k < p; ++k)
            corr[j * p + k] = (1.0 - shrinkage) * sw[j * p + k] / (stddev[j] * stddev[k]);
    for (std::size_t j = 0; j < p; ++j) corr[j * p + j] += shrinkage;

    std::vector<double> rhs(p);
    for (std::size_t j = 0; j < p; ++j) rhs[j] = (mu1[j] - mu0[j]) / stddev[j];
    std::vector<double> w = detail::cholesky_solve(corr, rhs, p);
    for (std::size_t j = 0; j < p; ++j) w[j] /= stddev[j];
    double wn = 0.0;
    for (double v : w) wn += v * v;
    wn = std::sqrt(wn);
    if (wn > 0.0)
        for (double& v : w) v /= wn;

    // Canonical projection and pooled within-class correlations.
    std::vector<double> z(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = data.X.row_ptr(i);
        double s = 0.0;
        for (std::size_t j = 0; j < p; ++j) s += row[j] * w[j];
        z[i] = s;
    }
    double zmu0 = 0.0, zmu1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) (data.y[i] == Label::Ic ? zmu1 : zmu0) += z[i];
    zmu0 /= static_cast<double>(n0);
    zmu1 /= static_cast<double>(n1);

    std::vector<double> cov(p, 0.0), var(p, 0.0);
    double varz = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = data.X.row_ptr(i);
        const auto& mu = (data.y[i] == Label::Ic) ? mu1 : mu0;
        const double zc = z[i] - (data.y[i] == Label::Ic ? zmu1 : zmu0);
        varz += zc * zc;
        for (std::size_t j = 0; j < p; ++j) {
            const double xc = row[j] - mu[j];
            cov[j] += xc * zc;
            var[j] += xc * xc;
        }
    }

    CvaModel model;
    model.cdsp = w;
    model.discrimination.assign(p, 0.0);
    double total = 0.0;
    if (varz > 0.0) {
        for (std::size_t j = 0; j < p; ++j) {
            if (var[j] > 0.0) {
                const double r = cov[j] / std::sqrt(var[j] * varz);
                model.discrimination[j] = r * r;
            }
            total += model.discrimination[j];
        }
    }
    if (total <= 0.0) {
        // Degenerate projection: fall back to the direction weights.
        for (std::size_t j = 0; j < p; ++j) {
            model.discrimination[j] = w[j] * w[j];
            total += model.discrimination[j];
        }
    }
    for (double& d : model.discrimination) d /= total;

    model.ranking.resize(p);
    std::iota(model.ranking.begin(), model.ranking.end(), std::size_t{0});
    std::stable_sort(model.ranking.begin(), model.ranking.end(), [&](std::size_t a, std::size_t b) {
        return model.discrimination[a] > model.discrimination[b];
    });
    return model;
}

/// Cumulative-mass selection: smallest score-ranked prefix reaching
/// tau * total mass, padded up to `floor_count` positive-score features,
/// truncated at `cap`.
struct SelectionPolicy {
    double tau = 0.8;
    std::size_t floor_count = 3;
    std::size_t cap = 12;
};

inline std::vector<std::size_t> select_features(const CvaModel& model, const SelectionPolicy& policy = {}) {
    const std::size_t p = model.ranking.size();
    require(p > 0, "model has no features");
    double total = 0.0;
    std::size_t positives = 0;
    for (double d : model.discrimination) {
        total += d;
        if (d > 0.0) ++positives;
    }
    std::size_t k_mass = p;
    if (total > 0.0) {
        double acc = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
            acc += model.discrimination[model.ranking[i]];
            if (acc >= policy.tau * total - 1e-12) {
                k_mass = i + 1;
                break;
            }
        }
    } else {
        k_mass = std::min(policy.floor_count, p);
        positives = k_mass;
    }
    std::size_t k = std::max(k_mass, std::min(policy.floor_count, std::max<std::size_t>(positives, 1)));
    k = std::min({k, policy.cap, p});
    return std::vector<std::size_t>(model.ranking.begin(),
                                    model.ranking.begin() + static_cast<std::ptrdiff_t>(k));
}

/// Long-format per-feature score table, rows band-major in montage order.
struct DiscriminationRow {
    std::string channel;
    std::string band;
    double score = 0.0;
};

inline std::vector<DiscriminationRow> discrimination_map(const CvaModel& model,
                                                         const std::vector<FeatureId>& names,
                                                         const std::vector<std::string>& channels,
                                                         const std::vector<std::string>& band_names) {
    require(names.size() == model.discrimination.size(), "feature name count mismatch");
    std::vector<DiscriminationRow> rows;
    rows.reserve(names.size());
    for (std::size_t b = 0; b < band_names.size(); ++b) {
        for (std::size_t c = 0; c < channels.size(); ++c) {
            for (std::size_t j = 0; j < names.size(); ++j) {
                if (names[j].channel == static_cast<int>(c) && names[j].band == static_cast<int>(b)) {
                    rows.push_back({channels[c], band_names[b], model.discrimination[j]});
                }
            }
        }
    }
    require(rows.size() == names.size(), "feature names do not cover the channel/band grid");
    return rows;
}

inline void write_discrimination_csv(const std::string& path, const std::vector<DiscriminationRow>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "channel,band,score\n";
    char num[32];
    for (const auto& r : rows) {
        std::snprintf(num, sizeof num, "%.9f", r.score);
        f << r.channel << ',' << r.band << ',' << num << "\n";
    }
}

} // namespace icdet

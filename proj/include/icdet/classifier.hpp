#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "icdet/core.hpp"
#include "icdet/cva.hpp"
#include "icdet/rng.hpp"

namespace icdet {

constexpr double kVarianceFloor = 1e-6;

struct GaussianPrototype {
    std::vector<double> mean;
    std::vector<double> variance;  // diagonal, floored at kVarianceFloor
};

/// Per-feature z-scoring fitted on training data.
struct FeatureNormalizer {
    std::vector<double> mean;
    std::vector<double> stddev;

    static FeatureNormalizer fit(const Matrix& X) {
        FeatureNormalizer fn;
        const std::size_t n = X.rows(), p = X.cols();
        require(n >= 2, "normalizer needs at least 2 rows");
        fn.mean.assign(p, 0.0);
        fn.stddev.assign(p, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < p; ++j) fn.mean[j] += X(i, j);
        for (double& m : fn.mean) m /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < p; ++j) {
                const double d = X(i, j) - fn.mean[j];
                fn.stddev[j] += d * d;
            }
        for (double& s : fn.stddev) {
            s = std::sqrt(s / static_cast<double>(n - 1));
            if (!(s > 0.0)) s = 1.0;  // constant feature maps to 0
        }
        return fn;
    }

    std::vector<double> apply(const std::vector<double>& x) const {
        require(x.size() == mean.size(), "feature dimension mismatch");
        std::vector<double> out(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / stddev[j];
        return out;
    }

    Matrix apply(const Matrix& X) const {
        require(X.cols() == mean.size(), "feature dimension mismatch");
        Matrix out(X.rows(), X.cols());
        for (std::size_t i = 0; i < X.rows(); ++i)
            for (std::size_t j = 0; j < X.cols(); ++j) out(i, j) = (X(i, j) - mean[j]) / stddev[j];
        return out;
    }
};

/// Clustering-based prototype initialization: online 1-D SOM with an
/// exponentially cooled neighborhood, then a hard assignment pass that
/// recomputes per-cluster means and diagonal sample variances.
inline std::vector<GaussianPrototype> init_prototypes(const Matrix& X_class, std::size_t n_p, Rng& rng) {
    const std::size_t n = X_class.rows(), p = X_class.cols();
    require(n_p >= 1, "need at least one prototype");
    require(n >= n_p, "fewer class rows (" + std::to_string(n) + ") than prototypes (" +
                          std::to_string(n_p) + ")");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);

    std::vector<std::vector<double>> centers(n_p, std::vector<double>(p));
    for (std::size_t j = 0; j < n_p; ++j)
        for (std::size_t d = 0; d < p; ++d) centers[j][d] = X_class(order[j], d);

    const int epochs = 40;
    const double eta0 = 0.5, eta1 = 0.02;
    const double sigma0 = std::max(static_cast<double>(n_p) / 2.0, 0.5), sigma1 = 0.2;
    for (int e = 0; e < epochs; ++e) {
        const double frac = epochs > 1 ? static_cast<double>(e) / (epochs - 1) : 1.0;
        const double eta = eta0 * std::pow(eta1 / eta0, frac);
        const double sigma = sigma0 * std::pow(sigma1 / sigma0, frac);
        rng.shuffle(order);
        for (std::size_t i : order) {
            const double* x = X_class.row_ptr(i);
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::max();
            for (std::size_t j = 0; j < n_p; ++j) {
                double d = 0.0;
                for (std::size_t k = 0; k < p; ++k) {
                    const double diff = x[k] - centers[j][k];
                    d += diff * diff;
                }
                if (d < best_d) {
                    best_d = d;
                    best = j;
                }
            }
            for (std::size_t j = 0; j < n_p; ++j) {
                const double dj = static_cast<double>(j) - static_cast<double>(best);
                const double h = std::exp(-dj * dj / (2.0 * sigma * sigma));
                const double step = eta * h;
                if (step < 1e-6) continue;
                for (std::size_t k = 0; k < p; ++k) centers[j][k] += step * (x[k] - centers[j][k]);
            }
        }
    }

    // Hard assignment: exact cluster moments.
    std::vector<std::size_t> assign(n);
    std::vector<std::size_t> counts(n_p, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = X_class.row_ptr(i);
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::max();
        for (std::size_t j = 0; j < n_p; ++j) {
            double d = 0.0;
            for (std::size_t k = 0; k < p; ++k) {
                const double diff = x[k] - centers[j][k];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        assign[i] = best;
        ++counts[best];
    }
    std::vector<GaussianPrototype> protos(n_p);
    for (std::size_t j = 0; j < n_p; ++j) {
        protos[j].mean.assign(p, 0.0);
        protos[j].variance.assign(p, kVarianceFloor);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = X_class.row_ptr(i);
        for (std::size_t k = 0; k < p; ++k) protos[assign[i]].mean[k] += x[k];
    }
    for (std::size_t j = 0; j < n_p; ++j) {
        if (counts[j] == 0) {
            protos[j].mean = centers[j];  // empty cluster keeps its SOM position
            continue;
        }
        for (std::size_t k = 0; k < p; ++k) protos[j].mean[k] /= static_cast<double>(counts[j]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = X_class.row_ptr(i);
        auto& pr = protos[assign[i]];
        for (std::size_t k = 0; k < p; ++k) {
            const double d = x[k] - pr.mean[k];
            pr.variance[k] += d * d;  // accumulate, normalized below
        }
    }
    for (std::size_t j = 0; j < n_p; ++j) {
        auto& pr = protos[j];
        if (counts[j] >= 2) {
            for (std::size_t k = 0; k < p; ++k) {
                const double v = (pr.variance[k] - kVarianceFloor) / static_cast<double>(counts[j] - 1);
                pr.variance[k] = std::max(v, kVarianceFloor);
            }
        } else {
            pr.variance.assign(p, kVarianceFloor);
        }
    }
    return protos;
}

/// Mixture-of-prototypes generative classifier with equal class priors.
/// All likelihood work happens in log space.
struct GaussianClassifier {
    std::size_t n_p = 4;
    std::size_t dim = 0;
    std::array<std::vector<GaussianPrototype>, 2> prototypes;  // [INC, IC]
    std::array<double, 2> priors = {0.5, 0.5};
    FeatureNormalizer feature_norm;

    void validate() const {
        require(prototypes[0].size() == n_p && prototypes[1].size() == n_p,
                "both classes must have n_p prototypes");
        for (const auto& cls : prototypes)
            for (const auto& pr : cls) {
                require(pr.mean.size() == dim && pr.variance.size() == dim, "prototype dimension mismatch");
                for (double v : pr.variance) require(v >= kVarianceFloor, "variance below floor");
            }
    }
};

namespace detail {

inline double log_gauss_diag(const std::vector<double>& x, const GaussianPrototype& pr) {
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - pr.mean[k];
        acc += d * d / pr.variance[k] + std::log(2.0 * M_PI * pr.variance[k]);
    }
    return -0.5 * acc;
}

inline double log_sum_exp(const std::vector<double>& v) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

/// Posterior plus within-class prototype responsibilities, shared by
/// inference and the training gradient.
struct PosteriorWork {
    std::array<double, 2> posterior;
    std::array<std::vector<double>, 2> responsibility;
};

inline PosteriorWork posterior_work(const GaussianClassifier& clf, const std::vector<double>& x) {
    require(x.size() == clf.dim, "feature dimension mismatch: expected " + std::to_string(clf.dim) +
                                     ", got " + std::to_string(x.size()));
    PosteriorWork w;
    std::array<double, 2> log_class;
    std::vector<double> lg;
    for (int c = 0; c < 2; ++c) {
        lg.clear();
        for (const auto& pr : clf.prototypes[static_cast<std::size_t>(c)]) lg.push_back(log_gauss_diag(x, pr));
        const double lse = log_sum_exp(lg);
        log_class[static_cast<std::size_t>(c)] =
            lse - std::log(static_cast<double>(clf.n_p)) + std::log(clf.priors[static_cast<std::size_t>(c)]);
        auto& resp = w.responsibility[static_cast<std::size_t>(c)];
        resp.resize(lg.size());
        for (std::size_t m = 0; m < lg.size(); ++m) resp[m] = std::exp(lg[m] - lse);
    }
    const double denom = log_sum_exp({log_class[0], log_class[1]});
    w.posterior[0] = std::exp(log_class[0] - denom);
    w.posterior[1] = std::exp(log_class[1] - denom);
    return w;
}

} // namespace detail

/// Posterior class probabilities for a normalized feature vector.
inline std::array<double, 2> posterior(const GaussianClassifier& clf, const std::vector<double>& x) {
    return detail::posterior_work(clf, x).posterior;
}

inline double posterior_ic(const GaussianClassifier& clf, const std::vector<double>& x) {
    return posterior(clf, x)[static_cast<std::size_t>(Label::Ic)];
}

/// Squared-error loss of the posterior vector against the one-hot target.
inline double mse_single(const GaussianClassifier& clf, const std::vector<double>& x, Label y) {
    const auto post = posterior(clf, x);
    const double t0 = (y == Label::Inc) ? 1.0 : 0.0;
    const double t1 = 1.0 - t0;
    const double d0 = post[0] - t0, d1 = post[1] - t1;
    return 0.5 * (d0 * d0 + d1 * d1);
}

struct ClassifierGradient {
    std::array<std::vector<std::vector<double>>, 2> mean;      // [class][proto][dim]
    std::array<std::vector<std::vector<double>>, 2> variance;  // same shape
};

/// Analytic gradient of the per-sample squared error with respect to the
/// prototype means (and diagonal variances).
inline ClassifierGradient gradient_single(const GaussianClassifier& clf, const std::vector<double>& x,
                                          Label y) {
    const auto w = detail::posterior_work(clf, x);
    const double t0 = (y == Label::Inc) ? 1.0 : 0.0;
    const std::array<double, 2> t = {t0, 1.0 - t0};
    // dE/d logL_k routed through the softmax-like normalization:
    // beta_k = (p_k - t_k) - sum_c (p_c - t_c) p_c
    double mix = 0.0;
    for (int c = 0; c < 2; ++c)
        mix += (w.posterior[static_cast<std::size_t>(c)] - t[static_cast<std::size_t>(c)]) *
               w.posterior[static_cast<std::size_t>(c)];
    ClassifierGradient g;
    for (int c = 0; c < 2; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        const double beta = (w.posterior[ci] - t[ci]) - mix;
        g.mean[ci].assign(clf.n_p, std::vector<double>(clf.dim, 0.0));
        g.variance[ci].assign(clf.n_p, std::vector<double>(clf.dim, 0.0));
        for (std::size_t m = 0; m < clf.n_p; ++m) {
            const auto& pr = clf.prototypes[ci][m];
            const double scale = beta * w.posterior[ci] * w.responsibility[ci][m];
            for (std::size_t k = 0; k < clf.dim; ++k) {
                const double diff = x[k] - pr.mean[k];
                g.mean[ci][m][k] = scale * diff / pr.variance[k];
                g.variance[ci][m][k] =
                    scale * 0.5 * (diff * diff / (pr.variance[k] * pr.variance[k]) - 1.0 / pr.variance[k]);
            }
        }
    }
    return g;
}

struct TrainOptions {
    double learning_rate = 0.01;
    int epochs = 20;
    std::uint64_t seed = 1;
    bool train_variances = false;
};

/// Stochastic gradient descent on the mean squared error between posterior
/// and one-hot target. X must already be normalized. Returns the running
/// per-epoch mean of the pre-update sample losses.
inline std::vector<double> train(GaussianClassifier& clf, const Matrix& X, const std::vector<Label>& y,
                                 const TrainOptions& opts = {}) {
    require(X.rows() == y.size(), "label count must match row count");
    require(X.cols() == clf.dim, "feature dimension mismatch");
    clf.validate();
    std::vector<double> epoch_mse;
    if (opts.epochs <= 0 || X.rows() == 0) return epoch_mse;

    Rng rng(opts.seed);
    std::vector<std::size_t> order(X.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> x(clf.dim);
    for (int e = 0; e < opts.epochs; ++e) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t i : order) {
            for (std::size_t k = 0; k < clf.dim; ++k) x[k] = X(i, k);
            loss_sum += mse_single(clf, x, y[i]);
            const auto g = gradient_single(clf, x, y[i]);
            for (int c = 0; c < 2; ++c) {
                const auto ci = static_cast<std::size_t>(c);
                for (std::size_t m = 0; m < clf.n_p; ++m) {
                    auto& pr = clf.prototypes[ci][m];
                    for (std::size_t k = 0; k < clf.dim; ++k) {
                        const double gm = g.mean[ci][m][k];
                        if (!std::isfinite(gm))
                            throw std::runtime_error("non-finite gradient during classifier training");
                        pr.mean[k] -= opts.learning_rate * gm;
                        if (opts.train_variances) {
                            const double gv = g.variance[ci][m][k];
                            if (!std::isfinite(gv))
                                throw std::runtime_error("non-finite gradient during classifier training");
                            pr.variance[k] =
                                std::max(pr.variance[k] - opts.learning_rate * gv, kVarianceFloor);
                        }
                    }
                }
            }
        }
        epoch_mse.push_back(loss_sum / static_cast<double>(X.rows()));
    }
    return epoch_mse;
}

/// Builds a ready classifier: fit normalization, split by class, SOM init.
inline GaussianClassifier make_classifier(const Matrix& X_raw, const std::vector<Label>& y,
                                          std::size_t n_p, std::uint64_t seed) {
    require(X_raw.rows() == y.size(), "label count must match row count");
    GaussianClassifier clf;
    clf.n_p = n_p;
    clf.dim = X_raw.cols();
    clf.feature_norm = FeatureNormalizer::fit(X_raw);
    const Matrix X = clf.feature_norm.apply(X_raw);

    Rng rng(seed);
    for (int c = 0; c < 2; ++c) {
        std::size_t count = 0;
        for (Label l : y)
            if (static_cast<int>(l) == c) ++count;
        Matrix Xc(count, X.cols());
        std::size_t r = 0;
        for (std::size_t i = 0; i < X.rows(); ++i) {
            if (static_cast<int>(y[i]) != c) continue;
            for (std::size_t j = 0; j < X.cols(); ++j) Xc(r, j) = X(i, j);
            ++r;
        }
        clf.prototypes[static_cast<std::size_t>(c)] = init_prototypes(Xc, n_p, rng);
    }
    clf.validate();
    return clf;
}

} // namespace icdet

#include "glmresid/glm_fit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <utility>

#include "glmresid/stats.hpp"

namespace glmresid {

namespace {

// mu is usable when it sits in the family domain and produces a finite,
// strictly positive IRLS weight (degenerate weights make the normal
// equations singular).
bool state_valid(const ModelSpec& spec, const Eigen::VectorXd& mu) {
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        if (!spec.family.in_mean_domain(mu[i])) return false;
        const double wi = weight(spec.family, spec.link, mu[i]);
        if (!std::isfinite(wi) || wi <= 0.0) return false;
    }
    return true;
}

Eigen::VectorXd score_vector(const ModelSpec& spec, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& mu) {
    Eigen::VectorXd g(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        g[i] = (y[i] - mu[i]) * spec.link.dmu(mu[i]) / spec.family.variance(mu[i]);
    }
    return spec.X.transpose() * g;
}

FitResult partial_result(const ModelSpec& spec, const Eigen::VectorXd& beta,
                         const Eigen::VectorXd& eta, const Eigen::VectorXd& mu,
                         const Eigen::VectorXd& w, double dev, int iterations) {
    FitResult out;
    out.beta_hat = beta;
    out.eta_hat = eta;
    out.mu_hat = mu;
    out.w = w;
    out.phi_hat = spec.phi.value_or(0.0);
    out.deviance = dev;
    out.iterations = iterations;
    out.converged = false;
    return out;
}

}  // namespace

PhiEstimator parse_phi_estimator(std::string_view token) {
    std::string t(token);
    std::transform(t.begin(), t.end(), t.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (t == "moment") return PhiEstimator::Moment;
    if (t == "ml" || t == "gamma_ml") return PhiEstimator::GammaML;
    throw std::invalid_argument("unknown phi estimator '" + std::string(token) +
                                "'; expected moment or ml");
}

NotConvergedError::NotConvergedError(const std::string& msg, FitResult last_)
    : std::runtime_error(msg), last(std::move(last_)) {}

double deviance(const Family& family, const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
    double d = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double th_y = family.theta(y[i]);
        const double th_m = family.theta(mu[i]);
        d += 2.0 * (y[i] * (th_y - th_m) - family.log_partition(th_y) +
                    family.log_partition(th_m));
    }
    return d;
}

ModelQuantities model_quantities(const ModelSpec& spec, const Eigen::VectorXd& beta, double phi) {
    Precision prec(phi);
    const Eigen::Index n = spec.X.rows();
    const Eigen::Index p = spec.X.cols();
    if (beta.size() != p) throw std::invalid_argument("beta length does not match X columns");

    ModelQuantities q;
    q.eta = spec.X * beta;
    q.mu.resize(n);
    q.w.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        q.mu[i] = spec.link.mu(q.eta[i]);
        spec.family.require_mean(q.mu[i]);
        q.w[i] = weight(spec.family, spec.link, q.mu[i]);
        if (!std::isfinite(q.w[i]) || q.w[i] <= 0.0) {
            std::ostringstream msg;
            msg << "degenerate IRLS weight at observation " << i;
            throw std::domain_error(msg.str());
        }
    }

    const Eigen::MatrixXd A = q.w.cwiseSqrt().asDiagonal() * spec.X;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) throw std::invalid_argument("weighted design matrix is rank deficient");

    const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd PtXt = qr.colsPermutation().transpose() * spec.X.transpose();
    // S = R^{-T} P^T X^T, so z_ii = ||S col i||^2 and
    // (X'WX)^{-1} X'f = P R^{-1} S f.
    const Eigen::MatrixXd S = R.transpose().triangularView<Eigen::Lower>().solve(PtXt);
    q.z_diag = S.colwise().squaredNorm();

    Eigen::VectorXd f(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = q.mu[i];
        f[i] = q.z_diag[i] * spec.link.dmu(mu) * spec.link.d2mu(mu) / spec.family.variance(mu);
    }
    const Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(
        Eigen::MatrixXd::Identity(p, p));
    q.bias_beta = -(0.5 / prec.phi) * (qr.colsPermutation() * (Rinv * (S * f)));
    q.bias_eta = spec.X * q.bias_beta;
    q.xtwx = A.transpose() * A;
    q.xtwx_inv = qr.colsPermutation() * (Rinv * Rinv.transpose()) *
                 qr.colsPermutation().transpose();
    return q;
}

FitResult irls_fit(const ModelSpec& spec, const Eigen::VectorXd& y, const FitOptions& opts) {
    const Eigen::Index n = spec.X.rows();
    const Eigen::Index p = spec.X.cols();
    if (y.size() != n) throw std::invalid_argument("y length does not match X rows");
    if (p < 1 || n <= p)
        throw std::invalid_argument("design matrix needs 1 <= p < n");
    if (!spec.X.allFinite()) throw std::invalid_argument("design matrix has non-finite entries");
    if (spec.phi) {
        Precision check(*spec.phi);
        (void)check;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!spec.family.in_observation_domain(y[i])) {
            std::ostringstream msg;
            msg << "response at observation " << i << " (" << y[i] << ") is outside the "
                << spec.family.name() << " domain";
            throw std::domain_error(msg.str());
        }
    }
    {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr0(spec.X);
        qr0.setThreshold(opts.rank_threshold);
        if (qr0.rank() < p) {
            std::ostringstream msg;
            msg << "design matrix is rank deficient (rank " << qr0.rank() << " of " << p << ")";
            throw std::invalid_argument(msg.str());
        }
    }

    // Initial mu: the observations, clamped away from zero whenever the
    // family or the link needs positivity.
    const bool clamp = !(spec.family.kind() == FamilyKind::Normal &&
                         (spec.link.kind() == LinkKind::Identity ||
                          spec.link.kind() == LinkKind::Canonical));
    double scale = y.cwiseAbs().mean();
    if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;
    Eigen::VectorXd mu = clamp ? y.cwiseMax(1e-8 * scale).eval() : y;
    Eigen::VectorXd eta(n);
    for (Eigen::Index i = 0; i < n; ++i) eta[i] = spec.link.eta(mu[i]);
    if (!state_valid(spec, mu))
        throw std::domain_error("could not build a valid starting point from y");
    double dev = deviance(spec.family, y, mu);

    Eigen::VectorXd beta;
    Eigen::VectorXd w(n), zwork(n);
    bool have_beta = false;
    bool converged = false;
    int it = 0;
    while (it < opts.max_iterations) {
        ++it;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = spec.link.dmu(mu[i]);
            w[i] = d * d / spec.family.variance(mu[i]);
            zwork[i] = eta[i] + (y[i] - mu[i]) / d;
        }
        const Eigen::VectorXd sqrtw = w.cwiseSqrt();
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sqrtw.asDiagonal() * spec.X);
        qr.setThreshold(opts.rank_threshold);
        if (qr.rank() < p)
            throw NotConvergedError("weighted design lost full rank during IRLS",
                                    partial_result(spec, beta, eta, mu, w, dev, it - 1));
        const Eigen::VectorXd beta_new = qr.solve(sqrtw.cwiseProduct(zwork));

        bool accepted = false;
        Eigen::VectorXd beta_try, eta_try, mu_try(n);
        double dev_try = 0.0;
        double step = 1.0;
        for (int h = 0; h <= opts.max_step_halvings; ++h) {
            beta_try = have_beta ? (beta + step * (beta_new - beta)).eval() : beta_new;
            eta_try = spec.X * beta_try;
            for (Eigen::Index i = 0; i < n; ++i) mu_try[i] = spec.link.mu(eta_try[i]);
            // The starting mu is saturated rather than a member of the model
            // family, so its deviance is no yardstick: the first solve is
            // accepted whenever it lands on a valid state.
            if (state_valid(spec, mu_try)) {
                dev_try = deviance(spec.family, y, mu_try);
                if (std::isfinite(dev_try) &&
                    (!have_beta || dev_try <= dev + 1e-12 * (std::abs(dev) + 1.0))) {
                    accepted = true;
                    break;
                }
            }
            if (!have_beta) break;
            step *= 0.5;
        }
        if (!accepted) {
            if (have_beta &&
                score_vector(spec, y, mu).lpNorm<Eigen::Infinity>() <= opts.score_tol) {
                converged = true;
                break;
            }
            throw NotConvergedError(
                "step halving failed to reach a non-increasing deviance",
                partial_result(spec, beta, eta, mu, w, dev, it - 1));
        }

        const double dev_change = std::abs(dev - dev_try);
        beta = beta_try;
        eta = eta_try;
        mu = mu_try;
        dev = dev_try;
        have_beta = true;
        if (dev_change <= opts.deviance_rtol * (std::abs(dev) + 0.1) &&
            score_vector(spec, y, mu).lpNorm<Eigen::Infinity>() <= opts.score_tol) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "IRLS did not converge in " << opts.max_iterations << " iterations";
        throw NotConvergedError(msg.str(), partial_result(spec, beta, eta, mu, w, dev, it));
    }

    FitResult out;
    out.beta_hat = beta;
    out.deviance = dev;
    out.iterations = it;
    out.converged = true;
    if (spec.phi) {
        out.phi_hat = *spec.phi;
    } else if (opts.phi_estimator == PhiEstimator::Moment) {
        out.phi_hat = pearson_phi(spec.family, y, mu, static_cast<int>(p));
    } else {
        if (spec.family.kind() != FamilyKind::Gamma)
            throw std::invalid_argument("gamma_ml phi estimator requires the gamma family");
        out.phi_hat = gamma_ml_phi(dev, static_cast<int>(n));
    }
    ModelQuantities q = model_quantities(spec, beta, out.phi_hat);
    out.eta_hat = std::move(q.eta);
    out.mu_hat = std::move(q.mu);
    out.w = std::move(q.w);
    out.z_diag = std::move(q.z_diag);
    out.bias_beta = std::move(q.bias_beta);
    out.bias_eta = std::move(q.bias_eta);
    out.xtwx = std::move(q.xtwx);
    out.xtwx_inv = std::move(q.xtwx_inv);
    return out;
}

double pearson_phi(const Family& family, const Eigen::VectorXd& y, const Eigen::VectorXd& mu,
                   int p) {
    const Eigen::Index n = y.size();
    if (mu.size() != n) throw std::invalid_argument("pearson_phi: y and mu lengths differ");
    if (n <= p) throw std::invalid_argument("pearson_phi: need n > p");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = y[i] - mu[i];
        sum += r * r / family.variance(mu[i]);
    }
    if (!(sum > 0.0))
        throw std::domain_error("degenerate exact fit: Pearson sum is zero, phi is undefined");
    return static_cast<double>(n - p) / sum;
}

double gamma_ml_phi(double deviance_sum, int n) {
    if (n < 1) throw std::invalid_argument("gamma_ml_phi: need n >= 1");
    const double d = deviance_sum / (2.0 * n);
    if (!(d > 0.0) || !std::isfinite(d))
        throw std::domain_error("gamma_ml_phi: deviance must be positive and finite");

    // Solve log(phi) - digamma(phi) = d; the left side decreases strictly
    // from +inf to 0, so the root is unique. Newton from Minka's starting
    // value, safeguarded by a bracket.
    auto g = [d](double phi) { return std::log(phi) - stats::digamma(phi) - d; };
    double phi = (3.0 - d + std::sqrt((d - 3.0) * (d - 3.0) + 24.0 * d)) / (12.0 * d);
    if (!(phi > 0.0) || !std::isfinite(phi)) phi = 1.0;
    double lo = phi, hi = phi;
    if (g(phi) > 0.0) {
        while (g(hi) > 0.0) {
            hi *= 2.0;
            if (hi > 1e300) throw std::runtime_error("gamma_ml_phi: failed to bracket the root");
        }
    } else {
        while (g(lo) <= 0.0) {
            lo *= 0.5;
            if (lo < 1e-300) throw std::runtime_error("gamma_ml_phi: failed to bracket the root");
        }
    }
    for (int iter = 0; iter < 100; ++iter) {
        const double val = g(phi);
        if (std::abs(val) < 1e-13) return phi;
        if (val > 0.0) lo = std::max(lo, phi);
        else hi = std::min(hi, phi);
        const double slope = 1.0 / phi - stats::trigamma(phi);
        double next = phi - val / slope;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - phi) <= 1e-14 * phi) return next;
        phi = next;
    }
    return phi;
}

double estimate_phi(const ModelSpec& spec, const FitResult& fit, const Eigen::VectorXd& y,
                    PhiEstimator method) {
    switch (method) {
        case PhiEstimator::Moment:
            return pearson_phi(spec.family, y, fit.mu_hat, static_cast<int>(spec.X.cols()));
        case PhiEstimator::GammaML:
            if (spec.family.kind() != FamilyKind::Gamma)
                throw std::invalid_argument("gamma_ml phi estimator requires the gamma family");
            return gamma_ml_phi(fit.deviance, static_cast<int>(y.size()));
    }
    throw std::invalid_argument("unknown phi estimator");
}

}  // namespace glmresid

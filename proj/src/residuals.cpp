#include "glmresid/residuals.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace glmresid {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// d/dx log f_eps(x) = phi sqrt(V) q(mu) + d/dx c(sqrt(V)x + mu, phi).
double ell1(const Family& family, double mu, double phi, double x) {
    return phi * std::sqrt(family.variance(mu)) * family.theta(mu) +
           family.c_deriv(mu, phi, x);
}

// Density expansions are zero strictly outside the open support; exactly at
// the boundary the expansion pieces are singular, so that point is refused.
bool interior_or_zero(const Family& family, double mu, double x, const char* fn) {
    const double lo = family.residual_lower(mu);
    if (!std::isfinite(lo)) return std::isfinite(x);
    if (x == lo)
        throw std::domain_error(std::string(fn) + ": x lies exactly on the support boundary");
    return x > lo;
}

void require_interior(const Family& family, double mu, double x, const char* fn) {
    if (!family.in_residual_support(mu, x))
        throw std::domain_error(std::string(fn) + ": x outside the open residual support");
}

void require_obs_index(const FitResult& fit, int i) {
    if (i < 0 || i >= fit.mu_hat.size())
        throw std::out_of_range("observation index out of range");
}

// Shared factor of Eq.-style density expansions:
// 1 - d/dx{theta_x} - l1 theta_x + (1/2){phi2'' + 2 l1 phi2' + (l2 + l1^2) phi2}.
double expansion_factor(const Family& family, const CorrectionPolynomials& poly, double mu,
                        double phi, double x) {
    const double l1 = ell1(family, mu, phi, x);
    const double l2 = family.c_deriv2(mu, phi, x);
    const double theta = poly.theta_at(x);
    const double dtheta = poly.theta_coef[1] + 2.0 * poly.theta_coef[2] * x;
    const double p = poly.phi2_at(x);
    const double dp = poly.phi2_coef[1] + 2.0 * poly.phi2_coef[2] * x;
    const double ddp = 2.0 * poly.phi2_coef[2];
    return 1.0 - (dtheta + l1 * theta) + 0.5 * (ddp + 2.0 * l1 * dp + (l2 + l1 * l1) * p);
}

}  // namespace

double e_function(const Family& family, const Link& link, double mu, double x) {
    family.require_mean(mu);
    const double V = family.variance(mu);
    const double d1 = link.dmu(mu);
    return -d1 / std::sqrt(V) - 0.5 * (family.variance_d1(mu) / V) * d1 * x;
}

double h_function(const Family& family, const Link& link, double mu, double x) {
    family.require_mean(mu);
    const double V = family.variance(mu);
    const double V1 = family.variance_d1(mu);
    const double V2 = family.variance_d2(mu);
    const double d1 = link.dmu(mu);
    const double d2 = link.d2mu(mu);
    const double h0 = -d2 / std::sqrt(V) + V1 * d1 * d1 / (V * std::sqrt(V));
    const double h1 =
        0.25 * ((3.0 * V1 * V1 / (V * V) - 2.0 * V2 / V) * d1 * d1 - 2.0 * (V1 / V) * d2);
    return h0 + h1 * x;
}

CorrectionPolynomials conditional_moments_at(const Family& family, const Link& link, double mu,
                                             double phi, double z_ii, double bias_eta) {
    family.require_mean(mu);
    Precision prec(phi);
    const double V = family.variance(mu);
    const double V1 = family.variance_d1(mu);
    const double V2 = family.variance_d2(mu);
    const double d1 = link.dmu(mu);
    const double d2 = link.d2mu(mu);
    const double sqrtV = std::sqrt(V);
    const double sw = d1 / sqrtV;  // signed root of w = V^{-1} mu'^2

    CorrectionPolynomials poly;
    poly.e0 = -d1 / sqrtV;
    poly.e1 = -0.5 * (V1 / V) * d1;
    poly.h0 = -d2 / sqrtV + V1 * d1 * d1 / (V * sqrtV);
    poly.h1 = 0.25 * ((3.0 * V1 * V1 / (V * V) - 2.0 * V2 / V) * d1 * d1 - 2.0 * (V1 / V) * d2);

    const double half_z_phi = 0.5 * z_ii / phi;
    poly.theta_coef[0] = bias_eta * poly.e0 + half_z_phi * poly.h0;
    poly.theta_coef[1] = bias_eta * poly.e1 + sw * z_ii * poly.e0 + half_z_phi * poly.h1;
    poly.theta_coef[2] = sw * z_ii * poly.e1;

    const double zp = z_ii / phi;
    poly.phi2_coef[0] = zp * poly.e0 * poly.e0;
    poly.phi2_coef[1] = zp * 2.0 * poly.e0 * poly.e1;
    poly.phi2_coef[2] = zp * poly.e1 * poly.e1;
    return poly;
}

double rho_at(const Family& family, const Link& link, double mu, double phi, double z_ii,
              double bias_eta, double x) {
    family.require_mean(mu);
    require_interior(family, mu, x, "rho");
    const double V = family.variance(mu);
    const double V1 = family.variance_d1(mu);
    const double d1 = link.dmu(mu);
    const double sw = d1 / std::sqrt(V);
    const double e = e_function(family, link, mu, x);
    const double h = h_function(family, link, mu, x);
    return e * (-0.5 / phi * (V1 / V) * d1 * z_ii - bias_eta - sw * z_ii * x) -
           0.5 * z_ii / phi * h + 0.5 * z_ii / phi * e * e * ell1(family, mu, phi, x);
}

double closed_form_rho(ModelClass model_class, const Family& family, const Link& link, double mu,
                       double phi, double z_ii, double bias_eta, double x) {
    family.require_mean(mu);
    require_interior(family, mu, x, "closed_form_rho");
    const double V = family.variance(mu);
    const double V1 = family.variance_d1(mu);
    const double V2 = family.variance_d2(mu);
    const double d1 = link.dmu(mu);
    const double d2 = link.d2mu(mu);
    const double sqrtV = std::sqrt(V);
    const double L1 = ell1(family, mu, phi, x);
    const bool identity_like =
        link.kind() == LinkKind::Identity ||
        (link.kind() == LinkKind::Canonical && family.kind() == FamilyKind::Normal);

    switch (model_class) {
        case ModelClass::Linear: {
            if (!identity_like)
                throw std::invalid_argument("closed_form_rho: linear class needs the identity link");
            const double head =
                (z_ii / V) * x *
                (1.0 - V1 * V1 / (8.0 * phi * V) + V2 / (4.0 * phi) + 0.5 * (V1 / sqrtV) * x);
            const double esq = 1.0 / V + V1 / (V * sqrtV) * x + 0.25 * V1 * V1 / (V * V) * x * x;
            return head + 0.5 * z_ii / phi * esq * L1;
        }
        case ModelClass::Canonical: {
            if (!link.is_canonical())
                throw std::invalid_argument("closed_form_rho: canonical class needs the canonical link");
            const double esq = V + sqrtV * V1 * x + 0.25 * V1 * V1 * x * x;
            return (sqrtV + 0.5 * V1 * x) * bias_eta +
                   z_ii * (sqrtV * V1 / (2.0 * phi) + V * x + V1 * V1 * x / (8.0 * phi) +
                           V * V2 * x / (4.0 * phi)) +
                   z_ii * 0.5 * sqrtV * V1 * x * x + 0.5 * z_ii / phi * esq * L1;
        }
        case ModelClass::Normal:
            if (family.kind() != FamilyKind::Normal)
                throw std::invalid_argument("closed_form_rho: normal class needs the normal family");
            return bias_eta * d1 + d2 * z_ii / (2.0 * phi) + 0.5 * d1 * d1 * z_ii * x;
        case ModelClass::Gamma:
            if (family.kind() != FamilyKind::Gamma)
                throw std::invalid_argument("closed_form_rho: gamma class needs the gamma family");
            return (1.0 + x) * (d1 / mu * bias_eta + (d2 / mu) * z_ii / (2.0 * phi) -
                                (d1 * d1 / (mu * mu)) * z_ii / (2.0 * phi) +
                                0.5 * (d1 * d1 / (mu * mu)) * z_ii * x);
        case ModelClass::InverseGaussian: {
            if (family.kind() != FamilyKind::InverseGaussian)
                throw std::invalid_argument(
                    "closed_form_rho: inverse_gaussian class needs the inverse_gaussian family");
            const double mu32 = std::pow(mu, 1.5);
            const double y = mu32 * x + mu;
            const double brace = -phi / std::sqrt(mu) - 3.0 * mu32 / y + phi * mu32 / (y * y);
            return (d1 / mu32 + 1.5 * d1 / mu * x) * bias_eta + d2 * z_ii / (2.0 * phi * mu32) +
                   (3.0 * d1 * d1 * z_ii / (8.0 * phi * mu * mu) +
                    3.0 * d2 * z_ii / (4.0 * phi * mu)) *
                       x +
                   d1 * d1 * z_ii / (mu * mu * mu) * x +
                   1.5 * d1 * d1 * z_ii / (mu * mu * std::sqrt(mu)) * x * x +
                   z_ii / (4.0 * phi * mu * mu * mu) *
                       (d1 * d1 + 3.0 * std::sqrt(mu) * d1 * d1 * x +
                        2.25 * mu * d1 * d1 * x * x) *
                       brace;
        }
    }
    throw std::invalid_argument("closed_form_rho: unknown model class");
}

double density_pearson_at(const Family& family, const Link& link, double mu, double phi,
                          double z_ii, double bias_eta, double x) {
    family.require_mean(mu);
    if (!interior_or_zero(family, mu, x, "density_pearson")) return 0.0;
    const CorrectionPolynomials poly =
        conditional_moments_at(family, link, mu, phi, z_ii, bias_eta);
    return family.true_residual_density(mu, phi, x) * expansion_factor(family, poly, mu, phi, x);
}

double density_adjusted_at(const Family& family, const Link& link, double mu, double phi,
                           double z_ii, double bias_eta, double m_over_n, double v_over_n,
                           double x) {
    family.require_mean(mu);
    Precision prec(phi);
    const double sigma = 1.0 / std::sqrt(phi);
    const double u = sigma * x;
    if (!interior_or_zero(family, mu, u, "density_adjusted")) return 0.0;
    const CorrectionPolynomials poly =
        conditional_moments_at(family, link, mu, phi, z_ii, bias_eta);
    const double sigma2 = prec.sigma2();
    const double extra =
        (m_over_n + 0.5 * v_over_n * u / sigma2) * ell1(family, mu, phi, u) +
        0.5 * v_over_n / sigma2;
    return sigma * family.true_residual_density(mu, phi, u) *
           (expansion_factor(family, poly, mu, phi, u) + extra);
}

double density_adjusted_normal_at(const Family& family, const Link& link, double mu, double phi,
                                  double z_ii, double bias_eta, double m_over_n, double v_over_n,
                                  double x) {
    if (family.kind() != FamilyKind::Normal)
        throw std::invalid_argument("density_adjusted_normal requires the normal family");
    Precision prec(phi);
    const double sigma = 1.0 / std::sqrt(phi);
    const double sigma2 = prec.sigma2();
    const double d1 = link.dmu(mu);
    const double d2 = link.d2mu(mu);
    const double a0 = 0.5 * d1 * d1 * z_ii + 0.5 * v_over_n / sigma2;
    const double a1 = m_over_n / sigma + d1 * bias_eta / sigma + 0.5 * sigma * d2 * z_ii;
    const double a2 = a0;
    return kInvSqrt2Pi * std::exp(-0.5 * x * x) * (1.0 + a0 - a1 * x - a2 * x * x);
}

Eigen::VectorXd pearson_residuals(const FitResult& fit, const ModelSpec& spec,
                                  const Eigen::VectorXd& y) {
    if (y.size() != fit.mu_hat.size())
        throw std::invalid_argument("pearson_residuals: y and mu_hat lengths differ");
    Eigen::VectorXd r(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i)
        r[i] = (y[i] - fit.mu_hat[i]) / std::sqrt(spec.family.variance(fit.mu_hat[i]));
    return r;
}

CorrectionPolynomials conditional_moments(const FitResult& fit, const ModelSpec& spec, int i) {
    require_obs_index(fit, i);
    return conditional_moments_at(spec.family, spec.link, fit.mu_hat[i], fit.phi_hat,
                                  fit.z_diag[i], fit.bias_eta[i]);
}

double rho(const FitResult& fit, const ModelSpec& spec, int i, double x) {
    require_obs_index(fit, i);
    return rho_at(spec.family, spec.link, fit.mu_hat[i], fit.phi_hat, fit.z_diag[i],
                  fit.bias_eta[i], x);
}

CorrectedResiduals corrected_residuals(const FitResult& fit, const ModelSpec& spec,
                                       const Eigen::VectorXd& pearson) {
    CorrectedResiduals out;
    out.values.resize(pearson.size());
    for (Eigen::Index i = 0; i < pearson.size(); ++i) {
        const double mu = fit.mu_hat[i];
        if (!spec.family.in_residual_support(mu, pearson[i])) {
            out.values[i] = pearson[i];
            out.passed_through.push_back(static_cast<int>(i));
            continue;
        }
        out.values[i] = pearson[i] + rho_at(spec.family, spec.link, mu, fit.phi_hat,
                                            fit.z_diag[i], fit.bias_eta[i], pearson[i]);
    }
    return out;
}

AdjustedMoments adjusted_moments(const FitResult& fit, const ModelSpec& spec) {
    const Eigen::Index n = fit.mu_hat.size();
    Precision prec(fit.phi_hat);
    const double sigma2 = prec.sigma2();
    Eigen::VectorXd J(n), Q(n), T(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = fit.mu_hat[i];
        const double V = spec.family.variance(mu);
        const double V1 = spec.family.variance_d1(mu);
        const double V2 = spec.family.variance_d2(mu);
        const double d2 = spec.link.d2mu(mu);
        J[i] = d2 / std::sqrt(V);
        Q[i] = V1 / std::sqrt(V);
        T[i] = 2.0 * prec.phi * fit.w[i] + fit.w[i] * V2 + V1 * d2 / V;
    }
    // H J z without forming H: H = W^{1/2} X (X'WX)^{-1} X' W^{1/2}.
    const Eigen::VectorXd sqrtw = fit.w.cwiseSqrt();
    const Eigen::VectorXd Jz = J.cwiseProduct(fit.z_diag);
    const Eigen::VectorXd HJz =
        sqrtw.cwiseProduct(spec.X * (fit.xtwx_inv *
                                     (spec.X.transpose() * sqrtw.cwiseProduct(Jz))));
    AdjustedMoments out;
    out.m_over_n = -0.5 * sigma2 * (Jz - HJz);
    out.v_over_n =
        0.5 * sigma2 * sigma2 * (Q.cwiseProduct(HJz) - T.cwiseProduct(fit.z_diag));
    return out;
}

Eigen::VectorXd adjusted_residuals(const FitResult& fit, const ModelSpec& spec,
                                   const Eigen::VectorXd& pearson) {
    const AdjustedMoments mom = adjusted_moments(fit, spec);
    const double sigma2 = 1.0 / fit.phi_hat;
    Eigen::VectorXd out(pearson.size());
    for (Eigen::Index i = 0; i < pearson.size(); ++i) {
        const double denom = sigma2 + mom.v_over_n[i];
        if (!(denom > 0.0)) {
            std::ostringstream msg;
            msg << "adjusted_residuals: nonpositive variance estimate at observation " << i;
            throw std::domain_error(msg.str());
        }
        out[i] = (pearson[i] - mom.m_over_n[i]) / std::sqrt(denom);
    }
    return out;
}

double density_pearson(const FitResult& fit, const ModelSpec& spec, int i, double x) {
    require_obs_index(fit, i);
    return density_pearson_at(spec.family, spec.link, fit.mu_hat[i], fit.phi_hat, fit.z_diag[i],
                              fit.bias_eta[i], x);
}

double density_adjusted(const FitResult& fit, const ModelSpec& spec, int i, double x) {
    require_obs_index(fit, i);
    const AdjustedMoments mom = adjusted_moments(fit, spec);
    return density_adjusted_at(spec.family, spec.link, fit.mu_hat[i], fit.phi_hat, fit.z_diag[i],
                               fit.bias_eta[i], mom.m_over_n[i], mom.v_over_n[i], x);
}

double density_adjusted_normal(const FitResult& fit, const ModelSpec& spec, int i, double x) {
    require_obs_index(fit, i);
    const AdjustedMoments mom = adjusted_moments(fit, spec);
    return density_adjusted_normal_at(spec.family, spec.link, fit.mu_hat[i], fit.phi_hat,
                                      fit.z_diag[i], fit.bias_eta[i], mom.m_over_n[i],
                                      mom.v_over_n[i], x);
}

ResidualSet residual_set(const FitResult& fit, const ModelSpec& spec, const Eigen::VectorXd& y,
                         const std::optional<Eigen::VectorXd>& mu_true) {
    ResidualSet out;
    out.pearson = pearson_residuals(fit, spec, y);
    CorrectedResiduals corr = corrected_residuals(fit, spec, out.pearson);
    out.corrected = std::move(corr.values);
    out.passed_through = std::move(corr.passed_through);
    out.adjusted = adjusted_residuals(fit, spec, out.pearson);
    if (mu_true) {
        if (mu_true->size() != y.size())
            throw std::invalid_argument("residual_set: mu_true and y lengths differ");
        Eigen::VectorXd eps(y.size());
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            spec.family.require_mean((*mu_true)[i]);
            eps[i] = (y[i] - (*mu_true)[i]) / std::sqrt(spec.family.variance((*mu_true)[i]));
        }
        out.true_resid = std::move(eps);
    }
    return out;
}

}  // namespace glmresid

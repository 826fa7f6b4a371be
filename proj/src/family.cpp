#include "glmresid/family.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "glmresid/stats.hpp"

namespace glmresid {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// log Phi(x) with an asymptotic branch for the far left tail where erfc
// underflows to zero.
double log_normal_cdf(double x) {
    if (x > -27.0) return std::log(stats::normal_cdf(x));
    const double z = -x / 1.4142135623730950488;
    return std::log(0.5) - z * z - std::log(z) - 0.5 * std::log(3.14159265358979323846) +
           std::log1p(-0.5 / (z * z));
}

}  // namespace

Precision::Precision(double phi_) : phi(phi_) {
    if (!(phi > 0.0) || !std::isfinite(phi))
        throw std::domain_error("precision parameter phi must be positive and finite");
}

Family Family::parse(std::string_view token) {
    const std::string t = lowercase(token);
    if (t == "normal") return Family(FamilyKind::Normal);
    if (t == "gamma") return Family(FamilyKind::Gamma);
    if (t == "inverse_gaussian") return Family(FamilyKind::InverseGaussian);
    throw std::invalid_argument("unknown family '" + std::string(token) +
                                "'; expected normal, gamma, or inverse_gaussian");
}

std::string_view Family::name() const {
    switch (kind_) {
        case FamilyKind::Normal: return "normal";
        case FamilyKind::Gamma: return "gamma";
        case FamilyKind::InverseGaussian: return "inverse_gaussian";
    }
    return "";
}

bool Family::in_mean_domain(double mu) const {
    if (!std::isfinite(mu)) return false;
    return kind_ == FamilyKind::Normal || mu > 0.0;
}

bool Family::in_observation_domain(double y) const {
    if (!std::isfinite(y)) return false;
    return kind_ == FamilyKind::Normal || y > 0.0;
}

void Family::require_mean(double mu) const {
    if (in_mean_domain(mu)) return;
    std::ostringstream msg;
    msg << name() << " family requires a finite mean";
    if (kind_ != FamilyKind::Normal) msg << " with mu > 0";
    msg << " (got " << mu << ")";
    throw std::domain_error(msg.str());
}

double Family::variance(double mu) const {
    switch (kind_) {
        case FamilyKind::Normal: return 1.0;
        case FamilyKind::Gamma: return mu * mu;
        case FamilyKind::InverseGaussian: return mu * mu * mu;
    }
    return 0.0;
}

double Family::variance_d1(double mu) const {
    switch (kind_) {
        case FamilyKind::Normal: return 0.0;
        case FamilyKind::Gamma: return 2.0 * mu;
        case FamilyKind::InverseGaussian: return 3.0 * mu * mu;
    }
    return 0.0;
}

double Family::variance_d2(double mu) const {
    switch (kind_) {
        case FamilyKind::Normal: return 0.0;
        case FamilyKind::Gamma: return 2.0;
        case FamilyKind::InverseGaussian: return 6.0 * mu;
    }
    return 0.0;
}

double Family::theta(double mu) const {
    require_mean(mu);
    switch (kind_) {
        case FamilyKind::Normal: return mu;
        case FamilyKind::Gamma: return -1.0 / mu;
        case FamilyKind::InverseGaussian: return -0.5 / (mu * mu);
    }
    return 0.0;
}

double Family::log_partition(double theta) const {
    switch (kind_) {
        case FamilyKind::Normal: return 0.5 * theta * theta;
        case FamilyKind::Gamma:
            if (!(theta < 0.0)) throw std::domain_error("gamma log_partition requires theta < 0");
            return -std::log(-theta);
        case FamilyKind::InverseGaussian:
            if (!(theta < 0.0))
                throw std::domain_error("inverse_gaussian log_partition requires theta < 0");
            return -std::sqrt(-2.0 * theta);
    }
    return 0.0;
}

double Family::log_norm(double y, double phi) const {
    switch (kind_) {
        case FamilyKind::Normal: return -0.5 * (y * y * phi + kLog2Pi - std::log(phi));
        case FamilyKind::Gamma:
            return (phi - 1.0) * std::log(y) + phi * std::log(phi) - stats::log_gamma(phi);
        case FamilyKind::InverseGaussian:
            return 0.5 * (std::log(phi) - kLog2Pi - 3.0 * std::log(y)) - 0.5 * phi / y;
    }
    return 0.0;
}

double Family::density(double y, double mu, double phi) const {
    require_mean(mu);
    if (!in_observation_domain(y)) return 0.0;
    const double th = theta(mu);
    return std::exp(phi * (y * th - log_partition(th)) + log_norm(y, phi));
}

double Family::c_deriv(double mu, double phi, double x) const {
    require_mean(mu);
    if (!in_residual_support(mu, x))
        throw std::domain_error("c_deriv: x outside the open residual support");
    switch (kind_) {
        case FamilyKind::Normal: return -(x + mu) * phi;
        case FamilyKind::Gamma: return (phi - 1.0) / (1.0 + x);
        case FamilyKind::InverseGaussian: {
            const double y = std::pow(mu, 1.5) * x + mu;
            return std::pow(mu, 1.5) * (-1.5 / y + 0.5 * phi / (y * y));
        }
    }
    return 0.0;
}

double Family::c_deriv2(double mu, double phi, double x) const {
    require_mean(mu);
    if (!in_residual_support(mu, x))
        throw std::domain_error("c_deriv2: x outside the open residual support");
    switch (kind_) {
        case FamilyKind::Normal: return -phi;
        case FamilyKind::Gamma: return -(phi - 1.0) / ((1.0 + x) * (1.0 + x));
        case FamilyKind::InverseGaussian: {
            const double y = std::pow(mu, 1.5) * x + mu;
            return mu * mu * mu * (1.5 / (y * y) - phi / (y * y * y));
        }
    }
    return 0.0;
}

double Family::residual_lower(double mu) const {
    switch (kind_) {
        case FamilyKind::Normal: return -std::numeric_limits<double>::infinity();
        case FamilyKind::Gamma: return -1.0;
        case FamilyKind::InverseGaussian: return -1.0 / std::sqrt(mu);
    }
    return 0.0;
}

bool Family::in_residual_support(double mu, double x) const {
    return std::isfinite(x) && x > residual_lower(mu);
}

double Family::true_residual_density(double mu, double phi, double x) const {
    require_mean(mu);
    if (!in_residual_support(mu, x)) return 0.0;
    switch (kind_) {
        case FamilyKind::Normal:
            return std::exp(0.5 * (std::log(phi) - kLog2Pi) - 0.5 * phi * x * x);
        case FamilyKind::Gamma:
            return std::exp((phi - 1.0) * std::log(phi * (1.0 + x)) + std::log(phi) -
                            phi * (1.0 + x) - stats::log_gamma(phi));
        case FamilyKind::InverseGaussian: {
            const double u = std::sqrt(mu) * x + 1.0;
            return std::exp(0.5 * (std::log(phi) - kLog2Pi) - 1.5 * std::log(u) -
                            0.5 * phi * x * x / u);
        }
    }
    return 0.0;
}

double Family::true_residual_cdf(double mu, double phi, double x) const {
    require_mean(mu);
    if (!std::isfinite(x)) {
        if (std::isnan(x)) throw std::domain_error("true_residual_cdf: x is NaN");
        return x > 0.0 ? 1.0 : 0.0;
    }
    switch (kind_) {
        case FamilyKind::Normal: return stats::normal_cdf(x * std::sqrt(phi));
        case FamilyKind::Gamma:
            if (x <= -1.0) return 0.0;
            return stats::gamma_p(phi, phi * (1.0 + x));
        case FamilyKind::InverseGaussian: {
            if (x <= residual_lower(mu)) return 0.0;
            const double y = std::pow(mu, 1.5) * x + mu;
            const double s = std::sqrt(phi / y);
            const double head = stats::normal_cdf(s * (y / mu - 1.0));
            const double tail = std::exp(2.0 * phi / mu + log_normal_cdf(-s * (y / mu + 1.0)));
            return std::min(1.0, head + tail);
        }
    }
    return 0.0;
}

}  // namespace glmresid

#pragma once

#include <string>
#include <string_view>

namespace glmresid {

enum class FamilyKind { Normal, Gamma, InverseGaussian };

// Precision parameter phi = sigma^{-2}. Throws std::domain_error unless phi > 0.
struct Precision {
    explicit Precision(double phi_);
    double phi;
    double sigma2() const { return 1.0 / phi; }
};

// A continuous linear exponential family in its mean parametrization:
// variance function V(mu) with derivatives, canonical parameter
// q(mu) = int V^{-1} dmu, log-partition b(theta), normalizing term c(y, phi),
// and the distribution of the true Pearson residual
// eps = (Y - mu) / sqrt(V(mu)).
class Family {
public:
    explicit Family(FamilyKind kind) : kind_(kind) {}

    // Tokens: "normal" | "gamma" | "inverse_gaussian" (case-insensitive).
    static Family parse(std::string_view token);

    FamilyKind kind() const { return kind_; }
    std::string_view name() const;

    // Mean domain is all reals for Normal, mu > 0 otherwise. Strict, no
    // epsilon slack.
    bool in_mean_domain(double mu) const;
    bool in_observation_domain(double y) const;
    void require_mean(double mu) const;

    double variance(double mu) const;     // V(mu)
    double variance_d1(double mu) const;  // dV/dmu
    double variance_d2(double mu) const;  // d2V/dmu2

    double theta(double mu) const;          // q(mu)
    double log_partition(double theta) const;  // b(theta)
    double log_norm(double y, double phi) const;  // c(y, phi)

    // Observation density pi(y; q(mu), phi) from the exponential-family form.
    double density(double y, double mu, double phi) const;

    // d/dx and d2/dx2 of c(sqrt(V) x + mu, phi). x must be strictly inside
    // the residual support (denominators vanish at the boundary).
    double c_deriv(double mu, double phi, double x) const;
    double c_deriv2(double mu, double phi, double x) const;

    // Open support (lower, +inf) of the true residual; Normal is all reals.
    double residual_lower(double mu) const;
    bool in_residual_support(double mu, double x) const;

    // Density of the true Pearson residual. Zero outside the open support,
    // including exactly at the boundary point.
    double true_residual_density(double mu, double phi, double x) const;

    // CDF of the true Pearson residual.
    double true_residual_cdf(double mu, double phi, double x) const;

private:
    FamilyKind kind_;
};

}  // namespace glmresid

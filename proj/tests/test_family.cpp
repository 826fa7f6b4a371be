#include <cmath>
#include <limits>
#include <stdexcept>

#include "doctest.h"
#include "glmresid/family.hpp"
#include "glmresid/stats.hpp"
#include "support.hpp"

using glmresid::Family;
using glmresid::FamilyKind;
using glmresid::Precision;

namespace {
constexpr double kPi = 3.14159265358979323846;

void check_near(double got, double want, double tol) {
    CHECK(std::abs(got - want) <= tol);
}
}  // namespace

TEST_CASE("precision rejects nonpositive and non-finite values") {
    CHECK_THROWS_AS(Precision(0.0), std::domain_error);
    CHECK_THROWS_AS(Precision(-1.0), std::domain_error);
    CHECK_THROWS_AS(Precision(std::numeric_limits<double>::quiet_NaN()), std::domain_error);
    CHECK(Precision(4.0).sigma2() == 0.25);
}

TEST_CASE("family tokens parse case-insensitively and bad tokens name themselves") {
    CHECK(Family::parse("Normal").kind() == FamilyKind::Normal);
    CHECK(Family::parse("GAMMA").kind() == FamilyKind::Gamma);
    CHECK(Family::parse("inverse_gaussian").kind() == FamilyKind::InverseGaussian);
    CHECK_THROWS_AS(Family::parse("poisson"), std::invalid_argument);
    try {
        Family::parse("poisson");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("poisson") != std::string::npos);
    }
}

TEST_CASE("variance functions and their derivatives") {
    const Family normal(FamilyKind::Normal), gamma(FamilyKind::Gamma),
        ig(FamilyKind::InverseGaussian);
    CHECK(normal.variance(3.7) == 1.0);
    CHECK(normal.variance_d1(3.7) == 0.0);
    CHECK(normal.variance_d2(3.7) == 0.0);
    CHECK(gamma.variance(2.0) == 4.0);
    CHECK(gamma.variance_d1(2.0) == 4.0);
    CHECK(gamma.variance_d2(2.0) == 2.0);
    CHECK(ig.variance(2.0) == 8.0);
    CHECK(ig.variance_d1(2.0) == 12.0);
    CHECK(ig.variance_d2(2.0) == 12.0);
}

TEST_CASE("canonical parameter is the antiderivative of 1/V and b' recovers the mean") {
    for (const auto kind :
         {FamilyKind::Normal, FamilyKind::Gamma, FamilyKind::InverseGaussian}) {
        const Family fam(kind);
        for (const double mu : {0.4, 1.0, 2.5}) {
            const double dq =
                testsupport::diff([&](double m) { return fam.theta(m); }, mu, 1e-5);
            check_near(dq, 1.0 / fam.variance(mu), 1e-8);
            const double db = testsupport::diff(
                [&](double th) { return fam.log_partition(th); }, fam.theta(mu), 1e-6);
            check_near(db, mu, 1e-6);
        }
    }
}

TEST_CASE("observation densities match their textbook closed forms") {
    const Family normal(FamilyKind::Normal);
    const double y = 1.3, mu = 0.5, phi = 2.0;
    check_near(normal.density(y, mu, phi),
               std::sqrt(phi / (2.0 * kPi)) * std::exp(-0.5 * phi * (y - mu) * (y - mu)), 1e-15);

    const Family gamma(FamilyKind::Gamma);
    const double g = std::pow(phi / mu, phi) * std::pow(y, phi - 1.0) *
                     std::exp(-phi * y / mu - std::lgamma(phi));
    check_near(gamma.density(y, mu, phi), g, 1e-15);

    const Family ig(FamilyKind::InverseGaussian);
    const double lam = phi;
    const double f = std::sqrt(lam / (2.0 * kPi * y * y * y)) *
                     std::exp(-lam * (y - mu) * (y - mu) / (2.0 * mu * mu * y));
    check_near(ig.density(y, mu, phi), f, 1e-15);
}

TEST_CASE("observation densities integrate to one") {
    for (const auto kind :
         {FamilyKind::Normal, FamilyKind::Gamma, FamilyKind::InverseGaussian}) {
        const Family fam(kind);
        const double mu = 1.6, phi = 3.0;
        const double lo = kind == FamilyKind::Normal ? mu - 12.0 : 1e-12;
        const double hi = mu + 40.0;
        const double total = testsupport::integrate(
            [&](double y) { return fam.density(y, mu, phi); }, lo, hi, 1e-12);
        check_near(total, 1.0, 1e-9);
    }
}

TEST_CASE("residual support boundaries") {
    const Family normal(FamilyKind::Normal), gamma(FamilyKind::Gamma),
        ig(FamilyKind::InverseGaussian);
    CHECK(normal.residual_lower(2.0) == -std::numeric_limits<double>::infinity());
    CHECK(gamma.residual_lower(2.0) == -1.0);
    check_near(ig.residual_lower(4.0), -0.5, 1e-15);
    CHECK(gamma.in_residual_support(2.0, -0.999));
    CHECK_FALSE(gamma.in_residual_support(2.0, -1.0));
    CHECK_FALSE(gamma.in_residual_support(2.0, -1.5));
    CHECK(gamma.true_residual_density(2.0, 4.0, -1.0) == 0.0);
    CHECK(gamma.true_residual_density(2.0, 4.0, -2.0) == 0.0);
}

TEST_CASE("gamma residual density at precision four: frozen values") {
    const Family gamma(FamilyKind::Gamma);
    check_near(gamma.true_residual_density(1.0, 4.0, 0.0), 0.7814672592526583592, 1e-14);
    check_near(gamma.true_residual_density(3.0, 4.0, 0.0), 0.7814672592526583592, 1e-14);
    check_near(gamma.true_residual_density(1.0, 4.0, 0.7), 0.23347103152475808111, 1e-14);
    check_near(gamma.true_residual_density(1.0, 4.0, -0.5), 0.72178817726193435677, 1e-14);
}

TEST_CASE("inverse gaussian residual density: frozen value and mean dependence") {
    const Family ig(FamilyKind::InverseGaussian);
    check_near(ig.true_residual_density(2.0, 3.0, 0.3), 0.36976003477833391473, 1e-14);
    CHECK(ig.true_residual_density(1.0, 3.0, 0.3) != ig.true_residual_density(2.0, 3.0, 0.3));
}

TEST_CASE("normal residual density and cdf are the scaled normal law") {
    const Family normal(FamilyKind::Normal);
    check_near(normal.true_residual_density(7.0, 4.0, 0.0), std::sqrt(2.0 / kPi), 1e-15);
    check_near(normal.true_residual_cdf(7.0, 4.0, 1.0), 0.97724986805182079, 1e-14);
    check_near(normal.true_residual_cdf(7.0, 4.0, 0.0), 0.5, 1e-15);
}

TEST_CASE("gamma residual cdf: frozen value and boundary limits") {
    const Family gamma(FamilyKind::Gamma);
    check_near(gamma.true_residual_cdf(5.0, 4.0, 0.0), 0.56652987963329286, 1e-14);
    CHECK(gamma.true_residual_cdf(5.0, 4.0, -1.0) == 0.0);
    CHECK(gamma.true_residual_cdf(5.0, 4.0, -3.0) == 0.0);
    check_near(gamma.true_residual_cdf(5.0, 4.0, 60.0), 1.0, 1e-12);
}

TEST_CASE("residual density is the pushforward of the observation density") {
    for (const auto kind :
         {FamilyKind::Normal, FamilyKind::Gamma, FamilyKind::InverseGaussian}) {
        const Family fam(kind);
        const double mu = 1.7, phi = 2.5;
        const double sv = std::sqrt(fam.variance(mu));
        for (const double x : {-0.4, 0.1, 1.2}) {
            check_near(fam.true_residual_density(mu, phi, x),
                       sv * fam.density(sv * x + mu, mu, phi), 1e-13);
        }
    }
}

TEST_CASE("residual cdf differentiates to the residual density") {
    for (const auto kind :
         {FamilyKind::Normal, FamilyKind::Gamma, FamilyKind::InverseGaussian}) {
        const Family fam(kind);
        const double mu = 1.3, phi = 4.0;
        for (const double x : {-0.3, 0.0, 0.8}) {
            const double d = testsupport::diff(
                [&](double t) { return fam.true_residual_cdf(mu, phi, t); }, x, 1e-5);
            check_near(d, fam.true_residual_density(mu, phi, x), 1e-7);
        }
    }
}

TEST_CASE("inverse gaussian cdf stays within [0,1] far into both tails") {
    const Family ig(FamilyKind::InverseGaussian);
    const double lo = ig.true_residual_cdf(2.0, 3.0, -1.0 / std::sqrt(2.0) + 1e-9);
    const double hi = ig.true_residual_cdf(2.0, 3.0, 1e8);
    CHECK(lo >= 0.0);
    CHECK(lo <= 1e-6);
    CHECK(hi <= 1.0);
    CHECK(hi >= 1.0 - 1e-12);
    CHECK(std::isfinite(ig.true_residual_cdf(2.0, 3.0, 500.0)));
}

TEST_CASE("cdf rejects NaN and accepts infinities") {
    const Family gamma(FamilyKind::Gamma);
    CHECK(gamma.true_residual_cdf(1.0, 4.0, std::numeric_limits<double>::infinity()) == 1.0);
    CHECK(gamma.true_residual_cdf(1.0, 4.0, -std::numeric_limits<double>::infinity()) == 0.0);
    CHECK_THROWS_AS(
        gamma.true_residual_cdf(1.0, 4.0, std::numeric_limits<double>::quiet_NaN()),
        std::domain_error);
}

TEST_CASE("log-norm derivatives match numerical differentiation") {
    for (const auto kind :
         {FamilyKind::Normal, FamilyKind::Gamma, FamilyKind::InverseGaussian}) {
        const Family fam(kind);
        const double mu = 1.4, phi = 3.5;
        const double sv = std::sqrt(fam.variance(mu));
        for (const double x : {-0.35, 0.2, 0.9}) {
            const auto c_of_x = [&](double t) { return fam.log_norm(sv * t + mu, phi); };
            check_near(fam.c_deriv(mu, phi, x), testsupport::diff(c_of_x, x, 1e-5), 1e-7);
            const auto c1_of_x = [&](double t) { return fam.c_deriv(mu, phi, t); };
            check_near(fam.c_deriv2(mu, phi, x), testsupport::diff(c1_of_x, x, 1e-5), 1e-6);
        }
    }
}

TEST_CASE("mean domain checks") {
    const Family normal(FamilyKind::Normal), gamma(FamilyKind::Gamma);
    CHECK(normal.in_mean_domain(-3.0));
    CHECK_FALSE(gamma.in_mean_domain(0.0));
    CHECK_FALSE(gamma.in_mean_domain(-1.0));
    CHECK(gamma.in_mean_domain(1e-12));
    CHECK_THROWS_AS(gamma.require_mean(0.0), std::domain_error);
    CHECK_FALSE(normal.in_mean_domain(std::numeric_limits<double>::quiet_NaN()));
}

TEST_CASE("scalar special functions agree with reference values") {
    namespace st = glmresid::stats;
    check_near(st::normal_cdf(0.0), 0.5, 1e-16);
    check_near(st::normal_cdf(1.959963984540054), 0.975, 1e-15);
    check_near(st::normal_quantile(0.975), 1.959963984540054, 1e-12);
    check_near(st::normal_quantile(st::normal_cdf(-1.234)), -1.234, 1e-12);
    CHECK_THROWS_AS(st::normal_quantile(0.0), std::domain_error);
    CHECK_THROWS_AS(st::normal_quantile(1.0), std::domain_error);
    check_near(st::gamma_p(4.0, 4.0), 0.56652987963329286, 1e-14);
    check_near(st::gamma_p_inv(4.0, 0.56652987963329286), 4.0, 1e-10);
    check_near(st::log_gamma(5.0), std::log(24.0), 1e-14);
    check_near(st::digamma(1.0), -0.57721566490153286, 1e-14);
    check_near(st::trigamma(1.0), kPi * kPi / 6.0, 1e-13);
}

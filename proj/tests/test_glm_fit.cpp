#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "glmresid/glm_fit.hpp"
#include "glmresid/io.hpp"
#include "glmresid/stats.hpp"
#include "support.hpp"

using namespace glmresid;

namespace {

void check_near(double got, double want, double tol) {
    CHECK(std::abs(got - want) <= tol);
}

struct Fixture {
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
};

Fixture load_fixture() {
    const CsvTable t = read_csv(std::string(TEST_DATA_DIR) + "/gamma_log_n20.csv");
    Fixture f;
    f.y = t.data.col(0);
    f.X.resize(t.data.rows(), 3);
    f.X.col(0).setOnes();
    f.X.col(1) = t.data.col(1);
    f.X.col(2) = t.data.col(2);
    return f;
}

ModelSpec gamma_log_spec(Eigen::MatrixXd X) {
    const Family fam(FamilyKind::Gamma);
    return ModelSpec{fam, Link(LinkKind::Log, fam), std::move(X), std::nullopt};
}

}  // namespace

TEST_CASE("ordinary least squares special case: intercept-only normal fit is the mean") {
    const Family normal(FamilyKind::Normal);
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(5, 1);
    Eigen::VectorXd y(5);
    y << 1.0, 2.0, 3.0, 4.0, 10.0;
    const ModelSpec spec{normal, Link(LinkKind::Identity, normal), X, std::nullopt};
    const FitResult fit = irls_fit(spec, y);
    CHECK(fit.converged);
    check_near(fit.beta_hat[0], 4.0, 1e-12);
    check_near(fit.deviance, (y.array() - 4.0).square().sum(), 1e-10);
    for (int i = 0; i < 5; ++i) check_near(fit.z_diag[i], 0.2, 1e-12);
    check_near(fit.bias_beta.cwiseAbs().maxCoeff(), 0.0, 1e-14);
    check_near(fit.phi_hat, 4.0 / fit.deviance, 1e-12);
}

TEST_CASE("intercept-only gamma fit with log link matches the sample mean") {
    Eigen::VectorXd y(6);
    y << 0.5, 1.1, 2.7, 0.9, 3.3, 1.6;
    const ModelSpec spec = gamma_log_spec(Eigen::MatrixXd::Ones(6, 1));
    const FitResult fit = irls_fit(spec, y);
    CHECK(fit.converged);
    check_near(fit.mu_hat[0], y.mean(), 1e-10);
    check_near(fit.beta_hat[0], std::log(y.mean()), 1e-10);
}

TEST_CASE("gamma log-link fit reproduces an independently computed solution") {
    const Fixture f = load_fixture();
    const ModelSpec spec = gamma_log_spec(f.X);
    FitOptions opts;
    const FitResult fit = irls_fit(spec, f.y, opts);
    CHECK(fit.converged);
    check_near(fit.beta_hat[0], -0.10120049698621736, 1e-7);
    check_near(fit.beta_hat[1], 1.2321970390002017, 1e-7);
    check_near(fit.beta_hat[2], 0.12251142732187159, 1e-7);
    check_near(fit.deviance, 3.317599672770001, 1e-6);
    check_near(fit.phi_hat, 5.6031464449644783, 1e-6);
    const double phi_ml = estimate_phi(spec, fit, f.y, PhiEstimator::GammaML);
    check_near(phi_ml, 6.1903444773097984, 1e-6);
}

TEST_CASE("leverage trace identity and bias consistency") {
    const Fixture f = load_fixture();
    const ModelSpec spec = gamma_log_spec(f.X);
    const FitResult fit = irls_fit(spec, f.y);
    check_near((fit.w.array() * fit.z_diag.array()).sum(), 3.0, 1e-10);
    const Eigen::VectorXd eta_bias = f.X * fit.bias_beta;
    check_near((eta_bias - fit.bias_eta).cwiseAbs().maxCoeff(), 0.0, 1e-12);
    Eigen::MatrixXd Z =
        f.X * fit.xtwx_inv * f.X.transpose();
    for (int i = 0; i < f.X.rows(); ++i) check_near(fit.z_diag[i], Z(i, i), 1e-10);
    CHECK((fit.z_diag.array() > 0.0).all());
    CHECK(fit.z_diag.sum() > 0.0);
}

TEST_CASE("quantities at an arbitrary coefficient vector match the fit at its optimum") {
    const Fixture f = load_fixture();
    const ModelSpec spec = gamma_log_spec(f.X);
    const FitResult fit = irls_fit(spec, f.y);
    const ModelQuantities q = model_quantities(spec, fit.beta_hat, fit.phi_hat);
    check_near((q.z_diag - fit.z_diag).cwiseAbs().maxCoeff(), 0.0, 1e-12);
    check_near((q.bias_beta - fit.bias_beta).cwiseAbs().maxCoeff(), 0.0, 1e-12);
    check_near((q.mu - fit.mu_hat).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST_CASE("iteration cap raises a recoverable error carrying the last state") {
    const Fixture f = load_fixture();
    const ModelSpec spec = gamma_log_spec(f.X);
    FitOptions opts;
    opts.max_iterations = 1;
    try {
        irls_fit(spec, f.y, opts);
        FAIL("expected the iteration cap to trigger");
    } catch (const NotConvergedError& e) {
        CHECK_FALSE(e.last.converged);
        CHECK(e.last.iterations == 1);
        CHECK(e.last.beta_hat.size() == 3);
        CHECK(std::isfinite(e.last.deviance));
    }
}

TEST_CASE("deviance decreases across the iteration path") {
    const Fixture f = load_fixture();
    const ModelSpec spec = gamma_log_spec(f.X);
    double prev = std::numeric_limits<double>::infinity();
    for (int cap = 1; cap <= 4; ++cap) {
        FitOptions opts;
        opts.max_iterations = cap;
        double dev = 0.0;
        try {
            dev = irls_fit(spec, f.y, opts).deviance;
        } catch (const NotConvergedError& e) {
            dev = e.last.deviance;
        }
        CHECK(dev <= prev + 1e-9);
        prev = dev;
    }
}

TEST_CASE("fixed precision is passed through instead of estimated") {
    const Fixture f = load_fixture();
    ModelSpec spec = gamma_log_spec(f.X);
    spec.phi = 4.0;
    const FitResult fit = irls_fit(spec, f.y);
    CHECK(fit.phi_hat == 4.0);
}

TEST_CASE("moment estimator of the precision on hand-sized numbers") {
    const Family normal(FamilyKind::Normal);
    Eigen::VectorXd y(3), mu(3);
    y << 1.0, 2.0, 3.0;
    mu << 2.0, 2.0, 2.0;
    check_near(pearson_phi(normal, y, mu, 1), 1.0, 1e-15);
}

TEST_CASE("gamma maximum-likelihood precision inverts its defining equation") {
    const double phi = gamma_ml_phi(3.317599672770001, 20);
    check_near(phi, 6.1903444773097984, 1e-8);
    const double lhs = std::log(phi) - glmresid::stats::digamma(phi);
    check_near(lhs, 3.317599672770001 / 40.0, 1e-12);
}

TEST_CASE("input validation names the offending condition") {
    const Family gamma(FamilyKind::Gamma);
    const Link log_link(LinkKind::Log, gamma);

    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(4, 1);
    Eigen::VectorXd bad(4);
    bad << 1.0, -2.0, 3.0, 4.0;
    CHECK_THROWS_AS(irls_fit(ModelSpec{gamma, log_link, X, std::nullopt}, bad),
                    std::domain_error);

    Eigen::VectorXd y(4);
    y << 1.0, 2.0, 3.0, 4.0;
    Eigen::MatrixXd dup(4, 2);
    dup.col(0).setOnes();
    dup.col(1).setOnes();
    CHECK_THROWS_AS(irls_fit(ModelSpec{gamma, log_link, dup, std::nullopt}, y),
                    std::invalid_argument);

    Eigen::VectorXd short_y(3);
    short_y << 1.0, 2.0, 3.0;
    CHECK_THROWS_AS(irls_fit(ModelSpec{gamma, log_link, X, std::nullopt}, short_y),
                    std::invalid_argument);

    Eigen::MatrixXd wide = Eigen::MatrixXd::Random(3, 3);
    CHECK_THROWS_AS(irls_fit(ModelSpec{gamma, log_link, wide, std::nullopt}, short_y),
                    std::invalid_argument);
}

TEST_CASE("estimator tokens") {
    CHECK(parse_phi_estimator("moment") == PhiEstimator::Moment);
    CHECK(parse_phi_estimator("ML") == PhiEstimator::GammaML);
    CHECK(parse_phi_estimator("gamma_ml") == PhiEstimator::GammaML);
    CHECK_THROWS_AS(parse_phi_estimator("deviance"), std::invalid_argument);
}

TEST_CASE("maximum-likelihood precision is rejected outside the gamma family") {
    const Family normal(FamilyKind::Normal);
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(5, 1);
    Eigen::VectorXd y(5);
    y << 1.0, 2.0, 3.0, 4.0, 5.0;
    const ModelSpec spec{normal, Link(LinkKind::Identity, normal), X, std::nullopt};
    const FitResult fit = irls_fit(spec, y);
    CHECK_THROWS_AS(estimate_phi(spec, fit, y, PhiEstimator::GammaML), std::invalid_argument);
}

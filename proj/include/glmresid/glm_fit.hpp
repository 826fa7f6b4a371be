#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>

#include "glmresid/family.hpp"
#include "glmresid/link.hpp"

namespace glmresid {

enum class PhiEstimator { Moment, GammaML };

PhiEstimator parse_phi_estimator(std::string_view token);  // "moment" | "gamma_ml"

struct ModelSpec {
    Family family;
    Link link;
    Eigen::MatrixXd X;
    std::optional<double> phi;  // known precision; estimated after the fit when absent
};

struct FitOptions {
    int max_iterations = 100;
    double deviance_rtol = 1e-10;
    double score_tol = 1e-8;
    int max_step_halvings = 10;
    double rank_threshold = 1e-10;
    PhiEstimator phi_estimator = PhiEstimator::Moment;
};

struct FitResult {
    Eigen::VectorXd beta_hat;
    Eigen::VectorXd eta_hat;
    Eigen::VectorXd mu_hat;
    Eigen::VectorXd w;       // IRLS weights w_i = V^{-1} (dmu/deta)^2, phi-free
    Eigen::VectorXd z_diag;  // diag of Z = X (X'WX)^{-1} X'
    Eigen::VectorXd bias_beta;
    Eigen::VectorXd bias_eta;  // X * bias_beta
    Eigen::MatrixXd xtwx;      // X'WX; the information matrix is phi * xtwx
    Eigen::MatrixXd xtwx_inv;
    double phi_hat = 0.0;
    double deviance = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct NotConvergedError : std::runtime_error {
    NotConvergedError(const std::string& msg, FitResult last_);
    FitResult last;
};

// Leverage, weights and O(n^-1) biases induced by an arbitrary coefficient
// vector. irls_fit calls this at the MLE; the simulation harness calls it at
// the true coefficients.
struct ModelQuantities {
    Eigen::VectorXd eta, mu, w, z_diag;
    Eigen::VectorXd bias_beta, bias_eta;
    Eigen::MatrixXd xtwx, xtwx_inv;
};

ModelQuantities model_quantities(const ModelSpec& spec, const Eigen::VectorXd& beta, double phi);

// Sum of unit deviances, free of phi.
double deviance(const Family& family, const Eigen::VectorXd& y, const Eigen::VectorXd& mu);

FitResult irls_fit(const ModelSpec& spec, const Eigen::VectorXd& y, const FitOptions& opts = {});

// Pearson moment estimator (n-p)/sum{(y-mu)^2/V(mu)}, or the gamma
// maximum-likelihood estimator solving log(phi) - digamma(phi) = D/(2n).
double estimate_phi(const ModelSpec& spec, const FitResult& fit, const Eigen::VectorXd& y,
                    PhiEstimator method = PhiEstimator::Moment);

double pearson_phi(const Family& family, const Eigen::VectorXd& y, const Eigen::VectorXd& mu,
                   int p);
double gamma_ml_phi(double deviance_sum, int n);

}  // namespace glmresid

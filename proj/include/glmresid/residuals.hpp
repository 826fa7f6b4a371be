#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <vector>

#include "glmresid/glm_fit.hpp"

namespace glmresid {

// Coefficients of the conditional-moment polynomials of R given eps = x:
// e(x) = e0 + e1 x, h(x) = h0 + h1 x,
// theta_x = t0 + t1 x + t2 x^2 (conditional mean shift),
// phi_x^2 = p0 + p1 x + p2 x^2 (conditional variance), a perfect square
// (z/phi) e(x)^2.
struct CorrectionPolynomials {
    double e0 = 0.0, e1 = 0.0;
    double h0 = 0.0, h1 = 0.0;
    std::array<double, 3> theta_coef{};
    std::array<double, 3> phi2_coef{};

    double e_at(double x) const { return e0 + e1 * x; }
    double h_at(double x) const { return h0 + h1 * x; }
    double theta_at(double x) const {
        return theta_coef[0] + x * (theta_coef[1] + x * theta_coef[2]);
    }
    double phi2_at(double x) const { return phi2_coef[0] + x * (phi2_coef[1] + x * phi2_coef[2]); }
};

struct CorrectedResiduals {
    Eigen::VectorXd values;
    // Indices whose Pearson residual fell outside the open support and were
    // passed through uncorrected.
    std::vector<int> passed_through;
};

struct AdjustedMoments {
    Eigen::VectorXd m_over_n;  // O(n^-1) mean of R_i
    Eigen::VectorXd v_over_n;  // O(n^-1) excess variance of R_i over sigma^2
};

struct ResidualSet {
    Eigen::VectorXd pearson;
    Eigen::VectorXd corrected;
    Eigen::VectorXd adjusted;
    std::optional<Eigen::VectorXd> true_resid;
    std::vector<int> passed_through;
};

// Model classes with their own closed-form correction, kept as an
// independent evaluation path for testing the general formula.
enum class ModelClass { Linear, Canonical, Normal, Gamma, InverseGaussian };

// ---- scalar building blocks (arbitrary mu, z, bias; no fit needed) ----

double e_function(const Family& family, const Link& link, double mu, double x);
double h_function(const Family& family, const Link& link, double mu, double x);

CorrectionPolynomials conditional_moments_at(const Family& family, const Link& link, double mu,
                                             double phi, double z_ii, double bias_eta);

double rho_at(const Family& family, const Link& link, double mu, double phi, double z_ii,
              double bias_eta, double x);

double closed_form_rho(ModelClass model_class, const Family& family, const Link& link, double mu,
                       double phi, double z_ii, double bias_eta, double x);

double density_pearson_at(const Family& family, const Link& link, double mu, double phi,
                          double z_ii, double bias_eta, double x);

double density_adjusted_at(const Family& family, const Link& link, double mu, double phi,
                           double z_ii, double bias_eta, double m_over_n, double v_over_n,
                           double x);

double density_adjusted_normal_at(const Family& family, const Link& link, double mu, double phi,
                                  double z_ii, double bias_eta, double m_over_n, double v_over_n,
                                  double x);

// ---- fit-level operations ----

Eigen::VectorXd pearson_residuals(const FitResult& fit, const ModelSpec& spec,
                                  const Eigen::VectorXd& y);

CorrectionPolynomials conditional_moments(const FitResult& fit, const ModelSpec& spec, int i);

double rho(const FitResult& fit, const ModelSpec& spec, int i, double x);

CorrectedResiduals corrected_residuals(const FitResult& fit, const ModelSpec& spec,
                                       const Eigen::VectorXd& pearson);

AdjustedMoments adjusted_moments(const FitResult& fit, const ModelSpec& spec);

Eigen::VectorXd adjusted_residuals(const FitResult& fit, const ModelSpec& spec,
                                   const Eigen::VectorXd& pearson);

double density_pearson(const FitResult& fit, const ModelSpec& spec, int i, double x);
double density_adjusted(const FitResult& fit, const ModelSpec& spec, int i, double x);
double density_adjusted_normal(const FitResult& fit, const ModelSpec& spec, int i, double x);

// Everything at once; true residuals are filled when the generating mean is
// supplied.
ResidualSet residual_set(const FitResult& fit, const ModelSpec& spec, const Eigen::VectorXd& y,
                         const std::optional<Eigen::VectorXd>& mu_true = std::nullopt);

}  // namespace glmresid

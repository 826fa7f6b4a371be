#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "glmresid/glm_fit.hpp"
#include "glmresid/gof.hpp"

namespace glmresid {

struct SimConfig {
    std::string family = "gamma";
    std::string link = "log";
    std::vector<double> beta_true;
    double phi_true = 1.0;
    int n = 0;
    int replications = 1;
    std::uint64_t master_seed = 0;
    // "uniform01" draws the non-intercept covariates once from U(0,1) and
    // freezes them; anything else is read as a CSV of covariate columns.
    std::string covariates = "uniform01";
    bool use_true_phi = false;
    std::string phi_estimator = "moment";
    int threads = 0;  // 0 = hardware concurrency
    double max_failure_rate = 0.01;
};

// Flat key=value file, '#' comments. beta_true is comma separated.
SimConfig parse_sim_config(const std::string& path);

struct GofRow {
    double ks_pearson = 0.0;
    double ad_pearson = 0.0;
    double ks_corrected = 0.0;
    double ad_corrected = 0.0;
};

struct SimulationReport {
    SimConfig config;
    Eigen::MatrixXd X;  // intercept column plus frozen covariates

    int attempted = 0;
    int completed = 0;
    int failed = 0;

    // One row per completed replication, in replication order.
    Eigen::MatrixXd beta_hats;
    Eigen::VectorXd phi_hats;  // per-replication dispersion estimates
    Eigen::MatrixXd pearson, corrected, adjusted, true_resid;

    double phi_hat_mean = 0.0;
    double reference_phi = 0.0;  // dispersion the reference law was evaluated at
    double pooled_mu_hat = 0.0;

    std::vector<Moments> moments_pearson, moments_corrected, moments_adjusted, moments_true;
    std::vector<GofRow> gof_one;  // per observation, vs the estimated true-residual law
    GofRow gof_one_pooled;
    std::vector<GofRow> gof_two;  // per observation, vs the empirical true residuals
    GofRow gof_two_pooled;

    // (reference quantile, sample quantile) over the pooled residuals.
    std::vector<std::pair<double, double>> qq_pearson, qq_corrected, qq_adjusted;
};

SimulationReport run_simulation(const SimConfig& config);

// Quantile of the true-residual law. The inverse Gaussian law depends on mu,
// which must then be supplied (the simulator passes the pooled mean of the
// fitted means; an approximation, recorded in run_meta).
double reference_quantile(const Family& family, double phi, double p,
                          double mu = std::numeric_limits<double>::quiet_NaN());

// Pairs (F^{-1}((i - 1/2)/N), x_(i)) for a sorted sample.
std::vector<std::pair<double, double>> qq_pairs(
    const std::vector<double>& sorted_sample, const std::function<double(double)>& quantile);

// moments.csv, gof_one_sample.csv, gof_two_sample.csv, qq_*.csv,
// run_meta.json. Full 17-digit precision; byte-identical for equal configs.
void write_report(const SimulationReport& report, const std::filesystem::path& dir);

}  // namespace glmresid

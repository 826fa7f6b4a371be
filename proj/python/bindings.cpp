#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <limits>
#include <optional>
#include <utility>

#include "glmresid/family.hpp"
#include "glmresid/glm_fit.hpp"
#include "glmresid/gof.hpp"
#include "glmresid/link.hpp"
#include "glmresid/residuals.hpp"
#include "glmresid/simulate.hpp"

namespace py = pybind11;
using namespace glmresid;

namespace {

std::pair<ModelSpec, FitOptions> make_spec(const std::string& family, const std::string& link,
                                           Eigen::MatrixXd X, std::optional<double> phi,
                                           const std::string& estimator) {
    const Family fam = Family::parse(family);
    const Link lnk = Link::parse(link, fam);
    FitOptions opts;
    opts.phi_estimator = parse_phi_estimator(estimator);
    return {ModelSpec{fam, lnk, std::move(X), phi}, opts};
}

py::dict fit_to_dict(const FitResult& fit) {
    py::dict d;
    d["beta_hat"] = fit.beta_hat;
    d["eta_hat"] = fit.eta_hat;
    d["mu_hat"] = fit.mu_hat;
    d["weights"] = fit.w;
    d["leverage"] = fit.z_diag;
    d["bias_beta"] = fit.bias_beta;
    d["bias_eta"] = fit.bias_eta;
    d["phi_hat"] = fit.phi_hat;
    d["deviance"] = fit.deviance;
    d["iterations"] = fit.iterations;
    d["converged"] = fit.converged;
    return d;
}

py::dict moments_to_dict(const Moments& m) {
    py::dict d;
    d["count"] = m.count;
    d["mean"] = m.mean;
    d["variance"] = m.variance;
    d["skewness"] = m.skewness;
    d["kurtosis"] = m.kurtosis;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "continuous GLM fitting with corrected and adjusted Pearson residuals";

    m.def(
        "fit",
        [](const std::string& family, const std::string& link, Eigen::MatrixXd X,
           Eigen::VectorXd y, std::optional<double> phi, const std::string& phi_estimator) {
            auto [spec, opts] = make_spec(family, link, std::move(X), phi, phi_estimator);
            return fit_to_dict(irls_fit(spec, y, opts));
        },
        py::arg("family"), py::arg("link"), py::arg("X"), py::arg("y"),
        py::arg("phi") = std::nullopt, py::arg("phi_estimator") = "moment",
        "Fit by iteratively reweighted least squares; returns estimates, leverages, and "
        "first-order coefficient biases.");

    m.def(
        "residuals",
        [](const std::string& family, const std::string& link, Eigen::MatrixXd X,
           Eigen::VectorXd y, std::optional<double> phi, const std::string& phi_estimator,
           std::optional<Eigen::VectorXd> mu_true) {
            auto [spec, opts] = make_spec(family, link, std::move(X), phi, phi_estimator);
            const FitResult fit = irls_fit(spec, y, opts);
            const ResidualSet rs = residual_set(fit, spec, y, mu_true);
            py::dict d = fit_to_dict(fit);
            d["pearson"] = rs.pearson;
            d["corrected"] = rs.corrected;
            d["adjusted"] = rs.adjusted;
            if (rs.true_resid) d["true_residuals"] = *rs.true_resid;
            d["passed_through"] = rs.passed_through;
            return d;
        },
        py::arg("family"), py::arg("link"), py::arg("X"), py::arg("y"),
        py::arg("phi") = std::nullopt, py::arg("phi_estimator") = "moment",
        py::arg("mu_true") = std::nullopt,
        "Fit, then return Pearson, corrected, and adjusted residuals together with the fit.");

    m.def(
        "rho",
        [](const std::string& family, const std::string& link, Eigen::MatrixXd X,
           Eigen::VectorXd y, int i, double x, std::optional<double> phi,
           const std::string& phi_estimator) {
            auto [spec, opts] = make_spec(family, link, std::move(X), phi, phi_estimator);
            const FitResult fit = irls_fit(spec, y, opts);
            return rho(fit, spec, i, x);
        },
        py::arg("family"), py::arg("link"), py::arg("X"), py::arg("y"), py::arg("i"),
        py::arg("x"), py::arg("phi") = std::nullopt, py::arg("phi_estimator") = "moment",
        "Correction added to the Pearson residual of observation i, evaluated at x.");

    m.def(
        "density_pearson",
        [](const std::string& family, const std::string& link, Eigen::MatrixXd X,
           Eigen::VectorXd y, int i, double x, std::optional<double> phi,
           const std::string& phi_estimator) {
            auto [spec, opts] = make_spec(family, link, std::move(X), phi, phi_estimator);
            const FitResult fit = irls_fit(spec, y, opts);
            return density_pearson(fit, spec, i, x);
        },
        py::arg("family"), py::arg("link"), py::arg("X"), py::arg("y"), py::arg("i"),
        py::arg("x"), py::arg("phi") = std::nullopt, py::arg("phi_estimator") = "moment",
        "First-order density expansion of the Pearson residual of observation i at x.");

    m.def(
        "true_residual_pdf",
        [](const std::string& family, double mu, double phi, double x) {
            return Family::parse(family).true_residual_density(mu, phi, x);
        },
        py::arg("family"), py::arg("mu"), py::arg("phi"), py::arg("x"));

    m.def(
        "true_residual_cdf",
        [](const std::string& family, double mu, double phi, double x) {
            return Family::parse(family).true_residual_cdf(mu, phi, x);
        },
        py::arg("family"), py::arg("mu"), py::arg("phi"), py::arg("x"));

    m.def(
        "reference_quantile",
        [](const std::string& family, double phi, double p, double mu) {
            return reference_quantile(Family::parse(family), phi, p, mu);
        },
        py::arg("family"), py::arg("phi"), py::arg("p"),
        py::arg("mu") = std::numeric_limits<double>::quiet_NaN(),
        "Quantile of the true-residual law (mu only matters for inverse_gaussian).");

    m.def("ks_one_sample",
          [](std::vector<double> sample, const std::string& family, double phi, double mu) {
              const Family fam = Family::parse(family);
              return ks_one_sample(sample, [&](double x) {
                  return fam.true_residual_cdf(mu, phi, x);
              });
          },
          py::arg("sample"), py::arg("family"), py::arg("phi"), py::arg("mu") = 1.0);

    m.def("ad_one_sample",
          [](std::vector<double> sample, const std::string& family, double phi, double mu) {
              const Family fam = Family::parse(family);
              return ad_one_sample(sample, [&](double x) {
                  return fam.true_residual_cdf(mu, phi, x);
              });
          },
          py::arg("sample"), py::arg("family"), py::arg("phi"), py::arg("mu") = 1.0);

    m.def("ks_two_sample", &ks_two_sample, py::arg("a"), py::arg("b"));
    m.def("ad_two_sample", &ad_two_sample, py::arg("a"), py::arg("b"));

    m.def(
        "sample_moments",
        [](const std::vector<double>& sample) { return moments_to_dict(sample_moments(sample)); },
        py::arg("sample"));

    m.def(
        "simulate",
        [](const py::dict& config, std::optional<std::filesystem::path> out_dir) {
            SimConfig c;
            if (config.contains("family")) c.family = config["family"].cast<std::string>();
            if (config.contains("link")) c.link = config["link"].cast<std::string>();
            if (config.contains("beta_true"))
                c.beta_true = config["beta_true"].cast<std::vector<double>>();
            if (config.contains("phi_true")) c.phi_true = config["phi_true"].cast<double>();
            if (config.contains("n")) c.n = config["n"].cast<int>();
            if (config.contains("replications"))
                c.replications = config["replications"].cast<int>();
            if (config.contains("master_seed"))
                c.master_seed = config["master_seed"].cast<std::uint64_t>();
            if (config.contains("covariates"))
                c.covariates = config["covariates"].cast<std::string>();
            if (config.contains("use_true_phi"))
                c.use_true_phi = config["use_true_phi"].cast<bool>();
            if (config.contains("phi_estimator"))
                c.phi_estimator = config["phi_estimator"].cast<std::string>();
            if (config.contains("threads")) c.threads = config["threads"].cast<int>();
            if (config.contains("max_failure_rate"))
                c.max_failure_rate = config["max_failure_rate"].cast<double>();
            const SimulationReport report = run_simulation(c);
            if (out_dir) write_report(report, *out_dir);
            py::dict d;
            d["attempted"] = report.attempted;
            d["completed"] = report.completed;
            d["failed"] = report.failed;
            d["phi_hat_mean"] = report.phi_hat_mean;
            d["reference_phi"] = report.reference_phi;
            d["beta_hats"] = report.beta_hats;
            d["pearson"] = report.pearson;
            d["corrected"] = report.corrected;
            d["adjusted"] = report.adjusted;
            d["true_residuals"] = report.true_resid;
            return d;
        },
        py::arg("config"), py::arg("out_dir") = std::nullopt,
        "Run the Monte Carlo residual study from a config dict mirroring the CLI's key=value "
        "file; optionally write the report files.");

    py::register_exception<NotConvergedError>(m, "NotConvergedError", PyExc_RuntimeError);
}

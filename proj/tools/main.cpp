#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "glmresid/family.hpp"
#include "glmresid/glm_fit.hpp"
#include "glmresid/gof.hpp"
#include "glmresid/io.hpp"
#include "glmresid/link.hpp"
#include "glmresid/residuals.hpp"
#include "glmresid/simulate.hpp"
#include "glmresid/stats.hpp"

namespace {

bool g_json_errors = false;
bool g_full_precision = false;

std::string fmt(double v) { return glmresid::format_double(v, g_full_precision); }

void emit_error(const std::string& kind, const std::string& message) {
    if (g_json_errors) {
        nlohmann::json j;
        j["error"] = {{"type", kind}, {"message", message}};
        std::cerr << j.dump() << '\n';
    } else {
        std::cerr << "error: " << message << '\n';
    }
}

Eigen::Index column_index(const glmresid::CsvTable& table, const std::string& name) {
    for (std::size_t j = 0; j < table.header.size(); ++j)
        if (table.header[j] == name) return static_cast<Eigen::Index>(j);
    std::string cols;
    for (const auto& h : table.header) {
        if (!cols.empty()) cols += ", ";
        cols += h;
    }
    throw std::invalid_argument("column '" + name + "' not found; file has: " + cols);
}

struct FitArgs {
    std::string family;
    std::string link;
    std::string data;
    std::string response;
    std::optional<double> phi;
    std::string estimator = "moment";
    bool no_intercept = false;
};

struct LoadedModel {
    glmresid::ModelSpec spec;
    Eigen::VectorXd y;
    glmresid::FitResult fit;
    std::vector<std::string> term_names;
};

LoadedModel fit_from_args(const FitArgs& args) {
    const glmresid::Family fam = glmresid::Family::parse(args.family);
    const glmresid::Link link = glmresid::Link::parse(args.link, fam);
    const glmresid::CsvTable table = glmresid::read_csv(args.data);
    const Eigen::Index yc = column_index(table, args.response);
    const Eigen::Index n = table.data.rows();
    const Eigen::Index ncov = table.data.cols() - 1;
    const Eigen::Index p = ncov + (args.no_intercept ? 0 : 1);
    if (p < 1) throw std::invalid_argument("model has no columns; add covariates or an intercept");
    Eigen::MatrixXd X(n, p);
    Eigen::Index out = 0;
    if (!args.no_intercept) X.col(out++).setOnes();
    for (Eigen::Index j = 0; j < table.data.cols(); ++j)
        if (j != yc) X.col(out++) = table.data.col(j);

    glmresid::ModelSpec spec{fam, link, std::move(X), args.phi};
    glmresid::FitOptions opts;
    opts.phi_estimator = glmresid::parse_phi_estimator(args.estimator);
    Eigen::VectorXd y = table.data.col(yc);
    glmresid::FitResult fit = glmresid::irls_fit(spec, y, opts);

    std::vector<std::string> names;
    if (!args.no_intercept) names.push_back("(Intercept)");
    for (Eigen::Index j = 0; j < table.data.cols(); ++j)
        if (j != yc) names.push_back(table.header[static_cast<std::size_t>(j)]);
    return LoadedModel{std::move(spec), std::move(y), std::move(fit), std::move(names)};
}

const auto kFamilyTokens =
    CLI::IsMember({"normal", "gamma", "inverse_gaussian"}, CLI::ignore_case);
const auto kLinkTokens = CLI::IsMember(
    {"canonical", "identity", "log", "reciprocal", "inverse_square"}, CLI::ignore_case);

void add_fit_options(CLI::App* sub, FitArgs& args) {
    sub->add_option("--family", args.family, "normal, gamma, or inverse_gaussian")
        ->required()
        ->check(kFamilyTokens);
    sub->add_option("--link", args.link,
                    "canonical, identity, log, reciprocal, or inverse_square")
        ->required()
        ->check(kLinkTokens);
    sub->add_option("--data", args.data, "input CSV with a header row")->required();
    sub->add_option("--response", args.response, "name of the response column")->required();
    auto* phi_opt = sub->add_option("--phi", args.phi, "fix the precision instead of estimating");
    sub->add_option("--estimate-phi", args.estimator, "estimator when --phi absent")
        ->check(CLI::IsMember({"moment", "ml"}))
        ->excludes(phi_opt);
    sub->add_flag("--no-intercept", args.no_intercept, "do not prepend an intercept column");
}

int run_fit(const FitArgs& args) {
    const LoadedModel m = fit_from_args(args);
    const glmresid::FitResult& fit = m.fit;
    std::cout << "# family: " << m.spec.family.name() << '\n'
              << "# link: " << m.spec.link.name() << '\n'
              << "# n: " << m.y.size() << '\n'
              << "# p: " << fit.beta_hat.size() << '\n'
              << "# iterations: " << fit.iterations << '\n'
              << "# deviance: " << fmt(fit.deviance) << '\n'
              << "# phi: " << fmt(fit.phi_hat)
              << (m.spec.phi ? " (fixed)" : " (estimated, " + args.estimator + ")") << '\n';
    std::cout << "term,estimate,bias\n";
    for (Eigen::Index j = 0; j < fit.beta_hat.size(); ++j)
        std::cout << m.term_names[static_cast<std::size_t>(j)] << ',' << fmt(fit.beta_hat[j])
                  << ',' << fmt(fit.bias_beta[j]) << '\n';
    std::cout << "\nobs,mu_hat,eta_hat,weight,z_ii,bias_eta\n";
    for (Eigen::Index i = 0; i < m.y.size(); ++i)
        std::cout << i + 1 << ',' << fmt(fit.mu_hat[i]) << ',' << fmt(fit.eta_hat[i]) << ','
                  << fmt(fit.w[i]) << ',' << fmt(fit.z_diag[i]) << ',' << fmt(fit.bias_eta[i])
                  << '\n';
    return 0;
}

void write_density_grid(const LoadedModel& m, const std::string& path, bool clamp) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    const double sigma = 1.0 / std::sqrt(m.fit.phi_hat);
    out << "obs,x,density_pearson,density_adjusted\n";
    for (Eigen::Index i = 0; i < m.y.size(); ++i) {
        const double lower = m.spec.family.residual_lower(m.fit.mu_hat[i]);
        const double hi = 6.0 * sigma;
        double lo = std::isfinite(lower) ? lower + (hi - lower) / 1000.0 : -6.0 * sigma;
        for (int k = 0; k <= 100; ++k) {
            const double x = lo + (hi - lo) * k / 100.0;
            double fp = glmresid::density_pearson(m.fit, m.spec, i, x);
            double fa = glmresid::density_adjusted(m.fit, m.spec, i, x);
            if (clamp) {
                fp = std::max(0.0, fp);
                fa = std::max(0.0, fa);
            }
            out << i + 1 << ',' << glmresid::format_double(x, true) << ','
                << glmresid::format_double(fp, true) << ',' << glmresid::format_double(fa, true)
                << '\n';
        }
    }
}

int run_residuals(const FitArgs& args, const std::string& out_path,
                  const std::string& density_path, bool clamp) {
    const LoadedModel m = fit_from_args(args);
    const glmresid::ResidualSet rs = glmresid::residual_set(m.fit, m.spec, m.y);
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw std::runtime_error("cannot write " + out_path);
        out = &file;
    }
    for (int idx : rs.passed_through)
        std::cerr << "warning: observation " << idx + 1
                  << " has a Pearson residual outside the support; corrected = pearson\n";
    *out << "obs,y,mu_hat,pearson,corrected,adjusted,rho_at_R,z_ii,bias_eta\n";
    for (Eigen::Index i = 0; i < m.y.size(); ++i) {
        *out << i + 1 << ',' << fmt(m.y[i]) << ',' << fmt(m.fit.mu_hat[i]) << ','
             << fmt(rs.pearson[i]) << ',' << fmt(rs.corrected[i]) << ',' << fmt(rs.adjusted[i])
             << ',' << fmt(rs.corrected[i] - rs.pearson[i]) << ',' << fmt(m.fit.z_diag[i]) << ','
             << fmt(m.fit.bias_eta[i]) << '\n';
    }
    if (!density_path.empty()) write_density_grid(m, density_path, clamp);
    return 0;
}

std::vector<double> load_column(const std::string& path, const std::string& column) {
    const glmresid::CsvTable table = glmresid::read_csv(path);
    Eigen::Index j = 0;
    if (!column.empty()) {
        j = column_index(table, column);
    } else if (table.data.cols() != 1) {
        throw std::invalid_argument("file '" + path +
                                    "' has several columns; pick one with --column");
    }
    std::vector<double> v(static_cast<std::size_t>(table.data.rows()));
    for (Eigen::Index i = 0; i < table.data.rows(); ++i) v[static_cast<std::size_t>(i)] =
        table.data(i, j);
    return v;
}

int run_gof(const std::string& data, const std::string& column, const std::string& data2,
            const std::string& column2, const std::string& dist, double phi, double mu) {
    const std::vector<double> a = load_column(data, column);
    double ks = 0.0, ad = 0.0;
    if (!data2.empty()) {
        const std::vector<double> b = load_column(data2, column2);
        ks = glmresid::ks_two_sample(a, b);
        ad = glmresid::ad_two_sample(a, b);
    } else if (!dist.empty()) {
        const glmresid::Family fam = glmresid::Family::parse(dist);
        fam.require_mean(mu);
        glmresid::Precision prec(phi);
        const auto cdf = [&fam, phi, mu](double x) {
            return fam.true_residual_cdf(mu, phi, x);
        };
        ks = glmresid::ks_one_sample(a, cdf);
        ad = glmresid::ad_one_sample(a, cdf);
    } else {
        throw std::invalid_argument("gof needs either --data2 or --dist");
    }
    std::cout << "statistic,value\nks," << fmt(ks) << "\nad," << fmt(ad) << '\n';
    return 0;
}

int run_simulate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed, bool use_true_phi,
                 std::optional<int> threads) {
    glmresid::SimConfig config = glmresid::parse_sim_config(config_path);
    if (seed) config.master_seed = *seed;
    if (use_true_phi) config.use_true_phi = true;
    if (threads) config.threads = *threads;
    const glmresid::SimulationReport report = glmresid::run_simulation(config);
    glmresid::write_report(report, out_dir);
    std::cout << "# wrote " << out_dir << '\n'
              << "attempted," << report.attempted << '\n'
              << "completed," << report.completed << '\n'
              << "failed," << report.failed << '\n'
              << "phi_hat_mean," << fmt(report.phi_hat_mean) << '\n'
              << "reference_phi," << fmt(report.reference_phi) << '\n';
    return 0;
}

int run_qq(const std::string& dir, const std::string& out_path) {
    const glmresid::CsvTable pearson = glmresid::read_csv(dir + "/qq_pearson.csv");
    const glmresid::CsvTable corrected = glmresid::read_csv(dir + "/qq_corrected.csv");
    const glmresid::CsvTable adjusted = glmresid::read_csv(dir + "/qq_adjusted.csv");
    if (pearson.data.rows() != corrected.data.rows() ||
        pearson.data.rows() != adjusted.data.rows())
        throw std::invalid_argument("QQ files in '" + dir + "' have mismatched row counts");
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw std::runtime_error("cannot write " + out_path);
        out = &file;
    }
    *out << "theoretical_pearson,empirical_pearson,theoretical_corrected,empirical_corrected,"
            "theoretical_adjusted,empirical_adjusted\n";
    for (Eigen::Index i = 0; i < pearson.data.rows(); ++i)
        *out << fmt(pearson.data(i, 0)) << ',' << fmt(pearson.data(i, 1)) << ','
             << fmt(corrected.data(i, 0)) << ',' << fmt(corrected.data(i, 1)) << ','
             << fmt(adjusted.data(i, 0)) << ',' << fmt(adjusted.data(i, 1)) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 1; i < argc; ++i)
        if (std::string(argv[i]) == "--json-errors") g_json_errors = true;

    CLI::App app{"continuous GLM fitting with corrected and adjusted Pearson residuals"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_flag("--json-errors", g_json_errors, "machine-readable errors on stderr");
    app.add_flag("--full-precision", g_full_precision, "print 17 significant digits");

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "fit a GLM and print coefficient and leverage tables");
    add_fit_options(fit_cmd, fit_args);

    FitArgs res_args;
    std::string res_out, density_out;
    bool clamp_densities = false;
    auto* res_cmd = app.add_subcommand("residuals", "emit Pearson, corrected, and adjusted residuals");
    add_fit_options(res_cmd, res_args);
    res_cmd->add_option("--out", res_out, "write the residual CSV here instead of stdout");
    res_cmd->add_option("--densities", density_out,
                        "also write per-observation density-expansion curves to this CSV");
    res_cmd->add_flag("--clamp-densities", clamp_densities,
                      "clamp negative expansion densities to zero in the density CSV");

    std::string gof_data, gof_col, gof_data2, gof_col2, gof_dist;
    double gof_phi = 1.0, gof_mu = 1.0;
    auto* gof_cmd = app.add_subcommand("gof", "K-S and A-D distances, one- or two-sample");
    gof_cmd->add_option("--data", gof_data, "CSV holding the sample")->required();
    gof_cmd->add_option("--column", gof_col, "column name (optional for one-column files)");
    auto* d2 = gof_cmd->add_option("--data2", gof_data2, "CSV holding the second sample");
    gof_cmd->add_option("--column2", gof_col2, "column name in the second file");
    auto* dist = gof_cmd->add_option(
        "--dist", gof_dist, "reference family token for the one-sample true-residual law");
    dist->check(kFamilyTokens);
    gof_cmd->add_option("--phi", gof_phi, "precision of the reference law");
    gof_cmd->add_option("--mu", gof_mu, "mean of the reference law (inverse_gaussian only)");
    d2->excludes(dist);

    std::string sim_config, sim_out = "sim_out";
    std::optional<std::uint64_t> sim_seed;
    std::optional<int> sim_threads;
    bool sim_true_phi = false;
    auto* sim_cmd = app.add_subcommand("simulate", "run the Monte Carlo residual study");
    sim_cmd->add_option("--config", sim_config, "key=value config file")->required();
    sim_cmd->add_option("--out", sim_out, "output directory");
    sim_cmd->add_option("--seed", sim_seed, "override master_seed from the config");
    sim_cmd->add_option("--threads", sim_threads, "override worker count");
    sim_cmd->add_flag("--use-true-phi", sim_true_phi,
                      "use the configured phi_true inside the corrections");

    std::string qq_dir, qq_out;
    auto* qq_cmd = app.add_subcommand("qq", "merge the QQ CSVs from a simulate output directory");
    qq_cmd->add_option("--dir", qq_dir, "simulate output directory")->required();
    qq_cmd->add_option("--out", qq_out, "write the merged CSV here instead of stdout");

    try {
        app.parse(argc, argv);
        if (*fit_cmd) return run_fit(fit_args);
        if (*res_cmd) return run_residuals(res_args, res_out, density_out, clamp_densities);
        if (*gof_cmd)
            return run_gof(gof_data, gof_col, gof_data2, gof_col2, gof_dist, gof_phi, gof_mu);
        if (*sim_cmd) return run_simulate(sim_config, sim_out, sim_seed, sim_true_phi, sim_threads);
        if (*qq_cmd) return run_qq(qq_dir, qq_out);
        emit_error("usage", "no subcommand selected");
        return 1;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_error("usage", e.what());
        return 1;
    } catch (const glmresid::NotConvergedError& e) {
        emit_error("numerical", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        emit_error("data", e.what());
        return 2;
    } catch (const std::domain_error& e) {
        emit_error("data", e.what());
        return 2;
    } catch (const std::out_of_range& e) {
        emit_error("data", e.what());
        return 2;
    } catch (const std::exception& e) {
        emit_error("numerical", e.what());
        return 3;
    }
}

#pragma once

namespace glmresid::stats {

// Standard normal CDF and quantile.
double normal_cdf(double x);
double normal_quantile(double p);

// Regularized lower incomplete gamma P(a, x) and its inverse in x.
double gamma_p(double a, double x);
double gamma_p_inv(double a, double p);

double log_gamma(double x);
double digamma(double x);
double trigamma(double x);

}  // namespace glmresid::stats

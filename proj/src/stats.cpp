#include "glmresid/stats.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <stdexcept>

namespace glmresid::stats {

namespace {
constexpr double kSqrt2 = 1.4142135623730950488;
}

double normal_cdf(double x) { return 0.5 * boost::math::erfc(-x / kSqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0, 1)");
    return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
}

double gamma_p(double a, double x) { return boost::math::gamma_p(a, x); }

double gamma_p_inv(double a, double p) {
    if (!(p >= 0.0 && p < 1.0)) throw std::domain_error("gamma_p_inv: p must lie in [0, 1)");
    return boost::math::gamma_p_inv(a, p);
}

double log_gamma(double x) { return boost::math::lgamma(x); }

double digamma(double x) { return boost::math::digamma(x); }

double trigamma(double x) { return boost::math::trigamma(x); }

}  // namespace glmresid::stats

#include "glmresid/gof.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace glmresid {

namespace {

std::vector<double> sorted_checked(const std::vector<double>& sample, const char* fn) {
    if (sample.empty()) throw std::invalid_argument(std::string(fn) + ": empty sample");
    std::vector<double> s(sample);
    for (double v : s) {
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string(fn) + ": non-finite sample value");
    }
    std::sort(s.begin(), s.end());
    return s;
}

}  // namespace

Ecdf::Ecdf(std::vector<double> values) : sorted_(std::move(values)) {
    if (sorted_.empty()) throw std::invalid_argument("Ecdf: empty sample");
    for (double v : sorted_) {
        if (!std::isfinite(v)) throw std::invalid_argument("Ecdf: non-finite sample value");
    }
    std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::operator()(double x) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double ks_one_sample(const std::vector<double>& sample,
                     const std::function<double(double)>& cdf) {
    const std::vector<double> s = sorted_checked(sample, "ks_one_sample");
    const double n = static_cast<double>(s.size());
    double d = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double f = cdf(s[i]);
        const double hi = static_cast<double>(i + 1) / n - f;
        const double lo = f - static_cast<double>(i) / n;
        d = std::max(d, std::max(hi, lo));
    }
    return d;
}

double ks_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
    const std::vector<double> sa = sorted_checked(a, "ks_two_sample");
    const std::vector<double> sb = sorted_checked(b, "ks_two_sample");
    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < sa.size() && j < sb.size()) {
        const double v = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] == v) ++i;
        while (j < sb.size() && sb[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double ad_one_sample(const std::vector<double>& sample,
                     const std::function<double(double)>& cdf) {
    const std::vector<double> s = sorted_checked(sample, "ad_one_sample");
    const std::size_t n = s.size();
    std::vector<double> f(n);
    for (std::size_t i = 0; i < n; ++i) {
        f[i] = cdf(s[i]);
        if (!(f[i] > 0.0 && f[i] < 1.0)) {
            std::ostringstream msg;
            msg << "ad_one_sample: cdf hit " << f[i] << " at order statistic " << i + 1;
            throw std::domain_error(msg.str());
        }
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += (2.0 * static_cast<double>(i + 1) - 1.0) *
               (std::log(f[i]) + std::log1p(-f[n - 1 - i]));
    }
    return -static_cast<double>(n) - sum / static_cast<double>(n);
}

double ad_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
    const std::vector<double> sa = sorted_checked(a, "ad_two_sample");
    const std::vector<double> sb = sorted_checked(b, "ad_two_sample");
    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    const double N = na + nb;

    std::vector<double> pooled(sa);
    pooled.insert(pooled.end(), sb.begin(), sb.end());
    std::sort(pooled.begin(), pooled.end());
    pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());

    double inner_a = 0.0, inner_b = 0.0;
    double c = 0.0;       // observations strictly below the current value
    double cum_a = 0.0;   // sample-a observations strictly below
    double cum_b = 0.0;
    std::size_t ia = 0, ib = 0;
    for (double v : pooled) {
        double fa = 0.0, fb = 0.0;
        while (ia < sa.size() && sa[ia] == v) {
            ++fa;
            ++ia;
        }
        while (ib < sb.size() && sb[ib] == v) {
            ++fb;
            ++ib;
        }
        const double l = fa + fb;
        const double bstar = c + l / 2.0;
        const double denom = bstar * (N - bstar) - N * l / 4.0;
        if (denom > 0.0) {
            const double ma = cum_a + fa / 2.0;
            const double mb = cum_b + fb / 2.0;
            const double ta = N * ma - na * bstar;
            const double tb = N * mb - nb * bstar;
            inner_a += (l / N) * ta * ta / denom;
            inner_b += (l / N) * tb * tb / denom;
        }
        c += l;
        cum_a += fa;
        cum_b += fb;
    }
    return (N - 1.0) / N * (inner_a / na + inner_b / nb);
}

void MomentAccumulator::push(double x) {
    const double n1 = static_cast<double>(n_);
    ++n_;
    const double n = static_cast<double>(n_);
    const double delta = x - mean_;
    const double delta_n = delta / n;
    const double delta_n2 = delta_n * delta_n;
    const double term1 = delta * delta_n * n1;
    mean_ += delta_n;
    m4_ += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * m2_ -
           4.0 * delta_n * m3_;
    m3_ += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * m2_;
    m2_ += term1;
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
    if (other.n_ == 0) return;
    if (n_ == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(other.n_);
    const double n = na + nb;
    const double delta = other.mean_ - mean_;
    const double d2 = delta * delta;

    const double m2 = m2_ + other.m2_ + d2 * na * nb / n;
    const double m3 = m3_ + other.m3_ + d2 * delta * na * nb * (na - nb) / (n * n) +
                      3.0 * delta * (na * other.m2_ - nb * m2_) / n;
    const double m4 = m4_ + other.m4_ +
                      d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
                      6.0 * d2 * (na * na * other.m2_ + nb * nb * m2_) / (n * n) +
                      4.0 * delta * (na * other.m3_ - nb * m3_) / n;
    mean_ += delta * nb / n;
    m2_ = m2;
    m3_ = m3;
    m4_ = m4;
    n_ += other.n_;
}

double MomentAccumulator::mean() const {
    if (n_ == 0) throw std::invalid_argument("MomentAccumulator: empty");
    return mean_;
}

double MomentAccumulator::central_moment2() const {
    if (n_ == 0) throw std::invalid_argument("MomentAccumulator: empty");
    return m2_ / static_cast<double>(n_);
}

double MomentAccumulator::central_moment3() const {
    if (n_ == 0) throw std::invalid_argument("MomentAccumulator: empty");
    return m3_ / static_cast<double>(n_);
}

double MomentAccumulator::central_moment4() const {
    if (n_ == 0) throw std::invalid_argument("MomentAccumulator: empty");
    return m4_ / static_cast<double>(n_);
}

Moments MomentAccumulator::moments() const {
    if (n_ < 2) throw std::invalid_argument("sample_moments: need at least 2 values");
    Moments out;
    out.count = n_;
    out.mean = mean_;
    out.variance = m2_ / static_cast<double>(n_ - 1);
    const double m2 = central_moment2();
    if (n_ < 4) throw std::invalid_argument("sample_moments: need at least 4 values");
    if (!(m2 > 0.0))
        throw std::domain_error("sample_moments: zero variance, higher moments undefined");
    out.skewness = central_moment3() / (m2 * std::sqrt(m2));
    out.kurtosis = central_moment4() / (m2 * m2);
    return out;
}

Moments sample_moments(const std::vector<double>& sample) {
    MomentAccumulator acc;
    for (double v : sample) {
        if (!std::isfinite(v))
            throw std::invalid_argument("sample_moments: non-finite sample value");
        acc.push(v);
    }
    return acc.moments();
}

}  // namespace glmresid

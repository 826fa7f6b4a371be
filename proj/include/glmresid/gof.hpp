#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace glmresid {

// Empirical CDF over a sorted copy of the sample; right-continuous step
// function returning k/n.
class Ecdf {
public:
    explicit Ecdf(std::vector<double> values);
    double operator()(double x) const;
    const std::vector<double>& sorted() const { return sorted_; }
    std::size_t size() const { return sorted_.size(); }

private:
    std::vector<double> sorted_;
};

// Kolmogorov-Smirnov sup distance against a cdf:
// D = max_i max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n).
double ks_one_sample(const std::vector<double>& sample,
                     const std::function<double(double)>& cdf);

// Sup distance of two ECDFs via a merged sweep.
double ks_two_sample(const std::vector<double>& a, const std::vector<double>& b);

// Anderson-Darling statistic
// A^2 = -n - (1/n) sum_i (2i-1){ln F(x_(i)) + ln(1 - F(x_(n+1-i)))}.
double ad_one_sample(const std::vector<double>& sample,
                     const std::function<double(double)>& cdf);

// Scholz-Stephens two-sample A^2 (k = 2), midrank tie adjustment.
double ad_two_sample(const std::vector<double>& a, const std::vector<double>& b);

struct Moments {
    std::size_t count = 0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased, 1/(n-1)
    double skewness = 0.0;  // m3 / m2^{3/2} with biased central moments
    double kurtosis = 0.0;  // m4 / m2^2, non-excess (normal -> 3)
};

// Streaming mean and central-moment sums up to fourth order; mergeable so
// partial aggregates can be combined in any order.
class MomentAccumulator {
public:
    void push(double x);
    void merge(const MomentAccumulator& other);

    std::size_t count() const { return n_; }
    double mean() const;
    double central_moment2() const;  // biased m2 = M2/n
    double central_moment3() const;
    double central_moment4() const;
    Moments moments() const;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;  // sum of (x - mean)^2
    double m3_ = 0.0;
    double m4_ = 0.0;
};

Moments sample_moments(const std::vector<double>& sample);

}  // namespace glmresid

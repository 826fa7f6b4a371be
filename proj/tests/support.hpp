#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "glmresid/gof.hpp"
#include "glmresid/residuals.hpp"

namespace testsupport {

inline double draw_uniform(std::mt19937& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// A point strictly inside the residual support of the family at mu.
inline double draw_support_x(std::mt19937& rng, const glmresid::Family& fam, double mu) {
    const double lo = fam.residual_lower(mu);
    if (std::isfinite(lo)) return lo + (3.0 - lo) * draw_uniform(rng, 0.02, 1.0);
    return draw_uniform(rng, -3.0, 3.0);
}

// Admissible (family, link, mu, phi, leverage, bias) tuple for a model class
// that has its own closed-form correction.
struct ClassTuple {
    glmresid::Family family;
    glmresid::Link link;
    double mu, phi, z, bias;
};

inline ClassTuple draw_class_tuple(std::mt19937& rng, glmresid::ModelClass cls) {
    using glmresid::Family;
    using glmresid::FamilyKind;
    using glmresid::Link;
    using glmresid::LinkKind;
    using glmresid::ModelClass;
    const Family normal(FamilyKind::Normal), gamma(FamilyKind::Gamma),
        ig(FamilyKind::InverseGaussian);
    const double phi = draw_uniform(rng, 0.5, 10.0);
    const double z = draw_uniform(rng, 0.01, 0.4);
    const double bias = draw_uniform(rng, -0.3, 0.3);
    switch (cls) {
        case ModelClass::Linear:
            // identity links have zero first-order coefficient bias
            return {normal, Link(LinkKind::Identity, normal), draw_uniform(rng, -3.0, 3.0),
                    phi, z, 0.0};
        case ModelClass::Canonical: {
            const int pick = static_cast<int>(draw_uniform(rng, 0.0, 3.0));
            const Family fam = pick == 0 ? normal : (pick == 1 ? gamma : ig);
            const double mu = fam.kind() == FamilyKind::Normal
                                  ? draw_uniform(rng, -3.0, 3.0)
                                  : draw_uniform(rng, 0.3, 4.0);
            return {fam, Link(LinkKind::Canonical, fam), mu, phi, z, bias};
        }
        case ModelClass::Normal: {
            const bool log_link = draw_uniform(rng, 0.0, 1.0) < 0.5;
            const double mu =
                log_link ? draw_uniform(rng, 0.3, 4.0) : draw_uniform(rng, -3.0, 3.0);
            return {normal, Link(log_link ? LinkKind::Log : LinkKind::Identity, normal), mu,
                    phi, z, bias};
        }
        case ModelClass::Gamma: {
            const int pick = static_cast<int>(draw_uniform(rng, 0.0, 3.0));
            const LinkKind kind = pick == 0   ? LinkKind::Log
                                  : pick == 1 ? LinkKind::Reciprocal
                                              : LinkKind::Canonical;
            return {gamma, Link(kind, gamma), draw_uniform(rng, 0.3, 4.0), phi, z, bias};
        }
        case ModelClass::InverseGaussian: {
            const int pick = static_cast<int>(draw_uniform(rng, 0.0, 3.0));
            const LinkKind kind = pick == 0   ? LinkKind::Log
                                  : pick == 1 ? LinkKind::InverseSquare
                                              : LinkKind::Canonical;
            return {ig, Link(kind, ig), draw_uniform(rng, 0.3, 4.0), phi, z, bias};
        }
    }
    throw std::logic_error("unreachable");
}

inline double simpson_leaf(const std::function<double(double)>& f, double a, double b, double fa,
                           double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                          double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson_leaf(f, a, m, fa, flm, fm);
    const double right = simpson_leaf(f, m, b, fm, frm, fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// Adaptive Simpson quadrature on a finite interval.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-11) {
    if (!(a < b)) throw std::invalid_argument("integrate: need a < b");
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = simpson_leaf(f, a, b, fa, fm, fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

// Uniform panels, each integrated adaptively. Use this for wide intervals
// whose mass sits in a narrow region the first Simpson nodes could miss.
inline double integrate_panels(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-11, int panels = 64) {
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int k = 0; k < panels; ++k)
        total += integrate(f, a + k * h, a + (k + 1) * h, tol / panels);
    return total;
}

// Central difference with two step sizes (Richardson), for checking analytic
// derivatives.
inline double diff(const std::function<double(double)>& f, double x, double h = 1e-4) {
    const double d1 = (f(x + h) - f(x - h)) / (2.0 * h);
    const double d2 = (f(x + h / 2.0) - f(x - h / 2.0)) / h;
    return (4.0 * d2 - d1) / 3.0;
}

// Independent sup-distance oracles by breakpoint enumeration.
inline double ks_one_via_breakpoints(std::vector<double> s,
                                     const std::function<double(double)>& cdf) {
    std::sort(s.begin(), s.end());
    const glmresid::Ecdf ecdf(s);
    double d = 0.0;
    for (const double x : s) {
        const double left = std::nextafter(x, -1e308);
        d = std::max(d, std::abs(ecdf(x) - cdf(x)));
        d = std::max(d, std::abs(ecdf(left) - cdf(x)));
    }
    return d;
}

inline double ks_two_via_breakpoints(const std::vector<double>& a,
                                     const std::vector<double>& b) {
    const glmresid::Ecdf fa(a), fb(b);
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    double d = 0.0;
    for (const double t : pooled) d = std::max(d, std::abs(fa(t) - fb(t)));
    return d;
}

// n * integral of (Fn - F)^2 / (F (1 - F)) dF for a uniform reference law,
// integrated segment by segment between the order statistics.
inline double ad_one_via_quadrature(std::vector<double> s) {
    std::sort(s.begin(), s.end());
    const double n = static_cast<double>(s.size());
    std::vector<double> brk = {1e-12};
    brk.insert(brk.end(), s.begin(), s.end());
    brk.push_back(1.0 - 1e-12);
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < brk.size(); ++k) {
        const double fn = static_cast<double>(k) / n;
        if (brk[k + 1] <= brk[k]) continue;
        total += integrate(
            [&](double x) { return (fn - x) * (fn - x) / (x * (1.0 - x)); }, brk[k],
            brk[k + 1], 1e-13);
    }
    return n * total;
}

}  // namespace testsupport

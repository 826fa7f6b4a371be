#pragma once

#include <string_view>

#include "glmresid/family.hpp"

namespace glmresid {

enum class LinkKind { Identity, Log, Reciprocal, InverseSquare, Canonical };

// Link function eta = g(mu). The "canonical" token resolves against a family
// at construction: g = q, so dmu/deta = V(mu). Derivatives are expressed as
// functions of mu, which is how every downstream formula consumes them.
class Link {
public:
    Link(LinkKind kind, const Family& family);

    // Tokens: "identity" | "log" | "reciprocal" | "inverse_square" |
    // "canonical" (case-insensitive).
    static Link parse(std::string_view token, const Family& family);

    LinkKind kind() const { return kind_; }
    std::string_view name() const;
    bool is_canonical() const;

    // g(mu). Throws std::domain_error when mu is outside the link domain.
    double eta(double mu) const;
    // g^{-1}(eta). Never throws; out-of-family values are the caller's to
    // detect.
    double mu(double eta) const;

    double dmu(double mu) const;   // d mu / d eta, as a function of mu
    double d2mu(double mu) const;  // d2 mu / d eta2, as a function of mu

private:
    LinkKind kind_;
    FamilyKind family_;
};

// IRLS weight w = V^{-1} (dmu/deta)^2, and its signed square root
// V^{-1/2} dmu/deta. The signed form carries the orientation of the score in
// x and is negative for decreasing links.
double weight(const Family& family, const Link& link, double mu);
double signed_sqrt_weight(const Family& family, const Link& link, double mu);

}  // namespace glmresid

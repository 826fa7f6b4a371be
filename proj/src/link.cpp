#include "glmresid/link.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

namespace glmresid {

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

Link::Link(LinkKind kind, const Family& family) : kind_(kind), family_(family.kind()) {}

Link Link::parse(std::string_view token, const Family& family) {
    const std::string t = lowercase(token);
    if (t == "identity") return Link(LinkKind::Identity, family);
    if (t == "log") return Link(LinkKind::Log, family);
    if (t == "reciprocal") return Link(LinkKind::Reciprocal, family);
    if (t == "inverse_square") return Link(LinkKind::InverseSquare, family);
    if (t == "canonical") return Link(LinkKind::Canonical, family);
    throw std::invalid_argument(
        "unknown link '" + std::string(token) +
        "'; expected identity, log, reciprocal, inverse_square, or canonical");
}

std::string_view Link::name() const {
    switch (kind_) {
        case LinkKind::Identity: return "identity";
        case LinkKind::Log: return "log";
        case LinkKind::Reciprocal: return "reciprocal";
        case LinkKind::InverseSquare: return "inverse_square";
        case LinkKind::Canonical: return "canonical";
    }
    return "";
}

bool Link::is_canonical() const {
    if (kind_ == LinkKind::Canonical) return true;
    return kind_ == LinkKind::Identity && family_ == FamilyKind::Normal;
}

double Link::eta(double mu_) const {
    switch (kind_) {
        case LinkKind::Identity: return mu_;
        case LinkKind::Log:
            if (!(mu_ > 0.0)) throw std::domain_error("log link requires mu > 0");
            return std::log(mu_);
        case LinkKind::Reciprocal:
            if (mu_ == 0.0) throw std::domain_error("reciprocal link requires mu != 0");
            return 1.0 / mu_;
        case LinkKind::InverseSquare:
            if (!(mu_ > 0.0)) throw std::domain_error("inverse_square link requires mu > 0");
            return 1.0 / (mu_ * mu_);
        case LinkKind::Canonical: return Family(family_).theta(mu_);
    }
    return 0.0;
}

double Link::mu(double eta_) const {
    switch (kind_) {
        case LinkKind::Identity: return eta_;
        case LinkKind::Log: return std::exp(eta_);
        case LinkKind::Reciprocal: return 1.0 / eta_;
        case LinkKind::InverseSquare: return 1.0 / std::sqrt(eta_);
        case LinkKind::Canonical:
            switch (family_) {
                case FamilyKind::Normal: return eta_;
                case FamilyKind::Gamma: return -1.0 / eta_;
                case FamilyKind::InverseGaussian: return 1.0 / std::sqrt(-2.0 * eta_);
            }
    }
    return 0.0;
}

double Link::dmu(double mu_) const {
    switch (kind_) {
        case LinkKind::Identity: return 1.0;
        case LinkKind::Log: return mu_;
        case LinkKind::Reciprocal: return -mu_ * mu_;
        case LinkKind::InverseSquare: return -0.5 * mu_ * mu_ * mu_;
        case LinkKind::Canonical: return Family(family_).variance(mu_);
    }
    return 0.0;
}

double Link::d2mu(double mu_) const {
    switch (kind_) {
        case LinkKind::Identity: return 0.0;
        case LinkKind::Log: return mu_;
        case LinkKind::Reciprocal: return 2.0 * mu_ * mu_ * mu_;
        case LinkKind::InverseSquare: return 0.75 * mu_ * mu_ * mu_ * mu_ * mu_;
        case LinkKind::Canonical: {
            const Family f(family_);
            return f.variance(mu_) * f.variance_d1(mu_);
        }
    }
    return 0.0;
}

double weight(const Family& family, const Link& link, double mu) {
    const double d = link.dmu(mu);
    return d * d / family.variance(mu);
}

double signed_sqrt_weight(const Family& family, const Link& link, double mu) {
    return link.dmu(mu) / std::sqrt(family.variance(mu));
}

}  // namespace glmresid

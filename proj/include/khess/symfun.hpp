#pragma once

// Elementary symmetric polynomials sigma_k of a real spectrum, their
// gradients, Garding cone membership and the Maclaurin chain.

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "khess/errors.hpp"

namespace khess {

/// Eigenvalues lambda_1..lambda_n of a symmetric matrix. Non-empty, finite.
class EigenSpectrum {
public:
    EigenSpectrum(std::initializer_list<double> values)
        : EigenSpectrum(std::vector<double>(values)) {}

    explicit EigenSpectrum(std::vector<double> values) : values_(std::move(values))
    {
        if (values_.empty()) {
            throw DomainError("EigenSpectrum: empty spectrum");
        }
        for (double v : values_) {
            if (!std::isfinite(v)) {
                throw DomainError("EigenSpectrum: non-finite eigenvalue");
            }
        }
    }

    [[nodiscard]] int size() const { return static_cast<int>(values_.size()); }
    [[nodiscard]] double operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] std::span<const double> values() const { return values_; }

    friend bool operator==(const EigenSpectrum&, const EigenSpectrum&) = default;

private:
    std::vector<double> values_;
};

/// Order k of a Garding cone query. `strict` selects the open cone Gamma_k,
/// otherwise its closure.
struct ConeQuery {
    int k = 1;
    bool strict = true;
};

[[nodiscard]] inline double binomial(int n, int k)
{
    if (k < 0 || k > n) {
        return 0.0;
    }
    k = std::min(k, n - k);
    double c = 1.0;
    for (int i = 1; i <= k; ++i) {
        c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    }
    return std::round(c);
}

namespace detail {

inline void check_order(int n, int k)
{
    if (k < 1 || k > n) {
        throw DomainError("sigma_k: order k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(n) + "]");
    }
}

// Coefficients e_0..e_kmax of prod_i (t + lambda_i), built one factor at a
// time. The input is visited in ascending order so that the result does not
// depend on the order in which eigenvalues were supplied.
inline std::vector<double> coefficients(std::span<const double> lambda, int kmax)
{
    std::vector<double> sorted(lambda.begin(), lambda.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> e(static_cast<std::size_t>(kmax) + 1, 0.0);
    e[0] = 1.0;
    int built = 0;
    for (double l : sorted) {
        built = std::min(built + 1, kmax);
        for (int j = built; j >= 1; --j) {
            e[static_cast<std::size_t>(j)] += l * e[static_cast<std::size_t>(j - 1)];
        }
    }
    return e;
}

}  // namespace detail

/// sigma_k(lambda), O(n k).
[[nodiscard]] inline double sigma(const EigenSpectrum& lambda, int k)
{
    detail::check_order(lambda.size(), k);
    return detail::coefficients(lambda.values(), k)[static_cast<std::size_t>(k)];
}

/// (sigma_1, ..., sigma_n) from a single polynomial build.
[[nodiscard]] inline std::vector<double> sigma_all(const EigenSpectrum& lambda)
{
    auto e = detail::coefficients(lambda.values(), lambda.size());
    return {e.begin() + 1, e.end()};
}

/// d sigma_k / d lambda_i = sigma_{k-1}(lambda with lambda_i removed).
[[nodiscard]] inline std::vector<double> sigma_grad(const EigenSpectrum& lambda, int k)
{
    const int n = lambda.size();
    detail::check_order(n, k);
    std::vector<double> grad(static_cast<std::size_t>(n));
    std::vector<double> rest;
    rest.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        rest.clear();
        for (int j = 0; j < n; ++j) {
            if (j != i) {
                rest.push_back(lambda[j]);
            }
        }
        grad[static_cast<std::size_t>(i)] =
            detail::coefficients(rest, k - 1)[static_cast<std::size_t>(k - 1)];
    }
    return grad;
}

/// Exact sign test: sigma_j > 0 (strict) or >= 0 (closure) for j = 1..k.
[[nodiscard]] inline bool in_gamma(const EigenSpectrum& lambda, ConeQuery q)
{
    detail::check_order(lambda.size(), q.k);
    const auto e = detail::coefficients(lambda.values(), q.k);
    for (int j = 1; j <= q.k; ++j) {
        const double s = e[static_cast<std::size_t>(j)];
        if (q.strict ? !(s > 0.0) : !(s >= 0.0)) {
            return false;
        }
    }
    return true;
}

/// Normalized means m_j = (sigma_j / C(n,j))^(1/j), j = 1..k. Non-increasing
/// in j on the open cone Gamma_k.
[[nodiscard]] inline std::vector<double> maclaurin_chain(const EigenSpectrum& lambda, int k)
{
    const int n = lambda.size();
    detail::check_order(n, k);
    if (!in_gamma(lambda, {k, true})) {
        throw DomainError("maclaurin_chain: spectrum outside Gamma_" + std::to_string(k));
    }
    const auto e = detail::coefficients(lambda.values(), k);
    std::vector<double> m(static_cast<std::size_t>(k));
    for (int j = 1; j <= k; ++j) {
        m[static_cast<std::size_t>(j - 1)] =
            std::pow(e[static_cast<std::size_t>(j)] / binomial(n, j), 1.0 / j);
    }
    return m;
}

/// F(lambda) = sigma_k(lambda)^(1/k), the concave form of the k-Hessian.
[[nodiscard]] inline double fk_value(const EigenSpectrum& lambda, int k)
{
    const double s = sigma(lambda, k);
    if (s < 0.0) {
        throw DomainError("fk_value: sigma_k < 0, spectrum outside the closed cone");
    }
    return k == 1 ? s : std::pow(s, 1.0 / k);
}

}  // namespace khess

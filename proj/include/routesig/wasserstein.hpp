#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "routesig/provenance.hpp"

namespace routesig {

namespace detail {

/// W1 between two distributions on unit-spaced positions 0..n-1, no checks.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar wasserstein1_unit(const Eigen::MatrixBase<DerivedP>& p,
                                            const Eigen::MatrixBase<DerivedQ>& q) {
    using Scalar = typename DerivedP::Scalar;
    Scalar cdf_gap(0), total(0);
    for (Eigen::Index i = 0; i + 1 < p.size(); ++i) {
        cdf_gap += p(i) - q(i);
        total += std::abs(cdf_gap);
    }
    return total;
}

template <typename Derived>
void check_distribution(const Eigen::MatrixBase<Derived>& v, const char* name, double tol) {
    using Scalar = typename Derived::Scalar;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!std::isfinite(static_cast<double>(v(i))) || v(i) < Scalar(-tol))
            throw Error(std::string(name) + " has a negative or non-finite entry");
    const double mass = static_cast<double>(v.sum());
    if (std::abs(mass - 1.0) > tol)
        throw Error(std::string(name) + " sums to " + std::to_string(mass) + ", not 1");
}

}  // namespace detail

inline constexpr double kMassTolerance = 1e-9;

/// Wasserstein-1 distance between two distributions supported on the same
/// strictly increasing positions, via the integrated absolute CDF difference:
///   W1 = sum_k |F_p(x_k) - F_q(x_k)| (x_{k+1} - x_k).
template <typename DerivedP, typename DerivedQ, typename DerivedX>
typename DerivedP::Scalar wasserstein1(const Eigen::MatrixBase<DerivedP>& p,
                                       const Eigen::MatrixBase<DerivedQ>& q,
                                       const Eigen::MatrixBase<DerivedX>& positions) {
    EIGEN_STATIC_ASSERT_VECTOR_ONLY(DerivedP);
    EIGEN_STATIC_ASSERT_VECTOR_ONLY(DerivedQ);
    EIGEN_STATIC_ASSERT_VECTOR_ONLY(DerivedX);
    using Scalar = typename DerivedP::Scalar;
    if (p.size() != q.size() || p.size() != positions.size())
        throw ShapeError("wasserstein1: length mismatch (" + std::to_string(p.size()) + ", " +
                    std::to_string(q.size()) + ", " + std::to_string(positions.size()) + ")");
    if (p.size() == 0) throw Error("wasserstein1: empty support");
    for (Eigen::Index i = 0; i + 1 < positions.size(); ++i)
        if (!(positions(i) < positions(i + 1)))
            throw Error("wasserstein1: positions must be strictly increasing");
    detail::check_distribution(p, "p", kMassTolerance);
    detail::check_distribution(q, "q", kMassTolerance);

    Scalar cdf_gap(0), total(0);
    for (Eigen::Index i = 0; i + 1 < p.size(); ++i) {
        cdf_gap += p(i) - q(i);
        total += std::abs(cdf_gap) * (positions(i + 1) - positions(i));
    }
    return total;
}

/// W1 on positions 0, 1, ..., n-1.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar wasserstein1(const Eigen::MatrixBase<DerivedP>& p,
                                       const Eigen::MatrixBase<DerivedQ>& q) {
    using Scalar = typename DerivedP::Scalar;
    using Positions = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    return wasserstein1(p, q, Positions::LinSpaced(p.size(), Scalar(0), Scalar(p.size() - 1)));
}

}  // namespace routesig

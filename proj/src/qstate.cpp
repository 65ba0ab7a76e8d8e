#include "nmsim/qstate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nmsim {

namespace {

template <typename Matrix>
void validate_density_matrix(const Matrix& m, double tol, const char* what) {
    if (!(tol >= 0.0)) throw std::invalid_argument("density matrix tolerance must be >= 0");
    const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (!(herm <= tol))
        throw std::invalid_argument(std::string(what) + ": not Hermitian within tolerance");
    const double tr_err = std::abs(m.trace() - std::complex<double>(1.0, 0.0));
    if (!(tr_err <= tol))
        throw std::invalid_argument(std::string(what) + ": trace differs from 1");
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() >= -tol))
        throw std::invalid_argument(std::string(what) + ": negative eigenvalue");
}

}  // namespace

QubitState::QubitState(const Eigen::Matrix2cd& m, double tol) : m_(m) {
    validate_density_matrix(m_, tol, "QubitState");
}

QubitState QubitState::pure(const Eigen::Vector2cd& ket) {
    const double n = ket.norm();
    if (!(n > 0.0)) throw std::invalid_argument("QubitState::pure: zero ket");
    const Eigen::Vector2cd v = ket / n;
    return QubitState((v * v.adjoint()).eval());
}

std::array<double, 8> QubitState::to_reals() const {
    std::array<double, 8> out{};
    std::size_t k = 0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            out[k++] = m_(i, j).real();
            out[k++] = m_(i, j).imag();
        }
    return out;
}

QubitState QubitState::from_reals(const std::array<double, 8>& r, double tol) {
    Eigen::Matrix2cd m;
    std::size_t k = 0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            m(i, j) = complexd(r[k], r[k + 1]);
            k += 2;
        }
    return QubitState(m, tol);
}

TwoQubitState::TwoQubitState(const Eigen::Matrix4cd& m, double tol) : m_(m) {
    validate_density_matrix(m_, tol, "TwoQubitState");
}

TwoQubitState TwoQubitState::pure(const Eigen::Vector4cd& ket) {
    const double n = ket.norm();
    if (!(n > 0.0)) throw std::invalid_argument("TwoQubitState::pure: zero ket");
    const Eigen::Vector4cd v = ket / n;
    return TwoQubitState((v * v.adjoint()).eval());
}

std::array<double, 32> TwoQubitState::to_reals() const {
    std::array<double, 32> out{};
    std::size_t k = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            out[k++] = m_(i, j).real();
            out[k++] = m_(i, j).imag();
        }
    return out;
}

TwoQubitState TwoQubitState::from_reals(const std::array<double, 32>& r, double tol) {
    Eigen::Matrix4cd m;
    std::size_t k = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            m(i, j) = complexd(r[k], r[k + 1]);
            k += 2;
        }
    return TwoQubitState(m, tol);
}

double BlochVector::norm() const { return std::sqrt(x * x + y * y + z * z); }

double trace_distance(const QubitState& rho1, const QubitState& rho2) {
    // 2x2 Hermitian difference: eigenvalues in closed form from trace and det.
    const Eigen::Matrix2cd d = rho1.matrix() - rho2.matrix();
    const double tr = d.trace().real();
    const double det = (d(0, 0) * d(1, 1) - d(0, 1) * d(1, 0)).real();
    const double disc = std::sqrt(std::max(tr * tr - 4.0 * det, 0.0));
    const double e1 = 0.5 * (tr + disc);
    const double e2 = 0.5 * (tr - disc);
    return 0.5 * (std::abs(e1) + std::abs(e2));
}

double concurrence(const TwoQubitState& rho) {
    const Eigen::Matrix2cd sy = pauli::y();
    Eigen::Matrix4cd syy = Eigen::Matrix4cd::Zero();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l)
                    syy(2 * i + k, 2 * j + l) = sy(i, j) * sy(k, l);

    const Eigen::Matrix4cd& m = rho.matrix();
    const Eigen::Matrix4cd rho_tilde = syy * m.conjugate() * syy;
    Eigen::ComplexEigenSolver<Eigen::Matrix4cd> es(m * rho_tilde, false);

    std::array<double, 4> lam{};
    for (int i = 0; i < 4; ++i)
        lam[i] = std::sqrt(std::max(es.eigenvalues()(i).real(), 0.0));
    std::sort(lam.begin(), lam.end(), std::greater<>());
    return std::max(0.0, lam[0] - lam[1] - lam[2] - lam[3]);
}

QubitState bloch_to_state(const BlochVector& v) {
    const double n = v.norm();
    if (!(n <= 1.0 + kStateTol))
        throw std::invalid_argument("bloch_to_state: vector outside unit ball");
    Eigen::Matrix2cd m;
    m(0, 0) = complexd(0.5 * (1.0 + v.z), 0.0);
    m(1, 1) = complexd(0.5 * (1.0 - v.z), 0.0);
    m(0, 1) = complexd(0.5 * v.x, -0.5 * v.y);
    m(1, 0) = std::conj(m(0, 1));
    // norms within 1+tol can overshoot PSD by ~tol/2; the constructor tolerance covers it
    return QubitState(m);
}

BlochVector state_to_bloch(const QubitState& rho) {
    const Eigen::Matrix2cd& m = rho.matrix();
    BlochVector v;
    v.x = 2.0 * m(0, 1).real();
    v.y = -2.0 * m(0, 1).imag();
    v.z = (m(0, 0) - m(1, 1)).real();
    return v;
}

namespace pauli {

Eigen::Matrix2cd identity() { return Eigen::Matrix2cd::Identity(); }

Eigen::Matrix2cd x() {
    Eigen::Matrix2cd m;
    m << 0, 1, 1, 0;
    return m;
}

Eigen::Matrix2cd y() {
    Eigen::Matrix2cd m;
    m << complexd(0, 0), complexd(0, -1), complexd(0, 1), complexd(0, 0);
    return m;
}

Eigen::Matrix2cd z() {
    Eigen::Matrix2cd m;
    m << 1, 0, 0, -1;
    return m;
}

}  // namespace pauli

}  // namespace nmsim

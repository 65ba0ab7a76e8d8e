#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>

namespace nmsim {

using complexd = std::complex<double>;

inline constexpr double kStateTol = 1e-12;

// Validated 2x2 density matrix. Basis convention: index 0 = |H>, index 1 = |V>.
// Immutable after construction; all operations below are pure functions.
class QubitState {
public:
    explicit QubitState(const Eigen::Matrix2cd& m, double tol = kStateTol);

    static QubitState pure(const Eigen::Vector2cd& ket);

    const Eigen::Matrix2cd& matrix() const { return m_; }

    // 8 reals, row-major, re/im interleaved.
    std::array<double, 8> to_reals() const;
    static QubitState from_reals(const std::array<double, 8>& r, double tol = kStateTol);

private:
    Eigen::Matrix2cd m_;
};

// Validated 4x4 density matrix, basis ordering |HH>,|HV>,|VH>,|VV> (system first).
class TwoQubitState {
public:
    explicit TwoQubitState(const Eigen::Matrix4cd& m, double tol = kStateTol);

    static TwoQubitState pure(const Eigen::Vector4cd& ket);

    const Eigen::Matrix4cd& matrix() const { return m_; }

    std::array<double, 32> to_reals() const;
    static TwoQubitState from_reals(const std::array<double, 32>& r, double tol = kStateTol);

private:
    Eigen::Matrix4cd m_;
};

// Convention: z = +1 <-> |H>, x = +1 <-> |+> = (|H>+|V>)/sqrt(2).
struct BlochVector {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double norm() const;
};

// D(rho1, rho2) = (1/2) sum of |eigenvalues| of rho1 - rho2; in [0, 1].
double trace_distance(const QubitState& rho1, const QubitState& rho2);

// Wootters concurrence max(0, l1-l2-l3-l4), li = sqrt eigenvalues of
// rho (sy (x) sy) conj(rho) (sy (x) sy) in decreasing order.
double concurrence(const TwoQubitState& rho);

QubitState bloch_to_state(const BlochVector& v);
BlochVector state_to_bloch(const QubitState& rho);

namespace pauli {
Eigen::Matrix2cd identity();
Eigen::Matrix2cd x();
Eigen::Matrix2cd y();
Eigen::Matrix2cd z();
}  // namespace pauli

}  // namespace nmsim

#pragma once
// Small dense symmetric eigen-solvers (closed form 2x2, cyclic Jacobi up to
// 8x8) and the complex arithmetic needed for frequency responses of one- and
// two-state controllers. Deliberately dependency free: every matrix that
// appears in the certificate checks is at most 3x3.

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

namespace vacnet {

using Mat2 = std::array<std::array<double, 2>, 2>;

// Eigenvalues of a symmetric 2x2, ascending.
std::array<double, 2> sym_eig_2x2(const Mat2& m);

// Eigenvalues of a symmetric n x n (n <= 8) via cyclic Jacobi rotations,
// ascending. Caps at max_sweeps; off-diagonal norm threshold 1e-12 relative.
std::vector<double> sym_eig_jacobi(std::vector<std::vector<double>> m,
                                   int max_sweeps = 100);

// State-space realization of a SISO LTI controller, up to two states.
struct Lti {
    std::size_t n = 0;                       // state dimension, 0..2
    Mat2 A{{{0, 0}, {0, 0}}};
    std::array<double, 2> B{0, 0};
    std::array<double, 2> C{0, 0};
    double D = 0.0;
};

// H(jw) = D + C (jwI - A)^-1 B
std::complex<double> lti_response(const Lti& sys, double omega);

// true iff all eigenvalues of A (restricted to sys.n states) have negative
// real part
bool is_hurwitz(const Lti& sys);

} // namespace vacnet

#include "vacnet/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vacnet {

std::array<double, 2> sym_eig_2x2(const Mat2& m) {
    double a = m[0][0], b = 0.5 * (m[0][1] + m[1][0]), c = m[1][1];
    double tr = a + c;
    double disc = std::sqrt(std::max(0.0, 0.25 * (a - c) * (a - c) + b * b));
    return {0.5 * tr - disc, 0.5 * tr + disc};
}

std::vector<double> sym_eig_jacobi(std::vector<std::vector<double>> m, int max_sweeps) {
    const std::size_t n = m.size();
    for (const auto& row : m)
        if (row.size() != n) throw std::invalid_argument("matrix not square");
    // symmetrize once; the iteration preserves symmetry
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double v = 0.5 * (m[i][j] + m[j][i]);
            m[i][j] = m[j][i] = v;
        }

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += m[i][j] * m[i][j];
        if (off < 1e-24) break;

        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(m[p][q]) < 1e-300) continue;
                double theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double mkp = m[k][p], mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double mpk = m[p][k], mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
    }

    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = m[i][i];
    std::sort(eig.begin(), eig.end());
    return eig;
}

std::complex<double> lti_response(const Lti& sys, double omega) {
    const std::complex<double> jw(0.0, omega);
    switch (sys.n) {
    case 0:
        return {sys.D, 0.0};
    case 1: {
        // D + C (jw - A)^-1 B, scalars
        return sys.D + sys.C[0] * sys.B[0] / (jw - sys.A[0][0]);
    }
    case 2: {
        std::complex<double> m00 = jw - sys.A[0][0], m01 = -sys.A[0][1];
        std::complex<double> m10 = -sys.A[1][0], m11 = jw - sys.A[1][1];
        std::complex<double> det = m00 * m11 - m01 * m10;
        // inv = [m11 -m01; -m10 m00] / det
        std::complex<double> x0 = (m11 * sys.B[0] - m01 * sys.B[1]) / det;
        std::complex<double> x1 = (-m10 * sys.B[0] + m00 * sys.B[1]) / det;
        return sys.D + sys.C[0] * x0 + sys.C[1] * x1;
    }
    default:
        throw std::invalid_argument("lti_response supports n <= 2");
    }
}

bool is_hurwitz(const Lti& sys) {
    switch (sys.n) {
    case 0:
        return true;
    case 1:
        return sys.A[0][0] < 0.0;
    case 2: {
        double tr = sys.A[0][0] + sys.A[1][1];
        double det = sys.A[0][0] * sys.A[1][1] - sys.A[0][1] * sys.A[1][0];
        return tr < 0.0 && det > 0.0;
    }
    default:
        throw std::invalid_argument("is_hurwitz supports n <= 2");
    }
}

} // namespace vacnet

#include "wfsim/qmath.hpp"

#include "wfsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wfsim::qmath {

CMatrix CMatrix::identity(std::size_t n) {
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

cplx inner(const CVector& a, const CVector& b) {
    if (a.dim() != b.dim()) throw LayoutError("inner: dimension mismatch");
    cplx s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

double norm(const CVector& a) {
    double s = 0.0;
    for (const cplx& c : a.v) s += std::norm(c);
    return std::sqrt(s);
}

bool is_normalized(const CVector& a, double tol) {
    return std::abs(norm(a) - 1.0) <= tol;
}

CVector normalized(const CVector& a) {
    double n = norm(a);
    if (n < 1e-300) throw NormalizationError("normalized: zero vector");
    return scaled(a, 1.0 / n);
}

CVector scaled(const CVector& a, cplx factor) {
    CVector out(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) out[i] = a[i] * factor;
    return out;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows * b.rows, a.cols * b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) {
            const cplx f = a(i, j);
            if (f == cplx(0.0)) continue;
            for (std::size_t k = 0; k < b.rows; ++k)
                for (std::size_t l = 0; l < b.cols; ++l)
                    out(i * b.rows + k, j * b.cols + l) = f * b(k, l);
        }
    return out;
}

CVector kron(const CVector& a, const CVector& b) {
    CVector out(a.dim() * b.dim());
    for (std::size_t i = 0; i < a.dim(); ++i)
        for (std::size_t j = 0; j < b.dim(); ++j)
            out[i * b.dim() + j] = a[i] * b[j];
    return out;
}

CMatrix matmul(const CMatrix& a, const CMatrix& b) {
    if (a.cols != b.rows) throw LayoutError("matmul: dimension mismatch");
    CMatrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const cplx f = a(i, k);
            if (f == cplx(0.0)) continue;
            for (std::size_t j = 0; j < b.cols; ++j)
                out(i, j) += f * b(k, j);
        }
    return out;
}

CVector apply(const CMatrix& m, const CVector& v) {
    if (m.cols != v.dim()) throw LayoutError("apply: dimension mismatch");
    CVector out(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        cplx s = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) s += m(i, j) * v[j];
        out[i] = s;
    }
    return out;
}

CMatrix adjoint(const CMatrix& m) {
    CMatrix out(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j)
            out(j, i) = std::conj(m(i, j));
    return out;
}

CMatrix add(const CMatrix& a, const CMatrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw LayoutError("add: shape mismatch");
    CMatrix out = a;
    for (std::size_t i = 0; i < b.a.size(); ++i) out.a[i] += b.a[i];
    return out;
}

CMatrix scaled(const CMatrix& m, cplx factor) {
    CMatrix out = m;
    for (cplx& c : out.a) c *= factor;
    return out;
}

cplx trace(const CMatrix& m) {
    if (m.rows != m.cols) throw LayoutError("trace: matrix not square");
    cplx s = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) s += m(i, i);
    return s;
}

CMatrix outer(const CVector& ket, const CVector& bra) {
    CMatrix out(ket.dim(), bra.dim());
    for (std::size_t i = 0; i < ket.dim(); ++i)
        for (std::size_t j = 0; j < bra.dim(); ++j)
            out(i, j) = ket[i] * std::conj(bra[j]);
    return out;
}

double max_abs_diff(const CMatrix& a, const CMatrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw LayoutError("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.a.size(); ++i)
        m = std::max(m, std::abs(a.a[i] - b.a[i]));
    return m;
}

bool is_unitary(const CMatrix& m, double tol) {
    if (m.rows != m.cols) return false;
    return max_abs_diff(matmul(adjoint(m), m), CMatrix::identity(m.rows)) <= tol;
}

bool is_hermitian(const CMatrix& m, double tol) {
    if (m.rows != m.cols) return false;
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = i; j < m.cols; ++j)
            if (std::abs(m(i, j) - std::conj(m(j, i))) > tol) return false;
    return true;
}

bool is_density(const CMatrix& m, double tol, double eigTol) {
    if (m.rows != m.cols) return false;
    if (!is_hermitian(m, tol)) return false;
    if (std::abs(trace(m) - cplx(1.0)) > tol) return false;
    std::vector<double> ev = hermitian_eigenvalues(m);
    return ev.front() >= -eigTol;
}

CMatrix projector(const CVector& v) {
    if (!is_normalized(v)) throw NormalizationError("projector: vector not normalized");
    return outer(v, v);
}

CMatrix partial_trace(const CMatrix& rho, const std::vector<std::size_t>& dims,
                      const std::vector<std::size_t>& keep) {
    std::size_t total = 1;
    for (std::size_t d : dims) {
        if (d == 0) throw LayoutError("partial_trace: zero factor dimension");
        total *= d;
    }
    if (rho.rows != total || rho.cols != total)
        throw LayoutError("partial_trace: dims do not factor the matrix");
    std::vector<bool> kept(dims.size(), false);
    std::size_t keepDim = 1;
    for (std::size_t k : keep) {
        if (k >= dims.size()) throw LayoutError("partial_trace: keep index out of range");
        if (kept[k]) throw LayoutError("partial_trace: duplicate keep index");
        kept[k] = true;
        keepDim *= dims[k];
    }

    const std::size_t nf = dims.size();
    std::vector<std::size_t> digits(nf), jdigits(nf);
    auto decompose = [&](std::size_t idx, std::vector<std::size_t>& out) {
        for (std::size_t f = nf; f-- > 0;) {
            out[f] = idx % dims[f];
            idx /= dims[f];
        }
    };
    auto keep_index = [&](const std::vector<std::size_t>& d) {
        std::size_t idx = 0;
        for (std::size_t k : keep) idx = idx * dims[k] + d[k];
        return idx;
    };

    CMatrix out(keepDim, keepDim);
    for (std::size_t i = 0; i < total; ++i) {
        decompose(i, digits);
        for (std::size_t j = 0; j < total; ++j) {
            decompose(j, jdigits);
            bool diagonalInTraced = true;
            for (std::size_t f = 0; f < nf; ++f)
                if (!kept[f] && digits[f] != jdigits[f]) {
                    diagonalInTraced = false;
                    break;
                }
            if (diagonalInTraced)
                out(keep_index(digits), keep_index(jdigits)) += rho(i, j);
        }
    }
    return out;
}

double purity(const CMatrix& rho) {
    if (!is_density(rho)) throw ContractError("purity: input is not a density matrix");
    return trace(matmul(rho, rho)).real();
}

cplx expectation(const CMatrix& m, const CVector& v) {
    return inner(v, apply(m, v));
}

namespace {

// One cyclic sweep of complex Jacobi rotations, accumulating into V when
// eigenvectors are requested. Returns the residual off-diagonal norm.
double jacobi_sweep(CMatrix& A, CMatrix* V) {
    const std::size_t n = A.rows;
    for (std::size_t p = 0; p + 1 < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
            const cplx apq = A(p, q);
            const double r = std::abs(apq);
            if (r < 1e-300) continue;
            const cplx phase = apq / r; // e^{i phi}
            const double alpha = A(p, p).real();
            const double beta = A(q, q).real();
            double t;
            if (std::abs(alpha - beta) < 1e-300 * r) {
                t = 1.0;
            } else {
                const double tau = (alpha - beta) / (2.0 * r);
                t = ((tau >= 0.0) ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
            }
            const double c = 1.0 / std::sqrt(1.0 + t * t);
            const double s = t * c;
            const cplx jpq = -s * phase;
            const cplx jqp = s * std::conj(phase);

            // A <- A J (columns p, q)
            for (std::size_t k = 0; k < n; ++k) {
                const cplx akp = A(k, p);
                const cplx akq = A(k, q);
                A(k, p) = c * akp + jqp * akq;
                A(k, q) = jpq * akp + c * akq;
            }
            // A <- J^H A (rows p, q)
            for (std::size_t k = 0; k < n; ++k) {
                const cplx apk = A(p, k);
                const cplx aqk = A(q, k);
                A(p, k) = c * apk + std::conj(jqp) * aqk;
                A(q, k) = std::conj(jpq) * apk + c * aqk;
            }
            if (V) {
                for (std::size_t k = 0; k < n; ++k) {
                    const cplx vkp = (*V)(k, p);
                    const cplx vkq = (*V)(k, q);
                    (*V)(k, p) = c * vkp + jqp * vkq;
                    (*V)(k, q) = jpq * vkp + c * vkq;
                }
            }
        }
    }
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) off += std::norm(A(i, j));
    return std::sqrt(off);
}

std::pair<std::vector<double>, CMatrix> jacobi(const CMatrix& m, bool wantVectors) {
    if (m.rows != m.cols) throw LayoutError("eigensystem: matrix not square");
    if (!is_hermitian(m, 1e-9)) throw ContractError("eigensystem: matrix not Hermitian");
    const std::size_t n = m.rows;
    CMatrix A = m;
    // Symmetrize so tiny anti-Hermitian noise cannot bias the rotations.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const cplx mean = 0.5 * (A(i, j) + std::conj(A(j, i)));
            A(i, j) = mean;
            A(j, i) = std::conj(mean);
        }
        A(i, i) = cplx(A(i, i).real(), 0.0);
    }
    CMatrix V = wantVectors ? CMatrix::identity(n) : CMatrix();

    double scale = 0.0;
    for (const cplx& c : A.a) scale = std::max(scale, std::abs(c));
    const double target = std::max(scale, 1.0) * 1e-14;
    for (int sweep = 0; sweep < 100; ++sweep) {
        if (jacobi_sweep(A, wantVectors ? &V : nullptr) <= target) break;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return A(i, i).real() < A(j, j).real(); });

    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = A(order[i], order[i]).real();
    if (!wantVectors) return {values, CMatrix()};

    CMatrix sorted(n, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i)
            sorted(i, j) = V(i, order[j]);
    return {values, sorted};
}

} // namespace

std::vector<double> hermitian_eigenvalues(const CMatrix& m) {
    return jacobi(m, false).first;
}

std::pair<std::vector<double>, CMatrix> hermitian_eigensystem(const CMatrix& m) {
    return jacobi(m, true);
}

CVector ket_plus() { return CVector{1.0, 0.0}; }
CVector ket_minus() { return CVector{0.0, 1.0}; }

CVector ket_plus_x() {
    const double r = 1.0 / std::sqrt(2.0);
    return CVector{r, r};
}

CVector ket_minus_x() {
    const double r = 1.0 / std::sqrt(2.0);
    return CVector{r, -r};
}

CVector ket_plus_theta(double theta) {
    return CVector{std::cos(theta / 2.0), std::sin(theta / 2.0)};
}

CVector ket_minus_theta(double theta) {
    return CVector{-std::sin(theta / 2.0), std::cos(theta / 2.0)};
}

CMatrix pauli_x() {
    CMatrix m(2, 2);
    m(0, 1) = 1.0;
    m(1, 0) = 1.0;
    return m;
}

CMatrix pauli_y() {
    CMatrix m(2, 2);
    m(0, 1) = cplx(0.0, -1.0);
    m(1, 0) = cplx(0.0, 1.0);
    return m;
}

CMatrix pauli_z() {
    CMatrix m(2, 2);
    m(0, 0) = 1.0;
    m(1, 1) = -1.0;
    return m;
}

CMatrix sigma_theta(double theta) {
    return add(scaled(pauli_z(), std::cos(theta)), scaled(pauli_x(), std::sin(theta)));
}

} // namespace wfsim::qmath

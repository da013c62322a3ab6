// Dense complex linear algebra kernel: vectors, row-major matrices, tensor
// products, projectors, partial trace, purity, Hermitian eigensystems.
// Everything is value-semantic and small (largest protocol space: 144 dims).
#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <vector>

namespace wfsim::qmath {

using cplx = std::complex<double>;

// Tolerances for algebraic identities and eigenvalue positivity.
inline constexpr double kAlgebraTol = 1e-12;
inline constexpr double kEigenTol = 1e-10;

struct CVector {
    std::vector<cplx> v;

    CVector() = default;
    explicit CVector(std::size_t n) : v(n) {}
    CVector(std::initializer_list<cplx> init) : v(init) {}

    std::size_t dim() const { return v.size(); }
    cplx& operator[](std::size_t i) { return v[i]; }
    const cplx& operator[](std::size_t i) const { return v[i]; }
};

struct CMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<cplx> a; // row-major

    CMatrix() = default;
    CMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c) {}

    cplx& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    const cplx& operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    static CMatrix identity(std::size_t n);
};

cplx inner(const CVector& a, const CVector& b); // <a|b>, conjugate-linear in a
double norm(const CVector& a);
bool is_normalized(const CVector& a, double tol = kAlgebraTol);
CVector normalized(const CVector& a);
CVector scaled(const CVector& a, cplx factor);

CMatrix kron(const CMatrix& a, const CMatrix& b);
CVector kron(const CVector& a, const CVector& b);
CMatrix matmul(const CMatrix& a, const CMatrix& b);
CVector apply(const CMatrix& m, const CVector& v);
CMatrix adjoint(const CMatrix& m);
CMatrix add(const CMatrix& a, const CMatrix& b);
CMatrix scaled(const CMatrix& m, cplx factor);
cplx trace(const CMatrix& m);
CMatrix outer(const CVector& ket, const CVector& bra); // |ket><bra|

double max_abs_diff(const CMatrix& a, const CMatrix& b);
bool is_unitary(const CMatrix& m, double tol = kAlgebraTol);
bool is_hermitian(const CMatrix& m, double tol = kAlgebraTol);
bool is_density(const CMatrix& m, double tol = kAlgebraTol, double eigTol = kEigenTol);

// |v><v| for normalized v; throws NormalizationError otherwise.
CMatrix projector(const CVector& v);

// Trace out the factors not listed in `keep` (indices into `dims`).
// `keep` preserves the relative order of the kept factors.
CMatrix partial_trace(const CMatrix& rho, const std::vector<std::size_t>& dims,
                      const std::vector<std::size_t>& keep);

// Tr(rho^2); throws ContractError unless rho passes the density checks.
double purity(const CMatrix& rho);

cplx expectation(const CMatrix& m, const CVector& v); // <v|M|v>

// Cyclic Jacobi for Hermitian matrices. Eigenvalues ascending; the columns of
// .second are the matching eigenvectors.
std::vector<double> hermitian_eigenvalues(const CMatrix& m);
std::pair<std::vector<double>, CMatrix> hermitian_eigensystem(const CMatrix& m);

// Standard kets and operators (z-computational basis, |+> = index 0).
CVector ket_plus();
CVector ket_minus();
CVector ket_plus_x();
CVector ket_minus_x();
CVector ket_plus_theta(double theta);  // cos(t/2)|+> + sin(t/2)|->
CVector ket_minus_theta(double theta); // -sin(t/2)|+> + cos(t/2)|->
CMatrix pauli_x();
CMatrix pauli_y();
CMatrix pauli_z();
CMatrix sigma_theta(double theta); // cos(t) sz + sin(t) sx

} // namespace wfsim::qmath

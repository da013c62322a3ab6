// Continuous Gaussian pointer model for the super-observers' weak
// measurements: weak values, exact finite-g coupling, post-selection,
// analytic unnormalized moments, and position sampling.
//
// Pointer wavefunctions are phi_a(x) = (2 pi w^2)^{-1/4} exp(-(x-a)^2/(4w^2)),
// so <phi_a|phi_b> = exp(-(a-b)^2/(8w^2)) and
// <phi_a|X|phi_b> = ((a+b)/2) exp(-(a-b)^2/(8w^2)). Both identities are exact,
// which keeps every moment here closed-form; the quadrature grid appears only
// as an independent oracle in the tests.
#pragma once

#include "wfsim/qmath.hpp"
#include "wfsim/registers.hpp"
#include "wfsim/rng.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace wfsim::weakmeas {

double gaussian_overlap(double a, double b, double w);
double gaussian_x_overlap(double a, double b, double w);
double gaussian_amplitude(double x, double a, double w);

struct GaussianTerm {
    qmath::cplx amp;
    double shift1 = 0.0;
    double shift2 = 0.0;
};

struct HybridTerm {
    std::size_t discreteIndex = 0;
    GaussianTerm gauss;
};

// Finite superposition sum_t amp_t |d_t> |phi_{shift1,t}> |phi_{shift2,t}>.
struct HybridState {
    registers::RegisterLayout layout;
    double width = 1.0;
    std::vector<HybridTerm> terms;
};

struct PostSelection {
    double theta1 = 0.0;
    double theta2 = 0.0;
    int direction = +1; // +1 filters the positive outcome |+theta>
};

// <post|O|pre> / <post|pre>; throws SingularError when |<post|pre>| <= 1e-12.
qmath::cplx weak_value(const qmath::CVector& pre, const qmath::CVector& post,
                       const qmath::CMatrix& O);

// Tensor two unshifted width-w pointers onto every discrete amplitude.
HybridState attach_pointers(const registers::DiscreteState& state, double w);

// exp(-i g sigma_z P) on the named qubit: |+> shifts the pointer by +g,
// |-> by -g. Exact for all g.
HybridState couple(const HybridState& h, const std::string& qubit, int pointerIndex, double g);

// <phi|phi'> Gram norm squared of the state.
double norm2(const HybridState& h);

// Project Q1 onto |+theta1> and Q2 onto |+theta2> (contracting both registers
// out). Returns the unnormalized branch and its squared norm.
std::pair<HybridState, double> postselect_qubits(const HybridState& h, const PostSelection& ps);

// Contract one qubit register onto `target` (unnormalized branch).
HybridState project_qubit(const HybridState& h, const std::string& reg,
                          const qmath::CVector& target);

// <Psi|X1 X2|Psi> on the (unnormalized) branch, via the Gaussian identities.
double joint_position_moment(const HybridState& h);

// <Psi|X_i|Psi> for pointerIndex 1 or 2.
double position_moment(const HybridState& h, int pointerIndex);

// joint_position_moment / norm2; SingularError when norm2 < 1e-14.
double normalized_position_moment(const HybridState& h);

// Reduced density matrix of named registers, tracing the pointers (Gaussian
// overlaps) and the remaining registers.
qmath::CMatrix reduced_dm(const HybridState& h, const std::vector<std::string>& names);

// Collapse the pointers at measured positions: the discrete amplitudes become
// sum_t amp_t phi(x1 - shift1_t) phi(x2 - shift2_t); result is normalized.
registers::DiscreteState collapse_at_positions(const HybridState& h, double x1, double x2);

// Samples (x1, x2) from the normalized joint position density of the branch
// by tabulated inverse-CDF (4096 points per pointer, range extended 8w past
// the extreme shifts). Construction is the expensive part; reuse across
// trials with identical branches.
class PositionSampler {
public:
    explicit PositionSampler(const HybridState& h, std::size_t gridPoints = 4096);

    std::pair<double, double> sample(RandomStream& rng) const;

private:
    struct Pair {
        double weight;     // |amp|^2 on the diagonal, 2 Re(conj(a) b) off it
        double a1, b1;     // pointer-1 shifts of the two terms
        double a2, b2;     // pointer-2 shifts
        std::vector<double> cum2; // cumulative integral of phi(x-a2) phi(x-b2)
    };

    double width_;
    std::size_t n_;
    double x1lo_, x1hi_, dx1_;
    double x2lo_, x2hi_, dx2_;
    std::vector<Pair> pairs_;
    std::vector<double> cum1_; // cumulative x1 marginal

    double conditional_cdf(const std::vector<double>& coef, std::size_t k) const;
};

// One-shot convenience wrapper around PositionSampler.
std::pair<double, double> sample_positions(const HybridState& h, RandomStream& rng);

} // namespace wfsim::weakmeas

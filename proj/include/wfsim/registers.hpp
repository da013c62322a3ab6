// Labeled tensor-product state management for the discrete degrees of
// freedom: the friend's spin S_F, apparatus M, environment E, Alice's qubit
// A, and the two emitted qubits Q1, Q2. Includes the friend's
// measure-and-reset isometry and projective measurement with sampling.
#pragma once

#include "wfsim/qmath.hpp"
#include "wfsim/rng.hpp"

#include <string>
#include <vector>

namespace wfsim::registers {

// Basis index conventions. Qubit registers: |+> = 0, |-> = 1.
// Apparatus M: m0 = 0, m+ = 1, m- = 2. Environment E: e0 = 0, e+ = 1, e- = 2.
inline constexpr std::size_t kReady = 0;   // m0 / e0
inline constexpr std::size_t kRecPlus = 1; // m+ / e+
inline constexpr std::size_t kRecMinus = 2;

struct Register {
    std::string name;
    std::size_t dim = 0;

    bool operator==(const Register&) const = default;
};

struct RegisterLayout {
    std::vector<Register> registers;

    std::size_t total_dim() const;
    std::size_t position_of(const std::string& name) const; // throws LayoutError
    bool has(const std::string& name) const;
    std::vector<std::size_t> dims() const;
    // Index stride of the register at `pos` (product of dims after it).
    std::size_t stride_at(std::size_t pos) const;
    bool operator==(const RegisterLayout&) const = default;
};

// Layout before qubit emission: [S_F:2, M:3, E:3, A:2].
RegisterLayout protocol_layout();

struct DiscreteState {
    RegisterLayout layout;
    qmath::CVector amplitudes;
    bool normFlag = true; // false marks an unnormalized branch

    double norm() const { return qmath::norm(amplitudes); }
};

struct MeasurementOutcome {
    std::string reg;
    std::string basisLabel;
    std::size_t index = 0; // basis vector index
    int value = 0;         // +1 for index 0, -1 otherwise
    double probability = 0.0;
};

// alpha |+, m0, e0, +> + beta |-, m0, e0, -> on the protocol layout.
DiscreteState prepare_initial(qmath::cplx alpha, qmath::cplx beta);

// Partial isometry |s, m0, e0> -> |s0, m0, e_s> on S_F (x) M (x) E, extended
// by identity on the remaining registers. Default reset target s0 = |+>.
DiscreteState friend_measure_and_reset(const DiscreteState& state,
                                       const qmath::CVector& s0 = qmath::ket_plus());

// Born-rule measurement of one register in an orthonormal complete basis.
std::pair<MeasurementOutcome, DiscreteState>
measure_projective(const DiscreteState& state, const std::string& reg,
                   const std::vector<qmath::CVector>& basis,
                   const std::string& basisLabel, RandomStream& rng);

// Tensor the (normalized) qubits q1, q2 onto the state as registers Q1, Q2.
DiscreteState append_qubits(const DiscreteState& state, const qmath::CVector& q1,
                            const qmath::CVector& q2);

// Entangled emission: e+/- -> e+/- (x) |+/-> |+/->, extended linearly. The
// E register must have no e0 support.
DiscreteState controlled_emit(const DiscreteState& state);

// Density matrix of the named registers (in the order given).
qmath::CMatrix reduced_dm(const DiscreteState& state, const std::vector<std::string>& names);

// Unnormalized branch <target|_reg |state>; the register stays in place,
// re-tensored with `target`. Squared norm of the result is the Born weight.
DiscreteState project_register(const DiscreteState& state, const std::string& reg,
                               const qmath::CVector& target);

// Contract one register out entirely: amplitudes <target|_reg |state> on the
// layout without `reg`. Unnormalized.
DiscreteState contract_register(const DiscreteState& state, const std::string& reg,
                                const qmath::CVector& target);

DiscreteState normalized(const DiscreteState& state);

} // namespace wfsim::registers

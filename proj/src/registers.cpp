#include "wfsim/registers.hpp"

#include "wfsim/errors.hpp"

#include <algorithm>
#include <cmath>

namespace wfsim::registers {

std::size_t RegisterLayout::total_dim() const {
    std::size_t d = 1;
    for (const Register& r : registers) d *= r.dim;
    return d;
}

std::size_t RegisterLayout::position_of(const std::string& name) const {
    for (std::size_t i = 0; i < registers.size(); ++i)
        if (registers[i].name == name) return i;
    throw LayoutError("unknown register '" + name + "'");
}

bool RegisterLayout::has(const std::string& name) const {
    for (const Register& r : registers)
        if (r.name == name) return true;
    return false;
}

std::vector<std::size_t> RegisterLayout::dims() const {
    std::vector<std::size_t> d;
    d.reserve(registers.size());
    for (const Register& r : registers) d.push_back(r.dim);
    return d;
}

std::size_t RegisterLayout::stride_at(std::size_t pos) const {
    std::size_t s = 1;
    for (std::size_t i = pos + 1; i < registers.size(); ++i) s *= registers[i].dim;
    return s;
}

RegisterLayout protocol_layout() {
    return RegisterLayout{{{"S_F", 2}, {"M", 3}, {"E", 3}, {"A", 2}}};
}

namespace {

// Component of `index` belonging to the register at `pos`.
std::size_t digit_of(const RegisterLayout& layout, std::size_t index, std::size_t pos) {
    return (index / layout.stride_at(pos)) % layout.registers[pos].dim;
}

std::size_t with_digit(const RegisterLayout& layout, std::size_t index, std::size_t pos,
                       std::size_t value) {
    const std::size_t stride = layout.stride_at(pos);
    const std::size_t dim = layout.registers[pos].dim;
    const std::size_t old = (index / stride) % dim;
    return index + (value - old) * stride;
}

} // namespace

DiscreteState prepare_initial(qmath::cplx alpha, qmath::cplx beta) {
    const double n2 = std::norm(alpha) + std::norm(beta);
    if (std::abs(n2 - 1.0) > qmath::kAlgebraTol)
        throw NormalizationError("prepare_initial: |alpha|^2 + |beta|^2 != 1");
    DiscreteState st;
    st.layout = protocol_layout();
    st.amplitudes = qmath::CVector(st.layout.total_dim());
    // Strides for [S_F:2, M:3, E:3, A:2] are [18, 6, 2, 1].
    st.amplitudes[0 * 18 + 0 * 6 + 0 * 2 + 0] = alpha; // |+, m0, e0, +>
    st.amplitudes[1 * 18 + 0 * 6 + 0 * 2 + 1] = beta;  // |-, m0, e0, ->
    return st;
}

DiscreteState friend_measure_and_reset(const DiscreteState& state, const qmath::CVector& s0) {
    if (s0.dim() != 2 || !qmath::is_normalized(s0))
        throw NormalizationError("friend_measure_and_reset: s0 must be a normalized qubit state");
    const RegisterLayout& lay = state.layout;
    const std::size_t pS = lay.position_of("S_F");
    const std::size_t pM = lay.position_of("M");
    const std::size_t pE = lay.position_of("E");

    DiscreteState out = state;
    out.amplitudes = qmath::CVector(state.amplitudes.dim());
    for (std::size_t i = 0; i < state.amplitudes.dim(); ++i) {
        const qmath::cplx amp = state.amplitudes[i];
        if (amp == qmath::cplx(0.0)) continue;
        if (digit_of(lay, i, pM) != kReady || digit_of(lay, i, pE) != kReady)
            throw DomainError("friend_measure_and_reset: support outside |m0, e0| domain");
        const std::size_t s = digit_of(lay, i, pS);
        const std::size_t eNew = (s == 0) ? kRecPlus : kRecMinus;
        const std::size_t base = with_digit(lay, i, pE, eNew);
        for (std::size_t sNew = 0; sNew < 2; ++sNew) {
            if (s0[sNew] == qmath::cplx(0.0)) continue;
            out.amplitudes[with_digit(lay, base, pS, sNew)] += amp * s0[sNew];
        }
    }
    return out;
}

std::pair<MeasurementOutcome, DiscreteState>
measure_projective(const DiscreteState& state, const std::string& reg,
                   const std::vector<qmath::CVector>& basis,
                   const std::string& basisLabel, RandomStream& rng) {
    const RegisterLayout& lay = state.layout;
    const std::size_t pos = lay.position_of(reg);
    const std::size_t dim = lay.registers[pos].dim;
    if (basis.size() != dim) throw BasisError("measure_projective: basis incomplete for '" + reg + "'");
    for (std::size_t a = 0; a < dim; ++a) {
        if (basis[a].dim() != dim) throw BasisError("measure_projective: basis vector dim mismatch");
        for (std::size_t b = a; b < dim; ++b) {
            const qmath::cplx ip = qmath::inner(basis[a], basis[b]);
            const double want = (a == b) ? 1.0 : 0.0;
            if (std::abs(ip - want) > qmath::kAlgebraTol)
                throw BasisError("measure_projective: basis not orthonormal");
        }
    }

    std::vector<DiscreteState> branches;
    std::vector<double> probs(dim);
    branches.reserve(dim);
    for (std::size_t k = 0; k < dim; ++k) {
        branches.push_back(project_register(state, reg, basis[k]));
        const double n = branches.back().norm();
        probs[k] = n * n;
    }
    double total = 0.0;
    for (double p : probs) total += p;
    if (total < 1e-300) throw SingularError("measure_projective: zero-norm state");

    const std::size_t k = rng.pick(probs);
    MeasurementOutcome oc;
    oc.reg = reg;
    oc.basisLabel = basisLabel;
    oc.index = k;
    oc.value = (k == 0) ? +1 : -1;
    oc.probability = probs[k] / total;
    return {oc, normalized(branches[k])};
}

DiscreteState append_qubits(const DiscreteState& state, const qmath::CVector& q1,
                            const qmath::CVector& q2) {
    if (state.layout.has("Q1") || state.layout.has("Q2"))
        throw LayoutError("append_qubits: Q1/Q2 already present");
    if (q1.dim() != 2 || q2.dim() != 2 || !qmath::is_normalized(q1) || !qmath::is_normalized(q2))
        throw NormalizationError("append_qubits: qubits must be normalized 2-dim vectors");
    DiscreteState out;
    out.layout = state.layout;
    out.layout.registers.push_back({"Q1", 2});
    out.layout.registers.push_back({"Q2", 2});
    out.amplitudes = qmath::kron(state.amplitudes, qmath::kron(q1, q2));
    out.normFlag = state.normFlag;
    return out;
}

DiscreteState controlled_emit(const DiscreteState& state) {
    if (state.layout.has("Q1") || state.layout.has("Q2"))
        throw LayoutError("controlled_emit: Q1/Q2 already present");
    const RegisterLayout& lay = state.layout;
    const std::size_t pE = lay.position_of("E");

    DiscreteState out;
    out.layout = lay;
    out.layout.registers.push_back({"Q1", 2});
    out.layout.registers.push_back({"Q2", 2});
    out.normFlag = state.normFlag;
    out.amplitudes = qmath::CVector(out.layout.total_dim());
    for (std::size_t i = 0; i < state.amplitudes.dim(); ++i) {
        const qmath::cplx amp = state.amplitudes[i];
        if (amp == qmath::cplx(0.0)) continue;
        const std::size_t e = digit_of(lay, i, pE);
        if (e == kReady) throw DomainError("controlled_emit: environment has e0 support");
        const std::size_t q = (e == kRecPlus) ? 0 : 1;
        out.amplitudes[(i * 2 + q) * 2 + q] = amp;
    }
    return out;
}

qmath::CMatrix reduced_dm(const DiscreteState& state, const std::vector<std::string>& names) {
    if (names.empty()) throw LayoutError("reduced_dm: empty register set");
    const RegisterLayout& lay = state.layout;
    std::vector<std::size_t> keepPos;
    keepPos.reserve(names.size());
    for (const std::string& n : names) {
        const std::size_t p = lay.position_of(n);
        if (std::find(keepPos.begin(), keepPos.end(), p) != keepPos.end())
            throw LayoutError("reduced_dm: duplicate register '" + n + "'");
        keepPos.push_back(p);
    }

    std::size_t keepDim = 1;
    for (std::size_t p : keepPos) keepDim *= lay.registers[p].dim;
    const std::size_t total = state.amplitudes.dim();
    const std::size_t restDim = total / keepDim;

    // Reorder amplitudes as B(named, rest); rho = B B^dagger keeps O(k^2 r)
    // instead of materializing the full outer product.
    std::vector<qmath::cplx> B(keepDim * restDim);
    const std::size_t nReg = lay.registers.size();
    for (std::size_t i = 0; i < total; ++i) {
        const qmath::cplx amp = state.amplitudes[i];
        if (amp == qmath::cplx(0.0)) continue;
        std::size_t named = 0;
        for (std::size_t p : keepPos) named = named * lay.registers[p].dim + digit_of(lay, i, p);
        std::size_t rest = 0;
        for (std::size_t p = 0; p < nReg; ++p) {
            if (std::find(keepPos.begin(), keepPos.end(), p) != keepPos.end()) continue;
            rest = rest * lay.registers[p].dim + digit_of(lay, i, p);
        }
        B[named * restDim + rest] = amp;
    }
    qmath::CMatrix rho(keepDim, keepDim);
    for (std::size_t a = 0; a < keepDim; ++a)
        for (std::size_t b = 0; b < keepDim; ++b) {
            qmath::cplx s = 0.0;
            for (std::size_t r = 0; r < restDim; ++r)
                s += B[a * restDim + r] * std::conj(B[b * restDim + r]);
            rho(a, b) = s;
        }
    return rho;
}

DiscreteState project_register(const DiscreteState& state, const std::string& reg,
                               const qmath::CVector& target) {
    const RegisterLayout& lay = state.layout;
    const std::size_t pos = lay.position_of(reg);
    const std::size_t dim = lay.registers[pos].dim;
    if (target.dim() != dim) throw LayoutError("project_register: target dim mismatch");
    const std::size_t stride = lay.stride_at(pos);

    DiscreteState out = state;
    out.normFlag = false;
    out.amplitudes = qmath::CVector(state.amplitudes.dim());
    const std::size_t block = dim * stride;
    for (std::size_t outer = 0; outer < state.amplitudes.dim(); outer += block) {
        for (std::size_t inner = 0; inner < stride; ++inner) {
            qmath::cplx overlap = 0.0;
            for (std::size_t d = 0; d < dim; ++d)
                overlap += std::conj(target[d]) * state.amplitudes[outer + d * stride + inner];
            if (overlap == qmath::cplx(0.0)) continue;
            for (std::size_t d = 0; d < dim; ++d)
                out.amplitudes[outer + d * stride + inner] = overlap * target[d];
        }
    }
    return out;
}

DiscreteState contract_register(const DiscreteState& state, const std::string& reg,
                                const qmath::CVector& target) {
    const RegisterLayout& lay = state.layout;
    const std::size_t pos = lay.position_of(reg);
    const std::size_t dim = lay.registers[pos].dim;
    if (target.dim() != dim) throw LayoutError("contract_register: target dim mismatch");
    const std::size_t stride = lay.stride_at(pos);

    DiscreteState out;
    out.layout = lay;
    out.layout.registers.erase(out.layout.registers.begin() + static_cast<std::ptrdiff_t>(pos));
    out.normFlag = false;
    out.amplitudes = qmath::CVector(state.amplitudes.dim() / dim);
    const std::size_t block = dim * stride;
    std::size_t j = 0;
    for (std::size_t outer = 0; outer < state.amplitudes.dim(); outer += block) {
        for (std::size_t inner = 0; inner < stride; ++inner, ++j) {
            qmath::cplx overlap = 0.0;
            for (std::size_t d = 0; d < dim; ++d)
                overlap += std::conj(target[d]) * state.amplitudes[outer + d * stride + inner];
            out.amplitudes[j] = overlap;
        }
    }
    return out;
}

DiscreteState normalized(const DiscreteState& state) {
    DiscreteState out = state;
    out.amplitudes = qmath::normalized(state.amplitudes);
    out.normFlag = true;
    return out;
}

} // namespace wfsim::registers

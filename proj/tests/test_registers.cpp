#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "wfsim/errors.hpp"
#include "wfsim/qmath.hpp"
#include "wfsim/registers.hpp"
#include "wfsim/rng.hpp"

#include <cmath>
#include <random>

using namespace wfsim;
using namespace wfsim::registers;
using qmath::cplx;
using qmath::CMatrix;
using qmath::CVector;

namespace {

const double kR2 = 1.0 / std::sqrt(2.0);

// Composite index on the protocol layout [S_F:2, M:3, E:3, A:2].
std::size_t idx(std::size_t s, std::size_t m, std::size_t e, std::size_t a) {
    return ((s * 3 + m) * 3 + e) * 2 + a;
}

std::pair<cplx, cplx> random_qubit(std::mt19937_64& gen) {
    std::normal_distribution<double> d(0.0, 1.0);
    cplx a(d(gen), d(gen)), b(d(gen), d(gen));
    const double n = std::sqrt(std::norm(a) + std::norm(b));
    return {a / n, b / n};
}

// Reference reduced density matrix straight from the definition.
CMatrix brute_reduced(const DiscreteState& st, const std::vector<std::string>& names) {
    const CMatrix rho = qmath::outer(st.amplitudes, st.amplitudes);
    std::vector<std::size_t> keep;
    for (const auto& n : names) keep.push_back(st.layout.position_of(n));
    return qmath::partial_trace(rho, st.layout.dims(), keep);
}

} // namespace

TEST_CASE("protocol layout has the documented registers and strides") {
    const RegisterLayout lay = protocol_layout();
    REQUIRE(lay.registers.size() == 4);
    CHECK(lay.total_dim() == 36);
    CHECK(lay.position_of("S_F") == 0);
    CHECK(lay.position_of("M") == 1);
    CHECK(lay.position_of("E") == 2);
    CHECK(lay.position_of("A") == 3);
    CHECK(lay.stride_at(0) == 18);
    CHECK(lay.stride_at(1) == 6);
    CHECK(lay.stride_at(2) == 2);
    CHECK(lay.stride_at(3) == 1);
    CHECK(lay.has("A"));
    CHECK_FALSE(lay.has("Q1"));
    CHECK_THROWS_AS(lay.position_of("Q1"), LayoutError);
}

TEST_CASE("prepare_initial places the entangled pair at the documented indices") {
    const DiscreteState z = prepare_initial(cplx(1.0, 0.0), cplx(0.0, 0.0));
    CHECK(std::abs(z.amplitudes[idx(0, 0, 0, 0)] - 1.0) <= 1e-15);
    CHECK(z.norm() == doctest::Approx(1.0).epsilon(1e-14));

    const DiscreteState bell = prepare_initial(cplx(kR2, 0.0), cplx(kR2, 0.0));
    CHECK(std::abs(bell.amplitudes[idx(0, 0, 0, 0)] - kR2) <= 1e-15);
    CHECK(std::abs(bell.amplitudes[idx(1, 0, 0, 1)] - kR2) <= 1e-15);

    const DiscreteState m = prepare_initial(cplx(0.0, 0.0), cplx(1.0, 0.0));
    CHECK(std::abs(m.amplitudes[idx(1, 0, 0, 1)] - 1.0) <= 1e-15);

    CHECK_THROWS_AS(prepare_initial(cplx(1.0, 0.0), cplx(1.0, 0.0)), NormalizationError);
}

TEST_CASE("friend_measure_and_reset copies the outcome into the environment") {
    // Spin definitely up: record e+, spin and apparatus back to ready.
    DiscreteState up = prepare_initial(cplx(1.0, 0.0), cplx(0.0, 0.0));
    up = friend_measure_and_reset(up);
    CHECK(std::abs(up.amplitudes[idx(0, 0, 1, 0)] - 1.0) <= 1e-12);

    // Entangled input: branch records follow the spin branches.
    DiscreteState st = prepare_initial(cplx(0.6, 0.0), cplx(0.0, 0.8));
    st = friend_measure_and_reset(st);
    CHECK(std::abs(st.amplitudes[idx(0, 0, 1, 0)] - cplx(0.6, 0.0)) <= 1e-12);
    CHECK(std::abs(st.amplitudes[idx(0, 0, 2, 1)] - cplx(0.0, 0.8)) <= 1e-12);
    CHECK(st.norm() == doctest::Approx(1.0).epsilon(1e-14));

    // Reset target is configurable.
    DiscreteState sx = prepare_initial(cplx(1.0, 0.0), cplx(0.0, 0.0));
    sx = friend_measure_and_reset(sx, qmath::ket_plus_x());
    CHECK(std::abs(sx.amplitudes[idx(0, 0, 1, 0)] - kR2) <= 1e-12);
    CHECK(std::abs(sx.amplitudes[idx(1, 0, 1, 0)] - kR2) <= 1e-12);
}

TEST_CASE("friend measurement leaves the environment maximally mixed for a Bell pair") {
    DiscreteState st = prepare_initial(cplx(kR2, 0.0), cplx(kR2, 0.0));
    st = friend_measure_and_reset(st);
    const CMatrix rhoE = reduced_dm(st, {"E"});
    CHECK(qmath::purity(rhoE) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(rhoE(1, 1) - 0.5) <= 1e-12);
    CHECK(std::abs(rhoE(2, 2) - 0.5) <= 1e-12);
    CHECK(std::abs(rhoE(1, 2)) <= 1e-12);
    CHECK(qmath::max_abs_diff(rhoE, brute_reduced(st, {"E"})) <= 1e-12);
}

TEST_CASE("friend measurement rejects an apparatus that already fired") {
    DiscreteState st = prepare_initial(cplx(1.0, 0.0), cplx(0.0, 0.0));
    st = friend_measure_and_reset(st);
    // Environment now holds e+; the apparatus marker is fine, but a state
    // with M out of the ready position must be refused.
    DiscreteState bad = st;
    bad.amplitudes[idx(0, 0, 1, 0)] = 0.0;
    bad.amplitudes[idx(0, 1, 0, 0)] = 1.0;
    CHECK_THROWS_AS(friend_measure_and_reset(bad), DomainError);
}

TEST_CASE("friend measurement preserves norms for random inputs") {
    std::mt19937_64 gen(7);
    for (int rep = 0; rep < 1000; ++rep) {
        const auto [a, b] = random_qubit(gen);
        DiscreteState st = prepare_initial(a, b);
        st = friend_measure_and_reset(st);
        CHECK(std::abs(st.norm() - 1.0) <= 1e-12);
    }
}

TEST_CASE("friend measurement equals measure-then-reset built from explicit unitaries") {
    // U1 copies the spin into the apparatus: s=+ flips m0<->m+, s=- flips
    // m0<->m-. U2 moves the apparatus record into the environment:
    // (s0,m+,e0) <-> (s0,m0,e+) and (s-,m-... the reset collapses both spin
    // branches onto s0=|+>, so the pair map is (0,1,0)<->(0,0,1) and
    // (1,2,0)<->(0,0,2); all other basis states stay put.
    const std::size_t n = 36;
    CMatrix u1(n, n), u2(n, n);
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t m = 0; m < 3; ++m)
            for (std::size_t e = 0; e < 3; ++e)
                for (std::size_t a = 0; a < 2; ++a) {
                    std::size_t m2 = m;
                    if (s == 0 && m == 0) m2 = 1;
                    else if (s == 0 && m == 1) m2 = 0;
                    else if (s == 1 && m == 0) m2 = 2;
                    else if (s == 1 && m == 2) m2 = 0;
                    u1(idx(s, m2, e, a), idx(s, m, e, a)) = 1.0;

                    std::size_t s3 = s, m3 = m, e3 = e;
                    if (s == 0 && m == 1 && e == 0) { s3 = 0; m3 = 0; e3 = 1; }
                    else if (s == 0 && m == 0 && e == 1) { s3 = 0; m3 = 1; e3 = 0; }
                    else if (s == 1 && m == 2 && e == 0) { s3 = 0; m3 = 0; e3 = 2; }
                    else if (s == 0 && m == 0 && e == 2) { s3 = 1; m3 = 2; e3 = 0; }
                    u2(idx(s3, m3, e3, a), idx(s, m, e, a)) = 1.0;
                }
    REQUIRE(qmath::is_unitary(u1));
    REQUIRE(qmath::is_unitary(u2));
    const CMatrix u21 = qmath::matmul(u2, u1);

    std::mt19937_64 gen(19);
    for (int rep = 0; rep < 25; ++rep) {
        const auto [a, b] = random_qubit(gen);
        const DiscreteState st = prepare_initial(a, b);
        const CVector viaUnitaries = qmath::apply(u21, st.amplitudes);
        const DiscreteState direct = friend_measure_and_reset(st);
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            worst = std::max(worst, std::abs(viaUnitaries[i] - direct.amplitudes[i]));
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("projective measurement follows the Born rule and is repeatable") {
    DiscreteState st = prepare_initial(cplx(kR2, 0.0), cplx(kR2, 0.0));

    SUBCASE("x basis on Alice's qubit gives half/half") {
        RandomStream rng(5);
        const std::vector<CVector> xb{qmath::ket_plus_x(), qmath::ket_minus_x()};
        auto [out, post] = measure_projective(st, "A", xb, "x", rng);
        CHECK(out.reg == "A");
        CHECK(out.basisLabel == "x");
        CHECK(out.probability == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(out.value == (out.index == 0 ? +1 : -1));
        CHECK(std::abs(post.norm() - 1.0) <= 1e-12);

        // Measuring again in the same basis reproduces the outcome surely.
        auto [out2, post2] = measure_projective(post, "A", xb, "x", rng);
        CHECK(out2.index == out.index);
        CHECK(out2.probability == doctest::Approx(1.0).epsilon(1e-12));
        double worst = 0.0;
        for (std::size_t i = 0; i < post.amplitudes.dim(); ++i)
            worst = std::max(worst, std::abs(post.amplitudes[i] - post2.amplitudes[i]));
        CHECK(worst <= 1e-12);
    }

    SUBCASE("environment outcome is locked to the friend's branch") {
        const std::vector<CVector> zb{qmath::ket_plus(), qmath::ket_minus()};
        const std::vector<CVector> eb{CVector{1.0, 0.0, 0.0}, CVector{0.0, 1.0, 0.0},
                                      CVector{0.0, 0.0, 1.0}};
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            RandomStream rng(seed);
            DiscreteState cur = friend_measure_and_reset(st);
            auto [eout, afterE] = measure_projective(cur, "E", eb, "record", rng);
            CHECK((eout.index == 1 || eout.index == 2));
            // Alice's z outcome must match the record branch exactly.
            auto [aout, fin] = measure_projective(afterE, "A", zb, "z", rng);
            (void)fin;
            CHECK(aout.index == eout.index - 1);
            CHECK(aout.probability == doctest::Approx(1.0).epsilon(1e-12));
        }
    }

    SUBCASE("non-orthonormal basis is rejected") {
        const std::vector<CVector> bad{qmath::ket_plus(), qmath::ket_plus_x()};
        RandomStream rng(1);
        CHECK_THROWS_AS(measure_projective(st, "A", bad, "bad", rng), BasisError);
        const std::vector<CVector> incomplete{qmath::ket_plus()};
        CHECK_THROWS_AS(measure_projective(st, "A", incomplete, "bad", rng), BasisError);
    }
}

TEST_CASE("measured frequencies converge to Born probabilities") {
    const DiscreteState st = prepare_initial(cplx(kR2, 0.0), cplx(kR2, 0.0));
    const std::vector<CVector> zb{qmath::ket_plus(), qmath::ket_minus()};
    const std::size_t n = 100000;
    std::size_t plus = 0;
    for (std::size_t i = 0; i < n; ++i) {
        RandomStream rng = RandomStream::substream(99, i);
        auto [out, post] = measure_projective(st, "A", zb, "z", rng);
        (void)post;
        if (out.index == 0) ++plus;
    }
    const double f = double(plus) / double(n);
    CHECK(std::abs(f - 0.5) <= 5.0 * std::sqrt(0.25 / double(n)));
}

TEST_CASE("append_qubits tensors Q1 and Q2 onto the layout") {
    DiscreteState st = prepare_initial(cplx(1.0, 0.0), cplx(0.0, 0.0));
    DiscreteState ext = append_qubits(st, qmath::ket_plus_x(), qmath::ket_plus_x());
    CHECK(ext.layout.registers.size() == 6);
    CHECK(ext.layout.total_dim() == 144);
    CHECK(ext.layout.position_of("Q1") == 4);
    CHECK(ext.layout.position_of("Q2") == 5);
    CHECK(std::abs(ext.norm() - 1.0) <= 1e-12);
    // Original amplitude 1 at index 0 spreads over the four qubit cells.
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(ext.amplitudes[k] - 0.5) <= 1e-12);

    CHECK_THROWS_AS(append_qubits(ext, qmath::ket_plus(), qmath::ket_plus()), LayoutError);
    CHECK_THROWS_AS(append_qubits(st, CVector{cplx(2.0, 0.0), cplx(0.0, 0.0)}, qmath::ket_plus()),
                    NormalizationError);
}

TEST_CASE("controlled_emit copies the record onto both emitted qubits") {
    SUBCASE("pure e+ record emits |++>") {
        DiscreteState st = prepare_initial(cplx(1.0, 0.0), cplx(0.0, 0.0));
        st = friend_measure_and_reset(st);
        const DiscreteState out = controlled_emit(st);
        const std::size_t base = idx(0, 0, 1, 0) * 4; // Q1=+,Q2=+ cell of that index
        CHECK(std::abs(out.amplitudes[base] - 1.0) <= 1e-12);
        CHECK(std::abs(out.norm() - 1.0) <= 1e-12);
    }

    SUBCASE("entangled record emits classically correlated qubit pairs") {
        DiscreteState st = prepare_initial(cplx(kR2, 0.0), cplx(kR2, 0.0));
        st = friend_measure_and_reset(st);
        const DiscreteState out = controlled_emit(st);
        CHECK(std::abs(out.amplitudes[idx(0, 0, 1, 0) * 4 + 0] - kR2) <= 1e-12);
        CHECK(std::abs(out.amplitudes[idx(0, 0, 2, 1) * 4 + 3] - kR2) <= 1e-12);

        const CMatrix rhoQ = reduced_dm(out, {"Q1", "Q2"});
        CMatrix expect(4, 4);
        expect(0, 0) = 0.5;
        expect(3, 3) = 0.5;
        CHECK(qmath::max_abs_diff(rhoQ, expect) <= 1e-12);
        CHECK(qmath::max_abs_diff(rhoQ, brute_reduced(out, {"Q1", "Q2"})) <= 1e-12);
    }

    SUBCASE("emission before any record is refused") {
        const DiscreteState st = prepare_initial(cplx(kR2, 0.0), cplx(kR2, 0.0));
        CHECK_THROWS_AS(controlled_emit(st), DomainError);
    }
}

TEST_CASE("emitted qubits agree in the z basis for every branch") {
    std::mt19937_64 gen(31);
    const std::vector<CVector> zb{qmath::ket_plus(), qmath::ket_minus()};
    for (int rep = 0; rep < 50; ++rep) {
        const auto [a, b] = random_qubit(gen);
        DiscreteState st = prepare_initial(a, b);
        st = controlled_emit(friend_measure_and_reset(st));
        RandomStream rng(1000 + std::uint64_t(rep));
        auto [o1, s1] = measure_projective(st, "Q1", zb, "z", rng);
        auto [o2, s2] = measure_projective(s1, "Q2", zb, "z", rng);
        (void)s2;
        CHECK(o1.index == o2.index);
        CHECK(o2.probability == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("reduced_dm matches the outer-product partial trace on random states") {
    std::mt19937_64 gen(43);
    std::normal_distribution<double> d(0.0, 1.0);
    const std::vector<std::vector<std::string>> subsets{
        {"E"}, {"A"}, {"S_F", "A"}, {"M", "E"}, {"E", "A"}, {"A", "E"}};
    for (int rep = 0; rep < 10; ++rep) {
        DiscreteState st = prepare_initial(cplx(1.0, 0.0), cplx(0.0, 0.0));
        for (std::size_t i = 0; i < st.amplitudes.dim(); ++i)
            st.amplitudes[i] = cplx(d(gen), d(gen));
        st.amplitudes = qmath::normalized(st.amplitudes);
        for (const auto& names : subsets) {
            const CMatrix fast = reduced_dm(st, names);
            const CMatrix brute = brute_reduced(st, names);
            CHECK(qmath::max_abs_diff(fast, brute) <= 1e-12);
            CHECK(qmath::is_density(fast, 1e-9));
        }
    }
    const DiscreteState st = prepare_initial(cplx(1.0, 0.0), cplx(0.0, 0.0));
    CHECK_THROWS_AS(reduced_dm(st, {"E", "E"}), LayoutError);
    CHECK_THROWS_AS(reduced_dm(st, {"Q7"}), LayoutError);
}

TEST_CASE("project_register keeps the branch in place, contract_register removes it") {
    DiscreteState st = prepare_initial(cplx(0.6, 0.0), cplx(0.8, 0.0));

    const DiscreteState proj = project_register(st, "A", qmath::ket_plus());
    CHECK(proj.layout == st.layout);
    CHECK(proj.norm() == doctest::Approx(0.6).epsilon(1e-12));
    CHECK_FALSE(proj.normFlag);
    CHECK(std::abs(proj.amplitudes[idx(0, 0, 0, 0)] - 0.6) <= 1e-12);
    CHECK(std::abs(proj.amplitudes[idx(1, 0, 0, 1)]) <= 1e-15);

    const DiscreteState cut = contract_register(st, "A", qmath::ket_minus());
    CHECK(cut.layout.registers.size() == 3);
    CHECK_FALSE(cut.layout.has("A"));
    CHECK(cut.norm() == doctest::Approx(0.8).epsilon(1e-12));

    // Branch weights over an orthonormal basis sum to the full norm.
    const DiscreteState px = project_register(st, "A", qmath::ket_plus_x());
    const DiscreteState mx = project_register(st, "A", qmath::ket_minus_x());
    const double w = px.norm() * px.norm() + mx.norm() * mx.norm();
    CHECK(w == doctest::Approx(1.0).epsilon(1e-12));

    const DiscreteState renorm = normalized(px);
    CHECK(std::abs(renorm.norm() - 1.0) <= 1e-12);
    CHECK(renorm.normFlag);
}

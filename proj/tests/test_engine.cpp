#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "wfsim/engine.hpp"
#include "wfsim/errors.hpp"

#include <cmath>
#include <string>
#include <vector>

using namespace wfsim;
using namespace wfsim::engine;
using qmath::cplx;
using qmath::CVector;
using relativity::EventId;

namespace {

constexpr double kPi = 3.14159265358979323846;
const double kR2 = 1.0 / std::sqrt(2.0);

ProtocolConfig base_config(double betaBoost, InterpretationMode mode, MeasurementScheme scheme) {
    ProtocolConfig cfg = ProtocolConfig::defaults();
    cfg.theta1 = kPi / 3;
    cfg.theta2 = kPi / 3;
    cfg.betaBoost = betaBoost;
    cfg.mode = mode;
    cfg.scheme = scheme;
    return cfg;
}

std::vector<EventId> order_of(const std::vector<ScheduleEntry>& s) {
    std::vector<EventId> ids;
    for (const auto& e : s) ids.push_back(e.event.id);
    return ids;
}

double rest_moment(const ProtocolConfig& c) {
    return 0.25 * c.g * c.g * (1.0 + std::cos(c.theta1) * std::cos(c.theta2));
}

double boosted_moment(const ProtocolConfig& c) {
    return 0.25 * c.g * c.g * std::cos(c.theta1) * std::cos(c.theta2);
}

registers::DiscreteState friend_done(cplx a, cplx b) {
    return registers::friend_measure_and_reset(registers::prepare_initial(a, b));
}

} // namespace

TEST_CASE("build_schedule orders actions by boosted time with E0 pinned first") {
    auto cfg = base_config(0.0, InterpretationMode::UNITARY_LAB, MeasurementScheme::WEAK);

    auto rest = build_schedule(cfg);
    CHECK(order_of(rest) ==
          std::vector<EventId>{EventId::E0, EventId::E1, EventId::E2, EventId::E3});
    CHECK(rest[0].action == ProtocolAction::Prepare);
    CHECK(rest[1].action == ProtocolAction::FriendMeasureReset);
    CHECK(rest[2].action == ProtocolAction::EmitAndMeasure);
    CHECK(rest[3].action == ProtocolAction::AliceMeasure);

    cfg.betaBoost = 0.12;
    CHECK(order_of(build_schedule(cfg)) ==
          std::vector<EventId>{EventId::E0, EventId::E1, EventId::E3, EventId::E2});

    cfg.betaBoost = 0.2;
    CHECK(order_of(build_schedule(cfg)) ==
          std::vector<EventId>{EventId::E0, EventId::E3, EventId::E1, EventId::E2});
}

TEST_CASE("build_schedule rejects unusable configurations") {
    auto cfg = base_config(0.1, InterpretationMode::UNITARY_LAB, MeasurementScheme::WEAK);
    CHECK_THROWS_WITH_AS(build_schedule(cfg),
                         doctest::Contains("simultaneous"), ConfigError);

    cfg.betaBoost = 1.0;
    CHECK_THROWS_AS(build_schedule(cfg), ConfigError);

    cfg.betaBoost = 0.0;
    for (auto& e : cfg.events)
        if (e.id == EventId::E3) e.x = 0.5; // light cone reaches the lab
    CHECK_THROWS_AS(build_schedule(cfg), ConfigError);

    cfg = base_config(0.0, InterpretationMode::UNITARY_LAB, MeasurementScheme::WEAK);
    cfg.events.pop_back();
    CHECK_THROWS_AS(build_schedule(cfg), ConfigError);
}

TEST_CASE("friend_send_qubits switches between product and entangled emission") {
    SUBCASE("mixed record entangles the emitted pair") {
        const auto st = friend_done(cplx(kR2, 0.0), cplx(kR2, 0.0));
        std::string label;
        const auto out = friend_send_qubits(st, &label);
        CHECK(label == "entangled");
        const auto direct = registers::controlled_emit(st);
        double worst = 0.0;
        for (std::size_t i = 0; i < out.amplitudes.dim(); ++i)
            worst = std::max(worst, std::abs(out.amplitudes[i] - direct.amplitudes[i]));
        CHECK(worst <= 1e-12);
    }

    SUBCASE("x-pure record emits matching product qubits") {
        auto st = friend_done(cplx(kR2, 0.0), cplx(kR2, 0.0));
        st = registers::normalized(
            registers::project_register(st, "A", qmath::ket_plus_x()));
        std::string label;
        const auto out = friend_send_qubits(st, &label);
        CHECK(label == "product:x+");
        const auto rhoQ1 = registers::reduced_dm(out, {"Q1"});
        CHECK(qmath::max_abs_diff(rhoQ1, qmath::projector(qmath::ket_plus_x())) <= 1e-9);
    }

    SUBCASE("z-pure record emits the z product") {
        auto st = friend_done(cplx(kR2, 0.0), cplx(kR2, 0.0));
        st = registers::normalized(
            registers::project_register(st, "E", CVector{0.0, 1.0, 0.0}));
        std::string label;
        const auto out = friend_send_qubits(st, &label);
        CHECK(label == "product:z+");
        const auto rhoQ2 = registers::reduced_dm(out, {"Q2"});
        CHECK(qmath::max_abs_diff(rhoQ2, qmath::projector(qmath::ket_plus())) <= 1e-9);
    }

    SUBCASE("emission before the friend acted is refused") {
        const auto st = registers::prepare_initial(cplx(kR2, 0.0), cplx(kR2, 0.0));
        CHECK_THROWS_AS(friend_send_qubits(st), DomainError);
    }
}

TEST_CASE("declare_record identifies pure records and rejects the rest") {
    auto bell = friend_done(cplx(kR2, 0.0), cplx(kR2, 0.0));

    auto zminus = registers::project_register(bell, "E", CVector{0.0, 0.0, 1.0});
    FriendRecord r = declare_record(zminus);
    CHECK(r.declared);
    CHECK(r.basis == 'z');
    CHECK(r.value == -1);
    CHECK(r.label() == "z-");

    auto xplus = registers::project_register(bell, "A", qmath::ket_plus_x());
    r = declare_record(xplus);
    CHECK(r.basis == 'x');
    CHECK(r.value == +1);
    CHECK(r.label() == "x+");

    auto xminus = registers::project_register(bell, "A", qmath::ket_minus_x());
    r = declare_record(xminus);
    CHECK(r.basis == 'x');
    CHECK(r.value == -1);

    CHECK_THROWS_AS(declare_record(registers::prepare_initial(cplx(1.0, 0.0), cplx(0.0, 0.0))),
                    RecordError);
    CHECK_THROWS_AS(declare_record(bell), RecordError);
}

TEST_CASE("rest frame weak statistics match the closed forms") {
    for (double t1 : {0.0, kPi / 3, kPi / 2, 2.1}) {
        for (double t2 : {0.0, kPi / 3, 1.9}) {
            auto cfg = base_config(0.0, InterpretationMode::UNITARY_LAB,
                                   MeasurementScheme::WEAK);
            cfg.theta1 = t1;
            cfg.theta2 = t2;
            const auto res = run_exact(cfg);
            CHECK(std::abs(res.jointMomentUnnormalized - rest_moment(cfg)) <= 1e-12);
            CHECK(std::abs(res.successProb -
                           0.25 * (1.0 + std::cos(t1) * std::cos(t2))) <= 1e-12);
            CHECK(std::abs(res.jointMomentNormalized -
                           res.jointMomentUnnormalized / res.successProb) <= 1e-15);
        }
    }

    const auto res =
        run_exact(base_config(0.0, InterpretationMode::UNITARY_LAB, MeasurementScheme::WEAK));
    CHECK(res.emittedQubitStateLabel == "entangled");
    CHECK(std::abs(res.aliceMarginal - 0.5) <= 1e-12);
    REQUIRE(res.friendRecordDistribution.count("undeclared") == 1);
    CHECK(std::abs(res.friendRecordDistribution.at("undeclared") - 1.0) <= 1e-12);
    CHECK(res.scheduleOrder ==
          std::vector<EventId>{EventId::E0, EventId::E1, EventId::E2, EventId::E3});
    CHECK(std::isnan(res.q1AgreeProb));
}

TEST_CASE("boosted frame weak statistics match the closed forms") {
    for (double t1 : {0.0, kPi / 3, kPi / 2, 2.1}) {
        for (double t2 : {kPi / 3, 1.1}) {
            auto cfg = base_config(0.2, InterpretationMode::UNITARY_LAB,
                                   MeasurementScheme::WEAK);
            cfg.theta1 = t1;
            cfg.theta2 = t2;
            const auto res = run_exact(cfg);
            CHECK(std::abs(res.jointMomentUnnormalized - boosted_moment(cfg)) <= 1e-12);
            const double damp = std::exp(-cfg.g * cfg.g / (cfg.w * cfg.w));
            CHECK(std::abs(res.successProb -
                           0.25 * (1.0 + std::sin(t1) * std::sin(t2) * damp)) <= 1e-12);
        }
    }

    const auto res =
        run_exact(base_config(0.2, InterpretationMode::UNITARY_LAB, MeasurementScheme::WEAK));
    CHECK(res.emittedQubitStateLabel == "product:x+|product:x-");
    CHECK(std::abs(res.aliceMarginal - 0.5) <= 1e-12);
    CHECK(std::abs(res.friendRecordDistribution.at("x+") - 0.5) <= 1e-12);
    CHECK(std::abs(res.friendRecordDistribution.at("x-") - 0.5) <= 1e-12);
    CHECK(res.scheduleOrder ==
          std::vector<EventId>{EventId::E0, EventId::E3, EventId::E1, EventId::E2});
}

TEST_CASE("frame difference of the weak moment is constant across boosts and angles") {
    for (double beta : {0.11, 0.2, 0.5, 0.9}) {
        double reference = -1.0;
        for (double t1 : {0.0, 0.9, kPi / 2, 2.6}) {
            for (double t2 : {0.3, kPi / 2, 2.9}) {
                auto rest =
                    base_config(0.0, InterpretationMode::UNITARY_LAB, MeasurementScheme::WEAK);
                rest.theta1 = t1;
                rest.theta2 = t2;
                auto boosted = rest;
                boosted.betaBoost = beta;
                const double diff = run_exact(rest).jointMomentUnnormalized -
                                    run_exact(boosted).jointMomentUnnormalized;
                CHECK(std::abs(diff - 0.25 * rest.g * rest.g) <= 1e-12);
                if (reference < 0.0) reference = diff;
                CHECK(std::abs(diff - reference) <= 1e-12);
            }
        }
    }
}

TEST_CASE("projective outcomes agree with the declared record in the matching basis") {
    SUBCASE("rest frame: first qubit in z always matches the record") {
        const auto res = run_exact(
            base_config(0.0, InterpretationMode::UNITARY_LAB, MeasurementScheme::PROJECTIVE));
        CHECK(res.q1AgreeProb == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(res.q2AgreeProb == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(std::abs(res.friendRecordDistribution.at("z+") - 0.5) <= 1e-12);
        CHECK(std::abs(res.friendRecordDistribution.at("z-") - 0.5) <= 1e-12);
        CHECK(std::isnan(res.jointMomentUnnormalized));
        CHECK(std::isnan(res.successProb));
    }

    SUBCASE("boosted frame: second qubit in x always matches the record") {
        const auto res = run_exact(
            base_config(0.2, InterpretationMode::UNITARY_LAB, MeasurementScheme::PROJECTIVE));
        CHECK(res.q2AgreeProb == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(res.q1AgreeProb == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(std::abs(res.friendRecordDistribution.at("x+") - 0.5) <= 1e-12);
        CHECK(std::abs(res.friendRecordDistribution.at("x-") - 0.5) <= 1e-12);
    }
}

TEST_CASE("objective collapse is frame independent") {
    for (auto scheme : {MeasurementScheme::WEAK, MeasurementScheme::PROJECTIVE}) {
        const auto rest = run_exact(base_config(0.0, InterpretationMode::OBJECTIVE_COLLAPSE, scheme));
        const auto boosted =
            run_exact(base_config(0.2, InterpretationMode::OBJECTIVE_COLLAPSE, scheme));

        if (scheme == MeasurementScheme::WEAK) {
            const auto cfg = base_config(0.0, InterpretationMode::OBJECTIVE_COLLAPSE, scheme);
            CHECK(std::abs(rest.jointMomentUnnormalized - rest_moment(cfg)) <= 1e-12);
            CHECK(std::abs(rest.jointMomentUnnormalized - boosted.jointMomentUnnormalized) <=
                  1e-12);
            CHECK(std::abs(rest.successProb - boosted.successProb) <= 1e-12);
        } else {
            CHECK(std::abs(rest.q1AgreeProb - boosted.q1AgreeProb) <= 1e-12);
            CHECK(std::abs(rest.q2AgreeProb - boosted.q2AgreeProb) <= 1e-12);
        }
        for (const auto& [label, p] : rest.friendRecordDistribution) {
            REQUIRE(boosted.friendRecordDistribution.count(label) == 1);
            CHECK(std::abs(p - boosted.friendRecordDistribution.at(label)) <= 1e-12);
        }
        CHECK(std::abs(rest.friendRecordDistribution.at("z+") - 0.5) <= 1e-12);
        CHECK(std::abs(rest.aliceMarginal - boosted.aliceMarginal) <= 1e-12);
        CHECK(rest.emittedQubitStateLabel == "product:z+|product:z-");
        CHECK(boosted.emittedQubitStateLabel == "product:z+|product:z-");
    }
}

TEST_CASE("results do not depend on the friend's reset target") {
    const std::vector<CVector> resets{qmath::ket_plus(), qmath::ket_minus(), qmath::ket_plus_x()};
    for (double beta : {0.0, 0.2}) {
        for (auto mode : {InterpretationMode::UNITARY_LAB, InterpretationMode::OBJECTIVE_COLLAPSE}) {
            for (auto scheme : {MeasurementScheme::WEAK, MeasurementScheme::PROJECTIVE}) {
                auto cfg = base_config(beta, mode, scheme);
                cfg.s0 = resets[0];
                const auto ref = run_exact(cfg);
                for (std::size_t k = 1; k < resets.size(); ++k) {
                    cfg.s0 = resets[k];
                    const auto res = run_exact(cfg);
                    if (scheme == MeasurementScheme::WEAK) {
                        CHECK(std::abs(res.jointMomentUnnormalized -
                                       ref.jointMomentUnnormalized) <= 1e-12);
                        CHECK(std::abs(res.successProb - ref.successProb) <= 1e-12);
                    } else {
                        CHECK(std::abs(res.q1AgreeProb - ref.q1AgreeProb) <= 1e-12);
                        CHECK(std::abs(res.q2AgreeProb - ref.q2AgreeProb) <= 1e-12);
                    }
                    CHECK(std::abs(res.aliceMarginal - ref.aliceMarginal) <= 1e-12);
                    for (const auto& [label, p] : ref.friendRecordDistribution)
                        CHECK(std::abs(p - res.friendRecordDistribution.at(label)) <= 1e-12);
                }
            }
        }
    }
}

TEST_CASE("moving Alice's basis shifts the boosted moment by exactly the gap") {
    auto xBasis = base_config(0.2, InterpretationMode::UNITARY_LAB, MeasurementScheme::WEAK);
    auto zBasis = xBasis;
    zBasis.aliceBasisAngle = 0.0;

    const double mx = run_exact(xBasis).jointMomentUnnormalized;
    const double mz = run_exact(zBasis).jointMomentUnnormalized;
    CHECK(std::abs((mz - mx) - 0.25 * xBasis.g * xBasis.g) <= 1e-12);

    // With Alice in z the boosted moment equals the rest-frame one.
    const auto rest = base_config(0.0, InterpretationMode::UNITARY_LAB, MeasurementScheme::WEAK);
    CHECK(std::abs(mz - run_exact(rest).jointMomentUnnormalized) <= 1e-12);

    // Objective collapse closes the channel.
    auto cx = xBasis;
    cx.mode = InterpretationMode::OBJECTIVE_COLLAPSE;
    auto cz = zBasis;
    cz.mode = InterpretationMode::OBJECTIVE_COLLAPSE;
    CHECK(std::abs(run_exact(cx).jointMomentUnnormalized -
                   run_exact(cz).jointMomentUnnormalized) <= 1e-12);
}

TEST_CASE("alice marginal is one half for the shared singlet-like pair") {
    for (double beta : {0.0, 0.2}) {
        for (auto mode : {InterpretationMode::UNITARY_LAB, InterpretationMode::OBJECTIVE_COLLAPSE}) {
            for (auto scheme : {MeasurementScheme::WEAK, MeasurementScheme::PROJECTIVE}) {
                const auto res = run_exact(base_config(beta, mode, scheme));
                CHECK(std::abs(res.aliceMarginal - 0.5) <= 1e-12);
            }
        }
    }
}

TEST_CASE("an unbalanced pair keeps every branch finite and undeclared in the rest frame") {
    auto cfg = base_config(0.0, InterpretationMode::UNITARY_LAB, MeasurementScheme::WEAK);
    cfg.alpha = cplx(0.6, 0.0);
    cfg.beta = cplx(0.8, 0.0);
    const auto res = run_exact(cfg);
    CHECK(std::isfinite(res.jointMomentUnnormalized));
    CHECK(std::isfinite(res.successProb));
    CHECK(std::abs(res.friendRecordDistribution.at("undeclared") - 1.0) <= 1e-12);
    // Alice in the x basis still sees one half on a z-diagonal marginal.
    CHECK(std::abs(res.aliceMarginal - 0.5) <= 1e-12);

    auto boosted = cfg;
    boosted.betaBoost = 0.2;
    const auto bres = run_exact(boosted);
    CHECK(std::isfinite(bres.jointMomentUnnormalized));
    CHECK(std::isfinite(bres.successProb));
    // The records stay coherent superpositions of e+ and e-, matching
    // neither canonical family, so nothing is declared.
    CHECK(std::abs(bres.friendRecordDistribution.at("undeclared") - 1.0) <= 1e-12);
}

TEST_CASE("run_trial is deterministic in the substream") {
    const auto cfg = base_config(0.2, InterpretationMode::UNITARY_LAB, MeasurementScheme::WEAK);
    for (std::uint64_t i = 0; i < 20; ++i) {
        RandomStream a = RandomStream::substream(5, i);
        RandomStream b = RandomStream::substream(5, i);
        const RunRecord ra = run_trial(cfg, a);
        const RunRecord rb = run_trial(cfg, b);
        CHECK(ra.postselected == rb.postselected);
        CHECK(ra.x1 == rb.x1);
        CHECK(ra.x2 == rb.x2);
        CHECK(ra.aliceOutcome == rb.aliceOutcome);
        CHECK(ra.friendRecord.label() == rb.friendRecord.label());
        CHECK(ra.frameOrdering ==
              std::vector<EventId>{EventId::E0, EventId::E3, EventId::E1, EventId::E2});
        // Boosted-frame trials always end with a declared x record.
        CHECK(ra.friendRecord.basis == 'x');
        CHECK(ra.ancillaFlag);
    }
}

TEST_CASE("collapse-mode trials declare z records in both frames") {
    for (double beta : {0.0, 0.2}) {
        const auto cfg =
            base_config(beta, InterpretationMode::OBJECTIVE_COLLAPSE, MeasurementScheme::WEAK);
        for (std::uint64_t i = 0; i < 10; ++i) {
            RandomStream rng = RandomStream::substream(77, i);
            const RunRecord r = run_trial(cfg, rng);
            CHECK(r.friendRecord.declared);
            CHECK(r.friendRecord.basis == 'z');
            CHECK(r.ancillaFlag);
        }
    }
}

TEST_CASE("rest-frame unitary trials never declare a record") {
    const auto cfg = base_config(0.0, InterpretationMode::UNITARY_LAB, MeasurementScheme::WEAK);
    for (std::uint64_t i = 0; i < 20; ++i) {
        RandomStream rng = RandomStream::substream(9, i);
        const RunRecord r = run_trial(cfg, rng);
        CHECK_FALSE(r.friendRecord.declared);
        CHECK(r.friendRecord.label() == "undeclared");
    }
}

TEST_CASE("projective trials produce definite qubit outcomes") {
    const auto cfg =
        base_config(0.0, InterpretationMode::UNITARY_LAB, MeasurementScheme::PROJECTIVE);
    for (std::uint64_t i = 0; i < 20; ++i) {
        RandomStream rng = RandomStream::substream(13, i);
        const RunRecord r = run_trial(cfg, rng);
        CHECK((r.q1 == 1 || r.q1 == -1));
        CHECK((r.q2 == 1 || r.q2 == -1));
        // The record collapses with the first z measurement and must agree.
        CHECK(r.friendRecord.basis == 'z');
        CHECK(r.q1 == r.friendRecord.value);
    }
}

TEST_CASE("monte carlo reruns are bitwise identical and worker independent") {
    const auto cfg = base_config(0.2, InterpretationMode::UNITARY_LAB, MeasurementScheme::WEAK);
    const SummaryStats a = run_monte_carlo(cfg, 20000, 42, 1);
    const SummaryStats b = run_monte_carlo(cfg, 20000, 42, 3);
    CHECK(a.momentEstimate == b.momentEstimate);
    CHECK(a.momentSE == b.momentSE);
    CHECK(a.successFreq == b.successFreq);
    CHECK(a.aliceMarginalFreq == b.aliceMarginalFreq);
    CHECK(a.recordDistribution == b.recordDistribution);

    const SummaryStats c = run_monte_carlo(cfg, 20000, 43, 1);
    CHECK(a.momentEstimate != c.momentEstimate);
}

TEST_CASE("monte carlo matches run_trial aggregation over the same substreams") {
    const auto cfg = base_config(0.2, InterpretationMode::UNITARY_LAB, MeasurementScheme::WEAK);
    const std::uint64_t n = 200, seed = 7;

    double sumV = 0.0;
    std::uint64_t success = 0, alice = 0;
    std::map<std::string, std::uint64_t> records;
    for (std::uint64_t i = 0; i < n; ++i) {
        RandomStream rng = RandomStream::substream(seed, i);
        const RunRecord r = run_trial(cfg, rng);
        if (r.postselected) {
            ++success;
            sumV += r.x1 * r.x2;
        }
        if (r.aliceOutcome == +1) ++alice;
        ++records[r.friendRecord.label()];
    }

    const SummaryStats s = run_monte_carlo(cfg, n, seed, 1);
    CHECK(s.trials == n);
    CHECK(s.momentEstimate == sumV / double(n));
    CHECK(s.successFreq == double(success) / double(n));
    CHECK(s.aliceMarginalFreq == double(alice) / double(n));
    for (const auto& [label, count] : records)
        CHECK(s.recordDistribution.at(label) == double(count) / double(n));
}

TEST_CASE("monte carlo estimates stay within five standard errors of exact values") {
    const std::uint64_t n = 100000;
    for (double beta : {0.0, 0.2}) {
        auto cfg = base_config(beta, InterpretationMode::UNITARY_LAB, MeasurementScheme::WEAK);
        const auto exact = run_exact(cfg);
        const auto mc = run_monte_carlo(cfg, n, 1234, 0);
        CHECK(std::abs(mc.momentEstimate - exact.jointMomentUnnormalized) <=
              5.0 * mc.momentSE);
        CHECK(std::abs(mc.successFreq - exact.successProb) <= 5.0 * mc.successSE);
        CHECK(std::abs(mc.aliceMarginalFreq - exact.aliceMarginal) <= 5.0 * mc.aliceMarginalSE);
        for (const auto& [label, p] : exact.friendRecordDistribution) {
            const double f =
                mc.recordDistribution.count(label) ? mc.recordDistribution.at(label) : 0.0;
            const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / double(n));
            CHECK(std::abs(f - p) <= 5.0 * se);
        }
    }
}

TEST_CASE("projective monte carlo reproduces the agreement probabilities") {
    const std::uint64_t n = 50000;
    for (double beta : {0.0, 0.2}) {
        auto cfg =
            base_config(beta, InterpretationMode::UNITARY_LAB, MeasurementScheme::PROJECTIVE);
        const auto exact = run_exact(cfg);
        const auto mc = run_monte_carlo(cfg, n, 99, 0);
        const double se = std::sqrt(0.25 / double(n));
        CHECK(std::abs(mc.q1AgreeFreq - exact.q1AgreeProb) <= 5.0 * se);
        CHECK(std::abs(mc.q2AgreeFreq - exact.q2AgreeProb) <= 5.0 * se);
        if (beta == 0.0) CHECK(mc.q1AgreeFreq == 1.0);
        if (beta == 0.2) CHECK(mc.q2AgreeFreq == 1.0);
    }
}

TEST_CASE("monte carlo edge cases") {
    const auto cfg = base_config(0.0, InterpretationMode::UNITARY_LAB, MeasurementScheme::WEAK);
    CHECK_THROWS_AS(run_monte_carlo(cfg, 0, 1, 1), ConfigError);

    const SummaryStats one = run_monte_carlo(cfg, 1, 5, 1);
    CHECK(one.trials == 1);
    CHECK(std::isfinite(one.momentEstimate));

    // One trial past a block boundary exercises the partial-block path.
    const SummaryStats odd = run_monte_carlo(cfg, 8193, 5, 2);
    CHECK(odd.trials == 8193);
    CHECK(odd.successFreq > 0.0);
}

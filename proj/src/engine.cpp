#include "wfsim/engine.hpp"

#include "wfsim/errors.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <set>
#include <thread>

namespace wfsim::engine {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kPurityThreshold = 1.0 - 1e-9;
constexpr std::uint64_t kBlockSize = 8192;

using registers::DiscreteState;
using relativity::Event;
using relativity::EventId;

qmath::CVector env_ket(std::size_t k) {
    qmath::CVector v(3);
    v[k] = 1.0;
    return v;
}

qmath::CVector alice_ket(double angle, int sign) {
    return sign > 0 ? qmath::ket_plus_theta(angle) : qmath::ket_minus_theta(angle);
}

const std::array<const char*, 5> kRecordLabels = {"z+", "z-", "x+", "x-", "undeclared"};

std::size_t record_index(const FriendRecord& r) {
    if (!r.declared) return 4;
    if (r.basis == 'z') return r.value > 0 ? 0 : 1;
    return r.value > 0 ? 2 : 3;
}

struct RecordAnalysis {
    double trace = 0.0;
    double e0Weight = 0.0; // relative
    double purity = 0.0;   // of the full 3x3 environment state
    FriendRecord rec;      // declared iff pure and matching a z/x record
};

RecordAnalysis analyze_record(const qmath::CMatrix& rhoE) {
    if (rhoE.rows != 3 || rhoE.cols != 3)
        throw LayoutError("analyze_record: expected a 3x3 environment matrix");
    RecordAnalysis out;
    out.trace = qmath::trace(rhoE).real();
    if (out.trace < 1e-300) throw SingularError("analyze_record: zero-trace environment state");
    out.e0Weight = rhoE(0, 0).real() / out.trace;
    double sq = 0.0;
    for (const qmath::cplx& c : rhoE.a) sq += std::norm(c);
    out.purity = sq / (out.trace * out.trace);
    if (out.purity < kPurityThreshold) return out;

    // Rank-one (to within tolerance): the column with the largest diagonal
    // entry is proportional to the record vector.
    std::size_t j = 0;
    for (std::size_t k = 1; k < 3; ++k)
        if (rhoE(k, k).real() > rhoE(j, j).real()) j = k;
    qmath::CVector e(3);
    for (std::size_t i = 0; i < 3; ++i) e[i] = rhoE(i, j);
    e = qmath::normalized(e);

    const double r = 1.0 / std::sqrt(2.0);
    struct Candidate {
        qmath::CVector ket;
        char basis;
        int value;
    };
    const Candidate candidates[4] = {
        {qmath::CVector{0.0, 1.0, 0.0}, 'z', +1},
        {qmath::CVector{0.0, 0.0, 1.0}, 'z', -1},
        {qmath::CVector{0.0, r, r}, 'x', +1},
        {qmath::CVector{0.0, r, -r}, 'x', -1},
    };
    for (const Candidate& c : candidates) {
        if (std::norm(qmath::inner(c.ket, e)) > kPurityThreshold) {
            out.rec.declared = true;
            out.rec.basis = c.basis;
            out.rec.value = c.value;
            break;
        }
    }
    return out;
}

std::string emitted_qubit_label(const qmath::CVector& q) {
    struct Candidate {
        qmath::CVector ket;
        const char* name;
    };
    const Candidate candidates[4] = {
        {qmath::ket_plus(), "z+"},
        {qmath::ket_minus(), "z-"},
        {qmath::ket_plus_x(), "x+"},
        {qmath::ket_minus_x(), "x-"},
    };
    for (const Candidate& c : candidates)
        if (std::norm(qmath::inner(c.ket, q)) > kPurityThreshold)
            return std::string("product:") + c.name;
    return "product:record";
}

} // namespace

const char* to_string(InterpretationMode m) {
    return m == InterpretationMode::UNITARY_LAB ? "unitary_lab" : "objective_collapse";
}

const char* to_string(MeasurementScheme s) {
    return s == MeasurementScheme::WEAK ? "weak" : "projective";
}

const char* to_string(ProtocolAction a) {
    switch (a) {
    case ProtocolAction::Prepare: return "prepare";
    case ProtocolAction::FriendMeasureReset: return "friend_measure_and_reset";
    case ProtocolAction::EmitAndMeasure: return "emit_and_measure";
    case ProtocolAction::AliceMeasure: return "alice_measure";
    }
    return "?";
}

ProtocolConfig ProtocolConfig::defaults() {
    ProtocolConfig c;
    const double r = 1.0 / std::sqrt(2.0);
    c.alpha = r;
    c.beta = r;
    c.theta1 = M_PI / 3.0;
    c.theta2 = M_PI / 3.0;
    c.g = 0.1;
    c.w = 1.0;
    c.betaBoost = 0.0;
    c.events = relativity::default_geometry();
    c.mode = InterpretationMode::UNITARY_LAB;
    c.scheme = MeasurementScheme::WEAK;
    c.aliceBasisAngle = M_PI / 2.0;
    c.trials = 100000;
    c.seed = 1;
    c.s0 = qmath::ket_plus();
    return c;
}

std::string FriendRecord::label() const { return kRecordLabels[record_index(*this)]; }

ExactResults::ExactResults()
    : jointMomentUnnormalized(kNaN), jointMomentNormalized(kNaN), successProb(kNaN),
      aliceMarginal(kNaN), q1AgreeProb(kNaN), q2AgreeProb(kNaN) {}

SummaryStats::SummaryStats()
    : momentEstimate(kNaN), momentSE(kNaN), successFreq(kNaN), successSE(kNaN),
      aliceMarginalFreq(kNaN), aliceMarginalSE(kNaN), q1AgreeFreq(kNaN), q2AgreeFreq(kNaN) {}

std::vector<ScheduleEntry> build_schedule(const ProtocolConfig& config) {
    if (std::abs(config.betaBoost) >= 1.0)
        throw ConfigError("betaBoost must satisfy |beta| < 1");
    relativity::ValidationReport report;
    try {
        report = relativity::validate_geometry(config.events);
    } catch (const GeometryError& e) {
        throw ConfigError(std::string("invalid geometry: ") + e.what());
    }
    if (!report.all_pass()) {
        std::string msg = "geometry validation failed:";
        for (const auto& c : report.checks)
            if (!c.pass) msg += " " + c.name + " (" + c.detail + ")";
        throw ConfigError(msg);
    }

    const Event* byId[4] = {};
    for (const Event& e : config.events) byId[static_cast<std::size_t>(e.id)] = &e;
    const double thr = relativity::inversion_threshold(*byId[2], *byId[3]);
    if (std::abs(config.betaBoost - thr) < 1e-12)
        throw ConfigError("betaBoost equals the E2/E3 inversion threshold beta* = " +
                          std::to_string(thr) +
                          ": E2 and E3 are simultaneous in the boosted frame and the "
                          "schedule is undefined");

    const relativity::Ordering ord =
        relativity::frame_ordering(config.events, {config.betaBoost});
    for (const auto& tie : ord.ties) {
        const bool e2e3 = (tie.first == EventId::E2 && tie.second == EventId::E3) ||
                          (tie.first == EventId::E3 && tie.second == EventId::E2);
        if (e2e3)
            throw ConfigError("E2 and E3 are simultaneous in the boosted frame; "
                              "the schedule is undefined at this betaBoost");
    }

    const auto action_of = [](EventId id) {
        switch (id) {
        case EventId::E0: return ProtocolAction::Prepare;
        case EventId::E1: return ProtocolAction::FriendMeasureReset;
        case EventId::E2: return ProtocolAction::EmitAndMeasure;
        default: return ProtocolAction::AliceMeasure;
        }
    };

    // Preparation initializes the model, so E0 is pinned first even when a
    // large boost drags E3's coordinate time below E0's.
    std::vector<ScheduleEntry> schedule;
    schedule.push_back({*byId[0], ProtocolAction::Prepare});
    for (EventId id : ord.ids) {
        if (id == EventId::E0) continue;
        schedule.push_back({*byId[static_cast<std::size_t>(id)], action_of(id)});
    }
    return schedule;
}

registers::DiscreteState friend_send_qubits(const registers::DiscreteState& state,
                                            std::string* labelOut) {
    const qmath::CMatrix rhoE = registers::reduced_dm(state, {"E"});
    const double tr = qmath::trace(rhoE).real();
    if (tr < 1e-300) throw SingularError("friend_send_qubits: zero-trace state");
    if (rhoE(0, 0).real() / tr > 1e-9)
        throw DomainError("friend_send_qubits: environment has e0 support; emission "
                          "precedes the friend's measurement");

    // Restriction to span{e+, e-}.
    const double a = rhoE(1, 1).real();
    const double d = rhoE(2, 2).real();
    const qmath::cplx c = rhoE(1, 2);
    const double tr2 = a + d;
    const double purity = (a * a + d * d + 2.0 * std::norm(c)) / (tr2 * tr2);

    if (purity > kPurityThreshold) {
        const double lam = 0.5 * (a + d) + std::sqrt(0.25 * (a - d) * (a - d) + std::norm(c));
        qmath::CVector q(2);
        if (std::abs(c) > 1e-15 * tr2) {
            q[0] = c;
            q[1] = lam - a;
        } else {
            q[0] = (a >= d) ? 1.0 : 0.0;
            q[1] = (a >= d) ? 0.0 : 1.0;
        }
        q = qmath::normalized(q);
        if (labelOut) *labelOut = emitted_qubit_label(q);
        return registers::append_qubits(state, q, q);
    }
    if (labelOut) *labelOut = "entangled";
    return registers::controlled_emit(state);
}

FriendRecord declare_record(const registers::DiscreteState& state) {
    const RecordAnalysis a = analyze_record(registers::reduced_dm(state, {"E"}));
    if (a.purity < kPurityThreshold)
        throw RecordError("record undefined: environment state is mixed");
    if (!a.rec.declared)
        throw RecordError("undeclarable record: matches no z- or x-basis record state");
    return a.rec;
}

namespace {

bool alice_after_emission(const std::vector<ScheduleEntry>& schedule) {
    for (const ScheduleEntry& s : schedule) {
        if (s.action == ProtocolAction::EmitAndMeasure) return true;
        if (s.action == ProtocolAction::AliceMeasure) return false;
    }
    throw ContractError("schedule lacks E2/E3");
}

struct ExBranch {
    double prob = 1.0;
    DiscreteState state;
    int collapse = 0;
    int alice = 0;
};

weakmeas::HybridState coupled_hybrid(const DiscreteState& st2, const ProtocolConfig& cfg) {
    weakmeas::HybridState h = weakmeas::attach_pointers(st2, cfg.w);
    h = weakmeas::couple(h, "Q1", 1, cfg.g);
    return weakmeas::couple(h, "Q2", 2, cfg.g);
}

double plus_probability(const qmath::CMatrix& rhoA, double angle) {
    const qmath::CVector k = qmath::ket_plus_theta(angle);
    return qmath::inner(k, qmath::apply(rhoA, k)).real();
}

} // namespace

ExactResults run_exact(const ProtocolConfig& config) {
    const std::vector<ScheduleEntry> schedule = build_schedule(config);
    const bool aliceAfterE2 = alice_after_emission(schedule);
    const bool weak = config.scheme == MeasurementScheme::WEAK;

    ExactResults res;
    for (const ScheduleEntry& s : schedule) res.scheduleOrder.push_back(s.event.id);
    std::map<std::string, double> dist;
    for (const char* l : kRecordLabels) dist[l] = 0.0;

    double moment = 0.0, success = 0.0, alicePlus = 0.0;
    double q1agree = 0.0, q2agree = 0.0;
    std::set<std::string> labels;

    std::vector<ExBranch> branches;
    for (const ScheduleEntry& entry : schedule) {
        switch (entry.action) {
        case ProtocolAction::Prepare: {
            branches.clear();
            branches.push_back({1.0, registers::prepare_initial(config.alpha, config.beta), 0, 0});
            break;
        }
        case ProtocolAction::FriendMeasureReset: {
            for (ExBranch& b : branches)
                b.state = registers::friend_measure_and_reset(b.state, config.s0);
            if (config.mode == InterpretationMode::OBJECTIVE_COLLAPSE) {
                std::vector<ExBranch> split;
                for (const ExBranch& b : branches) {
                    for (int sign : {+1, -1}) {
                        DiscreteState pb = registers::project_register(
                            b.state, "E", env_ket(sign > 0 ? registers::kRecPlus
                                                           : registers::kRecMinus));
                        const double nn = pb.norm();
                        if (nn * nn < 1e-15) continue;
                        split.push_back({b.prob * nn * nn, registers::normalized(pb), sign,
                                         b.alice});
                    }
                }
                branches = std::move(split);
            }
            break;
        }
        case ProtocolAction::AliceMeasure: {
            if (!aliceAfterE2) {
                std::vector<ExBranch> split;
                for (const ExBranch& b : branches) {
                    for (int sign : {+1, -1}) {
                        DiscreteState pb = registers::project_register(
                            b.state, "A", alice_ket(config.aliceBasisAngle, sign));
                        const double nn = pb.norm();
                        if (nn * nn < 1e-15) continue;
                        if (sign > 0) alicePlus += b.prob * nn * nn;
                        split.push_back({b.prob * nn * nn, registers::normalized(pb),
                                         b.collapse, sign});
                    }
                }
                branches = std::move(split);
            }
            break;
        }
        case ProtocolAction::EmitAndMeasure: {
            for (const ExBranch& b : branches) {
                std::string label;
                const DiscreteState st2 = friend_send_qubits(b.state, &label);
                labels.insert(label);
                if (aliceAfterE2)
                    alicePlus += b.prob * plus_probability(registers::reduced_dm(st2, {"A"}),
                                                           config.aliceBasisAngle);
                if (weak) {
                    const weakmeas::HybridState h = coupled_hybrid(st2, config);
                    const auto [sel, sp] = weakmeas::postselect_qubits(
                        h, {config.theta1, config.theta2, +1});
                    moment += b.prob * weakmeas::joint_position_moment(sel);
                    success += b.prob * sp;
                    for (int o1 : {+1, -1}) {
                        const weakmeas::HybridState h1 =
                            weakmeas::project_qubit(h, "Q1", alice_ket(config.theta1, o1));
                        for (int o2 : {+1, -1}) {
                            const weakmeas::HybridState ho =
                                weakmeas::project_qubit(h1, "Q2", alice_ket(config.theta2, o2));
                            const double wo = weakmeas::norm2(ho);
                            if (wo < 1e-15) continue;
                            const RecordAnalysis ra =
                                analyze_record(weakmeas::reduced_dm(ho, {"E"}));
                            dist[ra.rec.label()] += b.prob * wo;
                        }
                    }
                } else {
                    const std::vector<qmath::CVector> zB = {qmath::ket_plus(), qmath::ket_minus()};
                    const std::vector<qmath::CVector> xB = {qmath::ket_plus_x(),
                                                            qmath::ket_minus_x()};
                    for (int iq1 : {0, 1}) {
                        DiscreteState b1 = registers::project_register(st2, "Q1", zB[iq1]);
                        const double w1 = b1.norm() * b1.norm();
                        if (w1 < 1e-15) continue;
                        b1 = registers::normalized(b1);
                        for (int iq2 : {0, 1}) {
                            DiscreteState b2 = registers::project_register(b1, "Q2", xB[iq2]);
                            const double w2 = b2.norm() * b2.norm();
                            if (w2 < 1e-15) continue;
                            b2 = registers::normalized(b2);
                            const double pw = b.prob * w1 * w2;
                            const RecordAnalysis ra =
                                analyze_record(registers::reduced_dm(b2, {"E"}));
                            dist[ra.rec.label()] += pw;
                            if (ra.rec.declared) {
                                const int v1 = (iq1 == 0) ? +1 : -1;
                                const int v2 = (iq2 == 0) ? +1 : -1;
                                if (v1 == ra.rec.value) q1agree += pw;
                                if (v2 == ra.rec.value) q2agree += pw;
                            }
                        }
                    }
                }
            }
            break;
        }
        }
    }

    double total = 0.0;
    for (const auto& [k, v] : dist) total += v;
    if (std::abs(total - 1.0) > 1e-9)
        throw ContractError("run_exact: record distribution does not sum to 1");

    res.friendRecordDistribution = dist;
    res.aliceMarginal = alicePlus;
    if (weak) {
        res.jointMomentUnnormalized = moment;
        res.successProb = success;
        res.jointMomentNormalized = (success > 1e-14) ? moment / success : kNaN;
    } else {
        res.q1AgreeProb = q1agree;
        res.q2AgreeProb = q2agree;
    }
    std::string joined;
    for (const std::string& l : labels) joined += (joined.empty() ? "" : "|") + l;
    res.emittedQubitStateLabel = joined;
    return res;
}

namespace {

struct SamplerCache {
    std::array<std::unique_ptr<weakmeas::PositionSampler>, 36> byKey;

    static std::size_t key(int collapse, int alicePre, int o1, int o2) {
        return (static_cast<std::size_t>(collapse + 1) * 3 +
                static_cast<std::size_t>(alicePre + 1)) *
                   4 +
               static_cast<std::size_t>(o1 > 0 ? 0 : 2) + static_cast<std::size_t>(o2 > 0 ? 0 : 1);
    }
};

std::unique_ptr<SamplerCache> build_sampler_cache(const ProtocolConfig& cfg,
                                                  const std::vector<ScheduleEntry>& schedule) {
    if (cfg.scheme != MeasurementScheme::WEAK) return nullptr;
    auto cache = std::make_unique<SamplerCache>();
    const bool collapseMode = cfg.mode == InterpretationMode::OBJECTIVE_COLLAPSE;
    const bool alicePreE2 = !alice_after_emission(schedule);

    const std::vector<int> collapses = collapseMode ? std::vector<int>{+1, -1}
                                                    : std::vector<int>{0};
    const std::vector<int> alices = alicePreE2 ? std::vector<int>{+1, -1} : std::vector<int>{0};
    for (int c : collapses) {
        for (int a : alices) {
            DiscreteState st;
            bool dead = false;
            for (const ScheduleEntry& entry : schedule) {
                if (entry.action == ProtocolAction::Prepare) {
                    st = registers::prepare_initial(cfg.alpha, cfg.beta);
                } else if (entry.action == ProtocolAction::FriendMeasureReset) {
                    st = registers::friend_measure_and_reset(st, cfg.s0);
                    if (collapseMode) {
                        DiscreteState pb = registers::project_register(
                            st, "E", env_ket(c > 0 ? registers::kRecPlus : registers::kRecMinus));
                        if (pb.norm() < 1e-150) {
                            dead = true;
                            break;
                        }
                        st = registers::normalized(pb);
                    }
                } else if (entry.action == ProtocolAction::AliceMeasure) {
                    DiscreteState pb =
                        registers::project_register(st, "A", alice_ket(cfg.aliceBasisAngle, a));
                    if (pb.norm() < 1e-150) {
                        dead = true;
                        break;
                    }
                    st = registers::normalized(pb);
                } else {
                    break; // EmitAndMeasure: branch state complete
                }
            }
            if (dead) continue;
            const DiscreteState st2 = friend_send_qubits(st);
            const weakmeas::HybridState h = coupled_hybrid(st2, cfg);
            for (int o1 : {+1, -1}) {
                const weakmeas::HybridState h1 =
                    weakmeas::project_qubit(h, "Q1", alice_ket(cfg.theta1, o1));
                for (int o2 : {+1, -1}) {
                    const weakmeas::HybridState ho =
                        weakmeas::project_qubit(h1, "Q2", alice_ket(cfg.theta2, o2));
                    if (weakmeas::norm2(ho) < 1e-150) continue;
                    cache->byKey[SamplerCache::key(c, a, o1, o2)] =
                        std::make_unique<weakmeas::PositionSampler>(ho);
                }
            }
        }
    }
    return cache;
}

RunRecord trial_impl(const ProtocolConfig& cfg, const std::vector<ScheduleEntry>& schedule,
                     RandomStream& rng, const SamplerCache* cache) {
    RunRecord rec;
    for (const ScheduleEntry& s : schedule) rec.frameOrdering.push_back(s.event.id);

    DiscreteState st;
    int collapse = 0;
    int alicePre = 0;
    bool emissionDone = false;

    for (const ScheduleEntry& entry : schedule) {
        switch (entry.action) {
        case ProtocolAction::Prepare:
            st = registers::prepare_initial(cfg.alpha, cfg.beta);
            break;
        case ProtocolAction::FriendMeasureReset: {
            st = registers::friend_measure_and_reset(st, cfg.s0);
            rec.ancillaFlag = true;
            if (cfg.mode == InterpretationMode::OBJECTIVE_COLLAPSE) {
                const std::vector<qmath::CVector> basis = {env_ket(registers::kRecPlus),
                                                           env_ket(registers::kRecMinus),
                                                           env_ket(registers::kReady)};
                auto [oc, post] = registers::measure_projective(st, "E", basis, "z-record", rng);
                st = std::move(post);
                collapse = oc.value;
            }
            break;
        }
        case ProtocolAction::AliceMeasure: {
            const std::vector<qmath::CVector> basis = {alice_ket(cfg.aliceBasisAngle, +1),
                                                       alice_ket(cfg.aliceBasisAngle, -1)};
            auto [oc, post] = registers::measure_projective(st, "A", basis, "alice", rng);
            st = std::move(post);
            rec.aliceOutcome = oc.value;
            if (!emissionDone) alicePre = oc.value;
            break;
        }
        case ProtocolAction::EmitAndMeasure: {
            DiscreteState st2 = friend_send_qubits(st);
            if (cfg.scheme == MeasurementScheme::WEAK) {
                const weakmeas::HybridState h = coupled_hybrid(st2, cfg);
                std::array<weakmeas::HybridState, 4> branches;
                std::vector<double> probs(4);
                std::size_t k = 0;
                for (int o1 : {+1, -1}) {
                    const weakmeas::HybridState h1 =
                        weakmeas::project_qubit(h, "Q1", alice_ket(cfg.theta1, o1));
                    for (int o2 : {+1, -1}) {
                        branches[k] = weakmeas::project_qubit(h1, "Q2", alice_ket(cfg.theta2, o2));
                        probs[k] = weakmeas::norm2(branches[k]);
                        ++k;
                    }
                }
                const std::size_t sel = rng.pick(probs);
                rec.postselected = (sel == 0);
                const int o1 = (sel < 2) ? +1 : -1;
                const int o2 = (sel % 2 == 0) ? +1 : -1;
                std::pair<double, double> xs;
                if (cache) {
                    const auto& sampler = cache->byKey[SamplerCache::key(collapse, alicePre, o1, o2)];
                    if (!sampler) throw ContractError("trial reached an unsampled branch");
                    xs = sampler->sample(rng);
                } else {
                    xs = weakmeas::PositionSampler(branches[sel]).sample(rng);
                }
                rec.x1 = xs.first;
                rec.x2 = xs.second;
                st = weakmeas::collapse_at_positions(branches[sel], rec.x1, rec.x2);
            } else {
                const std::vector<qmath::CVector> zB = {qmath::ket_plus(), qmath::ket_minus()};
                const std::vector<qmath::CVector> xB = {qmath::ket_plus_x(), qmath::ket_minus_x()};
                auto [oc1, post1] = registers::measure_projective(st2, "Q1", zB, "z", rng);
                auto [oc2, post2] = registers::measure_projective(post1, "Q2", xB, "x", rng);
                st = std::move(post2);
                rec.q1 = oc1.value;
                rec.q2 = oc2.value;
            }
            rec.friendRecord = analyze_record(registers::reduced_dm(st, {"E"})).rec;
            emissionDone = true;
            break;
        }
        }
    }
    return rec;
}

struct BlockAgg {
    std::uint64_t count = 0;
    std::uint64_t success = 0;
    std::uint64_t alicePlus = 0;
    std::uint64_t records[5] = {0, 0, 0, 0, 0};
    std::uint64_t q1Agree = 0;
    std::uint64_t q2Agree = 0;
    double sumV = 0.0;
    double sumV2 = 0.0;
};

} // namespace

RunRecord run_trial(const ProtocolConfig& config, RandomStream& rng) {
    const std::vector<ScheduleEntry> schedule = build_schedule(config);
    return trial_impl(config, schedule, rng, nullptr);
}

SummaryStats run_monte_carlo(const ProtocolConfig& config, std::uint64_t n, std::uint64_t seed,
                             unsigned workers) {
    if (n < 1) throw ConfigError("run_monte_carlo: trials must be >= 1");
    const std::vector<ScheduleEntry> schedule = build_schedule(config);
    const std::unique_ptr<SamplerCache> cache = build_sampler_cache(config, schedule);

    unsigned w = workers;
    if (w == 0) {
        const unsigned hc = std::thread::hardware_concurrency();
        w = hc == 0 ? 1 : std::min(hc, 16u);
    }
    const std::uint64_t nBlocks = (n + kBlockSize - 1) / kBlockSize;
    if (static_cast<std::uint64_t>(w) > nBlocks) w = static_cast<unsigned>(nBlocks);

    std::vector<BlockAgg> blocks(nBlocks);
    std::atomic<std::uint64_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr firstError;
    std::mutex errorMutex;

    const bool weak = config.scheme == MeasurementScheme::WEAK;
    auto work = [&]() {
        try {
            for (;;) {
                const std::uint64_t b = next.fetch_add(1);
                if (b >= nBlocks || failed.load()) break;
                BlockAgg agg;
                const std::uint64_t lo = b * kBlockSize;
                const std::uint64_t hi = std::min(n, lo + kBlockSize);
                for (std::uint64_t t = lo; t < hi; ++t) {
                    RandomStream rng = RandomStream::substream(seed, t);
                    const RunRecord r = trial_impl(config, schedule, rng, cache.get());
                    ++agg.count;
                    if (r.aliceOutcome > 0) ++agg.alicePlus;
                    ++agg.records[record_index(r.friendRecord)];
                    if (weak) {
                        if (r.postselected) {
                            ++agg.success;
                            const double v = r.x1 * r.x2;
                            agg.sumV += v;
                            agg.sumV2 += v * v;
                        }
                    } else if (r.friendRecord.declared) {
                        if (r.q1 == r.friendRecord.value) ++agg.q1Agree;
                        if (r.q2 == r.friendRecord.value) ++agg.q2Agree;
                    }
                }
                blocks[b] = agg;
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(errorMutex);
            if (!firstError) firstError = std::current_exception();
            failed.store(true);
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(w);
    for (unsigned i = 0; i < w; ++i) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
    if (firstError) std::rethrow_exception(firstError);

    BlockAgg sum;
    for (const BlockAgg& b : blocks) {
        sum.count += b.count;
        sum.success += b.success;
        sum.alicePlus += b.alicePlus;
        for (int i = 0; i < 5; ++i) sum.records[i] += b.records[i];
        sum.q1Agree += b.q1Agree;
        sum.q2Agree += b.q2Agree;
        sum.sumV += b.sumV;
        sum.sumV2 += b.sumV2;
    }
    const double dn = static_cast<double>(n);

    SummaryStats st;
    st.trials = n;
    st.workersUsed = w;
    const auto freqSE = [dn](double f) { return std::sqrt(std::max(f * (1.0 - f), 0.0) / dn); };
    st.aliceMarginalFreq = static_cast<double>(sum.alicePlus) / dn;
    st.aliceMarginalSE = freqSE(st.aliceMarginalFreq);
    for (int i = 0; i < 5; ++i)
        st.recordDistribution[kRecordLabels[i]] = static_cast<double>(sum.records[i]) / dn;
    if (weak) {
        st.successFreq = static_cast<double>(sum.success) / dn;
        st.successSE = freqSE(st.successFreq);
        st.momentEstimate = sum.sumV / dn;
        if (n > 1) {
            const double var =
                std::max(0.0, (sum.sumV2 - sum.sumV * sum.sumV / dn) / (dn - 1.0));
            st.momentSE = std::sqrt(var / dn);
        }
    } else {
        st.q1AgreeFreq = static_cast<double>(sum.q1Agree) / dn;
        st.q2AgreeFreq = static_cast<double>(sum.q2Agree) / dn;
    }
    return st;
}

} // namespace wfsim::engine

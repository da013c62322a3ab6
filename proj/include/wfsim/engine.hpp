// Protocol state machine: binds events to actions, executes them in the
// frame-determined order under the selected interpretation mode and
// measurement scheme, and produces exact results and per-trial records.
#pragma once

#include "wfsim/qmath.hpp"
#include "wfsim/registers.hpp"
#include "wfsim/relativity.hpp"
#include "wfsim/rng.hpp"
#include "wfsim/weakmeas.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace wfsim::engine {

enum class InterpretationMode { UNITARY_LAB, OBJECTIVE_COLLAPSE };
enum class MeasurementScheme { WEAK, PROJECTIVE };

const char* to_string(InterpretationMode m);
const char* to_string(MeasurementScheme s);

struct ProtocolConfig {
    qmath::cplx alpha{1.0, 0.0};
    qmath::cplx beta{0.0, 0.0};
    double theta1 = 0.0;
    double theta2 = 0.0;
    double g = 0.1;
    double w = 1.0;
    double betaBoost = 0.0;
    std::vector<relativity::Event> events;
    InterpretationMode mode = InterpretationMode::UNITARY_LAB;
    MeasurementScheme scheme = MeasurementScheme::WEAK;
    double aliceBasisAngle = 0.0; // 0 = z basis, pi/2 = x basis
    std::uint64_t trials = 100000;
    std::uint64_t seed = 1;
    qmath::CVector s0 = qmath::ket_plus(); // friend's reset target

    static ProtocolConfig defaults();
};

struct FriendRecord {
    bool declared = false;
    char basis = 0; // 'z' or 'x'
    int value = 0;  // +1 or -1

    std::string label() const; // "z+", "z-", "x+", "x-", "undeclared"
};

struct RunRecord {
    std::vector<relativity::EventId> frameOrdering;
    FriendRecord friendRecord;
    bool postselected = false; // WEAK
    double x1 = 0.0, x2 = 0.0; // WEAK pointer readouts
    int q1 = 0, q2 = 0;        // PROJECTIVE outcomes
    int aliceOutcome = 0;
    bool ancillaFlag = false; // friend signalled "measurement completed"
};

// Fields hold NaN when not applicable to the scheme.
struct ExactResults {
    double jointMomentUnnormalized;
    double jointMomentNormalized;
    double successProb;
    std::map<std::string, double> friendRecordDistribution;
    double aliceMarginal;
    std::string emittedQubitStateLabel;
    double q1AgreeProb; // P(q1 outcome == declared record value)
    double q2AgreeProb;
    std::vector<relativity::EventId> scheduleOrder;

    ExactResults();
};

struct SummaryStats {
    std::uint64_t trials = 0;
    double momentEstimate, momentSE; // mean(1_success * x1 * x2)
    double successFreq, successSE;
    double aliceMarginalFreq, aliceMarginalSE;
    std::map<std::string, double> recordDistribution;
    double q1AgreeFreq, q2AgreeFreq;
    unsigned workersUsed = 1;

    SummaryStats();
};

enum class ProtocolAction { Prepare, FriendMeasureReset, EmitAndMeasure, AliceMeasure };

const char* to_string(ProtocolAction a);

struct ScheduleEntry {
    relativity::Event event;
    ProtocolAction action;
};

// Executable event order: E0 first (preparation initializes the model), the
// rest by boosted time. Throws ConfigError on invalid geometry or when
// betaBoost sits at the E2/E3 inversion threshold (simultaneous in R').
std::vector<ScheduleEntry> build_schedule(const ProtocolConfig& config);

// Record-conditioned emission: when the environment holds a definite record
// a|e+> + b|e->, emit Q1 = Q2 = a|+> + b|->; otherwise apply the entangled
// controlled emission. `labelOut` (optional) receives a descriptor.
registers::DiscreteState friend_send_qubits(const registers::DiscreteState& state,
                                            std::string* labelOut = nullptr);

// Match the (pure) environment record against {e+, e-, e+x, e-x}. Throws
// RecordError when the record is mixed or matches none of them.
FriendRecord declare_record(const registers::DiscreteState& state);

ExactResults run_exact(const ProtocolConfig& config);

RunRecord run_trial(const ProtocolConfig& config, RandomStream& rng);

// Trials use substreams derived from (seed, trialIndex); aggregation is in
// fixed trial-index blocks, so results are independent of worker count.
SummaryStats run_monte_carlo(const ProtocolConfig& config, std::uint64_t n, std::uint64_t seed,
                             unsigned workers = 0);

} // namespace wfsim::engine

// Spacetime bookkeeping: protocol events E0-E3, Lorentz boosts, per-frame
// time ordering, spacelike-separation validation, and the boost-velocity
// threshold at which the E2/E3 ordering inverts. Units: c = 1.
#pragma once

#include <string>
#include <vector>

namespace wfsim::relativity {

enum class EventId { E0, E1, E2, E3 };

const char* to_string(EventId id);

struct Event {
    EventId id = EventId::E0;
    double t = 0.0;
    double x = 0.0;
};

struct Boost {
    double beta = 0.0;
    double gamma() const;
};

// t' = gamma (t - beta x), x' = gamma (x - beta t).
Event boost_event(const Event& e, const Boost& b);

// Dt^2 - Dx^2; negative iff spacelike.
double interval(const Event& e1, const Event& e2);

struct Ordering {
    std::vector<EventId> ids; // ascending boosted time, ties by id order
    bool simultaneity = false;
    std::vector<std::pair<EventId, EventId>> ties;
};

Ordering frame_ordering(const std::vector<Event>& events, const Boost& b);

// Minimal beta at which e3 precedes e2 in the boosted frame:
// beta* = (t3 - t2)/(x3 - x2). Requires a spacelike pair with x3 > x2,
// t3 >= t2.
double inversion_threshold(const Event& e2, const Event& e3);

struct ValidationCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    bool all_pass() const;
};

// Protocol constraints: E0-E2 colocated at x = 0, E3 at x_A > 0, strictly
// increasing rest-frame times, E2/E3 spacelike.
ValidationReport validate_geometry(const std::vector<Event>& events);

// Artifact default: t0=0, t1=0.5, t2=1, t3=2, x_A=10 (so beta* = 0.1).
std::vector<Event> default_geometry();

} // namespace wfsim::relativity

#include "wfsim/relativity.hpp"

#include "wfsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace wfsim::relativity {

const char* to_string(EventId id) {
    switch (id) {
    case EventId::E0: return "E0";
    case EventId::E1: return "E1";
    case EventId::E2: return "E2";
    case EventId::E3: return "E3";
    }
    return "?";
}

double Boost::gamma() const {
    if (std::abs(beta) >= 1.0) throw KinematicsError("boost: |beta| must be < 1");
    return 1.0 / std::sqrt(1.0 - beta * beta);
}

Event boost_event(const Event& e, const Boost& b) {
    const double g = b.gamma();
    Event out = e;
    out.t = g * (e.t - b.beta * e.x);
    out.x = g * (e.x - b.beta * e.t);
    return out;
}

double interval(const Event& e1, const Event& e2) {
    const double dt = e2.t - e1.t;
    const double dx = e2.x - e1.x;
    // Factored form keeps the absolute error small near the light cone.
    return (dt - dx) * (dt + dx);
}

Ordering frame_ordering(const std::vector<Event>& events, const Boost& b) {
    std::vector<Event> boosted;
    boosted.reserve(events.size());
    for (const Event& e : events) boosted.push_back(boost_event(e, b));

    std::vector<std::size_t> order(events.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (boosted[i].t != boosted[j].t) return boosted[i].t < boosted[j].t;
        return boosted[i].id < boosted[j].id;
    });

    Ordering out;
    out.ids.reserve(order.size());
    for (std::size_t i : order) out.ids.push_back(events[i].id);
    double scale = 1.0;
    for (const Event& e : boosted) scale = std::max(scale, std::abs(e.t));
    for (std::size_t a = 0; a < order.size(); ++a)
        for (std::size_t c = a + 1; c < order.size(); ++c)
            if (std::abs(boosted[order[a]].t - boosted[order[c]].t) <= 1e-12 * scale) {
                out.simultaneity = true;
                out.ties.emplace_back(events[order[a]].id, events[order[c]].id);
            }
    return out;
}

double inversion_threshold(const Event& e2, const Event& e3) {
    if (interval(e2, e3) >= 0.0)
        throw GeometryError("inversion_threshold: pair is not spacelike; ordering is frame-invariant");
    if (e3.x <= e2.x || e3.t < e2.t)
        throw GeometryError("inversion_threshold: requires x3 > x2 and t3 >= t2");
    return (e3.t - e2.t) / (e3.x - e2.x);
}

bool ValidationReport::all_pass() const {
    for (const ValidationCheck& c : checks)
        if (!c.pass) return false;
    return true;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

} // namespace

ValidationReport validate_geometry(const std::vector<Event>& events) {
    if (events.size() != 4) throw GeometryError("validate_geometry: expected exactly four events");
    const Event* byId[4] = {nullptr, nullptr, nullptr, nullptr};
    for (const Event& e : events) {
        const std::size_t k = static_cast<std::size_t>(e.id);
        if (byId[k]) throw GeometryError("validate_geometry: duplicate event id");
        byId[k] = &e;
    }
    const Event& e0 = *byId[0];
    const Event& e1 = *byId[1];
    const Event& e2 = *byId[2];
    const Event& e3 = *byId[3];

    ValidationReport rep;
    const bool colocated = e0.x == 0.0 && e1.x == 0.0 && e2.x == 0.0;
    rep.checks.push_back({"lab_events_at_origin", colocated,
                          "x0=" + fmt(e0.x) + " x1=" + fmt(e1.x) + " x2=" + fmt(e2.x)});
    rep.checks.push_back({"alice_position_positive", e3.x > 0.0, "x3=" + fmt(e3.x)});
    const bool ordered = e0.t < e1.t && e1.t < e2.t && e2.t < e3.t;
    rep.checks.push_back({"rest_frame_time_order", ordered,
                          "t=[" + fmt(e0.t) + ", " + fmt(e1.t) + ", " + fmt(e2.t) + ", " +
                              fmt(e3.t) + "]"});
    const double s23 = interval(e2, e3);
    rep.checks.push_back({"e2_e3_spacelike", s23 < 0.0, "interval=" + fmt(s23)});
    return rep;
}

std::vector<Event> default_geometry() {
    return {{EventId::E0, 0.0, 0.0},
            {EventId::E1, 0.5, 0.0},
            {EventId::E2, 1.0, 0.0},
            {EventId::E3, 2.0, 10.0}};
}

} // namespace wfsim::relativity

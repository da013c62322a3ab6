#include "wfsim/shell.hpp"

#include "wfsim/errors.hpp"
#include "wfsim/version.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

namespace wfsim::shell {

namespace {

using engine::InterpretationMode;
using engine::MeasurementScheme;
using engine::ProtocolConfig;
using relativity::Event;
using relativity::EventId;

const char* const kRecordOrder[5] = {"z+", "z-", "x+", "x-", "undeclared"};

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

const std::map<std::string, std::set<std::string>>& config_schema() {
    static const std::map<std::string, std::set<std::string>> schema = {
        {"state", {"alpha", "beta", "s0"}},
        {"angles", {"theta1", "theta2", "alice_basis_angle"}},
        {"coupling", {"g", "w"}},
        {"geometry", {"t0", "t1", "t2", "t3", "x_a"}},
        {"frame", {"beta"}},
        {"mode", {"interpretation", "scheme"}},
        {"runs", {"trials", "seed"}},
    };
    return schema;
}

struct RawEntry {
    std::string value;
    std::size_t line = 0;
    std::size_t col = 0;
};

[[noreturn]] void fail_at(std::size_t line, std::size_t col, const std::string& msg) {
    std::ostringstream os;
    os << "line " << line << ", column " << col << ": " << msg;
    throw ConfigError(os.str());
}

double parse_number(const RawEntry& e, const std::string& key) {
    static const std::regex piRe(
        R"(^([+-])?\s*([0-9]+(\.[0-9]+)?)?\s*[Pp][Ii]\s*(/\s*([0-9]+(\.[0-9]+)?))?$)");
    std::smatch m;
    if (std::regex_match(e.value, m, piRe)) {
        double coeff = m[2].matched ? std::stod(m[2].str()) : 1.0;
        if (m[1].matched && m[1].str() == "-") coeff = -coeff;
        const double div = m[5].matched ? std::stod(m[5].str()) : 1.0;
        if (div == 0.0) fail_at(e.line, e.col, key + ": zero divisor in pi literal");
        return coeff * M_PI / div;
    }
    const char* s = e.value.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s, &end);
    if (end == s || *end != '\0' || errno == ERANGE)
        fail_at(e.line, e.col, key + ": expected a number, got '" + e.value + "'");
    return v;
}

qmath::cplx parse_complex(const RawEntry& e, const std::string& key) {
    const std::size_t comma = e.value.find(',');
    if (comma == std::string::npos) return {parse_number(e, key), 0.0};
    RawEntry re{trim(e.value.substr(0, comma)), e.line, e.col};
    RawEntry im{trim(e.value.substr(comma + 1)), e.line, e.col};
    if (re.value.empty() || im.value.empty())
        fail_at(e.line, e.col, key + ": expected 're' or 're,im'");
    return {parse_number(re, key), parse_number(im, key)};
}

std::uint64_t parse_uint(const RawEntry& e, const std::string& key) {
    std::uint64_t v = 0;
    const char* first = e.value.data();
    const char* last = first + e.value.size();
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last)
        fail_at(e.line, e.col, key + ": expected a non-negative integer, got '" + e.value + "'");
    return v;
}

struct GeometryValues {
    double t0, t1, t2, t3, xA;
};

GeometryValues default_geometry_values() {
    GeometryValues g{};
    for (const Event& e : relativity::default_geometry()) {
        switch (e.id) {
        case EventId::E0: g.t0 = e.t; break;
        case EventId::E1: g.t1 = e.t; break;
        case EventId::E2: g.t2 = e.t; break;
        case EventId::E3: g.t3 = e.t; g.xA = e.x; break;
        }
    }
    return g;
}

const Event& event_by_id(const std::vector<Event>& events, EventId id) {
    for (const Event& e : events)
        if (e.id == id) return e;
    throw ConfigError(std::string("geometry lacks event ") + relativity::to_string(id));
}

double beta_star(const ProtocolConfig& cfg) {
    try {
        return relativity::inversion_threshold(event_by_id(cfg.events, EventId::E2),
                                               event_by_id(cfg.events, EventId::E3));
    } catch (const GeometryError& e) {
        throw ConfigError(std::string("cannot compute inversion threshold: ") + e.what());
    }
}

std::string s0_name(const qmath::CVector& s0) {
    struct Named {
        qmath::CVector ket;
        const char* name;
    };
    const Named named[3] = {
        {qmath::ket_plus(), "plus"},
        {qmath::ket_minus(), "minus"},
        {qmath::ket_plus_x(), "plus_x"},
    };
    for (const Named& n : named)
        if (s0.dim() == 2 && std::norm(qmath::inner(n.ket, s0)) > 1.0 - 1e-12) return n.name;
    throw ConfigError("s0 has no canonical name (expected plus, minus, or plus_x)");
}

std::string csv_quote(const std::string& cell) {
    if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
    std::string out = "\"";
    for (char c : cell) {
        out += c;
        if (c == '"') out += '"';
    }
    out += '"';
    return out;
}

std::string json_leaf_text(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump(); // numbers, bools, null: same bytes as the JSON document
}

void flatten(const Json& j, const std::string& prefix,
             std::vector<std::pair<std::string, std::string>>& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items())
            flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    } else if (j.is_array()) {
        std::size_t i = 0;
        for (const auto& v : j) {
            flatten(v, prefix + "." + std::to_string(i), out);
            ++i;
        }
    } else {
        out.emplace_back(prefix, json_leaf_text(j));
    }
}

Json exact_json(const engine::ExactResults& r, MeasurementScheme scheme) {
    Json e;
    Json order = Json::array();
    for (EventId id : r.scheduleOrder) order.push_back(relativity::to_string(id));
    e["scheduleOrder"] = order;
    e["emittedQubitState"] = r.emittedQubitStateLabel;
    if (scheme == MeasurementScheme::WEAK) {
        e["jointMoment"] = {{"value", r.jointMomentUnnormalized}, {"convention", "unnormalized"}};
        e["successProb"] = r.successProb;
        if (std::isfinite(r.jointMomentNormalized))
            e["jointMomentNormalized"] = {{"value", r.jointMomentNormalized},
                                          {"convention", "normalized"}};
        e["scaledMoment"] = {
            {"value", 4.0 * r.jointMomentUnnormalized},
            {"note", "unnormalized moment divided by the leading-order post-selection "
                     "probability 1/4; some presentations print this scaled form"}};
    } else {
        e["q1AgreeProb"] = r.q1AgreeProb;
        e["q2AgreeProb"] = r.q2AgreeProb;
    }
    Json dist;
    for (const char* k : kRecordOrder) dist[k] = r.friendRecordDistribution.at(k);
    e["friendRecordDistribution"] = dist;
    e["aliceMarginal"] = r.aliceMarginal;
    return e;
}

Json estimate_json(double value, double se) { return Json{{"value", value}, {"se", se}}; }

Json mc_json(const engine::SummaryStats& s, MeasurementScheme scheme) {
    const double n = static_cast<double>(s.trials);
    const auto freq_se = [n](double f) { return std::sqrt(std::max(f * (1.0 - f), 0.0) / n); };
    Json m;
    m["trials"] = s.trials;
    if (scheme == MeasurementScheme::WEAK) {
        m["momentEstimate"] = {{"value", s.momentEstimate},
                               {"se", s.momentSE},
                               {"convention", "unnormalized"}};
        m["successFreq"] = estimate_json(s.successFreq, s.successSE);
    } else {
        m["q1AgreeFreq"] = estimate_json(s.q1AgreeFreq, freq_se(s.q1AgreeFreq));
        m["q2AgreeFreq"] = estimate_json(s.q2AgreeFreq, freq_se(s.q2AgreeFreq));
    }
    m["aliceMarginalFreq"] = estimate_json(s.aliceMarginalFreq, s.aliceMarginalSE);
    Json dist;
    for (const char* k : kRecordOrder) {
        const double f = s.recordDistribution.at(k);
        dist[k] = estimate_json(f, freq_se(f));
    }
    m["recordDistribution"] = dist;
    return m;
}

Json base_doc(const char* command, const ProtocolConfig& cfg) {
    Json d;
    d["schema"] = kResultSchema;
    d["version"] = kVersion;
    d["command"] = command;
    d["seedDerivation"] =
        "trial i draws from a splitmix64 stream seeded with mix64(seed XOR mix64(i XOR "
        "0xA0761D6478BD642F)), where mix64 is the splitmix64 finalizer";
    d["config"] = config_json(cfg);
    return d;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    if (in.bad()) throw IoError("cannot read config file: " + path);
    return os.str();
}

void write_output(const std::string& text, const std::string& outPath) {
    if (outPath.empty() || outPath == "-") {
        std::cout << text;
        std::cout.flush();
        if (!std::cout) throw IoError("cannot write to standard output");
        return;
    }
    std::ofstream out(outPath, std::ios::binary);
    if (!out) throw IoError("cannot open output file: " + outPath);
    out << text;
    out.flush();
    if (!out) throw IoError("cannot write output file: " + outPath);
}

} // namespace

engine::ProtocolConfig parse_config(const std::string& text) {
    const auto& schema = config_schema();
    std::map<std::string, RawEntry> entries;   // "section.key" -> raw value
    std::map<std::string, std::size_t> firstLine;

    std::istringstream in(text);
    std::string rawLine;
    std::string section;
    std::size_t lineNo = 0;
    while (std::getline(in, rawLine)) {
        ++lineNo;
        const std::size_t hash = rawLine.find('#');
        if (hash != std::string::npos) rawLine.erase(hash);
        const std::string line = trim(rawLine);
        if (line.empty()) continue;
        const std::size_t col = rawLine.find_first_not_of(" \t\r") + 1;
        if (line.front() == '[') {
            if (line.back() != ']') fail_at(lineNo, col, "unterminated section header");
            const std::string name = trim(line.substr(1, line.size() - 2));
            if (schema.find(name) == schema.end())
                fail_at(lineNo, col, "unknown section [" + name + "]");
            section = name;
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail_at(lineNo, col, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail_at(lineNo, col, "empty key");
        if (section.empty()) fail_at(lineNo, col, "key '" + key + "' outside any section");
        if (schema.at(section).find(key) == schema.at(section).end())
            fail_at(lineNo, col, "unknown key '" + key + "' in section [" + section + "]");
        if (value.empty()) fail_at(lineNo, col, "key '" + key + "' has no value");
        const std::string full = section + "." + key;
        const auto prev = firstLine.find(full);
        if (prev != firstLine.end()) {
            std::ostringstream os;
            os << "line " << lineNo << ": duplicate key '" << key << "' in section [" << section
               << "] (first defined at line " << prev->second << ")";
            throw ConfigError(os.str());
        }
        firstLine[full] = lineNo;
        const std::size_t vcol = rawLine.find('=') + 2;
        entries[full] = RawEntry{value, lineNo, vcol};
    }

    ProtocolConfig cfg = ProtocolConfig::defaults();
    GeometryValues geom = default_geometry_values();

    const auto get = [&](const char* full) -> const RawEntry* {
        const auto it = entries.find(full);
        return it == entries.end() ? nullptr : &it->second;
    };

    if (const RawEntry* e = get("state.alpha")) cfg.alpha = parse_complex(*e, "alpha");
    if (const RawEntry* e = get("state.beta")) cfg.beta = parse_complex(*e, "beta");
    if (const RawEntry* e = get("state.s0")) {
        if (e->value == "plus") cfg.s0 = qmath::ket_plus();
        else if (e->value == "minus") cfg.s0 = qmath::ket_minus();
        else if (e->value == "plus_x") cfg.s0 = qmath::ket_plus_x();
        else fail_at(e->line, e->col, "s0 must be one of plus|minus|plus_x");
    }
    if (const RawEntry* e = get("angles.theta1")) cfg.theta1 = parse_number(*e, "theta1");
    if (const RawEntry* e = get("angles.theta2")) cfg.theta2 = parse_number(*e, "theta2");
    if (const RawEntry* e = get("angles.alice_basis_angle"))
        cfg.aliceBasisAngle = parse_number(*e, "alice_basis_angle");
    if (const RawEntry* e = get("coupling.g")) cfg.g = parse_number(*e, "g");
    if (const RawEntry* e = get("coupling.w")) cfg.w = parse_number(*e, "w");
    if (const RawEntry* e = get("geometry.t0")) geom.t0 = parse_number(*e, "t0");
    if (const RawEntry* e = get("geometry.t1")) geom.t1 = parse_number(*e, "t1");
    if (const RawEntry* e = get("geometry.t2")) geom.t2 = parse_number(*e, "t2");
    if (const RawEntry* e = get("geometry.t3")) geom.t3 = parse_number(*e, "t3");
    if (const RawEntry* e = get("geometry.x_a")) geom.xA = parse_number(*e, "x_a");
    if (const RawEntry* e = get("frame.beta")) cfg.betaBoost = parse_number(*e, "beta");
    if (const RawEntry* e = get("mode.interpretation")) {
        if (e->value == "unitary_lab") cfg.mode = InterpretationMode::UNITARY_LAB;
        else if (e->value == "objective_collapse") cfg.mode = InterpretationMode::OBJECTIVE_COLLAPSE;
        else fail_at(e->line, e->col, "interpretation must be unitary_lab|objective_collapse");
    }
    if (const RawEntry* e = get("mode.scheme")) {
        if (e->value == "weak") cfg.scheme = MeasurementScheme::WEAK;
        else if (e->value == "projective") cfg.scheme = MeasurementScheme::PROJECTIVE;
        else fail_at(e->line, e->col, "scheme must be weak|projective");
    }
    if (const RawEntry* e = get("runs.trials")) {
        cfg.trials = parse_uint(*e, "trials");
        if (cfg.trials < 1) fail_at(e->line, e->col, "trials must be >= 1");
    }
    if (const RawEntry* e = get("runs.seed")) cfg.seed = parse_uint(*e, "seed");

    cfg.events = {{EventId::E0, geom.t0, 0.0},
                  {EventId::E1, geom.t1, 0.0},
                  {EventId::E2, geom.t2, 0.0},
                  {EventId::E3, geom.t3, geom.xA}};

    const double norm2 = std::norm(cfg.alpha) + std::norm(cfg.beta);
    if (std::abs(norm2 - 1.0) > 1e-12)
        throw ConfigError("alpha/beta: |alpha|^2 + |beta|^2 must equal 1 (got " +
                          num_str(norm2) + ")");
    const auto angle_in_range = [](double v, const char* key) {
        if (!(v >= 0.0 && v <= M_PI))
            throw ConfigError(std::string(key) + ": angle out of range [0, pi]");
    };
    angle_in_range(cfg.theta1, "theta1");
    angle_in_range(cfg.theta2, "theta2");
    angle_in_range(cfg.aliceBasisAngle, "alice_basis_angle");
    if (!(cfg.w > 0.0)) throw ConfigError("w: pointer width must be > 0");
    if (!(std::abs(cfg.betaBoost) < 1.0)) throw ConfigError("beta: out of range (-1, 1)");
    return cfg;
}

std::string num_str(double v) { return nlohmann::json(v).dump(); }

std::string print_config(const engine::ProtocolConfig& config) {
    std::ostringstream os;
    os << "[state]\n";
    os << "alpha = " << num_str(config.alpha.real()) << "," << num_str(config.alpha.imag())
       << "\n";
    os << "beta = " << num_str(config.beta.real()) << "," << num_str(config.beta.imag()) << "\n";
    os << "s0 = " << s0_name(config.s0) << "\n\n";
    os << "[angles]\n";
    os << "theta1 = " << num_str(config.theta1) << "\n";
    os << "theta2 = " << num_str(config.theta2) << "\n";
    os << "alice_basis_angle = " << num_str(config.aliceBasisAngle) << "\n\n";
    os << "[coupling]\n";
    os << "g = " << num_str(config.g) << "\n";
    os << "w = " << num_str(config.w) << "\n\n";
    os << "[geometry]\n";
    os << "t0 = " << num_str(event_by_id(config.events, EventId::E0).t) << "\n";
    os << "t1 = " << num_str(event_by_id(config.events, EventId::E1).t) << "\n";
    os << "t2 = " << num_str(event_by_id(config.events, EventId::E2).t) << "\n";
    os << "t3 = " << num_str(event_by_id(config.events, EventId::E3).t) << "\n";
    os << "x_a = " << num_str(event_by_id(config.events, EventId::E3).x) << "\n\n";
    os << "[frame]\n";
    os << "beta = " << num_str(config.betaBoost) << "\n\n";
    os << "[mode]\n";
    os << "interpretation = " << engine::to_string(config.mode) << "\n";
    os << "scheme = " << engine::to_string(config.scheme) << "\n\n";
    os << "[runs]\n";
    os << "trials = " << config.trials << "\n";
    os << "seed = " << config.seed << "\n";
    return os.str();
}

Json config_json(const engine::ProtocolConfig& config) {
    Json c;
    c["state"] = {{"alpha", {{"re", config.alpha.real()}, {"im", config.alpha.imag()}}},
                  {"beta", {{"re", config.beta.real()}, {"im", config.beta.imag()}}},
                  {"s0", s0_name(config.s0)}};
    c["angles"] = {{"theta1", config.theta1},
                   {"theta2", config.theta2},
                   {"alice_basis_angle", config.aliceBasisAngle}};
    c["coupling"] = {{"g", config.g}, {"w", config.w}};
    c["geometry"] = {{"t0", event_by_id(config.events, EventId::E0).t},
                     {"t1", event_by_id(config.events, EventId::E1).t},
                     {"t2", event_by_id(config.events, EventId::E2).t},
                     {"t3", event_by_id(config.events, EventId::E3).t},
                     {"x_a", event_by_id(config.events, EventId::E3).x}};
    c["frame"] = {{"beta", config.betaBoost}};
    c["mode"] = {{"interpretation", engine::to_string(config.mode)},
                 {"scheme", engine::to_string(config.scheme)}};
    c["runs"] = {{"trials", config.trials}, {"seed", config.seed}};
    return c;
}

Json cmd_run(const engine::ProtocolConfig& config, bool exact, bool mc) {
    Json doc = base_doc("run", config);
    if (exact) doc["exact"] = exact_json(engine::run_exact(config), config.scheme);
    if (mc) {
        const engine::SummaryStats stats =
            engine::run_monte_carlo(config, config.trials, config.seed, env_workers());
        doc["monteCarlo"] = mc_json(stats, config.scheme);
    }
    return doc;
}

Json cmd_compare_frames(const engine::ProtocolConfig& config, const std::vector<double>& betas) {
    if (betas.size() < 2) throw ConfigError("compare-frames requires at least two beta values");
    const double thr = beta_star(config);
    for (double b : betas) {
        if (!(std::abs(b) < 1.0)) throw ConfigError("beta: out of range (-1, 1)");
        if (std::abs(b - thr) < 1e-12)
            throw ConfigError("beta = " + num_str(b) +
                              " equals the inversion threshold beta* = " + num_str(thr));
    }

    Json doc = base_doc("compare-frames", config);
    doc["betaStar"] = thr;
    Json rows = Json::array();
    std::vector<std::vector<double>> numerics;
    std::vector<double> moments;
    for (double b : betas) {
        ProtocolConfig cfg = config;
        cfg.betaBoost = b;
        const engine::ExactResults r = engine::run_exact(cfg);
        Json row;
        row["beta"] = b;
        row["exact"] = exact_json(r, cfg.scheme);
        rows.push_back(row);
        std::vector<double> v;
        if (cfg.scheme == MeasurementScheme::WEAK) {
            v.push_back(r.jointMomentUnnormalized);
            v.push_back(r.successProb);
            moments.push_back(r.jointMomentUnnormalized);
        } else {
            v.push_back(r.q1AgreeProb);
            v.push_back(r.q2AgreeProb);
        }
        v.push_back(r.aliceMarginal);
        for (const char* k : kRecordOrder) v.push_back(r.friendRecordDistribution.at(k));
        numerics.push_back(std::move(v));
    }
    doc["rows"] = rows;

    Json pairs = Json::array();
    for (std::size_t i = 0; i < betas.size(); ++i) {
        for (std::size_t j = i + 1; j < betas.size(); ++j) {
            double maxDiff = 0.0;
            for (std::size_t k = 0; k < numerics[i].size(); ++k)
                maxDiff = std::max(maxDiff, std::abs(numerics[i][k] - numerics[j][k]));
            Json p;
            p["betaA"] = betas[i];
            p["betaB"] = betas[j];
            if (!moments.empty()) p["momentDifference"] = moments[i] - moments[j];
            p["maxAbsDifference"] = maxDiff;
            p["frame_dependent"] = maxDiff > 1e-9;
            pairs.push_back(p);
        }
    }
    doc["pairs"] = pairs;
    return doc;
}

Json cmd_signalling_test(const engine::ProtocolConfig& config) {
    const double thr = beta_star(config);
    if (!(config.betaBoost > thr))
        throw ConfigError("frame beta = " + num_str(config.betaBoost) + " <= beta* = " +
                          num_str(thr) + ": no ordering inversion; test undefined");

    const auto moment_with = [&](InterpretationMode mode, double aliceAngle) {
        ProtocolConfig cfg = config;
        cfg.mode = mode;
        cfg.scheme = MeasurementScheme::WEAK;
        cfg.aliceBasisAngle = aliceAngle;
        return engine::run_exact(cfg).jointMomentUnnormalized;
    };
    const auto block = [&](InterpretationMode mode) {
        const double mx = moment_with(mode, M_PI / 2.0);
        const double mz = moment_with(mode, 0.0);
        Json b;
        b["momentAliceX"] = mx;
        b["momentAliceZ"] = mz;
        b["difference"] = mx - mz;
        b["absDifference"] = std::abs(mx - mz);
        b["signalling"] = std::abs(mx - mz) > 1e-9;
        return b;
    };

    Json doc = base_doc("signalling-test", config);
    doc["betaStar"] = thr;
    doc["frameBeta"] = config.betaBoost;
    doc["scheme"] = "weak";
    doc["note"] = "exact joint moment with Alice measuring at pi/2 (x) versus 0 (z); "
                  "the interpretation mode is toggled for test and control";
    doc["unitaryLab"] = block(InterpretationMode::UNITARY_LAB);
    doc["objectiveCollapse"] = block(InterpretationMode::OBJECTIVE_COLLAPSE);
    return doc;
}

Json cmd_sweep(const engine::ProtocolConfig& config, const SweepOptions& options) {
    if (options.thetaGrid < 2) throw ConfigError("theta grid must have at least 2 points");
    if (config.scheme != MeasurementScheme::WEAK)
        throw ConfigError("sweep reports joint moments and requires scheme = weak");
    const double thr = beta_star(config);
    if (!(config.betaBoost > thr))
        throw ConfigError("sweep requires frame beta > beta* = " + num_str(thr) +
                          " for the boosted-frame column (got " + num_str(config.betaBoost) +
                          ")");

    Json doc = base_doc("sweep", config);
    doc["grid"] = options.thetaGrid;
    doc["betaR"] = 0.0;
    doc["betaRPrime"] = config.betaBoost;
    Json columns = Json::array({"theta1", "theta2", "moment_r", "moment_r_prime", "difference"});
    if (options.mc) {
        columns.push_back("mc_moment_r_prime");
        columns.push_back("mc_se");
    }
    doc["columns"] = columns;

    const std::size_t n = options.thetaGrid;
    Json rows = Json::array();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double t1 = M_PI * static_cast<double>(i) / static_cast<double>(n - 1);
            const double t2 = M_PI * static_cast<double>(j) / static_cast<double>(n - 1);
            ProtocolConfig rest = config;
            rest.theta1 = t1;
            rest.theta2 = t2;
            rest.betaBoost = 0.0;
            ProtocolConfig boosted = rest;
            boosted.betaBoost = config.betaBoost;
            const double mR = engine::run_exact(rest).jointMomentUnnormalized;
            const double mRp = engine::run_exact(boosted).jointMomentUnnormalized;
            Json row = Json::array({t1, t2, mR, mRp, mR - mRp});
            if (options.mc) {
                const engine::SummaryStats s = engine::run_monte_carlo(
                    boosted, config.trials, config.seed, env_workers());
                row.push_back(s.momentEstimate);
                row.push_back(s.momentSE);
            }
            rows.push_back(row);
        }
    }
    doc["rows"] = rows;
    return doc;
}

Json cmd_validate_geometry(const engine::ProtocolConfig& config) {
    Json doc = base_doc("validate-geometry", config);
    relativity::ValidationReport report;
    try {
        report = relativity::validate_geometry(config.events);
    } catch (const GeometryError& e) {
        throw ConfigError(std::string("invalid geometry: ") + e.what());
    }
    Json checks = Json::array();
    for (const auto& c : report.checks)
        checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    doc["checks"] = checks;
    doc["allPass"] = report.all_pass();
    if (report.all_pass()) {
        doc["betaStar"] = beta_star(config);
    } else {
        doc["betaStar"] = nullptr;
    }
    return doc;
}

std::string to_json_text(const Json& doc) { return doc.dump(2) + "\n"; }

std::string to_csv(const Json& doc) {
    std::vector<std::pair<std::string, std::string>> rows;
    flatten(doc, "", rows);
    std::string out = "key,value\n";
    for (const auto& [k, v] : rows) out += csv_quote(k) + "," + csv_quote(v) + "\n";
    return out;
}

std::string sweep_csv(const Json& sweepDoc) {
    std::string out;
    bool first = true;
    for (const auto& c : sweepDoc.at("columns")) {
        if (!first) out += ",";
        out += csv_quote(c.get<std::string>());
        first = false;
    }
    out += "\n";
    for (const auto& row : sweepDoc.at("rows")) {
        first = true;
        for (const auto& cell : row) {
            if (!first) out += ",";
            out += csv_quote(json_leaf_text(cell));
            first = false;
        }
        out += "\n";
    }
    return out;
}

std::string validation_text(const Json& validateDoc) {
    std::ostringstream os;
    for (const auto& c : validateDoc.at("checks")) {
        os << (c.at("pass").get<bool>() ? "[PASS] " : "[FAIL] ") << c.at("name").get<std::string>()
           << ": " << c.at("detail").get<std::string>() << "\n";
    }
    if (validateDoc.at("allPass").get<bool>()) {
        os << "beta_star = " << num_str(validateDoc.at("betaStar").get<double>()) << "\n";
        os << "geometry valid\n";
    } else {
        os << "geometry invalid\n";
    }
    return os.str();
}

unsigned env_workers() {
    const char* v = std::getenv("WFSIM_WORKERS");
    if (!v || !*v) return 0;
    unsigned out = 0;
    auto [p, ec] = std::from_chars(v, v + std::strlen(v), out);
    if (ec != std::errc() || *p != '\0')
        throw ConfigError("WFSIM_WORKERS must be a non-negative integer");
    return out;
}

namespace {

struct CliState {
    std::string configPath;
    std::string outPath;
    std::string format;
    bool exact = false;
    bool mc = false;
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;
    double beta = 0.0;
    std::vector<double> betaList;
    std::size_t grid = 21;
};

bool flag_given(const CLI::App* sub, const char* name) {
    const CLI::Option* o = sub->get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
}

engine::ProtocolConfig load_config(const CliState& st, const CLI::App* sub) {
    const std::string text = st.configPath.empty() ? std::string() : read_file(st.configPath);
    engine::ProtocolConfig cfg = parse_config(text);
    if (flag_given(sub, "--trials")) {
        if (st.trials < 1) throw ConfigError("trials must be >= 1");
        cfg.trials = st.trials;
    }
    if (flag_given(sub, "--seed")) cfg.seed = st.seed;
    if (flag_given(sub, "--beta")) {
        if (!(std::abs(st.beta) < 1.0)) throw ConfigError("beta: out of range (-1, 1)");
        cfg.betaBoost = st.beta;
    }
    return cfg;
}

} // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Simulator for a relativistic Wigner-friend protocol: weak or projective "
                 "super-observer measurements under configurable reference frames and "
                 "interpretation modes"};
    app.require_subcommand(1);
    CliState st;

    std::map<std::string, std::string> defaultFormats;
    const auto add_common = [&](CLI::App* sub, const char* defaultFormat,
                                const std::vector<std::string>& formats) {
        sub->add_option("config", st.configPath, "Config file (omit for defaults)");
        sub->add_option("--out", st.outPath, "Output path (default: stdout)");
        sub->add_option("--format", st.format, "Output format")->check(CLI::IsMember(formats));
        sub->add_option("--beta", st.beta, "Override [frame] beta");
        defaultFormats[sub->get_name()] = defaultFormat;
        return sub;
    };

    CLI::App* run = add_common(app.add_subcommand("run", "Run one configuration"), "json",
                               {"json", "csv"});
    run->add_flag("--exact", st.exact, "Exact branch enumeration (default when --mc absent)");
    run->add_flag("--mc", st.mc, "Monte Carlo trials");
    run->add_option("--trials", st.trials, "Override [runs] trials");
    run->add_option("--seed", st.seed, "Override [runs] seed");

    CLI::App* cmp = add_common(
        app.add_subcommand("compare-frames", "Exact results across boost velocities"), "json",
        {"json", "csv"});
    cmp->add_option("--beta-list", st.betaList, "Boost velocities to compare")
        ->required()
        ->expected(-2);

    add_common(app.add_subcommand("signalling-test",
                                  "Alice-basis toggle: moment difference per interpretation"),
               "json", {"json", "csv"});

    CLI::App* sweep = add_common(
        app.add_subcommand("sweep", "Exact moments over a (theta1, theta2) grid"), "csv",
        {"csv", "json"});
    sweep->add_option("--theta-grid", st.grid, "Grid points per angle axis (>= 2)");
    bool sweepMc = false;
    sweep->add_flag("--mc", sweepMc, "Add Monte Carlo estimate columns for the boosted frame");
    sweep->add_option("--trials", st.trials, "Override [runs] trials");
    sweep->add_option("--seed", st.seed, "Override [runs] seed");

    add_common(app.add_subcommand("validate-geometry", "Check event geometry and report beta*"),
               "text", {"text", "json"});

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        const engine::ProtocolConfig cfg = load_config(st, sub);
        const std::string& name = sub->get_name();
        if (!flag_given(sub, "--format")) st.format = defaultFormats.at(name);
        if (name == "run") {
            const bool exact = st.exact || !st.mc;
            const Json doc = cmd_run(cfg, exact, st.mc);
            write_output(st.format == "csv" ? to_csv(doc) : to_json_text(doc), st.outPath);
        } else if (name == "compare-frames") {
            const Json doc = cmd_compare_frames(cfg, st.betaList);
            write_output(st.format == "csv" ? to_csv(doc) : to_json_text(doc), st.outPath);
        } else if (name == "signalling-test") {
            const Json doc = cmd_signalling_test(cfg);
            write_output(st.format == "csv" ? to_csv(doc) : to_json_text(doc), st.outPath);
        } else if (name == "sweep") {
            SweepOptions opt;
            opt.thetaGrid = st.grid;
            opt.mc = sweepMc;
            const Json doc = cmd_sweep(cfg, opt);
            write_output(st.format == "json" ? to_json_text(doc) : sweep_csv(doc), st.outPath);
        } else if (name == "validate-geometry") {
            const Json doc = cmd_validate_geometry(cfg);
            write_output(st.format == "json" ? to_json_text(doc) : validation_text(doc),
                         st.outPath);
            if (!doc.at("allPass").get<bool>()) return 2;
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
}

} // namespace wfsim::shell

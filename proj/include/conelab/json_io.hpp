#pragma once

#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "conelab/cone.hpp"
#include "conelab/flow.hpp"
#include "conelab/link.hpp"

namespace conelab {

using nlohmann::json;

/// Full-precision decimal text (17 significant digits) for bit-stable CSV
/// regression diffs.
inline std::string num17(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

/// {"variant": "round_sphere", "dim": 2, "beta": 1.0}
/// {"variant": "profile", "dim": 3, "psi": [...], "length": L}
/// {"variant": "einstein", "dim": n, "lambda": l, "volume": v, "shrinking_time": T}
inline LinkGeometry parse_link(const json& spec) {
    if (!spec.contains("variant"))
        throw error("bad_spec", "link spec needs a \"variant\" field");
    const std::string variant = spec.at("variant");
    if (variant == "round_sphere") {
        return LinkGeometry(RoundSphere{spec.at("dim").get<int>(),
                                        spec.at("beta").get<double>()});
    }
    if (variant == "profile") {
        const auto values = spec.at("psi").get<std::vector<double>>();
        const double length = spec.at("length").get<double>();
        auto grid = std::make_shared<RadialGrid>(
            RadialGrid::uniform(0.0, length, values.size()));
        ScalarField psi(grid, values, BoundaryKind::pole_regular,
                        BoundaryKind::pole_regular);
        return LinkGeometry(ProfileWarped{spec.at("dim").get<int>(), std::move(psi), true});
    }
    if (variant == "einstein") {
        return LinkGeometry(EinsteinLink{
            spec.at("dim").get<int>(), spec.at("lambda").get<double>(),
            spec.at("volume").get<double>(), spec.at("shrinking_time").get<double>()});
    }
    throw error("bad_spec", "unknown link variant \"" + variant + "\"");
}

inline json link_to_json(const LinkGeometry& link) {
    json j;
    if (link.is_round()) {
        j["variant"] = "round_sphere";
        j["dim"] = link.round().dim;
        j["beta"] = link.round().beta;
    } else if (link.is_einstein()) {
        j["variant"] = "einstein";
        j["dim"] = link.einstein().dim;
        j["lambda"] = link.einstein().lambda;
        j["volume"] = link.einstein().volume;
        j["shrinking_time"] = link.einstein().shrinking_time;
    } else {
        j["variant"] = "profile";
        j["dim"] = link.profile().dim;
        j["psi"] = link.profile().psi.values();
        j["length"] = link.profile().psi.grid().length();
    }
    return j;
}

/// {"link": <link spec>, "r_min": ..., "r_max": ...}
inline ConeGeometry parse_cone(const json& spec, std::size_t nodes = 2048) {
    return ConeGeometry(parse_link(spec.at("link")), spec.at("r_min").get<double>(),
                        spec.at("r_max").get<double>(), nodes);
}

/// A numeric result plus the tolerance it was computed to.
inline json toleranced(double value, double tolerance) {
    return json{{"value", value}, {"tolerance", tolerance}};
}

inline const char* verdict_name(MuVerdict v) {
    switch (v) {
        case MuVerdict::mu_infinite: return "mu_infinite";
        case MuVerdict::mu_finite: return "mu_finite";
        default: return "undetermined";
    }
}

inline const char* verdict_name(LambdaConeVerdict v) {
    switch (v) {
        case LambdaConeVerdict::zero: return "zero";
        case LambdaConeVerdict::minus_infinity: return "minus_infinity";
        default: return "undetermined";
    }
}

inline json classification_to_json(const ConeClassification& c,
                                   const std::string& evidence_trace_file = "") {
    json j;
    j["lambda_link"] = toleranced(c.lambda_link, 1e-6);
    j["threshold"] = c.threshold;
    j["verdict"] = verdict_name(c.mu);
    j["lambda_cone"] = verdict_name(c.lambda_cone);
    if (!evidence_trace_file.empty()) j["evidence_trace_file"] = evidence_trace_file;
    return j;
}

/// Trajectory dump: (t, beta_sq or profile checksum, vol, F, W, sup_rm).
inline void write_trajectory_csv(const Trajectory& traj, double tau_for_w,
                                 const std::string& path) {
    std::ofstream out(path);
    out << "t,beta_sq_or_checksum,vol,F,W,sup_rm,norm_shift\n";
    for (const auto& s : traj.states) {
        double geom;
        if (s.round) {
            geom = s.beta_sq;
        } else {
            geom = 0.0;  // profile checksum: weighted psi hash
            for (std::size_t i = 0; i < s.psi.size(); ++i)
                geom += s.grid->weight(i) * s.psi[i] * double(i % 7 + 1);
        }
        const MonitorRecord rec = monitor_state(s, tau_for_w);
        out << num17(s.time) << ',' << num17(geom) << ',' << num17(rec.volume) << ','
            << num17(rec.F_value) << ',' << num17(rec.W_value) << ','
            << num17(flow_sup_rm(s)) << ',' << num17(s.norm_shift_applied) << "\n";
    }
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw error("bad_spec", "cannot open input file " + path);
    json j;
    in >> j;
    return j;
}

inline void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

} // namespace conelab

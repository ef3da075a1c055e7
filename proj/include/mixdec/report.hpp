#pragma once

// JSON serialisation of every result type, surgery instance I/O, CSV tables
// and the run manifest. Objects keep insertion order; doubles are written with
// round-trip precision, so equal results give byte-identical reports.

#include "mixdec/config.hpp"
#include "mixdec/covering.hpp"
#include "mixdec/graph.hpp"
#include "mixdec/periodic.hpp"
#include "mixdec/surgery.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace mixdec {

using Json = nlohmann::ordered_json;

inline constexpr const char* tool_version = "0.1.0";

/// 64-bit FNV-1a, as 16 hex digits.
inline std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

// ---------------------------------------------------------------------------
// Building blocks

inline Json to_json(const Vec& v) {
    Json a = Json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline Json to_json(const std::vector<Vec>& pts) {
    Json a = Json::array();
    for (const auto& p : pts) a.push_back(to_json(p));
    return a;
}

inline Json to_json(const Complex& z) { return Json{{"re", z.real()}, {"im", z.imag()}}; }

inline Json to_json(const Tolerances& t) {
    return Json{{"inverse", t.inverse},
                {"jacobian", t.jacobian},
                {"fd_step", t.fd_step},
                {"orbit", t.orbit},
                {"unit", t.unit},
                {"resonance_order", t.resonance_order},
                {"relation", t.relation},
                {"transversality_deg", t.transversality_deg},
                {"manifold_offset", t.manifold_offset},
                {"manifold_gap", t.manifold_gap},
                {"manifold_angle_deg", t.manifold_angle_deg},
                {"lipschitz_safety", t.lipschitz_safety}};
}

inline Json to_json(const Domain& d) {
    Json periodic = Json::array();
    for (bool p : d.periodic) periodic.push_back(p);
    return Json{{"lo", d.lo}, {"hi", d.hi}, {"periodic", periodic}};
}

inline Vec vec_from_json(const Json& j, const std::string& what) {
    if (!j.is_array()) throw usage_error(what + " must be an array of numbers");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw usage_error(what + " must be an array of numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

inline Domain domain_from_json(const Json& j) {
    const auto lo = j.at("lo").get<std::vector<double>>(), hi = j.at("hi").get<std::vector<double>>();
    std::vector<bool> periodic;
    for (const auto& p : j.at("periodic")) periodic.push_back(p.get<bool>());
    if (lo.size() != hi.size() || periodic.size() != lo.size())
        throw usage_error("domain lo, hi and periodic must have equal lengths");
    return Domain(lo, hi, periodic);
}

inline Json to_json(const SystemConfig& sc) {
    Json j{{"domain", to_json(sc.domain)}, {"map", sc.map}};
    if (!sc.inverse.empty()) j["inverse"] = sc.inverse;
    if (!sc.jacobian.empty()) j["jacobian"] = sc.jacobian;
    if (sc.lipschitz) j["lipschitz"] = *sc.lipschitz;
    return j;
}

inline SystemConfig system_from_json(const Json& j) {
    SystemConfig sc;
    sc.domain = domain_from_json(j.at("domain"));
    sc.map = j.at("map").get<std::vector<std::string>>();
    if (j.contains("inverse")) sc.inverse = j.at("inverse").get<std::vector<std::string>>();
    if (j.contains("jacobian")) sc.jacobian = j.at("jacobian").get<std::vector<std::vector<std::string>>>();
    if (j.contains("lipschitz")) sc.lipschitz = j.at("lipschitz").get<double>();
    return sc;
}

// ---------------------------------------------------------------------------
// Decomposition

inline Json mixing_json(const CyclicDecomposition& dec) {
    Json per = Json::array();
    int worst = 0;
    bool all_mixing = true;
    for (std::size_t i = 0; i < dec.mixing.size(); ++i) {
        const auto& m = dec.mixing[i];
        Json e{{"cyclic_class", i}, {"bound", m.bound}};
        if (m.exponent) {
            e["exponent"] = *m.exponent;
            worst = std::max(worst, *m.exponent);
        } else {
            all_mixing = false;
            e["counterexample"] = {m.counterexample->first, m.counterexample->second};
        }
        per.push_back(std::move(e));
    }
    Json out;
    if (all_mixing) {
        out["exponent"] = worst;
    } else {
        for (const auto& e : per)
            if (e.contains("counterexample")) {
                out["failure"] = e;
                break;
            }
    }
    out["per_cyclic_class"] = per;
    return out;
}

inline Json decomposition_json(const CoveredGraph& cg, const std::vector<CyclicDecomposition>& decs,
                               const std::vector<std::vector<NodeId>>& trapping, const GraphOptions& opt) {
    Json classes = Json::array();
    for (const auto& dec : decs) {
        Json sizes = Json::array();
        for (const auto& c : dec.classes) sizes.push_back(c.size());
        classes.push_back(Json{{"nodes", dec.cls.nodes},
                               {"size", dec.cls.nodes.size()},
                               {"period", dec.period},
                               {"cyclic_classes", dec.classes},
                               {"cyclic_class_sizes", sizes},
                               {"partition_violations", partition_violations(cg.graph, dec).size()},
                               {"mixing", mixing_json(dec)}});
    }
    const auto& cov = cg.covering;
    return Json{{"report", "decomposition"},
                {"covering",
                 {{"domain", to_json(cov.domain())},
                  {"depth", cov.depth()},
                  {"cells_per_axis", cov.cells_per_axis()},
                  {"boxes", cov.size()},
                  {"edges", cg.graph.edge_count()}}},
                {"constants",
                 {{"samples_per_axis", opt.samples_per_axis}, {"padding", opt.padding}}},
                {"provenance", cg.graph.provenance()},
                {"classes", classes},
                {"trapping_regions", trapping}};
}

// ---------------------------------------------------------------------------
// Periodic orbits and homoclinic structure

inline Json to_json(const PeriodicOrbit& o, const Tolerances& tol) {
    Json mult = Json::array();
    for (const auto& z : o.multipliers) mult.push_back(to_json(z));
    const auto rep = classify(o, tol);
    return Json{{"period", o.period},
                {"points", to_json(o.points)},
                {"residual", o.residual},
                {"multipliers", mult},
                {"verdict", to_string(rep.verdict)}};
}

inline Json orbits_json(const OrbitSearch& s, int max_period, const OrbitSearchOptions& opt) {
    Json orbits = Json::array();
    for (std::size_t i = 0; i < s.orbits.size(); ++i) {
        Json o{{"id", i}};
        o.update(to_json(s.orbits[i], opt.tol));
        orbits.push_back(std::move(o));
    }
    return Json{{"report", "orbits"},
                {"max_period", max_period},
                {"constants",
                 {{"seeds", opt.seeds},
                  {"max_iterations", opt.max_iterations},
                  {"jitter", opt.jitter},
                  {"seed", opt.seed},
                  {"tolerances", to_json(opt.tol)}}},
                {"singular_seeds", s.singular_seeds},
                {"failed_seeds", s.failed_seeds},
                {"orbits", orbits}};
}

/// One row per orbit: id, period, residual, first point, multiplier moduli.
inline std::string orbits_csv(const std::vector<PeriodicOrbit>& orbits, const Tolerances& tol) {
    std::ostringstream out;
    out.precision(17);
    int d = orbits.empty() ? 0 : static_cast<int>(orbits.front().points.front().size());
    out << "id,period,residual,verdict";
    for (int i = 1; i <= d; ++i) out << ",x" << i;
    for (int i = 1; i <= d; ++i) out << ",abs_multiplier" << i;
    out << "\n";
    for (std::size_t k = 0; k < orbits.size(); ++k) {
        const auto& o = orbits[k];
        out << k << ',' << o.period << ',' << o.residual << ',' << to_string(classify(o, tol).verdict);
        for (int i = 0; i < d; ++i) out << ',' << o.points.front()[i];
        for (int i = 0; i < d; ++i) out << ',' << std::abs(o.multipliers[static_cast<std::size_t>(i)]);
        out << "\n";
    }
    return out.str();
}

inline Json to_json(const IntersectionTimeSet& t) {
    Json counts = Json::object();
    for (const auto& [n, c] : t.crossing_counts) counts[std::to_string(n)] = c;
    return Json{{"n_max", t.n_max},
                {"period_p", t.period_p},
                {"period_q", t.period_q},
                {"times", t.times},
                {"crossing_counts", counts},
                {"ell", t.ell},
                {"ell_with_periods", t.ell_with_periods},
                {"inconclusive", t.inconclusive},
                {"closure_violations", t.closure_violations},
                {"translation_violations", t.translation_violations},
                {"symmetry_violations", t.symmetry_violations}};
}

inline Json to_json(const CycleReport& c) {
    return Json{{"verdict", to_string(c.verdict)},
                {"forward_crossings", c.forward_crossings},
                {"backward_crossings", c.backward_crossings},
                {"period_drop_candidate", c.period_drop_candidate}};
}

inline Json to_json(const ManifoldOptions& m) {
    return Json{{"arclength_budget", m.arclength_budget}, {"max_points", m.max_points}};
}

// ---------------------------------------------------------------------------
// Surgery

inline Json to_json(const PerturbationDomain& dom) {
    Json charts = Json::array(), tiles = Json::array();
    for (const auto& c : dom.charts) charts.push_back(Json{{"lo", to_json(c.lo)}, {"hi", to_json(c.hi)}});
    for (const auto& t : dom.tiles)
        tiles.push_back(Json{{"chart", t.chart}, {"center", to_json(t.center)}, {"half_edge", t.half_edge}});
    Json j{{"charts", charts}, {"tiles", tiles}, {"theta", dom.theta}, {"delta", dom.delta}, {"N", dom.N}};
    if (dom.eta_override) j["eta"] = dom.eta;
    j["adjacency"] = dom.adjacency;
    return j;
}

/// Chart/tile geometry, theta, delta, N, optional eta override and adjacency.
/// eta defaults to (theta/4)^(4^d); adjacency defaults to touching tiles.
inline PerturbationDomain perturbation_domain_from_json(const Json& j, const Domain& space) {
    PerturbationDomain dom;
    for (const auto& c : j.at("charts"))
        dom.charts.push_back({vec_from_json(c.at("lo"), "chart.lo"), vec_from_json(c.at("hi"), "chart.hi")});
    for (const auto& t : j.at("tiles"))
        dom.tiles.push_back({t.value("chart", 0), vec_from_json(t.at("center"), "tile.center"),
                             t.at("half_edge").get<double>()});
    dom.theta = j.at("theta").get<double>();
    dom.delta = j.at("delta").get<double>();
    dom.N = j.at("N").get<int>();
    if (j.contains("eta")) {
        dom.eta = j.at("eta").get<double>();
        dom.eta_override = true;
    }
    if (j.contains("adjacency")) dom.adjacency = j.at("adjacency").get<std::vector<std::vector<int>>>();
    const int d = space.dimension();
    for (const auto& c : dom.charts)
        if (c.lo.size() != d || c.hi.size() != d) throw usage_error("chart dimension does not match the system");
    for (const auto& t : dom.tiles) {
        if (t.center.size() != d) throw usage_error("tile dimension does not match the system");
        if (t.chart < 0 || t.chart >= static_cast<int>(dom.charts.size())) throw usage_error("tile chart out of range");
    }
    finalize_domain(dom, space);
    return dom;
}

inline Json to_json(const PseudoOrbit& po) {
    Json jumps = Json::array();
    for (bool b : po.jumps) jumps.push_back(b);
    return Json{{"points", to_json(po.points)}, {"jumps", jumps}};
}

inline PseudoOrbit pseudo_orbit_from_json(const Json& j) {
    PseudoOrbit po;
    for (const auto& p : j.at("points")) po.points.push_back(vec_from_json(p, "pseudo_orbit.points"));
    for (const auto& b : j.at("jumps")) po.jumps.push_back(b.get<bool>());
    if (po.points.size() != po.jumps.size()) throw usage_error("pseudo_orbit points and jumps differ in length");
    if (po.points.empty()) throw usage_error("pseudo_orbit is empty");
    return po;
}

struct InstanceFile {
    SystemConfig system;
    PerturbationDomain domain;
    std::optional<PseudoOrbit> orbit;
};

inline Json instance_json(const SystemConfig& sc, const PerturbationDomain& dom, const std::optional<PseudoOrbit>& po) {
    Json j{{"system", to_json(sc)}, {"domain", to_json(dom)}};
    if (po) j["pseudo_orbit"] = to_json(*po);
    return j;
}

inline SystemConfig system_config(const SurgeryInstance& inst) {
    SystemConfig sc;
    sc.domain = inst.space;
    sc.map = inst.map;
    sc.inverse = inst.inverse;
    return sc;
}

inline InstanceFile instance_from_json(const Json& j) {
    try {
        InstanceFile f;
        f.system = system_from_json(j.at("system"));
        f.domain = perturbation_domain_from_json(j.at("domain"), f.system.domain);
        if (j.contains("pseudo_orbit")) f.orbit = pseudo_orbit_from_json(j.at("pseudo_orbit"));
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw usage_error(std::string("malformed instance: ") + e.what());
    }
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw usage_error("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw usage_error("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline Json surgery_constants(const PerturbationDomain& dom, int d, const Tolerances& tol) {
    return Json{{"theta", dom.theta},
                {"delta", dom.delta},
                {"N", dom.N},
                {"eta", dom.eta},
                {"standard_eta", standard_eta(dom.theta, d)},
                {"eta_override", dom.eta_override},
                {"adjacency_bound", adjacency_bound(d)},
                {"tolerances", to_json(tol)}};
}

inline Json to_json(const std::vector<Violation>& v) {
    Json a = Json::array();
    for (const auto& x : v) a.push_back(Json{{"kind", x.kind}, {"detail", x.detail}});
    return a;
}

inline Json to_json(const DomainReport& r) {
    return Json{{"valid", r.valid},
                {"eta", r.eta},
                {"standard_eta", r.standard_eta},
                {"eta_override", r.eta_override},
                {"violations", to_json(r.violations)}};
}

inline Json to_json(const ConnectingSequence& s) {
    return Json{{"visit", s.visit},   {"tile", s.tile},     {"jump", s.jump},
                {"points", to_json(s.points)}, {"radii", s.radii}, {"ball_tiles", s.ball_tiles},
                {"merges", s.merges}};
}

inline Json to_json(const ShortcutEvent& e) {
    Json j{{"kind", to_string(e.kind)}, {"i", e.i},          {"j", e.j},
           {"id_i", e.id_i},            {"id_j", e.id_j},    {"parent_length", e.parent_length},
           {"outer_length", e.outer_length}, {"inner_length", e.inner_length}, {"kept_outer", e.kept_outer}};
    if (e.kind == ShortcutEvent::Kind::secondary) {
        j["level"] = e.level;
        j["radius_i"] = e.radius_i;
        j["radius_j"] = e.radius_j;
        j["radius_after"] = e.radius_after;
        j["eq1_bound"] = e.eq1_bound;
        j["eq1_ok"] = e.eq1_ok;
        j["merges_after"] = e.merges_after;
        j["apriori_bound"] = e.apriori_bound;
        j["apriori_ok"] = e.apriori_ok;
    }
    return j;
}

inline Json to_json(const SurgeryResult& r) {
    Json seqs = Json::array(), trace = Json::array();
    for (const auto& s : r.sequences) seqs.push_back(to_json(s));
    for (const auto& e : r.trace) trace.push_back(to_json(e));
    Json conditions{{"balls_in_domain", r.condition1}, {"balls_disjoint", r.condition2}};
    conditions["length_not_multiple_of_ell"] = r.condition3 ? Json(*r.condition3) : Json(nullptr);
    return Json{{"orbit", to_json(r.orbit)},
                {"ids", r.ids},
                {"final_length", r.orbit.length()},
                {"sequences", seqs},
                {"trace", trace},
                {"conditions", conditions},
                {"ball_intersections", r.ball_intersections},
                {"max_merges", r.max_merges},
                {"violations", to_json(r.violations)}};
}

inline Json to_json(const std::vector<BumpBall>& balls) {
    Json a = Json::array();
    for (const auto& b : balls)
        a.push_back(Json{{"center", to_json(b.center)}, {"radius", b.radius}, {"target", to_json(b.target)}});
    return a;
}

inline Json to_json(const PerturbationSize& p, double budget) {
    return Json{{"c0", p.c0},
                {"c1", p.c1},
                {"samples", p.samples},
                {"outside_support_changes", p.outside_support_changes},
                {"budget", budget},
                {"within_budget", p.c0 <= budget && p.c1 <= budget && p.outside_support_changes == 0}};
}

inline Json to_json(const CloseResult& r, const Tolerances& tol) {
    Json j{{"status", to_string(r.status)}, {"note", r.note}, {"return_time", r.return_time}};
    if (r.orbit) {
        j["orbit"] = to_json(*r.orbit, tol);
        j["distance_to_x"] = r.distance_to_x;
    }
    if (r.in_region) j["in_region"] = *r.in_region;
    j["balls"] = to_json(r.balls);
    if (r.surgery) j["surgery"] = to_json(*r.surgery);
    return j;
}

/// Flat view of a surgery trace.
inline std::string trace_csv(const SurgeryResult& r) {
    std::ostringstream out;
    out.precision(17);
    out << "kind,i,j,id_i,id_j,level,parent_length,kept_outer,radius_i,radius_j,radius_after,eq1_bound,eq1_ok,"
           "merges_after\n";
    for (const auto& e : r.trace)
        out << to_string(e.kind) << ',' << e.i << ',' << e.j << ',' << e.id_i << ',' << e.id_j << ',' << e.level << ','
            << e.parent_length << ',' << e.kept_outer << ',' << e.radius_i << ',' << e.radius_j << ','
            << e.radius_after << ',' << e.eq1_bound << ',' << e.eq1_ok << ',' << e.merges_after << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Run manifest

struct RunManifest {
    std::string config_hash;
    std::string tool_version = mixdec::tool_version;
    std::string subcommand;
    Json parameters = Json::object();
    std::string started;
    std::string finished;
    std::vector<std::string> outputs;
    int exit_code = 0;
    std::string error;
};

inline Json to_json(const RunManifest& m) {
    Json j{{"config_hash", m.config_hash}, {"tool_version", m.tool_version}, {"subcommand", m.subcommand},
           {"parameters", m.parameters},   {"started", m.started},           {"finished", m.finished},
           {"outputs", m.outputs},         {"exit_code", m.exit_code}};
    if (!m.error.empty()) j["error"] = m.error;
    return j;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace mixdec

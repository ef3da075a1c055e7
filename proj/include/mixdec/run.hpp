#pragma once

// Run orchestration behind the command-line tool: reads the inputs, runs one
// pipeline, writes its report, plots and manifest into the output directory.
//
// Inputs are read and checked before anything is written, so a bad config
// leaves no outputs. A certificate failure still writes the report (it is the
// evidence) and is rethrown afterwards.

#include "mixdec/config.hpp"
#include "mixdec/covering.hpp"
#include "mixdec/graph.hpp"
#include "mixdec/periodic.hpp"
#include "mixdec/report.hpp"
#include "mixdec/surgery.hpp"
#include "mixdec/svg.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace mixdec {

struct RunRequest {
    std::string subcommand;
    std::string input;  // config (TOML) or instance (JSON) path
    std::optional<int> depth;
    std::optional<int> max_period;
    std::optional<int> orbit_id;
    std::optional<int> partner;
    std::optional<int> nmax;
    std::optional<int> ell;
    std::optional<int> budget;
    std::optional<std::uint64_t> seed;
    std::vector<Box> region;
    std::vector<double> point;
    std::string out_dir = "mixdec_out";
    std::string format = "json";  // json | csv
    bool quiet = false;
};

/// Everything a run produces, before it touches the file system.
struct RunArtifacts {
    Json report;
    std::map<std::string, std::string> files;  // name -> contents (besides the report)
    std::string summary;
    std::string input_hash;
    std::optional<Error> deferred;  // raised after the outputs are written
};

inline Json to_json(const RunRequest& r) {
    Json region = Json::array();
    for (const auto& b : r.region) region.push_back(Json{{"lo", to_json(b.lo)}, {"hi", to_json(b.hi)}});
    Json j{{"input", r.input}};
    auto opt = [&](const char* key, const auto& v) {
        if (v) j[key] = *v;
    };
    opt("depth", r.depth);
    opt("max_period", r.max_period);
    opt("orbit_id", r.orbit_id);
    opt("partner", r.partner);
    opt("nmax", r.nmax);
    opt("ell", r.ell);
    opt("budget", r.budget);
    opt("seed", r.seed);
    if (!r.region.empty()) j["region"] = region;
    if (!r.point.empty()) j["point"] = r.point;
    j["format"] = r.format;
    return j;
}

namespace detail {

inline std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw usage_error("cannot open '" + path + "'");
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

template <class T>
T require(const std::optional<T>& v, const std::string& flag) {
    if (!v) throw usage_error("missing required flag --" + flag);
    return *v;
}

struct LoadedConfig {
    Config cfg;
    SystemConfig sc;
    MapSystem sys;
};

inline LoadedConfig load_config(const std::string& path) {
    if (path.empty()) throw usage_error("missing config path");
    Config cfg = Config::load(path);
    SystemConfig sc = read_system_config(cfg);
    MapSystem sys = make_system(sc);
    return {std::move(cfg), std::move(sc), std::move(sys)};
}

inline Tolerances tolerances_from(const Config& cfg) {
    Tolerances t;
    t.inverse = cfg.number_or("tolerances.inverse", t.inverse);
    t.jacobian = cfg.number_or("tolerances.jacobian", t.jacobian);
    t.fd_step = cfg.number_or("tolerances.fd_step", t.fd_step);
    t.orbit = cfg.number_or("tolerances.orbit", t.orbit);
    t.unit = cfg.number_or("tolerances.unit", t.unit);
    t.resonance_order = static_cast<int>(cfg.number_or("tolerances.resonance_order", t.resonance_order));
    t.relation = cfg.number_or("tolerances.relation", t.relation);
    t.transversality_deg = cfg.number_or("tolerances.transversality_deg", t.transversality_deg);
    t.manifold_offset = cfg.number_or("manifold.offset", t.manifold_offset);
    t.manifold_gap = cfg.number_or("manifold.gap", t.manifold_gap);
    t.manifold_angle_deg = cfg.number_or("manifold.angle_deg", t.manifold_angle_deg);
    t.lipschitz_safety = cfg.number_or("tolerances.lipschitz_safety", t.lipschitz_safety);
    return t;
}

inline OrbitSearchOptions orbit_options(const Config& cfg, const RunRequest& req) {
    OrbitSearchOptions o;
    o.seeds = static_cast<int>(cfg.number_or("orbits.seeds", o.seeds));
    o.max_iterations = static_cast<int>(cfg.number_or("orbits.max_iterations", o.max_iterations));
    o.jitter = cfg.number_or("orbits.jitter", o.jitter);
    o.seed = req.seed.value_or(0);
    o.tol = tolerances_from(cfg);
    return o;
}

inline ManifoldOptions manifold_options(const Config& cfg) {
    ManifoldOptions m;
    m.arclength_budget = cfg.number_or("manifold.arclength", m.arclength_budget);
    m.max_points = static_cast<std::size_t>(cfg.number_or("manifold.max_points", static_cast<double>(m.max_points)));
    m.tol = tolerances_from(cfg);
    return m;
}

inline void check_region(const std::vector<Box>& region, int d) {
    for (const auto& b : region)
        if (b.lo.size() != d || b.hi.size() != d) throw usage_error("region boxes need one [lo, hi] pair per axis");
}

// ---------------------------------------------------------------------------
// Subcommands

inline RunArtifacts decompose(const RunRequest& req) {
    const auto in = load_config(req.input);
    const int depth = require(req.depth, "depth");
    check_region(req.region, in.sys.dimension());
    GraphOptions gopt;
    gopt.padding = in.sc.padding;
    gopt.samples_per_axis = static_cast<int>(in.cfg.number_or("graph.samples_per_axis", gopt.samples_per_axis));
    const auto cg = build_graph(in.sys, depth, req.region, gopt);
    std::vector<CyclicDecomposition> decs;
    for (const auto& c : recurrent_classes(cg.graph)) decs.push_back(cyclic_classes(cg.graph, c));
    std::sort(decs.begin(), decs.end(),
              [](const auto& a, const auto& b) { return a.cls.nodes.front() < b.cls.nodes.front(); });
    const auto trapping = trapping_regions(cg.graph);

    RunArtifacts out;
    out.input_hash = fnv1a_hex(in.cfg.source());
    out.report = decomposition_json(cg, decs, trapping, gopt);
    if (req.max_period) {
        const auto oopt = orbit_options(in.cfg, req);
        const auto orbits = find_periodic_orbits(in.sys, *req.max_period, req.region, oopt);
        Json table = Json::array();
        for (std::size_t i = 0; i < orbits.size(); ++i) {
            Json boxes = Json::array(), classes = Json::array();
            for (const auto& p : orbits[i].points) {
                const auto id = cg.covering.locate(p);
                boxes.push_back(id ? Json(*id) : Json(nullptr));
                Json cls = nullptr;
                for (std::size_t k = 0; id && k < decs.size(); ++k)
                    if (decs[k].cls.contains(*id)) cls = k;
                classes.push_back(cls);
            }
            table.push_back(Json{{"id", i},
                                 {"period", orbits[i].period},
                                 {"points", to_json(orbits[i].points)},
                                 {"residual", orbits[i].residual},
                                 {"boxes", boxes},
                                 {"class", classes}});
        }
        out.report["periodic_orbits"] = table;
    }
    out.files["transitions.dot"] = to_dot(cg.graph, decs);
    if (auto s = covering_svg(cg.covering, decs)) out.files["covering.svg"] = *s;
    if (req.format == "csv") {
        std::ostringstream csv;
        csv << "class,period,cyclic_class,node\n";
        for (std::size_t k = 0; k < decs.size(); ++k)
            for (std::size_t i = 0; i < decs[k].classes.size(); ++i)
                for (NodeId u : decs[k].classes[i]) csv << k << ',' << decs[k].period << ',' << i << ',' << u << "\n";
        out.files["decompose.csv"] = csv.str();
    }

    std::ostringstream s;
    s << "boxes=" << cg.covering.size() << " edges=" << cg.graph.edge_count() << " classes=" << decs.size();
    for (const auto& d : decs) s << " [size=" << d.cls.nodes.size() << " period=" << d.period << "]";
    if (cg.covering.domain().dimension() > 2) s << "\nspatial plots skipped (d > 2)";
    out.summary = s.str();
    for (const auto& d : decs)
        if (!partition_violations(cg.graph, d).empty())
            out.deferred = certificate_error("cyclic partition does not respect the edges");
    return out;
}

inline RunArtifacts orbits(const RunRequest& req) {
    const auto in = load_config(req.input);
    const int r = require(req.max_period, "max-period");
    check_region(req.region, in.sys.dimension());
    const auto oopt = orbit_options(in.cfg, req);
    const auto search = search_periodic_orbits(in.sys, r, req.region, oopt);
    RunArtifacts out;
    out.input_hash = fnv1a_hex(in.cfg.source());
    out.report = orbits_json(search, r, oopt);
    if (req.format == "csv") out.files["orbits.csv"] = orbits_csv(search.orbits, oopt.tol);
    out.summary = "orbits=" + std::to_string(search.orbits.size());
    return out;
}

inline RunArtifacts homoclinic(const RunRequest& req) {
    const auto in = load_config(req.input);
    const int nmax = require(req.nmax, "nmax");
    const int id = require(req.orbit_id, "orbit-id");
    check_region(req.region, in.sys.dimension());
    const auto oopt = orbit_options(in.cfg, req);
    const auto mopt = manifold_options(in.cfg);
    const int r = req.max_period.value_or(1);
    const auto orbits = find_periodic_orbits(in.sys, r, req.region, oopt);
    auto pick = [&](int k) -> const PeriodicOrbit& {
        if (k < 0 || k >= static_cast<int>(orbits.size()))
            throw usage_error("orbit id " + std::to_string(k) + " out of range (" + std::to_string(orbits.size()) +
                              " orbits up to period " + std::to_string(r) + ")");
        return orbits[static_cast<std::size_t>(k)];
    };
    const PeriodicOrbit& p = pick(id);
    const PeriodicOrbit& q = pick(req.partner.value_or(id));

    const auto times = intersection_times(in.sys, p, q, nmax, mopt);
    RunArtifacts out;
    out.input_hash = fnv1a_hex(in.cfg.source());
    out.report = Json{{"report", "homoclinic"},
                      {"constants", {{"manifold", to_json(mopt)}, {"tolerances", to_json(mopt.tol)}}},
                      {"orbit", to_json(p, mopt.tol)},
                      {"partner", to_json(q, mopt.tol)},
                      {"orbit_id", id},
                      {"partner_id", req.partner.value_or(id)},
                      {"intersection_times", to_json(times)}};
    std::vector<Vec> sample;
    try {
        sample = pointwise_class(in.sys, p, q, mopt);
        out.report["pointwise_class"] = to_json(sample);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::computation) throw;
        out.report["pointwise_class"] = nullptr;
        out.report["pointwise_class_note"] = e.what();
    }
    if (req.partner && *req.partner != id) out.report["cycle"] = to_json(detect_cycle(in.sys, p, q, mopt));

    auto curves = grow_manifold_branches(in.sys, q, Stability::unstable, mopt, 0);
    for (auto& c : grow_manifold_branches(in.sys, p, Stability::stable, mopt, 0)) curves.push_back(std::move(c));
    std::vector<Vec> marks(sample.begin() + (sample.empty() ? 0 : 1), sample.end());
    if (auto s = manifolds_svg(in.sys.domain(), curves, marks, {p.points.front(), q.points.front()}))
        out.files["manifolds.svg"] = *s;
    if (req.format == "csv") {
        std::ostringstream csv;
        csv << "n,transverse_crossings\n";
        for (const auto& [n, c] : times.crossing_counts) csv << n << ',' << c << "\n";
        out.files["homoclinic.csv"] = csv.str();
    }

    std::ostringstream s;
    s << "times=" << times.times.size() << " ell=" << times.ell << " ell_with_periods=" << times.ell_with_periods
      << (times.inconclusive ? " (inconclusive)" : "");
    out.summary = s.str();
    if (times.closure_violations + times.translation_violations + times.symmetry_violations > 0)
        out.deferred = certificate_error("intersection-time set violates its group invariants");
    return out;
}

inline RunArtifacts kset(const RunRequest& req) {
    const auto in = load_config(req.input);
    const int ell = require(req.ell, "ell");
    const int r = req.max_period.value_or(4);
    check_region(req.region, in.sys.dimension());
    const auto oopt = orbit_options(in.cfg, req);
    const auto found = k_set(in.sys, ell, req.region, r, oopt);
    RunArtifacts out;
    out.input_hash = fnv1a_hex(in.cfg.source());
    Json orbits = Json::array();
    for (std::size_t i = 0; i < found.size(); ++i) {
        Json o{{"id", i}};
        o.update(to_json(found[i], oopt.tol));
        orbits.push_back(std::move(o));
    }
    out.report = Json{{"report", "kset"},
                      {"ell", ell},
                      {"max_period", r},
                      {"constants", {{"seeds", oopt.seeds}, {"seed", oopt.seed}, {"tolerances", to_json(oopt.tol)}}},
                      {"orbits", orbits}};
    if (req.format == "csv") out.files["kset.csv"] = orbits_csv(found, oopt.tol);
    out.summary = "orbits=" + std::to_string(found.size());
    return out;
}

inline Json surgery_report(const SystemConfig& sc, const PerturbationDomain& dom, const PseudoOrbit& po,
                           const std::optional<int>& ell, double epsilon, bool csv, RunArtifacts& out) {
    const MapSystem sys = make_system(sc);
    const Tolerances tol;
    SurgeryOptions opt;
    opt.ell = ell;
    const auto domain_report = validate_domain(dom, sys);
    if (!domain_report.valid) throw certificate_error("invalid perturbation domain: " + domain_report.violations.front().detail);
    const auto res = run_surgery(po, dom, sys, opt);
    const auto balls = bump_balls(res, sys);
    const auto size = perturbation_size(sys, perturbed_system(sys, balls), balls);

    Json report{{"report", "surgery"},
                {"constants", surgery_constants(dom, sys.dimension(), tol)},
                {"ell", ell ? Json(*ell) : Json(nullptr)},
                {"instance", instance_json(sc, dom, po)},
                {"domain", to_json(domain_report)},
                {"result", to_json(res)},
                {"perturbation", {{"balls", to_json(balls)}, {"size", to_json(size, epsilon)}}}};
    if (auto s = surgery_svg(sys.domain(), dom, po, res)) out.files["surgery.svg"] = *s;
    out.files["instance.json"] = dump(instance_json(sc, dom, po));
    if (csv) out.files["surgery.csv"] = trace_csv(res);

    std::size_t secondary = 0;
    for (const auto& e : res.trace) secondary += e.kind == ShortcutEvent::Kind::secondary;
    std::ostringstream s;
    s << "input_length=" << po.length() << " final_length=" << res.orbit.length()
      << " primary=" << res.trace.size() - secondary << " secondary=" << secondary << " max_merges=" << res.max_merges
      << " c0=" << size.c0 << " c1=" << size.c1;
    out.summary = s.str();
    if (!res.condition1 || !res.condition2 || (res.condition3 && !*res.condition3))
        out.deferred = certificate_error("surgery certificate failed: " +
                                         (res.violations.empty() ? std::string("see report") : res.violations.front().detail));
    return report;
}

inline RunArtifacts surgery(const RunRequest& req) {
    RunArtifacts out;
    SystemConfig sc;
    PerturbationDomain dom;
    PseudoOrbit po;
    double epsilon = 1.0;
    if (!req.input.empty()) {
        const std::string text = read_text(req.input);
        Json j;
        try {
            j = Json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw usage_error("'" + req.input + "' is not valid JSON: " + e.what());
        }
        auto inst = instance_from_json(j);
        if (!inst.orbit) throw usage_error("instance has no pseudo_orbit");
        sc = std::move(inst.system);
        dom = std::move(inst.domain);
        po = std::move(*inst.orbit);
        epsilon = j.value("epsilon_pert", epsilon);
        out.input_hash = fnv1a_hex(text);
    } else {
        if (!req.seed) throw usage_error("surgery needs an instance file or --seed");
        const auto inst = random_instance(*req.seed);
        sc = system_config(inst);
        dom = inst.domain;
        po = inst.orbit;
        out.input_hash = fnv1a_hex(dump(instance_json(sc, dom, po)));
    }
    out.report = surgery_report(sc, dom, po, req.ell, epsilon, req.format == "csv", out);
    return out;
}

inline RunArtifacts validate(const RunRequest& req) {
    const std::string text = read_text(req.input);
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw usage_error("'" + req.input + "' is not valid JSON: " + e.what());
    }
    const auto inst = instance_from_json(j);
    const MapSystem sys = make_system(inst.system);
    const auto rep = validate_domain(inst.domain, sys);
    RunArtifacts out;
    out.input_hash = fnv1a_hex(text);
    out.report = Json{{"report", "validate-domain"},
                      {"constants", surgery_constants(inst.domain, sys.dimension(), Tolerances{})},
                      {"tiles", inst.domain.tiles.size()},
                      {"charts", inst.domain.charts.size()},
                      {"domain", to_json(rep)}};
    std::vector<Violation> orbit_problems;
    if (inst.orbit) {
        orbit_problems = validate_pseudo_orbit(jitter_off_boundaries(*inst.orbit, inst.domain, sys), inst.domain, sys);
        out.report["pseudo_orbit"] = Json{{"length", inst.orbit->length()},
                                          {"valid", orbit_problems.empty()},
                                          {"violations", to_json(orbit_problems)}};
    }
    if (req.format == "csv") {
        std::ostringstream csv;
        csv << "kind,detail\n";
        for (const auto& v : rep.violations) csv << v.kind << ",\"" << v.detail << "\"\n";
        for (const auto& v : orbit_problems) csv << v.kind << ",\"" << v.detail << "\"\n";
        out.files["validate-domain.csv"] = csv.str();
    }
    out.summary = std::string(rep.valid ? "domain valid" : "domain INVALID") + " (" +
                  std::to_string(rep.violations.size()) + " violations)";
    if (!rep.valid) out.deferred = certificate_error("perturbation domain failed validation");
    else if (!orbit_problems.empty()) out.deferred = certificate_error("pseudo-orbit failed validation");
    return out;
}

inline RunArtifacts close(const RunRequest& req) {
    const auto in = load_config(req.input);
    const int ell = require(req.ell, "ell");
    const int budget = require(req.budget, "budget");
    const int d = in.sys.dimension();
    if (static_cast<int>(req.point.size()) != d) throw usage_error("--point needs " + std::to_string(d) + " coordinates");
    check_region(req.region, d);
    const Vec x = Eigen::Map<const Vec>(req.point.data(), d);
    const Config& c = in.cfg;
    std::optional<double> eta;
    if (c.has("surgery.eta")) eta = c.at("surgery.eta").number("surgery.eta");
    const auto dom = domain_around(in.sys.domain(), x, c.number_or("surgery.half_width", 0.05),
                                   static_cast<int>(c.number_or("surgery.tiles_per_axis", 5)),
                                   static_cast<int>(c.number_or("surgery.N", 2)), c.number_or("surgery.theta", 0.2),
                                   c.number_or("surgery.delta", 0.2), eta);
    const double epsilon = c.number_or("surgery.epsilon_pert", 1.0);
    const auto grid = static_cast<std::size_t>(c.number_or("surgery.grid_budget", 1000));
    const Tolerances tol = tolerances_from(c);
    const auto domain_report = validate_domain(dom, in.sys);
    if (!domain_report.valid)
        throw certificate_error("invalid perturbation domain around x: " + domain_report.violations.front().detail);

    const auto res = close_orbit(in.sys, dom, x, ell, budget, req.region, tol);
    RunArtifacts out;
    out.input_hash = fnv1a_hex(in.cfg.source());
    out.report = Json{{"report", "close"},
                      {"constants", surgery_constants(dom, d, tol)},
                      {"point", req.point},
                      {"ell", ell},
                      {"budget", budget},
                      {"domain", to_json(domain_report)},
                      {"perturbation_domain", to_json(dom)},
                      {"result", to_json(res, tol)}};
    std::ostringstream s;
    s << "status=" << to_string(res.status);
    if (res.status == CloseStatus::closed) {
        const auto size = perturbation_size(in.sys, *res.perturbed, res.balls, grid);
        out.report["perturbation"] = to_json(size, epsilon);
        s << " period=" << res.orbit->period << " residual=" << res.orbit->residual << " c0=" << size.c0
          << " c1=" << size.c1;
        if (auto svg = surgery_svg(in.sys.domain(), dom, res.surgery->orbit, *res.surgery)) out.files["close.svg"] = *svg;
        if (!(size.c0 <= epsilon && size.c1 <= epsilon && size.outside_support_changes == 0))
            out.deferred = certificate_error("perturbation exceeds the configured budget");
    } else if (res.status == CloseStatus::unchanged) {
        s << " period=" << res.orbit->period;
    } else {
        s << " (" << res.note << ")";
        out.deferred = computation_error("closing inconclusive: " + res.note);
    }
    if (req.format == "csv") {
        std::ostringstream csv;
        csv.precision(17);
        csv << "ball,center,radius\n";
        for (std::size_t i = 0; i < res.balls.size(); ++i)
            csv << i << ',' << res.balls[i].center[0] << ',' << res.balls[i].radius << "\n";
        out.files["close.csv"] = csv.str();
    }
    out.summary = s.str();
    return out;
}

}  // namespace detail

/// Runs one subcommand without touching the file system.
inline RunArtifacts compute(const RunRequest& req) {
    if (req.format != "json" && req.format != "csv") throw usage_error("--format must be json or csv");
    const std::string& c = req.subcommand;
    if (c == "decompose") return detail::decompose(req);
    if (c == "orbits") return detail::orbits(req);
    if (c == "homoclinic") return detail::homoclinic(req);
    if (c == "kset") return detail::kset(req);
    if (c == "surgery") return detail::surgery(req);
    if (c == "validate-domain") return detail::validate(req);
    if (c == "close") return detail::close(req);
    throw usage_error("unknown subcommand '" + c + "'");
}

/// Runs one subcommand and writes <subcommand>.json (or the CSV view when
/// --format csv), auxiliary files and manifest.json into the output directory.
inline RunManifest run(const RunRequest& req, std::ostream& log) {
    RunManifest m;
    m.subcommand = req.subcommand;
    m.parameters = to_json(req);
    m.started = detail::utc_now();
    RunArtifacts a = compute(req);
    m.config_hash = a.input_hash;

    namespace fs = std::filesystem;
    const fs::path dir(req.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw usage_error("cannot create output directory '" + req.out_dir + "': " + ec.message());
    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw usage_error("cannot write '" + (dir / name).string() + "'");
        f << body;
        m.outputs.push_back(name);
    };
    if (req.format == "json") write(req.subcommand + ".json", dump(a.report));
    for (const auto& [name, body] : a.files) write(name, body);
    if (a.deferred) {
        m.exit_code = a.deferred->kind() == ErrorKind::certificate ? 3 : 2;
        m.error = a.deferred->what();
    }
    m.finished = detail::utc_now();
    m.outputs.push_back("manifest.json");
    {
        std::ofstream f(dir / "manifest.json", std::ios::binary);
        if (!f) throw usage_error("cannot write '" + (dir / "manifest.json").string() + "'");
        f << dump(to_json(m));
    }
    if (!req.quiet) {
        log << req.subcommand << ": " << a.summary << "\n";
        for (const auto& f : m.outputs) log << "  wrote " << (dir / f).string() << "\n";
    }
    if (a.deferred) throw *a.deferred;
    return m;
}

}  // namespace mixdec

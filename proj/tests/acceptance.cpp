// Acceptance run: one PASS/FAIL line per criterion, each backed by a JSON
// report. Criterion 7 reruns 1-6 and compares the reports byte for byte.
//
// usage: mixdec_acceptance <models dir> [report dir]

#include "helpers.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <string>

using namespace mixdec;

namespace {

struct Outcome {
    bool pass = true;
    Json report = Json::object();
    std::vector<std::string> failures;

    void check(bool ok, const std::string& what) {
        if (ok) return;
        pass = false;
        if (failures.size() < 20) failures.push_back(what);
    }
};

std::string models_dir;

std::string model(const std::string& name) { return models_dir + "/" + name; }

/// Period by an oracle independent of BFS levels: gcd of the lengths n <= m
/// of closed walks, read off the diagonals of boolean powers of the adjacency
/// matrix restricted to the class.
int walk_period(const TransitionGraph& g, const RecurrentClass& c) {
    const int m = static_cast<int>(c.nodes.size());
    Eigen::MatrixXi A(m, m), P = Eigen::MatrixXi::Identity(m, m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) A(a, b) = g.has_edge(c.nodes[a], c.nodes[b]) ? 1 : 0;
    int period = 0;
    for (int n = 1; n <= m; ++n) {
        P = ((P * A).array() > 0).cast<int>();
        if (P.diagonal().sum() > 0) period = std::gcd(period, n);
    }
    return period;
}

/// All-pairs reachability by walks of exactly `steps` edges inside the class.
bool all_pairs(const TransitionGraph& g, const RecurrentClass& c, const std::vector<NodeId>& piece, int steps) {
    const int m = static_cast<int>(c.nodes.size());
    auto pos = [&](NodeId u) { return static_cast<int>(std::lower_bound(c.nodes.begin(), c.nodes.end(), u) - c.nodes.begin()); };
    for (NodeId s : piece) {
        std::vector<char> cur(m, 0), next(m, 0);
        cur[pos(s)] = 1;
        for (int k = 0; k < steps; ++k) {
            std::fill(next.begin(), next.end(), 0);
            for (int a = 0; a < m; ++a)
                if (cur[a])
                    for (NodeId v : g.successors(c.nodes[a]))
                        if (c.contains(v)) next[pos(v)] = 1;
            cur.swap(next);
        }
        for (NodeId t : piece)
            if (!cur[pos(t)]) return false;
    }
    return true;
}

std::vector<TransitionGraph> corpus() {
    std::mt19937_64 rng(20240601);
    std::vector<TransitionGraph> out;
    for (int i = 0; i < 1000; ++i) out.push_back(testing::random_digraph(rng, 12, 0.1, 0.5));
    return out;
}

Outcome criterion1() {
    Outcome o;
    std::size_t classes = 0;
    std::map<int, int> histogram;
    for (const auto& g : corpus())
        for (const auto& c : recurrent_classes(g)) {
            ++classes;
            const int fast = class_period(g, c), slow = period_oracle(g, c);
            ++histogram[fast];
            o.check(fast == slow, "class_period " + std::to_string(fast) + " != oracle " + std::to_string(slow));
        }
    Json h = Json::object();
    for (auto [p, n] : histogram) h[std::to_string(p)] = n;
    o.report = {{"graphs", 1000}, {"nontrivial_classes", classes}, {"period_histogram", h}};
    return o;
}

Outcome criterion2() {
    Outcome o;
    std::size_t pieces = 0, edges = 0;
    int worst_exponent = 0;
    for (const auto& g : corpus())
        for (const auto& c : recurrent_classes(g)) {
            const auto dec = cyclic_classes(g, c);
            o.check(partition_violations(g, dec).empty(), "edge leaves the cyclic order");
            for (NodeId u : c.nodes)
                for (NodeId v : g.successors(u)) edges += c.contains(v);
            for (std::size_t i = 0; i < dec.classes.size(); ++i) {
                ++pieces;
                const auto& cert = dec.mixing[i];
                o.check(cert.exponent.has_value(), "no mixing certificate");
                if (!cert.exponent) continue;
                o.check(*cert.exponent <= cert.bound, "exponent above the Wielandt bound");
                o.check(all_pairs(g, c, dec.classes[i], *cert.exponent * dec.period), "certificate does not hold");
                worst_exponent = std::max(worst_exponent, *cert.exponent);
            }
        }
    o.report = {{"cyclic_classes", pieces}, {"induced_edges_checked", edges}, {"largest_exponent", worst_exponent}};
    return o;
}

Outcome criterion3() {
    Outcome o;
    struct Golden {
        std::string file;
        int depth;
        int period;
        std::size_t pieces;
    };
    for (const Golden& gd : {Golden{"doubling.toml", 6, 1, 1}, Golden{"rotation4.toml", 2, 4, 4}, Golden{"swap.toml", 6, 2, 2}}) {
        const auto t0 = std::chrono::steady_clock::now();
        RunRequest req;
        req.subcommand = "decompose";
        req.input = model(gd.file);
        req.depth = gd.depth;
        const auto art = compute(req);
        const auto in = detail::load_config(req.input);
        GraphOptions gopt;
        gopt.padding = in.sc.padding;
        gopt.samples_per_axis = static_cast<int>(in.cfg.number_or("graph.samples_per_axis", 3));
        const auto cg = build_graph(in.sys, gd.depth, {}, gopt);
        const auto cls = recurrent_classes(cg.graph);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        o.check(seconds < 10.0, gd.file + " took more than 10 s");
        o.check(cls.size() == 1, gd.file + ": expected one class");
        if (cls.size() != 1) continue;
        const auto dec = cyclic_classes(cg.graph, cls[0]);
        const int oracle = walk_period(cg.graph, cls[0]);
        o.check(dec.period == gd.period, gd.file + ": period " + std::to_string(dec.period));
        o.check(oracle == gd.period, gd.file + ": walk oracle " + std::to_string(oracle));
        if (cls[0].nodes.size() <= 12) o.check(period_oracle(cg.graph, cls[0]) == gd.period, gd.file + ": cycle oracle");
        o.check(dec.classes.size() == gd.pieces, gd.file + ": cyclic class count");
        for (std::size_t i = 0; i < dec.classes.size(); ++i) {
            o.check(dec.mixing[i].exponent.has_value(), gd.file + ": cyclic class not mixing");
            if (gd.file == "rotation4.toml") o.check(dec.classes[i].size() == 1, "rotation: cyclic class not a singleton");
        }
        o.check(art.report.at("classes").size() == 1 && art.report.at("classes")[0].at("period") == gd.period,
                gd.file + ": report disagrees");
        o.report[gd.file] = art.report.at("classes");
        o.report[gd.file + " oracle_period"] = oracle;
    }
    return o;
}

Outcome criterion4() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    RunRequest req;
    req.subcommand = "homoclinic";
    req.input = model("cat.toml");
    req.orbit_id = 0;
    req.nmax = 3;
    const auto art = compute(req);
    const auto in = detail::load_config(req.input);
    const auto orbits = find_periodic_orbits(in.sys, 1);
    o.check(orbits.size() == 1, "expected one fixed point");
    if (orbits.empty()) return o;
    const auto& p = orbits[0];
    const double up = (3.0 + std::sqrt(5.0)) / 2.0, down = (3.0 - std::sqrt(5.0)) / 2.0;
    o.check(std::abs(p.multipliers[0] - Complex(up, 0.0)) < 1e-10, "unstable multiplier");
    o.check(std::abs(p.multipliers[1] - Complex(down, 0.0)) < 1e-10, "stable multiplier");
    const auto t = intersection_times(in.sys, p, p, 3, detail::manifold_options(in.cfg));
    o.check(t.ell == 1, "ell = " + std::to_string(t.ell));
    o.check(t.times.size() == 7, "not every n in [-3, 3] is an intersection time");
    // Independent recount of the invariants.
    std::set<int> T(t.times.begin(), t.times.end());
    int violations = 0;
    for (int n : T) {
        for (int m : T)
            if (std::abs(n + m) <= 3 && !T.count(n + m)) ++violations;
        for (int s : {p.period, -p.period})
            if (std::abs(n + s) <= 3 && !T.count(n + s)) ++violations;
        if (!T.count(-n)) ++violations;
        if (n % t.ell != 0) ++violations;
    }
    o.check(violations == 0, std::to_string(violations) + " invariant violations");
    o.check(t.closure_violations + t.translation_violations + t.symmetry_violations == 0, "reported violations");
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.check(seconds < 120.0, "took more than 2 min");
    o.report = art.report;
    o.report["independent_violations"] = violations;
    return o;
}

Outcome criterion5() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t primary = 0, secondary = 0, with_ell = 0, reflection = 0;
    int most_merges = 0;
    Json digest = Json::array();
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        const std::string tag = "seed " + std::to_string(seed) + ": ";
        const auto inst = random_instance(seed);
        const auto f = inst.system();
        const auto& dom = inst.domain;
        reflection += inst.map[0].find("- x1") != std::string::npos;
        o.check(!dom.eta_override && dom.eta == std::pow(dom.theta / 4.0, 4.0), tag + "eta is not (theta/4)^4");
        o.check(validate_domain(dom, f).valid, tag + "invalid domain");
        const std::size_t n = inst.orbit.length();
        SurgeryOptions opt;
        for (int ell : {2 + static_cast<int>(seed % 2), 3 - static_cast<int>(seed % 2)})
            if (n % static_cast<std::size_t>(ell) != 0) {
                opt.ell = ell;
                break;
            }
        with_ell += opt.ell.has_value();
        SurgeryResult res;
        try {
            res = run_surgery(inst.orbit, dom, f, opt);
        } catch (const std::exception& e) {
            o.check(false, tag + e.what());
            continue;
        }
        // Termination with strictly decreasing lengths.
        std::size_t len = n;
        for (const auto& e : res.trace) {
            o.check(e.parent_length == len && e.outer_length + e.inner_length == len, tag + "trace lengths");
            len = e.kept_outer ? e.outer_length : e.inner_length;
            o.check(len < e.parent_length, tag + "shortcut did not shorten");
            if (opt.ell) o.check(len % static_cast<std::size_t>(*opt.ell) != 0, tag + "kept branch divisible by ell");
            if (e.kind == ShortcutEvent::Kind::primary) {
                ++primary;
                continue;
            }
            ++secondary;
            o.check(e.radius_after <= 2.0 / dom.theta * (e.radius_i + e.radius_j) * (1.0 + 1e-12),
                    tag + "merged radius exceeds bound");
            o.check(e.merges_after <= 4, tag + "more than 4^d merges");
        }
        o.check(len == res.orbit.length(), tag + "final length differs from the trace");
        // Exhaustive pairwise scan of the final balls, every level.
        for (std::size_t a = 0; a < res.sequences.size(); ++a)
            for (std::size_t b = a + 1; b < res.sequences.size(); ++b)
                for (int k = 0; k < dom.N; ++k) {
                    const auto& A = res.sequences[a];
                    const auto& B = res.sequences[b];
                    if (!(A.radii[k] > 0.0) && !(B.radii[k] > 0.0)) continue;
                    o.check(f.domain().distance(A.points[k], B.points[k]) >= A.radii[k] + B.radii[k],
                            tag + "final balls intersect");
                }
        for (const auto& s : res.sequences)
            for (int m : s.merges) most_merges = std::max(most_merges, m);
        o.check(res.condition1 && res.condition2, tag + "certificate flags");
        if (opt.ell) o.check(res.orbit.length() % static_cast<std::size_t>(*opt.ell) != 0, tag + "final length divisible by ell");
        digest.push_back({seed, n, res.orbit.length(), res.trace.size()});
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.check(seconds < 120.0, "took more than 2 min");
    o.report = {{"instances", 500},       {"reflection_instances", reflection}, {"with_ell", with_ell},
                {"primary_shortcuts", primary}, {"secondary_shortcuts", secondary}, {"most_merges", most_merges},
                {"seed_input_final_events", digest}};
    return o;
}

Outcome criterion6() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    RunRequest req;
    req.subcommand = "close";
    req.input = model("rotation3_close.toml");
    req.point = {0.05};
    req.ell = 2;
    req.budget = 20;
    const auto art = compute(req);

    const auto in = detail::load_config(req.input);
    const Config& c = in.cfg;
    const Vec x = testing::vec({0.05});
    const auto dom = domain_around(in.sys.domain(), x, c.number_or("surgery.half_width", 0.05),
                                   static_cast<int>(c.number_or("surgery.tiles_per_axis", 5)),
                                   static_cast<int>(c.number_or("surgery.N", 2)), c.number_or("surgery.theta", 0.2),
                                   c.number_or("surgery.delta", 0.2));
    const double budget = c.number_or("surgery.epsilon_pert", 1.0);
    const auto res = close_orbit(in.sys, dom, x, 2, 20);
    o.check(res.status == CloseStatus::closed, "not closed");
    if (res.status != CloseStatus::closed) return o;
    const auto& g = *res.perturbed;
    const Vec base = res.orbit->points[0];
    const auto pts = iterate(g, base, 3).points;
    const double residual = g.domain().distance(pts[3], base);
    o.check(res.orbit->period == 3, "period " + std::to_string(res.orbit->period));
    o.check(residual < 1e-10, "residual by direct iteration");
    o.check(g.domain().distance(pts[1], base) > 1e-3 && g.domain().distance(pts[2], base) > 1e-3, "closes early");

    // Support: the bumps are exactly the positive-radius final balls, and g
    // differs from f inside each of them and nowhere outside.
    std::size_t balls = 0;
    for (const auto& s : res.surgery->sequences)
        for (double r : s.radii) balls += r > 0.0;
    o.check(balls == res.balls.size(), "bump count differs from ball count");
    for (const auto& B : res.balls)
        o.check(g.domain().distance(evaluate(g, B.center), evaluate(in.sys, B.center)) > 0.0, "ball without a bump");
    std::size_t outside = 0, samples = 0;
    for (int i = 0; i < 20000; ++i) {
        const Vec y = testing::vec({(i + 0.5) / 20000.0});
        const bool inside = std::any_of(res.balls.begin(), res.balls.end(),
                                        [&](const BumpBall& B) { return g.domain().distance(B.center, y) < B.radius; });
        if (inside) continue;
        ++samples;
        outside += g.domain().distance(evaluate(g, y), evaluate(in.sys, y)) > 0.0;
    }
    o.check(outside == 0, std::to_string(outside) + " changes outside the balls");
    const auto size = perturbation_size(in.sys, g, res.balls);
    o.check(size.c0 < budget && size.c1 < budget, "perturbation above epsilon_pert");
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.check(seconds < 30.0, "took more than 30 s");
    o.report = art.report;
    o.report["outside_samples"] = samples;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: mixdec_acceptance <models dir> [report dir]\n";
        return 1;
    }
    models_dir = argv[1];
    const std::string out_dir = argc > 2 ? argv[2] : "";

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"period oracle on 1000 random digraphs", criterion1},
        {"cyclic partition and mixing certificates", criterion2},
        {"doubling / quarter rotation / swap goldens", criterion3},
        {"cat map homoclinic suite", criterion4},
        {"surgery property suite, 500 instances", criterion5},
        {"closing on the third rotation", criterion6},
    };
    bool all = true;
    std::vector<std::string> first_reports;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.check(false, std::string("exception: ") + e.what());
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        first_reports.push_back(dump(o.report));
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " ("
                  << std::fixed << std::setprecision(2) << seconds << " s)\n";
        for (const auto& f : o.failures) std::cout << "    " << f << "\n";
        all = all && o.pass;
        if (!out_dir.empty()) {
            std::filesystem::create_directories(out_dir);
            std::ofstream(std::filesystem::path(out_dir) / ("criterion" + std::to_string(i + 1) + ".json")) << first_reports.back();
        }
    }

    // Criterion 7: rerun 1-6 with the same seeds.
    {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::size_t> differing;
        for (std::size_t i = 0; i < criteria.size(); ++i) {
            std::string again;
            try {
                again = dump(criteria[i].second().report);
            } catch (const std::exception& e) {
                again = e.what();
            }
            if (again != first_reports[i]) differing.push_back(i + 1);
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool pass = differing.empty();
        std::cout << (pass ? "PASS" : "FAIL") << " criterion 7: byte-identical reports on rerun (" << std::fixed
                  << std::setprecision(2) << seconds << " s)\n";
        for (auto k : differing) std::cout << "    report of criterion " << k << " differs\n";
        all = all && pass;
    }
    return all ? 0 : 1;
}

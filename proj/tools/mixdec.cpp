// mixdec: command-line front end. Parses flags, hands the request to
// mixdec::run and maps errors onto exit codes 1 (usage), 2 (computation) and
// 3 (certificate).

#include "mixdec/run.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

// "lo1,hi1,lo2,hi2,..." -> box
mixdec::Box parse_box(const std::string& text) {
    std::vector<double> v;
    std::stringstream s(text);
    std::string item;
    while (std::getline(s, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw mixdec::usage_error("--region expects numbers lo1,hi1,lo2,hi2,...; got '" + text + "'");
        }
    }
    if (v.empty() || v.size() % 2 != 0) throw mixdec::usage_error("--region needs lo,hi pairs; got '" + text + "'");
    const auto d = static_cast<Eigen::Index>(v.size() / 2);
    mixdec::Box b{mixdec::Vec(d), mixdec::Vec(d)};
    for (Eigen::Index i = 0; i < d; ++i) {
        b.lo[i] = v[static_cast<std::size_t>(2 * i)];
        b.hi[i] = v[static_cast<std::size_t>(2 * i + 1)];
        if (b.hi[i] <= b.lo[i]) throw mixdec::usage_error("--region needs lo < hi on every axis");
    }
    return b;
}

template <class T>
void optional_flag(CLI::App* app, const std::string& name, std::optional<T>& target, const std::string& help,
                   bool required = false) {
    auto* opt = app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
    if (required) opt->required();
}

}  // namespace

int main(int argc, char** argv) {
    mixdec::RunRequest req;
    std::vector<std::string> regions;

    CLI::App app{"mixdec: decompositions, periodic orbits and orbit surgery for maps given by expressions"};
    app.set_version_flag("--version", mixdec::tool_version);
    app.require_subcommand(1);
    app.fallthrough();
    std::optional<std::uint64_t> seed;
    optional_flag(&app, "--seed", seed, "seed for all randomness");
    app.add_option("--out-dir", req.out_dir, "output directory")->capture_default_str();
    app.add_option("--format", req.format, "report format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    app.add_flag("--quiet", req.quiet, "no progress output");

    auto add_region = [&](CLI::App* sub) {
        sub->add_option("--region", regions, "box lo1,hi1[,lo2,hi2...]; repeat for a union")->allow_extra_args(false);
    };

    auto* dec = app.add_subcommand("decompose", "box covering, recurrent classes, cyclic classes, mixing");
    dec->add_option("config", req.input, "system config (TOML)")->required();
    optional_flag(dec, "--depth", req.depth, "2^depth cells per axis", true);
    optional_flag(dec, "--max-period", req.max_period, "also tabulate periodic orbits up to this period");
    add_region(dec);

    auto* orb = app.add_subcommand("orbits", "periodic orbits by Newton search");
    orb->add_option("config", req.input, "system config (TOML)")->required();
    optional_flag(orb, "--max-period", req.max_period, "largest period", true);
    add_region(orb);

    auto* hom = app.add_subcommand("homoclinic", "intersection times of invariant manifolds");
    hom->add_option("config", req.input, "system config (TOML)")->required();
    optional_flag(hom, "--orbit-id", req.orbit_id, "orbit index from the orbit search", true);
    optional_flag(hom, "--nmax", req.nmax, "test n in [-nmax, nmax]", true);
    optional_flag(hom, "--partner", req.partner, "second orbit (default: the same orbit)");
    optional_flag(hom, "--max-period", req.max_period, "period bound of the orbit search (default 1)");
    add_region(hom);

    auto* ks = app.add_subcommand("kset", "periodic orbits whose period is not a multiple of ell");
    ks->add_option("config", req.input, "system config (TOML)")->required();
    optional_flag(ks, "--ell", req.ell, "ell", true);
    optional_flag(ks, "--max-period", req.max_period, "largest period (default 4)");
    add_region(ks);

    auto* sur = app.add_subcommand("surgery", "shortcut process on a periodic pseudo-orbit");
    sur->add_option("instance", req.input, "instance (JSON); omit to generate one from --seed");
    optional_flag(sur, "--ell", req.ell, "request a final length not divisible by ell");

    auto* cl = app.add_subcommand("close", "close the orbit of a point by a local perturbation");
    cl->add_option("config", req.input, "system config (TOML) with a [surgery] section")->required();
    cl->add_option("--point", req.point, "coordinates x1,x2,...")->delimiter(',')->required();
    optional_flag(cl, "--ell", req.ell, "ell", true);
    optional_flag(cl, "--budget", req.budget, "largest return time searched", true);
    add_region(cl);

    auto* val = app.add_subcommand("validate-domain", "check a perturbation domain (and pseudo-orbit)");
    val->add_option("instance", req.input, "instance (JSON)")->required();

    for (auto* sub : {dec, orb, hom, ks, sur, cl, val}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        req.subcommand = app.get_subcommands().front()->get_name();
        req.seed = seed;
        for (const auto& r : regions) req.region.push_back(parse_box(r));
        mixdec::run(req, std::cout);
        return 0;
    } catch (const mixdec::Error& e) {
        std::cerr << "mixdec " << req.subcommand << ": " << e.what() << "\n";
        switch (e.kind()) {
            case mixdec::ErrorKind::usage: return 1;
            case mixdec::ErrorKind::computation: return 2;
            case mixdec::ErrorKind::certificate: return 3;
        }
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "mixdec " << req.subcommand << ": " << e.what() << "\n";
        return 2;
    }
}

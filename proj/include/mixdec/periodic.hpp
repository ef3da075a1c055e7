#pragma once

// Periodic orbits, their multipliers and resonances, invariant manifolds of
// planar saddles, and homoclinic intersection-time sets.

#include "mixdec/core.hpp"
#include "mixdec/covering.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <exception>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace mixdec {

using Complex = std::complex<double>;

struct PeriodicOrbit {
    int period = 0;
    std::vector<Vec> points;  // points[i + 1] = f(points[i]); points[0] is lexicographically smallest
    std::vector<Complex> multipliers;  // eigenvalues of D f^period at points[0], by decreasing modulus
    double residual = 0.0;             // max |f(points[i]) - points[i + 1 mod period]|
};

struct OrbitSearchOptions {
    int seeds = 400;  // total grid seeds (spread over the region or domain)
    int max_iterations = 40;
    double jitter = 0.0;  // seed jitter as a fraction of the grid spacing
    std::uint64_t seed = 0;
    unsigned threads = 0;
    Tolerances tol;
};

struct OrbitSearch {
    std::vector<PeriodicOrbit> orbits;
    int singular_seeds = 0;  // Jacobian of f^r - id singular at the seed
    int failed_seeds = 0;    // no convergence, or the iterate left the domain
};

namespace detail {

inline bool inside(const std::vector<Box>& region, const Vec& x) {
    if (region.empty()) return true;
    for (const auto& b : region) {
        bool in = true;
        for (int i = 0; i < x.size() && in; ++i) in = x[i] >= b.lo[i] && x[i] <= b.hi[i];
        if (in) return true;
    }
    return false;
}

inline Vec checked_step(const MapSystem& sys, const Vec& x, bool forward) {
    const Vec y = sys.domain().wrap(forward ? sys.forward_raw(x) : sys.inverse_raw(x));
    if (!sys.domain().contains(y, 1e-9)) throw computation_error("iterate left the domain");
    return y;
}

/// Points x, f(x), ..., f^r(x).
inline std::vector<Vec> orbit_points(const MapSystem& sys, const Vec& x, int r) {
    std::vector<Vec> pts{sys.domain().wrap(x)};
    for (int k = 0; k < r; ++k) pts.push_back(checked_step(sys, pts.back(), true));
    return pts;
}

/// D f^r along the given points (the product J(x_{r-1}) ... J(x_0)).
inline Mat orbit_jacobian(const MapSystem& sys, const std::vector<Vec>& pts, int r) {
    const int d = sys.dimension();
    Mat M = Mat::Identity(d, d);
    for (int k = 0; k < r; ++k) M = jacobian(sys, pts[static_cast<std::size_t>(k)]) * M;
    return M;
}

inline std::vector<Complex> sorted_eigenvalues(const Mat& M) {
    Eigen::EigenSolver<Mat> solver(M, false);
    std::vector<Complex> ev;
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) ev.push_back(solver.eigenvalues()[i]);
    std::sort(ev.begin(), ev.end(), [](const Complex& a, const Complex& b) {
        if (std::abs(a) != std::abs(b)) return std::abs(a) > std::abs(b);
        return std::arg(a) < std::arg(b);
    });
    return ev;
}

inline bool lex_less(const Vec& a, const Vec& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

inline PeriodicOrbit make_orbit(const MapSystem& sys, const Vec& x, int r) {
    auto pts = orbit_points(sys, x, r);
    pts.pop_back();
    const auto first = std::min_element(pts.begin(), pts.end(), lex_less);
    std::rotate(pts.begin(), first, pts.end());
    PeriodicOrbit orbit;
    orbit.period = r;
    for (int k = 0; k < r; ++k) {
        const Vec next = checked_step(sys, pts[static_cast<std::size_t>(k)], true);
        orbit.residual = std::max(orbit.residual, sys.domain().distance(next, pts[static_cast<std::size_t>((k + 1) % r)]));
    }
    auto cycle = pts;
    cycle.push_back(pts.front());
    orbit.multipliers = sorted_eigenvalues(orbit_jacobian(sys, cycle, r));
    orbit.points = std::move(pts);
    return orbit;
}

enum class NewtonOutcome { converged, singular, failed };

/// Newton iteration for f^r(x) = x. A seed that already satisfies the
/// residual tolerance is accepted as is.
inline NewtonOutcome newton_periodic(const MapSystem& sys, Vec& x, int r, const OrbitSearchOptions& opt) {
    const Domain& dom = sys.domain();
    const int d = sys.dimension();
    const double max_step = dom.diameter() / 4.0;
    int polish = 0;
    for (int it = 0; it < opt.max_iterations; ++it) {
        const auto pts = orbit_points(sys, x, r);
        const Vec F = dom.displacement(pts.front(), pts.back());
        const bool small = F.norm() < opt.tol.orbit;
        if (small && (it == 0 || polish >= 2)) return NewtonOutcome::converged;
        const Mat DF = orbit_jacobian(sys, pts, r) - Mat::Identity(d, d);
        Eigen::FullPivLU<Mat> lu(DF);
        lu.setThreshold(1e-12);
        if (!lu.isInvertible()) return small ? NewtonOutcome::converged : NewtonOutcome::singular;
        Vec step = lu.solve(-F);
        if (step.norm() > max_step) step *= max_step / step.norm();
        x = dom.wrap(x + step);
        if (!dom.contains(x, 1e-9)) return NewtonOutcome::failed;
        if (small) ++polish;
    }
    const auto pts = orbit_points(sys, x, r);
    return dom.displacement(pts.front(), pts.back()).norm() < opt.tol.orbit ? NewtonOutcome::converged
                                                                          : NewtonOutcome::failed;
}

/// Smallest m dividing r with f^m(x) = x (to a loose tolerance).
inline int minimal_period(const MapSystem& sys, const Vec& x, int r) {
    const auto pts = orbit_points(sys, x, r);
    for (int m = 1; m < r; ++m) {
        if (r % m != 0) continue;
        if (sys.domain().distance(pts.front(), pts[static_cast<std::size_t>(m)]) < 1e-8) return m;
    }
    return r;
}

inline std::vector<Vec> orbit_seeds(const Domain& dom, const std::vector<Box>& region, const OrbitSearchOptions& opt) {
    const int d = dom.dimension();
    Domain seed_domain = dom;
    if (!region.empty()) {
        // Seeds on the bounding box of the region, filtered by membership.
        for (int i = 0; i < d; ++i) {
            double lo = region.front().lo[i], hi = region.front().hi[i];
            for (const auto& b : region) {
                lo = std::min(lo, b.lo[i]);
                hi = std::max(hi, b.hi[i]);
            }
            seed_domain.lo[i] = lo;
            seed_domain.hi[i] = hi;
        }
    }
    const int per_axis = detail::grid_per_axis(d, std::max(1, opt.seeds));
    std::mt19937_64 rng(opt.seed);
    auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    std::vector<Vec> seeds;
    detail::for_each_grid_point(seed_domain, per_axis, [&](const Vec& x) {
        Vec s = x;
        if (opt.jitter > 0.0)
            for (int i = 0; i < d; ++i) s[i] += opt.jitter * (unit() - 0.5) * seed_domain.width(i) / per_axis;
        if (inside(region, s)) seeds.push_back(s);
    });
    return seeds;
}

inline bool same_orbit(const Domain& dom, const PeriodicOrbit& a, const PeriodicOrbit& b, double tol) {
    if (a.period != b.period) return false;
    for (const auto& p : a.points)
        if (dom.distance(p, b.points.front()) < tol) return true;
    return false;
}

}  // namespace detail

/// Newton's method on f^r - id from a seed grid, for r = 1..max_period.
/// Each orbit is reported once, at its minimal period; orbits are sorted by
/// period and then by their first point.
inline OrbitSearch search_periodic_orbits(const MapSystem& sys, int max_period, const std::vector<Box>& region = {},
                                          const OrbitSearchOptions& opt = {}) {
    if (max_period < 1) throw usage_error("max_period must be >= 1");
    const auto seeds = detail::orbit_seeds(sys.domain(), region, opt);
    OrbitSearch out;
    const double dedup = 10.0 * opt.tol.orbit;

    enum class Status { none, converged, singular, failed };
    struct SeedResult {
        Status status = Status::none;
        std::optional<PeriodicOrbit> orbit;
    };

    for (int r = 1; r <= max_period; ++r) {
        std::vector<SeedResult> results(seeds.size());
        auto run_seed = [&](std::size_t i) {
            SeedResult& res = results[i];
            try {
                Vec x = seeds[i];
                const auto outcome = detail::newton_periodic(sys, x, r, opt);
                if (outcome == detail::NewtonOutcome::singular) {
                    res.status = Status::singular;
                    return;
                }
                if (outcome == detail::NewtonOutcome::failed) {
                    res.status = Status::failed;
                    return;
                }
                const int m = detail::minimal_period(sys, x, r);
                if (m != r && detail::newton_periodic(sys, x, m, opt) != detail::NewtonOutcome::converged) {
                    res.status = Status::failed;
                    return;
                }
                auto orbit = detail::make_orbit(sys, x, m);
                if (orbit.residual >= opt.tol.orbit) {
                    res.status = Status::failed;
                    return;
                }
                res.status = Status::converged;
                res.orbit = std::move(orbit);
            } catch (const Error&) {
                res.status = Status::failed;
            }
        };

        unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
        threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(seeds.size())));
        if (threads <= 1) {
            for (std::size_t i = 0; i < seeds.size(); ++i) run_seed(i);
        } else {
            std::vector<std::exception_ptr> failures(threads);
            {
                std::vector<std::jthread> pool;
                for (unsigned t = 0; t < threads; ++t)
                    pool.emplace_back([&, t] {
                        try {
                            for (std::size_t i = t; i < seeds.size(); i += threads) run_seed(i);
                        } catch (...) {
                            failures[t] = std::current_exception();
                        }
                    });
            }
            for (const auto& f : failures)
                if (f) std::rethrow_exception(f);
        }

        for (auto& res : results) {
            if (res.status == Status::singular) ++out.singular_seeds;
            if (res.status == Status::failed) ++out.failed_seeds;
            if (!res.orbit) continue;
            const bool duplicate = std::any_of(out.orbits.begin(), out.orbits.end(), [&](const PeriodicOrbit& o) {
                return detail::same_orbit(sys.domain(), o, *res.orbit, dedup);
            });
            if (!duplicate) out.orbits.push_back(std::move(*res.orbit));
        }
    }
    std::sort(out.orbits.begin(), out.orbits.end(), [](const PeriodicOrbit& a, const PeriodicOrbit& b) {
        if (a.period != b.period) return a.period < b.period;
        return detail::lex_less(a.points.front(), b.points.front());
    });
    return out;
}

inline std::vector<PeriodicOrbit> find_periodic_orbits(const MapSystem& sys, int max_period,
                                                       const std::vector<Box>& region = {},
                                                       const OrbitSearchOptions& opt = {}) {
    return search_periodic_orbits(sys, max_period, region, opt).orbits;
}

// ---------------------------------------------------------------------------
// Hyperbolicity and resonance

enum class Verdict { hyperbolic, non_resonant, resonant };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::hyperbolic: return "hyperbolic";
        case Verdict::non_resonant: return "non-resonant";
        case Verdict::resonant: return "resonant";
    }
    return "?";
}

struct ResonanceReport {
    std::vector<Complex> unit_modulus;  // with multiplicity
    std::vector<bool> simple;           // per entry of unit_modulus
    std::vector<Complex> representatives;  // one per conjugate pair, searched for relations
    std::optional<std::vector<int>> relation;  // exponents on `representatives`
    Verdict verdict = Verdict::hyperbolic;
};

/// Hyperbolic if no multiplier is within tol.unit of the unit circle.
/// Otherwise resonant when a unit multiplier is not simple or when
/// |prod lambda_i^k_i - 1| < tol.relation for some 0 <= k_i <= K_max, not all 0.
inline ResonanceReport classify(const std::vector<Complex>& multipliers, const Tolerances& tol = {}) {
    ResonanceReport rep;
    for (const auto& l : multipliers)
        if (std::abs(std::abs(l) - 1.0) <= tol.unit) rep.unit_modulus.push_back(l);
    if (rep.unit_modulus.empty()) return rep;

    bool any_multiple = false;
    for (std::size_t i = 0; i < rep.unit_modulus.size(); ++i) {
        int copies = 0;
        for (const auto& l : multipliers)
            if (std::abs(l - rep.unit_modulus[i]) <= tol.unit) ++copies;
        rep.simple.push_back(copies == 1);
        any_multiple = any_multiple || copies > 1;
    }
    for (const auto& l : rep.unit_modulus) {
        if (l.imag() < -tol.unit) continue;  // conjugate of a listed one
        const bool seen = std::any_of(rep.representatives.begin(), rep.representatives.end(),
                                      [&](const Complex& r) { return std::abs(r - l) <= tol.unit; });
        if (!seen) rep.representatives.push_back(l);
    }

    // Exponent tuples in order of total degree, then lexicographically.
    const int s = static_cast<int>(rep.representatives.size());
    const int K = tol.resonance_order;
    for (int degree = 1; degree <= K * s && !rep.relation; ++degree) {
        std::vector<int> k(s, 0);
        for (;;) {
            int total = 0;
            for (int v : k) total += v;
            if (total == degree) {
                Complex prod = 1.0;
                for (int i = 0; i < s; ++i) prod *= std::pow(rep.representatives[i], k[i]);
                if (std::abs(prod - 1.0) < tol.relation) {
                    rep.relation = k;
                    break;
                }
            }
            int axis = s - 1;
            while (axis >= 0 && ++k[axis] > K) k[axis--] = 0;
            if (axis < 0) break;
        }
    }
    rep.verdict = any_multiple || rep.relation ? Verdict::resonant : Verdict::non_resonant;
    return rep;
}

inline ResonanceReport classify(const PeriodicOrbit& orbit, const Tolerances& tol = {}) {
    return classify(orbit.multipliers, tol);
}

// ---------------------------------------------------------------------------
// Invariant manifolds of planar saddles

enum class Stability { stable, unstable };

inline const char* to_string(Stability s) { return s == Stability::stable ? "stable" : "unstable"; }

struct ManifoldCurve {
    Vec anchor;
    Stability stability = Stability::unstable;
    int branch = 1;          // +1 or -1 along the eigenvector
    Vec direction;           // unit eigenvector at the anchor
    std::vector<Vec> points;  // wrapped into the domain
    double arclength = 0.0;
    bool complete = false;  // the branch left a non-periodic domain, so nothing lies beyond it
};

struct ManifoldOptions {
    double arclength_budget = 2.0;  // per branch
    std::size_t max_points = 2'000'000;
    Tolerances tol;
};

namespace detail {

struct SaddleData {
    Vec anchor;
    Vec direction;
    int power;  // signed: g = f^power
};

/// Eigen-direction and generating iterate for one branch family at points[index].
inline SaddleData saddle_direction(const MapSystem& sys, const PeriodicOrbit& orbit, std::size_t index,
                                   Stability stability, const Tolerances& tol) {
    if (sys.dimension() != 2) throw usage_error("manifolds are supported in dimension 2 only");
    if (index >= orbit.points.size()) throw usage_error("orbit point index out of range");
    if (stability == Stability::stable && !sys.has_inverse())
        throw usage_error("stable manifold growth needs an explicit inverse");
    const int r = orbit.period;
    const Vec& x = orbit.points[index];
    const Mat M = orbit_jacobian(sys, orbit_points(sys, x, r), r);
    Eigen::EigenSolver<Mat> solver(M);
    const auto ev = solver.eigenvalues();
    int unstable = -1, stable = -1;
    for (int i = 0; i < 2; ++i) {
        if (std::abs(ev[i].imag()) > tol.unit) throw computation_error("orbit is not a saddle (complex multipliers)");
        const double m = std::abs(ev[i].real());
        if (m > 1.0 + tol.unit) unstable = i;
        if (m < 1.0 - tol.unit) stable = i;
    }
    if (unstable < 0 || stable < 0) throw computation_error("orbit is not a saddle");
    const int pick = stability == Stability::unstable ? unstable : stable;
    Vec v = solver.eigenvectors().col(pick).real();
    v.normalize();
    if (v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0)) v = -v;  // canonical orientation
    int power = ev[pick].real() < 0.0 ? 2 * r : r;          // orientation-reversing: use the square
    if (stability == Stability::stable) power = -power;
    return {x, v, power};
}

inline Vec apply_power(const MapSystem& sys, Vec x, int power) {
    const bool forward = power > 0;
    for (int k = 0; k < std::abs(power); ++k) x = checked_step(sys, x, forward);
    return x;
}

inline double turning_angle_deg(const Vec& u, const Vec& v) {
    const double nu = u.norm(), nv = v.norm();
    if (nu == 0.0 || nv == 0.0) return 0.0;
    const double c = std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
    return std::acos(c) * 180.0 / std::numbers::pi;
}

}  // namespace detail

/// Grows one branch of W^u or W^s at orbit.points[index]. The curve is
/// parameterised by s = j + t as g^j(sigma(t)), where sigma runs linearly
/// from the local point at distance delta_loc to its image; points are
/// inserted adaptively until gaps are below h_man and turning angles below
/// tau_ang.
inline ManifoldCurve grow_manifold(const MapSystem& sys, const PeriodicOrbit& orbit, Stability stability, int branch,
                                   const ManifoldOptions& opt = {}, std::size_t index = 0) {
    if (branch != 1 && branch != -1) throw usage_error("branch must be +1 or -1");
    const auto saddle = detail::saddle_direction(sys, orbit, index, stability, opt.tol);
    const Domain& dom = sys.domain();
    const double h = opt.tol.manifold_gap;
    const double max_angle = opt.tol.manifold_angle_deg;

    ManifoldCurve curve;
    curve.anchor = saddle.anchor;
    curve.stability = stability;
    curve.branch = branch;
    curve.direction = saddle.direction;

    const Vec s0 = saddle.anchor + branch * opt.tol.manifold_offset * saddle.direction;
    const Vec s0_image = detail::apply_power(sys, dom.wrap(s0), saddle.power);
    const Vec span = dom.displacement(dom.wrap(s0), s0_image);
    auto point_at = [&](double s) {
        const double j = std::floor(s);
        const Vec base = s0 + (s - j) * span;
        return detail::apply_power(sys, dom.wrap(base), saddle.power * static_cast<int>(j));
    };

    curve.points.push_back(dom.wrap(s0));
    double s = 0.0, ds = 1.0 / 16.0;
    const double ds_min = 1e-12;
    while (curve.arclength < opt.arclength_budget && curve.points.size() < opt.max_points) {
        Vec candidate;
        try {
            candidate = point_at(s + ds);
        } catch (const Error&) {
            curve.complete = true;  // left a non-periodic domain
            break;
        }
        const Vec step = dom.displacement(curve.points.back(), candidate);
        const double gap = step.norm();
        double angle = 0.0;
        if (curve.points.size() >= 2)
            angle = detail::turning_angle_deg(
                dom.displacement(curve.points[curve.points.size() - 2], curve.points.back()), step);
        if ((gap > h || angle > max_angle) && ds > ds_min) {
            ds /= 2.0;
            continue;
        }
        curve.points.push_back(candidate);
        curve.arclength += gap;
        s += ds;
        if (gap < h / 4.0 && angle < max_angle / 2.0) ds = std::min(ds * 2.0, 0.25);
    }
    return curve;
}

/// Both branches of W^u or W^s at orbit.points[index].
inline std::vector<ManifoldCurve> grow_manifold_branches(const MapSystem& sys, const PeriodicOrbit& orbit,
                                                         Stability stability, const ManifoldOptions& opt = {},
                                                         std::size_t index = 0) {
    return {grow_manifold(sys, orbit, stability, 1, opt, index), grow_manifold(sys, orbit, stability, -1, opt, index)};
}

// ---------------------------------------------------------------------------
// Polyline crossings

struct Crossing {
    Vec point;
    double angle_deg = 0.0;  // in [0, 90]
    std::size_t segment_a = 0;
    std::size_t segment_b = 0;
};

struct CrossingScan {
    std::vector<Crossing> transverse;
    std::size_t tangential = 0;  // crossings at angle <= tau_transv, never counted
};

/// Segment-pair crossings between two planar polylines, located through a
/// spatial hash whose cells are at least as large as the longest segment.
inline CrossingScan find_crossings(const Domain& dom, const std::vector<Vec>& a, const std::vector<Vec>& b,
                                   double transversality_deg) {
    CrossingScan out;
    if (a.size() < 2 || b.size() < 2) return out;
    if (dom.dimension() != 2) throw usage_error("crossing detection is planar");

    double longest = 1e-12;
    for (const auto* poly : {&a, &b})
        for (std::size_t i = 0; i + 1 < poly->size(); ++i)
            longest = std::max(longest, dom.distance((*poly)[i], (*poly)[i + 1]));
    std::array<int, 2> n{};
    std::array<double, 2> cell{};
    for (int i = 0; i < 2; ++i) {
        n[i] = std::clamp(static_cast<int>(std::floor(dom.width(i) / longest)), 1, 1 << 14);
        cell[i] = dom.width(i) / n[i];
    }
    auto cells_of = [&](const Vec& p, const Vec& q, auto&& visit) {
        std::array<int, 2> first{}, last{};
        for (int i = 0; i < 2; ++i) {
            const double lo = std::min(p[i], q[i]) - dom.lo[i], hi = std::max(p[i], q[i]) - dom.lo[i];
            first[i] = static_cast<int>(std::floor(lo / cell[i]));
            last[i] = static_cast<int>(std::floor(hi / cell[i]));
        }
        for (int x = first[0]; x <= last[0]; ++x)
            for (int y = first[1]; y <= last[1]; ++y) {
                int cx = x, cy = y;
                if (dom.periodic[0]) cx = ((cx % n[0]) + n[0]) % n[0];
                else cx = std::clamp(cx, 0, n[0] - 1);
                if (dom.periodic[1]) cy = ((cy % n[1]) + n[1]) % n[1];
                else cy = std::clamp(cy, 0, n[1] - 1);
                visit(static_cast<std::int64_t>(cx) * n[1] + cy);
            }
    };

    std::unordered_map<std::int64_t, std::vector<std::size_t>> grid;
    for (std::size_t j = 0; j + 1 < b.size(); ++j) {
        const Vec end = b[j] + dom.displacement(b[j], b[j + 1]);
        cells_of(b[j], end, [&](std::int64_t key) { grid[key].push_back(j); });
    }

    std::vector<std::size_t> stamp(b.size(), static_cast<std::size_t>(-1));
    const double sin_min = std::sin(transversality_deg * std::numbers::pi / 180.0);
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        const Vec& a0 = a[i];
        const Vec u = dom.displacement(a0, a[i + 1]);
        cells_of(a0, Vec(a0 + u), [&](std::int64_t key) {
            auto it = grid.find(key);
            if (it == grid.end()) return;
            for (std::size_t j : it->second) {
                if (stamp[j] == i) continue;
                stamp[j] = i;
                const Vec b0 = a0 + dom.displacement(a0, b[j]);
                const Vec v = dom.displacement(b[j], b[j + 1]);
                const double cross = u[0] * v[1] - u[1] * v[0];
                const double norms = u.norm() * v.norm();
                if (norms == 0.0 || std::abs(cross) <= 1e-14 * norms) continue;  // parallel
                const Vec w = b0 - a0;
                const double s = (w[0] * v[1] - w[1] * v[0]) / cross;
                const double t = (w[0] * u[1] - w[1] * u[0]) / cross;
                if (s < 0.0 || s >= 1.0 || t < 0.0 || t >= 1.0) continue;
                const double sine = std::abs(cross) / norms;
                if (sine <= sin_min) {
                    ++out.tangential;
                    continue;
                }
                out.transverse.push_back({dom.wrap(Vec(a0 + s * u)), std::asin(std::min(1.0, sine)) * 180.0 / std::numbers::pi,
                                          i, j});
            }
        });
    }
    std::sort(out.transverse.begin(), out.transverse.end(), [](const Crossing& x, const Crossing& y) {
        return std::tie(x.segment_a, x.segment_b) < std::tie(y.segment_a, y.segment_b);
    });
    return out;
}

/// All transverse crossings between two families of branches, dropping those
/// within 10 delta_loc of either anchor.
inline CrossingScan crossings_between(const Domain& dom, const std::vector<ManifoldCurve>& unstable,
                                      const std::vector<ManifoldCurve>& stable, const Tolerances& tol) {
    CrossingScan out;
    for (const auto& cu : unstable)
        for (const auto& cs : stable) {
            auto scan = find_crossings(dom, cu.points, cs.points, tol.transversality_deg);
            out.tangential += scan.tangential;
            for (auto& c : scan.transverse) {
                const double near = 10.0 * tol.manifold_offset;
                if (dom.distance(c.point, cu.anchor) < near || dom.distance(c.point, cs.anchor) < near) continue;
                out.transverse.push_back(std::move(c));
            }
        }
    return out;
}

// ---------------------------------------------------------------------------
// Homoclinic structure

struct IntersectionTimeSet {
    int n_max = 0;
    int period_p = 0;
    int period_q = 0;
    std::vector<int> times;               // sorted
    std::map<int, std::size_t> crossing_counts;  // per tested n
    std::int64_t ell = 0;                 // gcd(times); 0 when empty
    std::int64_t ell_with_periods = 0;    // gcd(ell, r_p, r_q)
    bool inconclusive = false;            // empty within the budget
    int closure_violations = 0;           // n, m, n+m in range, n, m in times, n+m not
    int translation_violations = 0;       // n in times, n +- r_p in range and not in times
    int symmetry_violations = 0;          // n in times, -n not
};

namespace detail {

inline void check_time_set(IntersectionTimeSet& set) {
    const std::set<int> t(set.times.begin(), set.times.end());
    auto in_range = [&](int n) { return n >= -set.n_max && n <= set.n_max; };
    for (int n : t) {
        if (!t.count(-n)) ++set.symmetry_violations;
        for (int m : t)
            if (in_range(n + m) && !t.count(n + m)) ++set.closure_violations;
        for (int shift : {set.period_p, -set.period_p})
            if (in_range(n + shift) && !t.count(n + shift)) ++set.translation_violations;
    }
}

}  // namespace detail

/// For each n in [-n_max, n_max], whether W^u(f^n(q_0)) meets W^s(p_0)
/// transversally within the arclength budget.
inline IntersectionTimeSet intersection_times(const MapSystem& sys, const PeriodicOrbit& p, const PeriodicOrbit& q,
                                              int n_max, const ManifoldOptions& opt = {}) {
    if (n_max < 0) throw usage_error("n_max must be non-negative");
    IntersectionTimeSet out;
    out.n_max = n_max;
    out.period_p = p.period;
    out.period_q = q.period;
    const auto stable = grow_manifold_branches(sys, p, Stability::stable, opt, 0);
    std::map<int, std::vector<ManifoldCurve>> unstable;  // by index in q
    for (int n = -n_max; n <= n_max; ++n) {
        const int idx = ((n % q.period) + q.period) % q.period;
        if (!unstable.count(idx))
            unstable[idx] = grow_manifold_branches(sys, q, Stability::unstable, opt, static_cast<std::size_t>(idx));
        const auto scan = crossings_between(sys.domain(), unstable[idx], stable, opt.tol);
        out.crossing_counts[n] = scan.transverse.size();
        if (!scan.transverse.empty()) out.times.push_back(n);
    }
    for (int n : out.times) out.ell = gcd_accumulate(out.ell, n);
    out.inconclusive = out.times.empty();
    out.ell_with_periods = gcd_accumulate(gcd_accumulate(out.ell, p.period), q.period);
    detail::check_time_set(out);
    return out;
}

/// Finite sample of h(p): the anchor p_0 and every transverse crossing of
/// W^u(p_0) with W^s(q_0) within the budget.
inline std::vector<Vec> pointwise_class(const MapSystem& sys, const PeriodicOrbit& p, const PeriodicOrbit& q,
                                        const ManifoldOptions& opt = {}) {
    const auto unstable = grow_manifold_branches(sys, p, Stability::unstable, opt, 0);
    const auto stable = grow_manifold_branches(sys, q, Stability::stable, opt, 0);
    const auto scan = crossings_between(sys.domain(), unstable, stable, opt.tol);
    if (scan.transverse.empty())
        throw computation_error("no transverse intersection of W^u(p) and W^s(q) found within the budget");
    std::vector<Vec> out{p.points.front()};
    for (const auto& c : scan.transverse) {
        const bool seen = std::any_of(out.begin(), out.end(),
                                      [&](const Vec& x) { return sys.domain().distance(x, c.point) < 1e-12; });
        if (!seen) out.push_back(c.point);
    }
    return out;
}

enum class Tristate { yes, no, inconclusive };

inline const char* to_string(Tristate t) {
    switch (t) {
        case Tristate::yes: return "true";
        case Tristate::no: return "false";
        case Tristate::inconclusive: return "inconclusive";
    }
    return "?";
}

struct CycleReport {
    Tristate verdict = Tristate::inconclusive;
    std::size_t forward_crossings = 0;   // W^u(O) with W^s(O')
    std::size_t backward_crossings = 0;  // W^u(O') with W^s(O)
    bool period_drop_candidate = false;  // cycle and period(O') not a multiple of ell(O)
};

/// Cycle between two saddle orbits. "no" only when a direction has no
/// crossing and every branch involved left the domain; otherwise a missing
/// direction is inconclusive.
inline CycleReport detect_cycle(const MapSystem& sys, const PeriodicOrbit& o, const PeriodicOrbit& o2,
                                const ManifoldOptions& opt = {}, std::optional<int> ell_o = std::nullopt) {
    auto family = [&](const PeriodicOrbit& orbit, Stability st) {
        std::vector<ManifoldCurve> out;
        for (std::size_t i = 0; i < orbit.points.size(); ++i)
            for (auto& c : grow_manifold_branches(sys, orbit, st, opt, i)) out.push_back(std::move(c));
        return out;
    };
    const auto u1 = family(o, Stability::unstable), s1 = family(o, Stability::stable);
    const auto u2 = family(o2, Stability::unstable), s2 = family(o2, Stability::stable);
    CycleReport rep;
    rep.forward_crossings = crossings_between(sys.domain(), u1, s2, opt.tol).transverse.size();
    rep.backward_crossings = crossings_between(sys.domain(), u2, s1, opt.tol).transverse.size();
    auto all_complete = [](const std::vector<ManifoldCurve>& a, const std::vector<ManifoldCurve>& b) {
        auto done = [](const ManifoldCurve& c) { return c.complete; };
        return std::all_of(a.begin(), a.end(), done) && std::all_of(b.begin(), b.end(), done);
    };
    if (rep.forward_crossings > 0 && rep.backward_crossings > 0) {
        rep.verdict = Tristate::yes;
        const int ell = ell_o.value_or(o.period);
        rep.period_drop_candidate = ell > 0 && o2.period % ell != 0;
    } else if ((rep.forward_crossings == 0 && all_complete(u1, s2)) ||
               (rep.backward_crossings == 0 && all_complete(u2, s1))) {
        rep.verdict = Tristate::no;
    } else {
        rep.verdict = Tristate::inconclusive;
    }
    return rep;
}

/// Periodic orbits inside the region whose period is not a multiple of ell.
inline std::vector<PeriodicOrbit> k_set(const MapSystem& sys, int ell, const std::vector<Box>& region, int max_period,
                                        const OrbitSearchOptions& opt = {}) {
    if (ell < 1) throw usage_error("ell must be >= 1");
    std::vector<PeriodicOrbit> out;
    for (auto& orbit : find_periodic_orbits(sys, max_period, region, opt)) {
        if (orbit.period % ell == 0) continue;
        const bool contained = std::all_of(orbit.points.begin(), orbit.points.end(),
                                           [&](const Vec& x) { return detail::inside(region, x); });
        if (contained) out.push_back(std::move(orbit));
    }
    return out;
}

}  // namespace mixdec

#pragma once

// Tiled perturbation domains, connecting sequences, the primary/secondary
// shortcut process on periodic pseudo-orbits, and the constructive closing
// of a non-periodic point by bump-supported local perturbations.
//
// Charts are axis-aligned boxes in ambient coordinates and tiles are cubes
// (centre, half-edge). Images f^k(C) are modelled by the linearisation of f^k
// along the orbit of the cube's centre, which is exact for maps that are
// affine on the charts.

#include "mixdec/core.hpp"
#include "mixdec/periodic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace mixdec {

struct Chart {
    Vec lo;
    Vec hi;

    Vec center() const { return (lo + hi) / 2.0; }
    Vec half_widths() const { return (hi - lo) / 2.0; }
};

struct Tile {
    int chart = 0;
    Vec center;
    double half_edge = 0.0;

    double diameter() const { return 2.0 * half_edge * std::sqrt(static_cast<double>(center.size())); }
};

struct PerturbationDomain {
    std::vector<Chart> charts;
    std::vector<Tile> tiles;
    std::vector<std::vector<int>> adjacency;  // per tile, other tiles it touches
    int N = 1;
    double theta = 0.5;
    double delta = 1.0;
    double eta = 0.0;
    bool eta_override = false;

    int dimension() const { return tiles.empty() ? static_cast<int>(charts.at(0).lo.size()) : static_cast<int>(tiles[0].center.size()); }
};

/// eta = (theta / 4)^(4^d).
inline double standard_eta(double theta, int d) { return std::pow(theta / 4.0, std::pow(4.0, d)); }

inline int adjacency_bound(int d) { return static_cast<int>(std::lround(std::pow(4.0, d))); }

/// Closed-cube adjacency (tiles that intersect), on the domain's geometry.
inline std::vector<std::vector<int>> geometric_adjacency(const Domain& dom, const std::vector<Tile>& tiles) {
    std::vector<std::vector<int>> adj(tiles.size());
    for (std::size_t a = 0; a < tiles.size(); ++a)
        for (std::size_t b = a + 1; b < tiles.size(); ++b) {
            const Vec gap = dom.displacement(tiles[a].center, tiles[b].center).cwiseAbs();
            const double reach = tiles[a].half_edge + tiles[b].half_edge;
            const double slack = 1e-12 * reach;
            if ((gap.array() <= reach + slack).all()) {
                adj[a].push_back(static_cast<int>(b));
                adj[b].push_back(static_cast<int>(a));
            }
        }
    return adj;
}

/// Fills eta from theta when not overridden and adjacency from geometry when
/// not supplied.
inline void finalize_domain(PerturbationDomain& dom, const Domain& space) {
    if (!dom.eta_override) dom.eta = standard_eta(dom.theta, space.dimension());
    if (dom.adjacency.empty()) dom.adjacency = geometric_adjacency(space, dom.tiles);
}

// ---------------------------------------------------------------------------
// Images of cubes and boxes under f^k

namespace detail {

/// Centre and linear part of f^k on a neighbourhood of `base`.
struct AffineImage {
    Vec center;
    Mat linear;
    Mat inverse;
};

inline std::vector<AffineImage> affine_images(const MapSystem& sys, const Vec& base, int count) {
    std::vector<AffineImage> out;
    Vec c = sys.domain().wrap(base);
    Mat L = Mat::Identity(sys.dimension(), sys.dimension());
    for (int k = 0; k < count; ++k) {
        out.push_back({c, L, L.inverse()});
        L = jacobian(sys, c) * L;
        c = evaluate(sys, c);
    }
    return out;
}

/// Coordinates of x in the frame of f^k(cube): L^-1 (x - centre).
inline Vec frame_coordinates(const Domain& dom, const AffineImage& img, const Vec& x) {
    return img.inverse * dom.displacement(img.center, x);
}

/// Distance from f^k(inner * C) to the complement of f^k(outer * C) for a
/// cube of half-edge h: (outer - inner) h / max_i |row_i(L^-1)|.
inline double facet_gap(const AffineImage& img, double h, double inner, double outer) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < img.inverse.rows(); ++i) worst = std::max(worst, img.inverse.row(i).norm());
    return (outer - inner) * h / worst;
}

/// Whether the closed ball B(x, r) lies in f^k(box) with the given half-widths.
inline bool ball_in_image(const Domain& dom, const AffineImage& img, const Vec& half_widths, const Vec& x, double r) {
    const Vec u = frame_coordinates(dom, img, x);
    for (Eigen::Index i = 0; i < u.size(); ++i)
        if (std::abs(u[i]) + r * img.inverse.row(i).norm() > half_widths[i]) return false;
    return true;
}

inline double image_diameter(const AffineImage& img, const Vec& half_widths) {
    const int d = static_cast<int>(half_widths.size());
    double best = 0.0;
    for (int mask = 0; mask < (1 << d); ++mask) {
        Vec s(d);
        for (int i = 0; i < d; ++i) s[i] = (mask >> i & 1) ? half_widths[i] : -half_widths[i];
        best = std::max(best, 2.0 * (img.linear * s).norm());
    }
    return best;
}

/// Separating-axis test over the facet normals of two parallelepipeds. Exact
/// for d <= 2; in higher dimension it may report overlap conservatively.
inline bool images_overlap(const Domain& dom, const AffineImage& a, const Vec& wa, const AffineImage& b,
                           const Vec& wb) {
    const Vec offset = dom.displacement(a.center, b.center);
    auto radius = [](const Vec& n, const Mat& L, const Vec& w) {
        double r = 0.0;
        for (Eigen::Index j = 0; j < L.cols(); ++j) r += std::abs(n.dot(L.col(j))) * w[j];
        return r;
    };
    for (const Mat* inv : {&a.inverse, &b.inverse})
        for (Eigen::Index i = 0; i < inv->rows(); ++i) {
            const Vec n = inv->row(i).transpose();
            if (std::abs(n.dot(offset)) > radius(n, a.linear, wa) + radius(n, b.linear, wb)) return false;
        }
    return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Domain validation

struct Violation {
    std::string kind;
    std::string detail;
};

struct DomainReport {
    bool valid = true;
    std::vector<Violation> violations;
    double eta = 0.0;
    double standard_eta = 0.0;
    bool eta_override = false;
};

/// Checks the tiled-domain axioms: chart images f^k(V_s), 0 <= k <= N-1,
/// pairwise disjoint with diameter < delta; tiles inside their charts with
/// disjoint interiors; at most 4^d neighbours with diameter ratio in [1/2, 2];
/// eta equal to (theta/4)^(4^d) unless overridden.
inline DomainReport validate_domain(const PerturbationDomain& dom, const MapSystem& sys) {
    DomainReport rep;
    const Domain& space = sys.domain();
    const int d = sys.dimension();
    rep.eta = dom.eta;
    rep.standard_eta = standard_eta(dom.theta, d);
    rep.eta_override = dom.eta_override;
    auto fail = [&](std::string kind, std::string detail) {
        rep.valid = false;
        rep.violations.push_back({std::move(kind), std::move(detail)});
    };
    auto str = [](auto... parts) {
        std::ostringstream s;
        s.precision(12);
        (s << ... << parts);
        return s.str();
    };

    if (!(dom.theta > 0.0 && dom.theta < 1.0)) fail("constants", str("theta=", dom.theta, " not in (0,1)"));
    if (!(dom.delta > 0.0)) fail("constants", str("delta=", dom.delta, " not positive"));
    if (dom.N < 1) fail("constants", str("N=", dom.N, " < 1"));
    if (!dom.eta_override && dom.eta != rep.standard_eta)
        fail("eta", str("eta=", dom.eta, " differs from (theta/4)^(4^d)=", rep.standard_eta));
    if (dom.charts.empty()) fail("charts", "no charts");
    if (dom.adjacency.size() != dom.tiles.size()) fail("adjacency", "adjacency list count differs from tile count");
    if (!rep.violations.empty() && dom.N < 1) return rep;

    // Chart images.
    std::vector<std::vector<detail::AffineImage>> images;
    for (std::size_t s = 0; s < dom.charts.size(); ++s) {
        const auto& ch = dom.charts[s];
        if (ch.lo.size() != d || ch.hi.size() != d || !((ch.hi - ch.lo).array() > 0.0).all()) {
            fail("charts", str("chart ", s, " has invalid bounds"));
            images.emplace_back();
            continue;
        }
        try {
            images.push_back(detail::affine_images(sys, ch.center(), dom.N));
        } catch (const Error& e) {
            fail("charts", str("chart ", s, ": ", e.what()));
            images.emplace_back();
        }
    }
    for (std::size_t s = 0; s < images.size(); ++s)
        for (int k = 0; k < static_cast<int>(images[s].size()); ++k) {
            const double diam = detail::image_diameter(images[s][k], dom.charts[s].half_widths());
            if (!(diam < dom.delta)) fail("diameter", str("f^", k, "(V_", s, ") has diameter ", diam, " >= delta=", dom.delta));
            for (std::size_t t = s; t < images.size(); ++t)
                for (int m = 0; m < static_cast<int>(images[t].size()); ++m) {
                    if (t == s && m <= k) continue;
                    if (detail::images_overlap(space, images[s][k], dom.charts[s].half_widths(), images[t][m],
                                               dom.charts[t].half_widths()))
                        fail("disjointness", str("f^", k, "(V_", s, ") meets f^", m, "(V_", t, ")"));
                }
        }

    // Tiles.
    const int bound = adjacency_bound(d);
    for (std::size_t a = 0; a < dom.tiles.size(); ++a) {
        const Tile& T = dom.tiles[a];
        if (T.chart < 0 || T.chart >= static_cast<int>(dom.charts.size())) {
            fail("tiles", str("tile ", a, " refers to missing chart ", T.chart));
            continue;
        }
        if (!(T.half_edge > 0.0)) fail("tiles", str("tile ", a, " has non-positive half-edge"));
        const auto& ch = dom.charts[T.chart];
        const double slack = 1e-12 * (1.0 + T.half_edge);
        for (int i = 0; i < d; ++i)
            if (T.center[i] - T.half_edge < ch.lo[i] - slack || T.center[i] + T.half_edge > ch.hi[i] + slack) {
                fail("tiles", str("tile ", a, " leaves chart ", T.chart));
                break;
            }
        for (std::size_t b = a + 1; b < dom.tiles.size(); ++b) {
            if (dom.tiles[b].chart != T.chart) continue;
            const Vec gap = space.displacement(T.center, dom.tiles[b].center).cwiseAbs();
            const double reach = T.half_edge + dom.tiles[b].half_edge;
            if ((gap.array() < reach * (1.0 - 1e-12)).all())
                fail("tiles", str("tiles ", a, " and ", b, " have overlapping interiors"));
        }
    }
    for (std::size_t a = 0; a < dom.adjacency.size() && a < dom.tiles.size(); ++a) {
        const auto& nb = dom.adjacency[a];
        if (static_cast<int>(nb.size()) > bound)
            fail("adjacency", str("tile ", a, " is adjacent to ", nb.size(), " tiles (bound 4^d = ", bound, ")"));
        for (int b : nb) {
            if (b < 0 || b >= static_cast<int>(dom.tiles.size()) || b == static_cast<int>(a)) {
                fail("adjacency", str("tile ", a, " lists invalid neighbour ", b));
                continue;
            }
            const double ratio = dom.tiles[b].diameter() / dom.tiles[a].diameter();
            if (ratio < 0.5 || ratio > 2.0)
                fail("ratio", str("adjacent tiles ", a, " and ", b, " have diameter ratio ", ratio));
            const auto& back = dom.adjacency[static_cast<std::size_t>(b)];
            if (std::find(back.begin(), back.end(), static_cast<int>(a)) == back.end())
                fail("adjacency", str("adjacency ", a, " -> ", b, " is not symmetric"));
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Pseudo-orbits

struct PseudoOrbit {
    std::vector<Vec> points;  // y_0 .. y_{n-1}; periodic, y_n = y_0
    std::vector<bool> jumps;  // jumps[i]: the step y_i -> y_{i+1 mod n} is a jump

    std::size_t length() const { return points.size(); }
};

/// Tile whose closed cube contains x (lowest index first), if any.
inline std::optional<int> tile_of(const PerturbationDomain& dom, const Domain& space, const Vec& x) {
    for (std::size_t t = 0; t < dom.tiles.size(); ++t) {
        const Vec u = space.displacement(dom.tiles[t].center, x).cwiseAbs();
        if ((u.array() <= dom.tiles[t].half_edge).all()) return static_cast<int>(t);
    }
    return std::nullopt;
}

inline bool on_tile_boundary(const PerturbationDomain& dom, const Domain& space, const Vec& x, int tile) {
    const Tile& T = dom.tiles[tile];
    const Vec u = space.displacement(T.center, x).cwiseAbs();
    return (u.array() > T.half_edge * (1.0 - 2e-9)).any();
}

/// Moves points lying on (or within 1e-9 edge of) a tile boundary inward by
/// 1e-9 edge, pulling the preceding true-orbit chain back with f^-1 so that
/// true steps stay exact.
inline PseudoOrbit jitter_off_boundaries(const PseudoOrbit& po, const PerturbationDomain& dom, const MapSystem& sys) {
    PseudoOrbit out = po;
    const Domain& space = sys.domain();
    const std::size_t n = out.length();
    for (std::size_t i = 0; i < n; ++i) {
        const auto t = tile_of(dom, space, out.points[i]);
        if (!t || !on_tile_boundary(dom, space, out.points[i], *t)) continue;
        const Tile& T = dom.tiles[*t];
        Vec u = space.displacement(T.center, out.points[i]);
        const double limit = T.half_edge * (1.0 - 4e-9);
        for (Eigen::Index a = 0; a < u.size(); ++a) u[a] = std::clamp(u[a], -limit, limit);
        out.points[i] = space.wrap(T.center + u);
        std::size_t m = i;
        for (std::size_t steps = 0; steps + 1 < n; ++steps) {
            const std::size_t prev = (m + n - 1) % n;
            if (out.jumps[prev] || prev == i) break;
            out.points[prev] = evaluate_inverse(sys, out.points[m]);
            m = prev;
        }
        const std::size_t prev = (m + n - 1) % n;
        if (!out.jumps[prev]) out.jumps[prev] = true;  // the chain now starts with a jump
    }
    return out;
}

/// Checks true steps to tau_orb, jump steps inside one tile, and points off
/// tile boundaries.
inline std::vector<Violation> validate_pseudo_orbit(const PseudoOrbit& po, const PerturbationDomain& dom,
                                                    const MapSystem& sys, const Tolerances& tol = {}) {
    std::vector<Violation> out;
    const Domain& space = sys.domain();
    const std::size_t n = po.length();
    if (n == 0) return {{"pseudo-orbit", "empty"}};
    if (po.jumps.size() != n) return {{"pseudo-orbit", "jump flag count differs from point count"}};
    for (std::size_t i = 0; i < n; ++i) {
        const Vec& y = po.points[i];
        const Vec& next = po.points[(i + 1) % n];
        const auto t = tile_of(dom, space, y);
        if (t && on_tile_boundary(dom, space, y, *t))
            out.push_back({"boundary", "y_" + std::to_string(i) + " lies on a tile boundary"});
        if (!po.jumps[i]) {
            const double err = space.distance(evaluate(sys, y), next);
            if (err >= tol.orbit)
                out.push_back({"true-step", "f(y_" + std::to_string(i) + ") misses y_" + std::to_string((i + 1) % n) +
                                                " by " + std::to_string(err)});
            continue;
        }
        const Vec pre = evaluate_inverse(sys, next);
        const auto tp = tile_of(dom, space, pre);
        if (!t || !tp || *t != *tp ||
            (space.displacement(dom.tiles[*t].center, pre).cwiseAbs().array() > dom.tiles[*t].half_edge).any())
            out.push_back({"jump", "y_" + std::to_string(i) + " and f^-1(y_" + std::to_string((i + 1) % n) +
                                       ") are not in a common tile"});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Connecting sequences

struct ConnectingSequence {
    std::size_t visit = 0;          // index of y_i in its pseudo-orbit
    int tile = 0;                   // tile of y_i
    bool jump = false;              // false: a_k = f^k(y_i), all radii 0
    std::vector<Vec> points;        // a_0 .. a_N
    std::vector<double> radii;      // r_k = d(a_k, f^-1(a_{k+1})) / theta, k < N
    std::vector<int> ball_tiles;    // tile whose image frames ball k
    std::vector<int> merges;        // secondary merges undergone by ball k
};

namespace detail {

/// Per-(tile, k) affine images, computed on demand.
class ImageCache {
public:
    ImageCache(const PerturbationDomain& dom, const MapSystem& sys) : dom_(dom), sys_(sys) {}

    const AffineImage& tile(int t, int k) {
        auto it = tiles_.find(t);
        if (it == tiles_.end())
            it = tiles_.emplace(t, affine_images(sys_, dom_.tiles[static_cast<std::size_t>(t)].center, dom_.N + 1)).first;
        return it->second.at(static_cast<std::size_t>(k));
    }
    const AffineImage& chart(int s, int k) {
        auto it = charts_.find(s);
        if (it == charts_.end())
            it = charts_.emplace(s, affine_images(sys_, dom_.charts[static_cast<std::size_t>(s)].center(), dom_.N + 1)).first;
        return it->second.at(static_cast<std::size_t>(k));
    }
    /// dist(f^k(5/4 C_t), complement of f^k(3/2 C_t)).
    double gap(int t, int k) { return facet_gap(tile(t, k), dom_.tiles[static_cast<std::size_t>(t)].half_edge, 1.25, 1.5); }

private:
    const PerturbationDomain& dom_;
    const MapSystem& sys_;
    std::map<int, std::vector<AffineImage>> tiles_;
    std::map<int, std::vector<AffineImage>> charts_;
};

inline double defect(const MapSystem& sys, const Vec& a, const Vec& next) {
    return sys.domain().distance(a, evaluate_inverse(sys, next));
}

}  // namespace detail

/// Geometric interpolation c_k = u + (k/N)(v - u) between u = y_i and
/// v = f^-1(y_{i+1}), pushed forward: a_k = f^k(c_k). Requires
/// d(a_k, f^-1(a_{k+1})) <= eta * dist(f^k(5/4 C), complement f^k(3/2 C)).
inline ConnectingSequence connect(const PerturbationDomain& dom, const MapSystem& sys, const Vec& u, const Vec& v,
                                  std::optional<int> tile_hint = std::nullopt) {
    if (!sys.has_inverse()) throw usage_error("connecting sequences need an explicit inverse");
    const Domain& space = sys.domain();
    const auto t = tile_hint ? tile_hint : tile_of(dom, space, u);
    if (!t) throw usage_error("jump start lies in no tile");
    const Tile& T = dom.tiles[static_cast<std::size_t>(*t)];
    for (const Vec* p : {&u, &v})
        if ((space.displacement(T.center, *p).cwiseAbs().array() > 1.25 * T.half_edge * (1.0 + 1e-12)).any())
            throw usage_error("jump endpoints must lie in 5/4 of the tile");

    const int N = dom.N;
    const Vec w = space.displacement(u, v);
    detail::ImageCache cache(dom, sys);
    ConnectingSequence seq;
    seq.tile = *t;
    seq.jump = w.norm() > 0.0;
    double worst_ratio = 0.0;
    for (int k = 0; k <= N; ++k) {
        const Vec c = space.wrap(u + (static_cast<double>(k) / N) * w);
        seq.points.push_back(k == 0 ? space.wrap(u) : iterate(sys, c, k).last());
    }
    for (int k = 0; k < N; ++k) {
        const double dk = seq.jump ? detail::defect(sys, seq.points[k], seq.points[k + 1]) : 0.0;
        const double allowed = dom.eta * cache.gap(*t, k);
        worst_ratio = std::max(worst_ratio, dk / allowed);
        seq.radii.push_back(dk / dom.theta);
        seq.ball_tiles.push_back(*t);
        seq.merges.push_back(0);
    }
    if (worst_ratio > 1.0 + 1e-9) {
        // Smallest N for which the interpolation meets the bound.
        std::optional<int> minimal;
        std::vector<detail::AffineImage> images;
        try {
            images = detail::affine_images(sys, T.center, std::min(200000, static_cast<int>(N * worst_ratio) + 2));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::computation) throw;  // tile orbit leaves the domain: no suggestion
        }
        for (int M = N + 1; M < static_cast<int>(images.size()) && !minimal; ++M) {
            bool ok = true;
            for (int k = 0; k < M && ok; ++k) {
                const double dk = (images[k].linear * w).norm() / M;
                ok = dk <= dom.eta * detail::facet_gap(images[k], T.half_edge, 1.25, 1.5) * (1.0 + 1e-9);
            }
            if (ok) minimal = M;
        }
        std::ostringstream msg;
        msg << "connecting sequence violates the eta bound by a factor " << worst_ratio << " with N=" << N;
        if (minimal) msg << "; minimal N=" << *minimal;
        throw computation_error(msg.str());
    }
    return seq;
}

/// Trivial sequence of a non-jump visit: a_k = f^k(y), zero radii.
inline ConnectingSequence trivial_sequence(const PerturbationDomain& dom, const MapSystem& sys, const Vec& y, int tile) {
    ConnectingSequence seq;
    seq.tile = tile;
    seq.points = iterate(sys, y, dom.N).points;
    seq.radii.assign(static_cast<std::size_t>(dom.N), 0.0);
    seq.ball_tiles.assign(static_cast<std::size_t>(dom.N), tile);
    seq.merges.assign(static_cast<std::size_t>(dom.N), 0);
    return seq;
}

// ---------------------------------------------------------------------------
// The shortcut process

struct ShortcutEvent {
    enum class Kind { primary, secondary };
    Kind kind = Kind::primary;
    std::size_t i = 0, j = 0;           // positions in the parent pseudo-orbit
    std::size_t id_i = 0, id_j = 0;     // original indices of y_i, y_j
    int level = -1;                     // k of the intersecting balls (secondary)
    std::size_t parent_length = 0;
    std::size_t outer_length = 0;       // (y_0..y_i, y_{j+1}..y_{n-1})
    std::size_t inner_length = 0;       // (y_{i+1}..y_j)
    bool kept_outer = true;
    double radius_i = 0.0, radius_j = 0.0;  // before (secondary)
    double radius_after = 0.0;
    double eq1_bound = 0.0;             // 2 (r_i + r_j) / theta
    bool eq1_ok = true;
    int merges_after = 0;
    double apriori_bound = 0.0;
    bool apriori_ok = true;
};

inline const char* to_string(ShortcutEvent::Kind k) {
    return k == ShortcutEvent::Kind::primary ? "primary" : "secondary";
}

struct SurgeryOptions {
    std::optional<int> ell;  // request condition 3
    Tolerances tol;
};

struct SurgeryResult {
    PseudoOrbit orbit;
    std::vector<std::size_t> ids;  // original index of each final point
    std::vector<ConnectingSequence> sequences;  // one per final point inside a tile
    std::vector<ShortcutEvent> trace;
    bool condition1 = false;  // balls inside f^k(V_s) and below the a priori bound
    bool condition2 = false;  // balls pairwise disjoint
    std::optional<bool> condition3;  // final length not a multiple of ell (when requested)
    std::size_t ball_intersections = 0;
    int max_merges = 0;
    std::vector<Violation> violations;
};

namespace detail {

struct Entry {
    Vec y;
    bool jump = false;
    std::size_t id = 0;
    std::optional<ConnectingSequence> seq;
};

inline std::size_t shortcut_choice(std::size_t n, std::size_t i, std::size_t j, const std::optional<int>& ell,
                                   bool& keep_outer) {
    const std::size_t outer = n - (j - i), inner = j - i;
    keep_outer = true;  // the branch holding y_0
    if (ell && outer % static_cast<std::size_t>(*ell) == 0) keep_outer = false;
    if (ell && !keep_outer && inner % static_cast<std::size_t>(*ell) == 0)
        throw certificate_error("both shortcut branches have length divisible by ell");
    return keep_outer ? outer : inner;
}

inline std::vector<Entry> branch(const std::vector<Entry>& e, std::size_t i, std::size_t j, bool outer) {
    std::vector<Entry> out;
    if (outer) {
        out.insert(out.end(), e.begin(), e.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        out.insert(out.end(), e.begin() + static_cast<std::ptrdiff_t>(j) + 1, e.end());
    } else {
        out.insert(out.end(), e.begin() + static_cast<std::ptrdiff_t>(i) + 1, e.begin() + static_cast<std::ptrdiff_t>(j) + 1);
    }
    return out;
}

inline bool step_is_true(const MapSystem& sys, const Vec& a, const Vec& b, const Tolerances& tol) {
    return sys.domain().distance(evaluate(sys, a), b) < tol.orbit;
}

}  // namespace detail

/// Primary shortcuts: while two points y_i, y_j (i < j, lowest pair first)
/// share a tile, keep one branch. With ell, the kept branch has length not
/// divisible by ell; otherwise (or on a tie) the branch holding y_0.
inline SurgeryResult primary_shortcuts(const PseudoOrbit& input, const PerturbationDomain& dom, const MapSystem& sys,
                                       const SurgeryOptions& opt = {}) {
    const std::size_t n0 = input.length();
    if (n0 == 0) throw usage_error("empty pseudo-orbit");
    if (opt.ell && *opt.ell < 1) throw usage_error("ell must be >= 1");
    if (opt.ell && n0 % static_cast<std::size_t>(*opt.ell) == 0)
        throw usage_error("condition-3-not-requestable: input length " + std::to_string(n0) +
                          " is a multiple of ell=" + std::to_string(*opt.ell));
    const Domain& space = sys.domain();

    std::vector<detail::Entry> e;
    for (std::size_t i = 0; i < n0; ++i) e.push_back({input.points[i], input.jumps[i], i, std::nullopt});

    SurgeryResult res;
    for (;;) {
        const std::size_t n = e.size();
        std::vector<std::optional<int>> tiles(n);
        for (std::size_t i = 0; i < n; ++i) tiles[i] = tile_of(dom, space, e[i].y);
        std::optional<std::pair<std::size_t, std::size_t>> pair;
        for (std::size_t i = 0; i < n && !pair; ++i) {
            if (!tiles[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j)
                if (tiles[j] == tiles[i]) {
                    pair = {i, j};
                    break;
                }
        }
        if (!pair) break;
        const auto [i, j] = *pair;
        ShortcutEvent ev;
        ev.kind = ShortcutEvent::Kind::primary;
        ev.i = i;
        ev.j = j;
        ev.id_i = e[i].id;
        ev.id_j = e[j].id;
        ev.parent_length = n;
        ev.outer_length = n - (j - i);
        ev.inner_length = j - i;
        bool outer = true;
        detail::shortcut_choice(n, i, j, opt.ell, outer);
        ev.kept_outer = outer;
        auto kept = detail::branch(e, i, j, outer);
        // The new closing step y_i -> y_{j+1} (or y_j -> y_{i+1}).
        auto& from = outer ? kept[i] : kept.back();
        const auto& to = outer ? kept[(i + 1) % kept.size()] : kept.front();
        from.jump = !detail::step_is_true(sys, from.y, to.y, opt.tol);
        e = std::move(kept);
        res.trace.push_back(ev);
    }
    for (const auto& x : e) {
        res.orbit.points.push_back(x.y);
        res.orbit.jumps.push_back(x.jump);
        res.ids.push_back(x.id);
    }
    return res;
}

namespace detail {

struct BallRef {
    std::size_t entry;
    int k;
};

/// Exhaustive scan for intersecting closed balls; lowest entry pair first.
inline std::optional<std::pair<BallRef, BallRef>> first_intersection(const std::vector<Entry>& e, const Domain& space,
                                                                      int N, std::size_t* count = nullptr) {
    std::optional<std::pair<BallRef, BallRef>> first;
    std::size_t total = 0;
    for (std::size_t a = 0; a < e.size(); ++a) {
        if (!e[a].seq) continue;
        for (std::size_t b = a + 1; b < e.size(); ++b) {
            if (!e[b].seq) continue;
            for (int k = 0; k < N; ++k)
                for (int m = 0; m < N; ++m) {
                    const double dist = space.distance(e[a].seq->points[k], e[b].seq->points[m]);
                    if (dist > e[a].seq->radii[k] + e[b].seq->radii[m]) continue;
                    ++total;
                    if (!first) first = std::make_pair(BallRef{a, k}, BallRef{b, m});
                    if (!count) return first;
                }
        }
    }
    if (count) *count = total;
    return first;
}

}  // namespace detail

/// Secondary shortcuts on a pseudo-orbit whose tiles are visited at most once:
/// builds the connecting sequences, then while two balls B_{i,k}, B_{j,k}
/// intersect, shortcuts the pair and splices (a_{i,0..k}, a_{j,k+1..N}).
inline SurgeryResult secondary_shortcuts(const SurgeryResult& primary, const PerturbationDomain& dom,
                                         const MapSystem& sys, const SurgeryOptions& opt = {}) {
    const Domain& space = sys.domain();
    const int N = dom.N;
    const int merge_bound = adjacency_bound(sys.dimension());
    detail::ImageCache cache(dom, sys);

    SurgeryResult res;
    res.trace = primary.trace;
    std::vector<detail::Entry> e;
    const std::size_t n0 = primary.orbit.length();
    for (std::size_t i = 0; i < n0; ++i) {
        detail::Entry x{primary.orbit.points[i], primary.orbit.jumps[i], primary.ids[i], std::nullopt};
        const auto t = tile_of(dom, space, x.y);
        if (t) {
            const Vec& next = primary.orbit.points[(i + 1) % n0];
            x.seq = x.jump ? connect(dom, sys, x.y, evaluate_inverse(sys, next), t)
                           : trivial_sequence(dom, sys, x.y, *t);
            x.seq->visit = i;
        } else if (x.jump) {
            throw usage_error("jump at y_" + std::to_string(i) + " outside the perturbation domain");
        }
        e.push_back(std::move(x));
    }
    // Initial radii must already satisfy the a priori bound.
    for (const auto& x : e) {
        if (!x.seq) continue;
        for (int k = 0; k < N; ++k) {
            const double bound = cache.gap(x.seq->ball_tiles[k], k);
            if (x.seq->radii[k] > bound * (1.0 + 1e-9))
                throw certificate_error("initial radius r_{" + std::to_string(x.id) + "," + std::to_string(k) +
                                        "} exceeds the a priori bound (eta too large for theta)");
        }
    }

    while (auto hit = detail::first_intersection(e, space, N)) {
        const auto [A, B] = *hit;
        if (A.k != B.k)
            throw certificate_error("balls at different levels intersect (chart images are not disjoint)");
        const std::size_t i = A.entry, j = B.entry, n = e.size();
        const int k = A.k;
        ShortcutEvent ev;
        ev.kind = ShortcutEvent::Kind::secondary;
        ev.i = i;
        ev.j = j;
        ev.id_i = e[i].id;
        ev.id_j = e[j].id;
        ev.level = k;
        ev.parent_length = n;
        ev.outer_length = n - (j - i);
        ev.inner_length = j - i;
        ev.radius_i = e[i].seq->radii[k];
        ev.radius_j = e[j].seq->radii[k];
        bool outer = true;
        detail::shortcut_choice(n, i, j, opt.ell, outer);
        ev.kept_outer = outer;

        // Keeping the outer branch extends i's sequence with j's tail; keeping
        // the inner one extends j's sequence with i's tail.
        const ConnectingSequence& head = outer ? *e[i].seq : *e[j].seq;
        const ConnectingSequence& tail = outer ? *e[j].seq : *e[i].seq;
        ConnectingSequence merged = head;
        for (int m = k + 1; m <= N; ++m) merged.points[m] = tail.points[m];
        for (int m = k + 1; m < N; ++m) {
            merged.radii[m] = tail.radii[m];
            merged.ball_tiles[m] = tail.ball_tiles[m];
            merged.merges[m] = tail.merges[m];
        }
        merged.radii[k] = detail::defect(sys, merged.points[k], merged.points[k + 1]) / dom.theta;
        merged.merges[k] += 1;
        merged.jump = true;

        ev.radius_after = merged.radii[k];
        ev.eq1_bound = 2.0 / dom.theta * (ev.radius_i + ev.radius_j);
        ev.eq1_ok = ev.radius_after <= ev.eq1_bound * (1.0 + 1e-12) + 1e-300;
        ev.merges_after = merged.merges[k];
        ev.apriori_bound = cache.gap(merged.ball_tiles[k], k);
        ev.apriori_ok = ev.radius_after <= ev.apriori_bound * (1.0 + 1e-9);
        res.trace.push_back(ev);
        if (!ev.eq1_ok) throw certificate_error("merged radius violates r' <= 2 (r_i + r_j) / theta");
        if (ev.merges_after > merge_bound)
            throw certificate_error("a ball underwent more than 4^d secondary merges");
        if (!ev.apriori_ok) throw certificate_error("merged radius exceeds the a priori bound");

        auto kept = detail::branch(e, i, j, outer);
        auto& owner = outer ? kept[i] : kept.back();
        owner.seq = std::move(merged);
        owner.jump = true;
        e = std::move(kept);
    }

    // Final state and certificates.
    const std::size_t n = e.size();
    for (std::size_t i = 0; i < n; ++i) {
        res.orbit.points.push_back(e[i].y);
        res.orbit.jumps.push_back(e[i].jump);
        res.ids.push_back(e[i].id);
        if (e[i].seq) {
            e[i].seq->visit = i;
            res.sequences.push_back(*e[i].seq);
        }
    }
    detail::first_intersection(e, space, N, &res.ball_intersections);
    res.condition2 = res.ball_intersections == 0;
    res.condition1 = true;
    for (const auto& seq : res.sequences)
        for (int k = 0; k < N; ++k) {
            res.max_merges = std::max(res.max_merges, seq.merges[k]);
            const int t = seq.ball_tiles[k];
            const int s = dom.tiles[static_cast<std::size_t>(t)].chart;
            const bool inside = detail::ball_in_image(space, cache.chart(s, k), dom.charts[static_cast<std::size_t>(s)].half_widths(),
                                                      seq.points[k], seq.radii[k]);
            const bool bounded = seq.radii[k] <= cache.gap(t, k) * (1.0 + 1e-9);
            if (!inside || !bounded) {
                res.condition1 = false;
                res.violations.push_back({"condition1", "ball (" + std::to_string(seq.visit) + "," + std::to_string(k) +
                                                            ") " + (inside ? "exceeds the a priori bound" : "leaves f^k(V_s)")});
            }
        }
    if (!res.condition2)
        res.violations.push_back({"condition2", std::to_string(res.ball_intersections) + " intersecting ball pairs"});
    if (opt.ell) {
        res.condition3 = n % static_cast<std::size_t>(*opt.ell) != 0;
        if (!*res.condition3) res.violations.push_back({"condition3", "final length is a multiple of ell"});
    }
    return res;
}

/// Boundary jitter, validation, primary and secondary shortcuts.
inline SurgeryResult run_surgery(const PseudoOrbit& input, const PerturbationDomain& dom, const MapSystem& sys,
                                 const SurgeryOptions& opt = {}) {
    if (!sys.has_inverse()) throw usage_error("surgery needs an explicit inverse");
    const PseudoOrbit po = jitter_off_boundaries(input, dom, sys);
    const auto problems = validate_pseudo_orbit(po, dom, sys, opt.tol);
    if (!problems.empty()) throw usage_error("invalid pseudo-orbit: " + problems.front().detail);
    return secondary_shortcuts(primary_shortcuts(po, dom, sys, opt), dom, sys, opt);
}

// ---------------------------------------------------------------------------
// Elementary perturbations and closing

/// C^1 radial bump 1 - 3 s^2 + 2 s^3 on [0, 1].
inline double bump(double s) { return s >= 1.0 ? 0.0 : 1.0 - 3.0 * s * s + 2.0 * s * s * s; }
inline double bump_derivative(double s) { return s >= 1.0 ? 0.0 : -6.0 * s + 6.0 * s * s; }

struct BumpBall {
    Vec center;
    double radius = 0.0;
    Vec target;  // h(center) = target, |target - center| = theta * radius
};

namespace detail {

struct BumpField {
    Domain space;
    std::vector<BumpBall> balls;

    /// Index of the ball containing x in its open interior.
    std::optional<std::size_t> ball_of(const Vec& x) const {
        for (std::size_t b = 0; b < balls.size(); ++b)
            if (space.distance(balls[b].center, x) < balls[b].radius) return b;
        return std::nullopt;
    }

    Vec apply(const Vec& x) const {
        const auto b = ball_of(x);
        if (!b) return x;
        const auto& B = balls[*b];
        const double s = space.distance(B.center, x) / B.radius;
        return space.wrap(x + bump(s) * space.displacement(B.center, B.target));
    }

    Mat derivative(const Vec& x) const {
        const int d = space.dimension();
        Mat D = Mat::Identity(d, d);
        const auto b = ball_of(x);
        if (!b) return D;
        const auto& B = balls[*b];
        const Vec off = space.displacement(B.center, x);
        const double rho = off.norm();
        if (rho == 0.0) return D;
        const Vec grad = bump_derivative(rho / B.radius) / (B.radius * rho) * off;
        return D + space.displacement(B.center, B.target) * grad.transpose();
    }
};

}  // namespace detail

/// g = f o h, with h the product of the bump translations (disjoint supports).
inline MapSystem perturbed_system(const MapSystem& f, std::vector<BumpBall> balls) {
    auto field = std::make_shared<detail::BumpField>(detail::BumpField{f.domain(), std::move(balls)});
    auto forward = [f, field](const Vec& x) { return f.forward_raw(field->apply(f.domain().wrap(x))); };
    auto jac = [f, field](const Vec& x) {
        const Vec y = f.domain().wrap(x);
        return Mat(jacobian(f, field->apply(y)) * field->derivative(y));
    };
    return MapSystem(f.domain(), forward, std::nullopt, jac, std::nullopt,
                     f.description() + " (perturbed on " + std::to_string(field->balls.size()) + " balls)");
}

/// One bump per positive-radius ball of the sequences, moving a_k onto
/// f^-1(a_{k+1}).
inline std::vector<BumpBall> bump_balls(const SurgeryResult& res, const MapSystem& sys) {
    std::vector<BumpBall> out;
    for (const auto& seq : res.sequences)
        for (std::size_t k = 0; k < seq.radii.size(); ++k) {
            if (!(seq.radii[k] > 0.0)) continue;
            out.push_back({seq.points[k], seq.radii[k], evaluate_inverse(sys, seq.points[k + 1])});
        }
    return out;
}

struct PerturbationSize {
    double c0 = 0.0;
    double c1 = 0.0;
    std::size_t samples = 0;
    std::size_t outside_support_changes = 0;  // samples outside all balls where f != g
};

/// Sampled sup |f - g| and sup ||Df - Dg|| on a grid plus points inside and
/// just outside each support ball.
inline PerturbationSize perturbation_size(const MapSystem& original, const MapSystem& perturbed,
                                          const std::vector<BumpBall>& support = {}, int grid_budget = 1000) {
    const Domain& space = original.domain();
    const int d = original.dimension();
    std::vector<Vec> samples;
    detail::for_each_grid_point(space, detail::grid_per_axis(d, grid_budget), [&](const Vec& x) { samples.push_back(x); });
    for (const auto& B : support) {
        samples.push_back(B.center);
        for (int axis = 0; axis < d; ++axis)
            for (double s : {0.1, 0.25, 0.5, 0.75, 0.9, 1.0 + 1e-6, 1.5}) {
                for (double sign : {1.0, -1.0}) {
                    Vec x = B.center;
                    x[axis] += sign * s * B.radius;
                    samples.push_back(space.wrap(x));
                }
            }
    }
    PerturbationSize out;
    out.samples = samples.size();
    for (const auto& x : samples) {
        const double c0 = space.distance(evaluate(original, x), evaluate(perturbed, x));
        const Mat diff = jacobian(original, x) - jacobian(perturbed, x);
        const double c1 = Eigen::JacobiSVD<Mat>(diff).singularValues()(0);
        out.c0 = std::max(out.c0, c0);
        out.c1 = std::max(out.c1, c1);
        const bool in_support = std::any_of(support.begin(), support.end(), [&](const BumpBall& B) {
            return space.distance(B.center, x) < B.radius;
        });
        if (!in_support && c0 > 0.0) ++out.outside_support_changes;
    }
    return out;
}

enum class CloseStatus { closed, unchanged, inconclusive };

inline const char* to_string(CloseStatus s) {
    switch (s) {
        case CloseStatus::closed: return "closed";
        case CloseStatus::unchanged: return "unchanged";
        case CloseStatus::inconclusive: return "inconclusive";
    }
    return "?";
}

struct CloseResult {
    CloseStatus status = CloseStatus::inconclusive;
    std::optional<MapSystem> perturbed;
    std::optional<PeriodicOrbit> orbit;  // genuine periodic orbit of the perturbed system
    std::optional<SurgeryResult> surgery;
    std::vector<BumpBall> balls;
    int return_time = 0;       // n with f^-n(x) in the tile of x
    double distance_to_x = 0;  // from the orbit's base point to x
    std::optional<bool> in_region;
    std::string note;
};

/// Closes the orbit of a non-periodic point x: finds n <= budget, ell !| n,
/// with f^-n(x) in the tile of x, runs the shortcut process on the periodic
/// pseudo-orbit (x, f(z), ..., f^{n-1}(z)), z = f^-n(x), and perturbs f by
/// bumps on the final balls.
inline CloseResult close_orbit(const MapSystem& sys, const PerturbationDomain& dom, const Vec& x, int ell, int budget,
                               const std::vector<Box>& region = {}, const Tolerances& tol = {}) {
    if (!sys.has_inverse()) throw usage_error("closing needs an explicit inverse");
    if (ell < 1) throw usage_error("ell must be >= 1");
    const Domain& space = sys.domain();
    CloseResult out;

    // Already periodic?
    {
        Vec y = space.wrap(x);
        for (int p = 1; p <= budget; ++p) {
            y = evaluate(sys, y);
            if (space.distance(y, x) >= tol.orbit) continue;
            if (p % ell == 0)
                throw computation_error("x is periodic with period " + std::to_string(p) +
                                        ", a multiple of ell; the periodic case is not supported");
            out.status = CloseStatus::unchanged;
            out.perturbed = sys;
            out.orbit = detail::make_orbit(sys, x, p);
            out.note = "x is already periodic with period " + std::to_string(p);
            return out;
        }
    }

    const auto tile = tile_of(dom, space, x);
    if (!tile) throw usage_error("x lies in no tile of the perturbation domain");
    const Tile& T = dom.tiles[static_cast<std::size_t>(*tile)];
    int n = 0;
    Vec z = space.wrap(x);
    bool saw_multiple = false;
    for (int m = 1; m <= budget; ++m) {
        z = evaluate_inverse(sys, z);
        if ((space.displacement(T.center, z).cwiseAbs().array() >= T.half_edge).any()) continue;
        if (m % ell == 0) {
            saw_multiple = true;
            continue;
        }
        n = m;
        break;
    }
    if (n == 0) {
        out.status = CloseStatus::inconclusive;
        out.note = saw_multiple ? "only returns at multiples of ell within the budget" : "no return within the budget";
        return out;
    }
    out.return_time = n;

    PseudoOrbit po;
    po.points.push_back(space.wrap(x));
    po.jumps.push_back(true);
    Vec y = z;
    for (int k = 1; k < n; ++k) {
        y = evaluate(sys, y);
        po.points.push_back(y);
        po.jumps.push_back(false);
    }
    SurgeryOptions opt;
    opt.ell = ell;
    opt.tol = tol;
    out.surgery = run_surgery(po, dom, sys, opt);
    const auto& s = *out.surgery;
    if (!s.condition2) throw certificate_error("ball disjointness certificate absent");
    if (!s.condition1) throw certificate_error("connecting balls leave the perturbation domain");

    out.balls = bump_balls(s, sys);
    out.perturbed = perturbed_system(sys, out.balls);
    const Vec base = s.orbit.points.front();
    const int period = static_cast<int>(s.orbit.length());
    out.orbit = detail::make_orbit(*out.perturbed, base, period);
    out.distance_to_x = space.distance(base, x);
    // Genuine minimal period.
    const auto pts = iterate(*out.perturbed, base, period).points;
    for (int m = 1; m < period; ++m)
        if (space.distance(pts[static_cast<std::size_t>(m)], base) < tol.orbit)
            throw certificate_error("perturbed orbit closes early at " + std::to_string(m));
    if (out.orbit->residual >= tol.orbit) throw certificate_error("perturbed orbit residual above tolerance");
    if (!region.empty())
        out.in_region = std::all_of(out.orbit->points.begin(), out.orbit->points.end(),
                                    [&](const Vec& p) { return detail::inside(region, p); });
    out.status = CloseStatus::closed;
    return out;
}

/// A single-chart domain around x: a cube of half-width `half_width` split into
/// `tiles_per_axis`^d equal tiles.
inline PerturbationDomain domain_around(const Domain& space, const Vec& x, double half_width, int tiles_per_axis, int N,
                                        double theta, double delta, std::optional<double> eta = std::nullopt) {
    const int d = space.dimension();
    if (tiles_per_axis < 1) throw usage_error("tiles_per_axis must be >= 1");
    PerturbationDomain dom;
    dom.N = N;
    dom.theta = theta;
    dom.delta = delta;
    if (eta) {
        dom.eta = *eta;
        dom.eta_override = true;
    }
    Chart ch{Vec(x.array() - half_width), Vec(x.array() + half_width)};
    dom.charts.push_back(ch);
    const double h = half_width / tiles_per_axis;
    std::vector<int> idx(d, 0);
    for (;;) {
        Vec c(d);
        for (int i = 0; i < d; ++i) c[i] = ch.lo[i] + (2 * idx[i] + 1) * h;
        dom.tiles.push_back({0, c, h});
        int axis = 0;
        while (axis < d && ++idx[axis] == tiles_per_axis) idx[axis++] = 0;
        if (axis == d) break;
    }
    finalize_domain(dom, space);
    return dom;
}

// ---------------------------------------------------------------------------
// Random instances (d = 1)

struct InstanceParams {
    int min_tiles = 5;
    int max_tiles = 30;
    int jumps = 10;
    int max_N = 3;
    double min_theta = 0.2;
    double max_theta = 0.8;
};

struct SurgeryInstance {
    Domain space;
    std::vector<std::string> map;
    std::vector<std::string> inverse;
    PerturbationDomain domain;
    PseudoOrbit orbit;

    MapSystem system() const { return MapSystem::from_expressions(space, map, inverse); }
};

namespace detail {

/// Rotation walk: a rational rotation by P/n, one chart holding v in {2, 3}
/// of the n phases, and a pseudo-orbit of several laps whose jumps (within
/// N eta h / 4, summing to zero) shift later laps by a few jump sizes. One cut
/// per phase, between its lap copies, so the primary shortcuts do most of the
/// work. Cuts avoid the spans of the phase's own jumps (a jump stays in its
/// tile).
inline SurgeryInstance rotation_walk_instance(std::mt19937_64& rng, const InstanceParams& prm) {
    auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    auto pick = [&](int lo, int hi) { return lo + static_cast<int>(unit() * (hi - lo + 1)) % (hi - lo + 1); };

    for (int attempt = 0; attempt < 10000; ++attempt) {
        SurgeryInstance inst;
        inst.space = Domain::torus(1);
        const int n = pick(7, 40);
        const int P = pick(1, n - 1);
        if (std::gcd(P, n) != 1) continue;
        const int N = pick(1, prm.max_N);
        const int v = pick(2, 3);
        const double W = static_cast<double>(v) / n;
        bool separated = true;
        for (int k = 1; k < N; ++k) {
            const double frac = static_cast<double>((static_cast<long>(k) * P) % n) / n;
            separated = separated && std::min(frac, 1.0 - frac) > W + 0.5 / n;
        }
        if (!separated) continue;
        const double rho = static_cast<double>(P) / n;
        std::ostringstream fwd, inv;
        fwd.precision(17);
        inv.precision(17);
        fwd << "mod(x1 + " << rho << ", 1)";
        inv << "mod(x1 - " << rho << ", 1)";
        inst.map = {fwd.str()};
        inst.inverse = {inv.str()};
        const MapSystem sys = inst.system();

        PerturbationDomain& dom = inst.domain;
        dom.N = N;
        dom.theta = prm.min_theta + (prm.max_theta - prm.min_theta) * unit();
        dom.eta = standard_eta(dom.theta, 1);
        dom.delta = 2.0 * W;

        // Chart ends halfway between phases y0 + j/n.
        const double y0 = 0.25 + 0.5 * unit();
        const double lo = y0 - (0.5 + std::floor(unit() * v)) / n;
        dom.charts.push_back({Vec::Constant(1, lo), Vec::Constant(1, lo + W)});
        const int T = pick(std::max(prm.min_tiles, 3 * v), std::max(prm.max_tiles, 3 * v));
        const double h0 = W / T;
        // Jump sizes are bounded with the smallest admissible half-edge (0.35 h0).
        const double beta = 0.9 * N * dom.eta * (0.35 * h0) / 4.0;

        const int laps = std::max(2, (prm.jumps + v) / v + pick(0, 2));
        const int total = laps * n;
        std::vector<int> visits;
        for (int k = 0; k < total; ++k) {
            const double p = y0 + static_cast<double>((static_cast<long>(k) * P) % n) / n;
            if (p - std::floor(p) > lo && p - std::floor(p) < lo + W) visits.push_back(k);
        }
        const int J = prm.jumps;
        if (static_cast<int>(visits.size()) < J + 1) continue;
        std::vector<int> jump_at;
        {
            auto pool = visits;
            for (int c = 0; c < J; ++c) {
                const std::size_t r = static_cast<std::size_t>(unit() * pool.size()) % pool.size();
                jump_at.push_back(pool[r]);
                pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(r));
            }
            std::sort(jump_at.begin(), jump_at.end());
        }
        std::vector<double> delta(static_cast<std::size_t>(J));
        double mean = 0.0;
        for (auto& dlt : delta) {
            dlt = beta * (unit() - 0.5);
            mean += dlt / J;
        }
        for (auto& dlt : delta) dlt -= mean;

        // The pseudo-orbit: one point per step, offset by the jumps so far.
        PseudoOrbit& po = inst.orbit;
        Vec y = Vec::Constant(1, y0);
        std::size_t next_jump = 0;
        for (int k = 0; k < total; ++k) {
            po.points.push_back(y);
            const bool jump = next_jump < jump_at.size() && jump_at[next_jump] == k;
            po.jumps.push_back(jump);
            Vec pre = y;
            if (jump) pre = inst.space.wrap(Vec(y.array() + delta[next_jump++]));
            y = evaluate(sys, pre);
        }

        // One cut per phase; the segments between cuts are split into equal tiles.
        std::vector<double> cuts{lo};
        for (int j = 0; j < v; ++j) {
            const double phase = lo + (j + 0.5) / n;
            double cmin = 1.0, cmax = 0.0;
            std::vector<std::pair<double, double>> own;  // spans of this phase's jumps
            for (int k : visits) {
                const double p = po.points[static_cast<std::size_t>(k)][0];
                if (std::abs(p - phase) > 0.25 / n) continue;
                cmin = std::min(cmin, p);
                cmax = std::max(cmax, p);
                if (po.jumps[static_cast<std::size_t>(k)]) {
                    const double q = evaluate_inverse(sys, po.points[(static_cast<std::size_t>(k) + 1) % po.length()])[0];
                    own.emplace_back(std::min(p, q), std::max(p, q));
                }
            }
            std::optional<double> cut;
            for (int trial = 0; trial < 64 && cmax > cmin; ++trial) {
                const double c = cmin + (cmax - cmin) * (0.05 + 0.9 * unit());
                const double margin = 1e-3 * (cmax - cmin);
                if (std::none_of(own.begin(), own.end(), [&](const auto& s) { return c > s.first - margin && c < s.second + margin; })) {
                    cut = c;
                    break;
                }
            }
            cuts.push_back(cut ? *cut : phase + 0.3 * h0 * (unit() - 0.5));
        }
        cuts.push_back(lo + W);
        dom.tiles.clear();
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            const double len = cuts[c + 1] - cuts[c];
            const int pieces = std::max(1, static_cast<int>(std::lround(len / h0)));
            const double w = len / pieces;
            for (int t = 0; t < pieces; ++t)
                dom.tiles.push_back({0, Vec::Constant(1, cuts[c] + (t + 0.5) * w), w / 2.0});
        }
        finalize_domain(dom, inst.space);

        if (!validate_domain(dom, sys).valid) continue;
        if (!validate_pseudo_orbit(po, dom, sys).empty()) continue;
        return inst;
    }
    throw computation_error("could not generate a valid instance");
}

/// Reflection: x -> s - x on the circle, fixed point p = s/2 placed on the
/// boundary between two tiles (N = 1, since f(V) = V). The pseudo-orbit makes
/// m laps p - a_k -> p + a_k + u_k -> p - a_{k+1} with every step a jump of
/// size below eta h / 4. The left visits share a tile (primary shortcuts); the
/// surviving pair straddles p, and its level-0 balls overlap whenever
/// a < u (1/theta - 1/2) (secondary shortcut).
inline SurgeryInstance reflection_instance(std::mt19937_64& rng, const InstanceParams& prm) {
    auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    auto pick = [&](int lo, int hi) { return lo + static_cast<int>(unit() * (hi - lo + 1)) % (hi - lo + 1); };

    for (int attempt = 0; attempt < 10000; ++attempt) {
        SurgeryInstance inst;
        inst.space = Domain::torus(1);
        const double p = 0.25 + 0.5 * unit();
        std::ostringstream f;
        f.precision(17);
        f << "mod(" << 2.0 * p << " - x1, 1)";
        inst.map = {f.str()};
        inst.inverse = inst.map;
        const MapSystem sys = inst.system();

        PerturbationDomain& dom = inst.domain;
        dom.N = 1;
        dom.theta = prm.min_theta + (prm.max_theta - prm.min_theta) * unit();
        dom.eta = standard_eta(dom.theta, 1);
        const int per_side = pick(std::max(1, prm.min_tiles / 2), std::max(1, prm.max_tiles / 2));
        const double h = (0.05 + 0.1 * unit()) / per_side;  // half-edge
        dom.charts.push_back({Vec::Constant(1, p - 2.0 * h * per_side), Vec::Constant(1, p + 2.0 * h * per_side)});
        dom.delta = 8.0 * h * per_side;
        for (int t = -per_side; t < per_side; ++t) dom.tiles.push_back({0, Vec::Constant(1, p + (2 * t + 1) * h), h});
        finalize_domain(dom, inst.space);

        // Steps stay below eta * dist(5/4 C, complement 3/2 C) = eta h / 4.
        const double scale = 0.3 * dom.eta * h / 4.0;
        const int m = pick(1, 4);
        const double reach = 1.0 / dom.theta - 0.5;
        std::vector<double> a(static_cast<std::size_t>(m)), u(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) {
            u[k] = scale * (0.2 + 0.8 * unit());
            a[k] = u[k] * reach * (0.2 + 1.3 * unit());
            a[k] = std::min(a[k], scale);
        }
        PseudoOrbit& po = inst.orbit;
        for (int k = 0; k < m; ++k) {
            po.points.push_back(Vec::Constant(1, p - a[k]));
            po.points.push_back(Vec::Constant(1, p + a[k] + u[k]));
            po.jumps.push_back(true);
            po.jumps.push_back(true);
        }
        if (!validate_domain(dom, sys).valid) continue;
        if (!validate_pseudo_orbit(po, dom, sys).empty()) continue;
        return inst;
    }
    throw computation_error("could not generate a valid instance");
}

}  // namespace detail

/// Seeded d = 1 instance on the circle with the standard constant eta, drawn from
/// one of two families (rotation walk or reflection, see detail::).
inline SurgeryInstance random_instance(std::uint64_t seed, const InstanceParams& prm = {}) {
    std::mt19937_64 rng(seed);
    if (rng() & 1u) return detail::reflection_instance(rng, prm);
    return detail::rotation_walk_instance(rng, prm);
}

}  // namespace mixdec

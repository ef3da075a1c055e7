#pragma once

// Box coverings of the domain and their outer-approximating transition graphs.

#include "mixdec/core.hpp"
#include "mixdec/graph.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

namespace mixdec {

struct Box {
    Vec lo;
    Vec hi;

    Vec center() const { return (lo + hi) / 2.0; }
    double diameter() const { return (hi - lo).norm(); }
};

/// Uniform grid of 2^depth cells per axis, optionally restricted to the cells
/// whose interior meets a region. Box ids follow the grid's linear order.
class BoxCovering {
public:
    BoxCovering(Domain domain, int depth, const std::vector<Box>& region = {})
        : domain_(std::move(domain)), depth_(depth) {
        if (depth < 1) throw usage_error("depth must be >= 1");
        if (depth * domain_.dimension() > 22) throw usage_error("covering too large (2^(depth*d) > 2^22)");
        per_axis_ = 1 << depth;
        const int d = domain_.dimension();
        std::int64_t total = 1;
        for (int i = 0; i < d; ++i) total *= per_axis_;
        grid_to_box_.assign(static_cast<std::size_t>(total), -1);
        for (std::int64_t cell = 0; cell < total; ++cell) {
            if (!region.empty() && !cell_meets_region(cell, region)) continue;
            grid_to_box_[static_cast<std::size_t>(cell)] = static_cast<NodeId>(box_to_grid_.size());
            box_to_grid_.push_back(cell);
        }
        if (box_to_grid_.empty()) throw usage_error("region does not intersect the domain");
    }

    const Domain& domain() const noexcept { return domain_; }
    int depth() const noexcept { return depth_; }
    int cells_per_axis() const noexcept { return per_axis_; }
    int size() const noexcept { return static_cast<int>(box_to_grid_.size()); }

    double cell_width(int axis) const { return domain_.width(axis) / per_axis_; }

    std::vector<int> grid_coordinates(std::int64_t cell) const {
        std::vector<int> c(domain_.dimension());
        for (int i = 0; i < domain_.dimension(); ++i) {
            c[i] = static_cast<int>(cell % per_axis_);
            cell /= per_axis_;
        }
        return c;
    }

    std::int64_t linear_index(const std::vector<int>& coords) const {
        std::int64_t cell = 0;
        for (int i = domain_.dimension() - 1; i >= 0; --i) cell = cell * per_axis_ + coords[i];
        return cell;
    }

    /// Box id for grid coordinates, or -1 when the cell is outside the region.
    NodeId box_id(const std::vector<int>& coords) const {
        return grid_to_box_[static_cast<std::size_t>(linear_index(coords))];
    }

    Box box(NodeId id) const { return cell_box(box_to_grid_[static_cast<std::size_t>(id)]); }

    /// Box containing a point (half-open cells), if the point is covered.
    std::optional<NodeId> locate(const Vec& x) const {
        const Vec p = domain_.wrap(x);
        std::vector<int> coords(domain_.dimension());
        for (int i = 0; i < domain_.dimension(); ++i) {
            int j = static_cast<int>(std::floor((p[i] - domain_.lo[i]) / cell_width(i)));
            if (j == per_axis_ && !domain_.periodic[i]) j = per_axis_ - 1;
            if (j < 0 || j >= per_axis_) return std::nullopt;
            coords[i] = j;
        }
        const NodeId id = box_id(coords);
        if (id < 0) return std::nullopt;
        return id;
    }

private:
    Box cell_box(std::int64_t cell) const {
        const auto c = grid_coordinates(cell);
        const int d = domain_.dimension();
        Box b{Vec(d), Vec(d)};
        for (int i = 0; i < d; ++i) {
            b.lo[i] = domain_.lo[i] + c[i] * cell_width(i);
            b.hi[i] = domain_.lo[i] + (c[i] + 1) * cell_width(i);
        }
        return b;
    }

    bool cell_meets_region(std::int64_t cell, const std::vector<Box>& region) const {
        const Box b = cell_box(cell);
        for (const auto& r : region) {
            bool meets = true;
            for (int i = 0; i < domain_.dimension() && meets; ++i) meets = b.lo[i] < r.hi[i] && b.hi[i] > r.lo[i];
            if (meets) return true;
        }
        return false;
    }

    Domain domain_;
    int depth_ = 0;
    int per_axis_ = 0;
    std::vector<NodeId> grid_to_box_;
    std::vector<std::int64_t> box_to_grid_;
};

struct GraphOptions {
    int samples_per_axis = 3;  // lo, centre, hi
    double padding = 1.0;      // scale on L * diam / 2
    unsigned threads = 0;      // 0 = hardware concurrency
};

namespace detail {

/// Out-edges of one box: the hull of the sampled images (unwrapped around the
/// centre's image), padded, intersected with the open cells of the grid.
inline std::vector<NodeId> box_successors(const MapSystem& sys, const BoxCovering& cov, NodeId id,
                                          const GraphOptions& opt, double pad_per_diameter) {
    const Domain& dom = sys.domain();
    const int d = dom.dimension();
    const Box b = cov.box(id);
    const Vec centre_image = dom.wrap(sys.forward_raw(dom.wrap(b.center())));

    Vec lo = centre_image, hi = centre_image;
    const int s = std::max(2, opt.samples_per_axis);
    std::vector<int> idx(d, 0);
    Vec p(d);
    for (;;) {
        for (int i = 0; i < d; ++i) p[i] = b.lo[i] + (b.hi[i] - b.lo[i]) * idx[i] / (s - 1);
        Vec img = dom.wrap(sys.forward_raw(dom.wrap(p)));
        img = centre_image + dom.displacement(centre_image, img);
        lo = lo.cwiseMin(img);
        hi = hi.cwiseMax(img);
        int axis = 0;
        while (axis < d && ++idx[axis] == s) idx[axis++] = 0;
        if (axis == d) break;
    }
    const double pad = pad_per_diameter * b.diameter();

    std::vector<std::vector<int>> ranges(d);
    for (int i = 0; i < d; ++i) {
        const double w = cov.cell_width(i);
        const double a = (lo[i] - pad - dom.lo[i]) / w;
        const double z = (hi[i] + pad - dom.lo[i]) / w;
        long first = static_cast<long>(std::floor(a));
        long last = static_cast<long>(std::ceil(z)) - 1;
        if (last < first) last = first;  // degenerate hull on a cell boundary
        const int n = cov.cells_per_axis();
        if (dom.periodic[i]) {
            if (last - first + 1 >= n) {
                for (int j = 0; j < n; ++j) ranges[i].push_back(j);
            } else {
                for (long j = first; j <= last; ++j) ranges[i].push_back(static_cast<int>(((j % n) + n) % n));
            }
        } else {
            for (long j = std::max(0L, first); j <= std::min<long>(n - 1, last); ++j)
                ranges[i].push_back(static_cast<int>(j));
        }
        if (ranges[i].empty()) return {};
    }

    std::vector<NodeId> out;
    std::vector<std::size_t> pick(d, 0);
    std::vector<int> coords(d);
    for (;;) {
        for (int i = 0; i < d; ++i) coords[i] = ranges[i][pick[i]];
        if (const NodeId target = cov.box_id(coords); target >= 0) out.push_back(target);
        int axis = 0;
        while (axis < d && ++pick[axis] == ranges[axis].size()) pick[axis++] = 0;
        if (axis == d) break;
    }
    return out;
}

}  // namespace detail

struct CoveredGraph {
    BoxCovering covering;
    TransitionGraph graph;
};

/// Box covering at `depth` plus its transition graph. Edges over-approximate
/// {(B, B') : f(B) meets B'}: sampled images are hulled and padded by
/// padding * L * diam(B) / 2 before intersecting with the grid.
inline CoveredGraph build_graph(const MapSystem& sys, int depth, const std::vector<Box>& region = {},
                                const GraphOptions& opt = {}) {
    BoxCovering cov(sys.domain(), depth, region);
    const double pad_per_diameter = opt.padding > 0.0 ? opt.padding * sys.lipschitz() / 2.0 : 0.0;

    std::vector<std::vector<NodeId>> adj(static_cast<std::size_t>(cov.size()));
    unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(cov.size()));
    std::vector<std::exception_ptr> failures(threads);
    auto work = [&](unsigned t) {
        try {
            for (NodeId id = static_cast<NodeId>(t); id < cov.size(); id += static_cast<NodeId>(threads))
                adj[static_cast<std::size_t>(id)] = detail::box_successors(sys, cov, id, opt, pad_per_diameter);
        } catch (...) {
            failures[t] = std::current_exception();
        }
    };
    if (threads <= 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    }
    for (const auto& failure : failures)
        if (failure) std::rethrow_exception(failure);

    std::ostringstream prov;
    prov << "depth=" << depth << " samples_per_axis=" << opt.samples_per_axis << " padding=" << opt.padding
         << " lipschitz=" << (opt.padding > 0.0 ? sys.lipschitz() : 0.0) << " boxes=" << cov.size();
    return {std::move(cov), TransitionGraph(std::move(adj), prov.str())};
}

}  // namespace mixdec

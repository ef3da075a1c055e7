#pragma once

#include "mixdec/expr.hpp"
#include "mixdec/types.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mixdec {

/// Axis-aligned box; periodic axes turn it into (a product with) a torus.
struct Domain {
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<bool> periodic;

    Domain() = default;
    Domain(std::vector<double> lower, std::vector<double> upper, std::vector<bool> per)
        : lo(std::move(lower)), hi(std::move(upper)), periodic(std::move(per)) {
        if (lo.size() != hi.size() || lo.size() != periodic.size() || lo.empty()) {
            throw usage_error("domain bounds and periodic flags must have the same positive length");
        }
        for (std::size_t i = 0; i < lo.size(); ++i) {
            if (!(hi[i] > lo[i])) throw usage_error("domain axis " + std::to_string(i + 1) + " has hi <= lo");
        }
    }

    static Domain torus(int dimension) {
        return Domain(std::vector<double>(dimension, 0.0), std::vector<double>(dimension, 1.0),
                      std::vector<bool>(dimension, true));
    }

    int dimension() const noexcept { return static_cast<int>(lo.size()); }
    double width(int axis) const { return hi[axis] - lo[axis]; }

    double diameter() const {
        double sum = 0.0;
        for (int i = 0; i < dimension(); ++i) sum += width(i) * width(i);
        return std::sqrt(sum);
    }

    /// Wraps periodic axes into [lo, hi).
    Vec wrap(Vec x) const {
        for (int i = 0; i < dimension(); ++i) {
            if (!periodic[i]) continue;
            const double w = width(i);
            double v = x[i] - w * std::floor((x[i] - lo[i]) / w);
            if (v >= hi[i]) v -= w;  // floor rounding at the upper edge
            if (v < lo[i]) v = lo[i];
            x[i] = v;
        }
        return x;
    }

    bool contains(const Vec& x, double slack = 1e-12) const {
        for (int i = 0; i < dimension(); ++i) {
            if (periodic[i]) continue;
            if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
        }
        return true;
    }

    /// Shortest displacement from a to b (minimal image on periodic axes).
    Vec displacement(const Vec& a, const Vec& b) const {
        Vec d = b - a;
        for (int i = 0; i < dimension(); ++i) {
            if (periodic[i]) d[i] -= width(i) * std::round(d[i] / width(i));
        }
        return d;
    }

    double distance(const Vec& a, const Vec& b) const { return displacement(a, b).norm(); }
};

using PointMap = std::function<Vec(const Vec&)>;
using JacobianMap = std::function<Mat(const Vec&)>;

/// A smooth map f on a box/torus. Immutable after construction; evaluation is
/// pure, so instances may be shared freely across threads.
class MapSystem {
public:
    MapSystem(Domain domain, PointMap forward, std::optional<PointMap> inverse = std::nullopt,
              std::optional<JacobianMap> jacobian = std::nullopt, std::optional<double> lipschitz = std::nullopt,
              std::string description = {})
        : domain_(std::move(domain)),
          forward_(std::move(forward)),
          inverse_(std::move(inverse)),
          jacobian_(std::move(jacobian)),
          description_(std::move(description)) {
        if (lipschitz) {
            if (!(*lipschitz > 0.0)) throw usage_error("lipschitz bound must be positive");
            lipschitz_ = *lipschitz;
            lipschitz_supplied_ = true;
        }
    }

    /// Builds a system from expression strings over x1..xd.
    static MapSystem from_expressions(Domain domain, const std::vector<std::string>& map,
                                      const std::vector<std::string>& inverse = {},
                                      const std::vector<std::vector<std::string>>& jacobian = {},
                                      std::optional<double> lipschitz = std::nullopt) {
        const int d = domain.dimension();
        auto compile = [d](const std::vector<std::string>& sources, const char* what) {
            if (static_cast<int>(sources.size()) != d) {
                throw usage_error(std::string(what) + " needs " + std::to_string(d) + " expressions, got " +
                                  std::to_string(sources.size()));
            }
            std::vector<Expression> out;
            out.reserve(sources.size());
            for (const auto& s : sources) out.emplace_back(s, d);
            return std::make_shared<const std::vector<Expression>>(std::move(out));
        };
        auto as_map = [](std::shared_ptr<const std::vector<Expression>> exprs) -> PointMap {
            return [exprs](const Vec& x) {
                Vec y(static_cast<Eigen::Index>(exprs->size()));
                for (std::size_t i = 0; i < exprs->size(); ++i) y[static_cast<Eigen::Index>(i)] = (*exprs)[i](x);
                return y;
            };
        };

        std::string description;
        for (std::size_t i = 0; i < map.size(); ++i) description += (i ? "; " : "") + map[i];

        PointMap forward = as_map(compile(map, "map"));
        std::optional<PointMap> inv;
        if (!inverse.empty()) inv = as_map(compile(inverse, "inverse"));
        std::optional<JacobianMap> jac;
        if (!jacobian.empty()) {
            if (static_cast<int>(jacobian.size()) != d) throw usage_error("jacobian needs d rows");
            std::vector<std::shared_ptr<const std::vector<Expression>>> rows;
            for (const auto& row : jacobian) rows.push_back(compile(row, "jacobian row"));
            jac = [rows, d](const Vec& x) {
                Mat J(d, d);
                for (int i = 0; i < d; ++i)
                    for (int j = 0; j < d; ++j) J(i, j) = (*rows[i])[j](x);
                return J;
            };
        }
        return MapSystem(std::move(domain), std::move(forward), std::move(inv), std::move(jac), lipschitz,
                         std::move(description));
    }

    const Domain& domain() const noexcept { return domain_; }
    int dimension() const noexcept { return domain_.dimension(); }
    bool has_inverse() const noexcept { return inverse_.has_value(); }
    bool has_jacobian() const noexcept { return jacobian_.has_value(); }
    const std::string& description() const noexcept { return description_; }
    bool lipschitz_supplied() const noexcept { return lipschitz_supplied_; }

    /// Raw (unwrapped) evaluation; no domain checks.
    Vec forward_raw(const Vec& x) const { return forward_(x); }
    Vec inverse_raw(const Vec& x) const {
        if (!inverse_) throw usage_error("inverse map requested but not supplied");
        return (*inverse_)(x);
    }
    std::optional<Mat> explicit_jacobian(const Vec& x) const {
        if (!jacobian_) return std::nullopt;
        return (*jacobian_)(x);
    }

    /// Lipschitz bound L: supplied, or max Jacobian operator norm on a sample
    /// grid times the safety factor (computed lazily, cached).
    double lipschitz() const;

    const PointMap& forward_fn() const noexcept { return forward_; }
    const std::optional<PointMap>& inverse_fn() const noexcept { return inverse_; }
    const std::optional<JacobianMap>& jacobian_fn() const noexcept { return jacobian_; }

private:
    Domain domain_;
    PointMap forward_;
    std::optional<PointMap> inverse_;
    std::optional<JacobianMap> jacobian_;
    std::string description_;
    double lipschitz_ = 0.0;
    bool lipschitz_supplied_ = false;
    struct LipschitzCache {
        std::once_flag once;
        double value = 0.0;
    };
    std::shared_ptr<LipschitzCache> lipschitz_cache_ = std::make_shared<LipschitzCache>();
};

struct OrbitSegment {
    Vec base;
    int length = 0;
    std::vector<Vec> points;  // length + 1 points

    const Vec& last() const { return points.back(); }
};

namespace detail {

inline void require_in_domain(const Domain& domain, const Vec& x) {
    if (x.size() != domain.dimension()) {
        throw usage_error("point has dimension " + std::to_string(x.size()) + ", expected " +
                          std::to_string(domain.dimension()));
    }
    if (!domain.contains(x, 1e-9)) throw computation_error("point outside non-periodic domain");
}

/// Calls f on each point of the regular grid with `per_axis` cell centres per axis.
template <typename F>
void for_each_grid_point(const Domain& domain, int per_axis, F&& f) {
    const int d = domain.dimension();
    std::vector<int> index(d, 0);
    Vec x(d);
    for (;;) {
        for (int i = 0; i < d; ++i) x[i] = domain.lo[i] + (index[i] + 0.5) * domain.width(i) / per_axis;
        f(x);
        int axis = 0;
        while (axis < d && ++index[axis] == per_axis) index[axis++] = 0;
        if (axis == d) return;
    }
}

inline int grid_per_axis(int dimension, int total_target) {
    return std::max(2, static_cast<int>(std::floor(std::pow(static_cast<double>(total_target), 1.0 / dimension))));
}

}  // namespace detail

/// f(x) with periodic axes wrapped into [lo, hi).
inline Vec evaluate(const MapSystem& sys, const Vec& x) {
    detail::require_in_domain(sys.domain(), x);
    return sys.domain().wrap(sys.forward_raw(sys.domain().wrap(x)));
}

inline Vec evaluate_inverse(const MapSystem& sys, const Vec& x) {
    detail::require_in_domain(sys.domain(), x);
    return sys.domain().wrap(sys.inverse_raw(sys.domain().wrap(x)));
}

/// f^n(x) as an orbit segment; negative n iterates the inverse.
inline OrbitSegment iterate(const MapSystem& sys, const Vec& x, int n) {
    if (n < 0 && !sys.has_inverse()) throw usage_error("negative iterate requested but no inverse supplied");
    OrbitSegment seg;
    seg.base = x;
    seg.length = std::abs(n);
    seg.points.reserve(static_cast<std::size_t>(seg.length) + 1);
    seg.points.push_back(sys.domain().wrap(x));
    for (int k = 0; k < seg.length; ++k) {
        const Vec& p = seg.points.back();
        seg.points.push_back(n >= 0 ? evaluate(sys, p) : evaluate_inverse(sys, p));
    }
    return seg;
}

/// Central finite-difference Jacobian; periodic wrap-around is removed by
/// taking minimal-image differences.
inline Mat finite_difference_jacobian(const MapSystem& sys, const Vec& x, double step = Tolerances{}.fd_step) {
    const int d = sys.dimension();
    Mat J(d, d);
    for (int j = 0; j < d; ++j) {
        Vec plus = x, minus = x;
        plus[j] += step;
        minus[j] -= step;
        const Vec fp = sys.domain().wrap(sys.forward_raw(plus));
        const Vec fm = sys.domain().wrap(sys.forward_raw(minus));
        J.col(j) = sys.domain().displacement(fm, fp) / (2.0 * step);
    }
    return J;
}

/// D_x f: the explicit Jacobian when supplied, else central differences.
inline Mat jacobian(const MapSystem& sys, const Vec& x) {
    detail::require_in_domain(sys.domain(), x);
    if (auto J = sys.explicit_jacobian(x)) return *J;
    return finite_difference_jacobian(sys, x);
}

inline double estimate_lipschitz(const MapSystem& sys, double safety = Tolerances{}.lipschitz_safety) {
    const int d = sys.dimension();
    const int per_axis = d <= 3 ? 10 : detail::grid_per_axis(d, 1000);
    double best = 0.0;
    detail::for_each_grid_point(sys.domain(), per_axis, [&](const Vec& x) {
        const Mat J = sys.explicit_jacobian(x).value_or(finite_difference_jacobian(sys, x));
        Eigen::JacobiSVD<Mat> svd(J);
        best = std::max(best, svd.singularValues()(0));
    });
    return std::max(best, 1e-12) * safety;
}

inline double MapSystem::lipschitz() const {
    if (lipschitz_supplied_) return lipschitz_;
    std::call_once(lipschitz_cache_->once, [this] { lipschitz_cache_->value = estimate_lipschitz(*this); });
    return lipschitz_cache_->value;
}

struct SystemCheck {
    std::optional<double> inverse_error;   // max |f(f^-1(x)) - x| on the sample grid
    std::optional<double> jacobian_error;  // max entrywise |J - J_fd|
    bool inverse_ok = true;
    bool jacobian_ok = true;
};

/// Checks the inverse and Jacobian invariants on a ~10^3-point grid.
inline SystemCheck check_system(const MapSystem& sys, const Tolerances& tol = {}) {
    SystemCheck out;
    const int per_axis = detail::grid_per_axis(sys.dimension(), 1000);
    if (sys.has_inverse()) {
        double worst = 0.0;
        detail::for_each_grid_point(sys.domain(), per_axis, [&](const Vec& x) {
            const Vec back = sys.domain().wrap(sys.forward_raw(sys.domain().wrap(sys.inverse_raw(x))));
            worst = std::max(worst, sys.domain().distance(back, x));
        });
        out.inverse_error = worst;
        out.inverse_ok = worst < tol.inverse;
    }
    if (sys.has_jacobian()) {
        double worst = 0.0;
        detail::for_each_grid_point(sys.domain(), per_axis, [&](const Vec& x) {
            const Mat diff = *sys.explicit_jacobian(x) - finite_difference_jacobian(sys, x, tol.fd_step);
            worst = std::max(worst, diff.cwiseAbs().maxCoeff());
        });
        out.jacobian_error = worst;
        out.jacobian_ok = worst < tol.jacobian;
    }
    return out;
}

}  // namespace mixdec

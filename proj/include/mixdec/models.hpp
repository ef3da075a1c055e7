#pragma once

// Built-in model systems as expression configs, so they can be written out
// and reloaded like any user config.

#include "mixdec/config.hpp"

#include <sstream>
#include <string>
#include <vector>

namespace mixdec::models {

namespace detail {
inline std::string num(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}
}  // namespace detail

/// x -> 2x mod 1 on the circle.
inline SystemConfig doubling() {
    SystemConfig sc;
    sc.domain = Domain::torus(1);
    sc.map = {"mod(2*x1, 1)"};
    sc.jacobian = {{"2"}};
    sc.lipschitz = 2.0;
    return sc;
}

/// x -> x + rho mod 1.
inline SystemConfig rotation(double rho) {
    SystemConfig sc;
    sc.domain = Domain::torus(1);
    sc.map = {"mod(x1 + " + detail::num(rho) + ", 1)"};
    sc.inverse = {"mod(x1 - " + detail::num(rho) + ", 1)"};
    sc.jacobian = {{"1"}};
    sc.lipschitz = 1.0;
    return sc;
}

/// Two half-circles exchanged: [0,1/2) is translated onto [1/2,1), which is
/// folded back onto [0,1/2] three times (slope 3), so f^2 expands on each half.
inline SystemConfig swap() {
    SystemConfig sc;
    sc.domain = Domain::torus(1);
    sc.map = {"(1 - floor(2*x1))*(x1 + 0.5) + floor(2*x1)*abs(mod(6*(x1 - 0.5) + 1, 2) - 1)/2"};
    sc.lipschitz = 3.0;
    return sc;
}

/// Arnold's cat map [[2,1],[1,1]] on the 2-torus.
inline SystemConfig cat() {
    SystemConfig sc;
    sc.domain = Domain::torus(2);
    sc.map = {"mod(2*x1 + x2, 1)", "mod(x1 + x2, 1)"};
    sc.inverse = {"mod(x1 - x2, 1)", "mod(2*x2 - x1, 1)"};
    sc.jacobian = {{"2", "1"}, {"1", "1"}};
    sc.lipschitz = 2.618033988749895;
    return sc;
}

/// Chirikov standard map (x' = x + y', y' = y + k/(2 pi) sin 2 pi x) on the 2-torus.
inline SystemConfig standard(double k) {
    const std::string c = detail::num(k / (2.0 * 3.141592653589793));
    SystemConfig sc;
    sc.domain = Domain::torus(2);
    sc.map = {"mod(x1 + x2 + " + c + "*sin(2*pi*x1), 1)", "mod(x2 + " + c + "*sin(2*pi*x1), 1)"};
    sc.inverse = {"mod(x1 - x2, 1)", "mod(x2 - " + c + "*sin(2*pi*(x1 - x2)), 1)"};
    const std::string dk = detail::num(k) + "*cos(2*pi*x1)";
    sc.jacobian = {{"1 + " + dk, "1"}, {dk, "1"}};
    return sc;
}

/// Linear saddle (2x, y/2) on [-1,1]^2.
inline SystemConfig saddle() {
    SystemConfig sc;
    sc.domain = Domain({-1.0, -1.0}, {1.0, 1.0}, {false, false});
    sc.map = {"2*x1", "x2/2"};
    sc.inverse = {"x1/2", "2*x2"};
    sc.jacobian = {{"2", "0"}, {"0", "0.5"}};
    sc.lipschitz = 2.0;
    return sc;
}

inline SystemConfig identity(int d) {
    SystemConfig sc;
    sc.domain = Domain::torus(d);
    for (int i = 1; i <= d; ++i) sc.map.push_back("x" + std::to_string(i));
    sc.inverse = sc.map;
    sc.lipschitz = 1.0;
    return sc;
}

/// TOML text that read_system_config parses back into `sc`.
inline std::string to_toml(const SystemConfig& sc) {
    std::ostringstream out;
    out.precision(17);
    const int d = sc.domain.dimension();
    auto strings = [&](const std::vector<std::string>& v) {
        out << '[';
        for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << '"' << v[i] << '"';
        out << ']';
    };
    out << "dimension = " << d << "\n";
    out << "domain = [";
    for (int i = 0; i < d; ++i) out << (i ? ", " : "") << '[' << sc.domain.lo[i] << ", " << sc.domain.hi[i] << ']';
    out << "]\nperiodic = [";
    for (int i = 0; i < d; ++i) out << (i ? ", " : "") << (sc.domain.periodic[i] ? "true" : "false");
    out << "]\nmap = ";
    strings(sc.map);
    out << "\n";
    if (!sc.inverse.empty()) {
        out << "inverse = ";
        strings(sc.inverse);
        out << "\n";
    }
    if (!sc.jacobian.empty()) {
        out << "jacobian = [";
        for (std::size_t i = 0; i < sc.jacobian.size(); ++i) {
            out << (i ? ", " : "");
            strings(sc.jacobian[i]);
        }
        out << "]\n";
    }
    if (sc.lipschitz) out << "lipschitz = " << *sc.lipschitz << "\n";
    if (sc.padding != 1.0) out << "padding = " << sc.padding << "\n";
    return out.str();
}

}  // namespace mixdec::models

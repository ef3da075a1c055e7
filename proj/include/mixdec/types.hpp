#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixdec {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using NodeId = std::int32_t;

/// Error categories map one-to-one onto the CLI exit codes.
enum class ErrorKind {
    usage,        // bad input, bad flags, unparsable config (exit 1)
    computation,  // a module could not produce a result (exit 2)
    certificate,  // a result was produced but failed its certificate (exit 3)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error usage_error(const std::string& what) { return Error(ErrorKind::usage, what); }
inline Error computation_error(const std::string& what) { return Error(ErrorKind::computation, what); }
inline Error certificate_error(const std::string& what) { return Error(ErrorKind::certificate, what); }

/// Numerical constants shared across modules. Reports embed the values in use.
struct Tolerances {
    double inverse = 1e-8;       // |f(f^-1(x)) - x|
    double jacobian = 1e-8;      // analytic vs finite-difference Jacobian
    double fd_step = 1e-6;       // central-difference step
    double orbit = 1e-10;        // periodic-orbit residual
    double unit = 1e-6;          // distance of a multiplier modulus from 1
    int resonance_order = 6;     // K_max for exponent search
    double relation = 1e-9;      // |prod lambda^k - 1|
    double transversality_deg = 5.0;
    double manifold_offset = 1e-6;  // delta_loc
    double manifold_gap = 1e-3;     // h_man
    double manifold_angle_deg = 10.0;
    double lipschitz_safety = 1.5;
};

inline std::int64_t gcd_accumulate(std::int64_t acc, std::int64_t value) {
    return std::gcd(acc, value < 0 ? -value : value);
}

}  // namespace mixdec

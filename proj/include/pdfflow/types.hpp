#pragma once

// Basic value types shared by every pdfflow module.

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

namespace pdfflow {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Root of the pdfflow exception hierarchy.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// NaN/Inf produced while evaluating a model function or integrating a path.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Weight exponent left the representable range.
class OverflowError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Arguments outside an operation's mathematical domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid or inconsistent run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Filesystem failures while writing artifacts.
class IoError : public Error {
public:
    using Error::Error;
};

inline std::string format_vec(const Vec3& v)
{
    std::ostringstream os;
    os.precision(17);
    os << "(" << v[0] << ", " << v[1] << ", " << v[2] << ")";
    return os.str();
}

inline bool all_finite(const Vec3& v) { return v.allFinite(); }
inline bool all_finite(const Mat3& m) { return m.allFinite(); }
inline bool all_finite(double v) { return std::isfinite(v); }

inline Vec3 unit(int k)
{
    Vec3 e = Vec3::Zero();
    e[k] = 1.0;
    return e;
}

} // namespace pdfflow

#pragma once

// Eigen traits for boost's float128 (binary128 via libquadmath). Requires
// GNU extensions (-std=gnu++20) and linking quadmath.

#include <Eigen/Core>
#include <boost/multiprecision/float128.hpp>
#include <limits>

namespace momsos {
using quad = boost::multiprecision::float128;
}

namespace Eigen {

template <>
struct NumTraits<momsos::quad> : GenericNumTraits<momsos::quad> {
  using Real = momsos::quad;
  using NonInteger = momsos::quad;
  using Literal = momsos::quad;
  using Nested = momsos::quad;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 2,
    AddCost = 8,
    MulCost = 16
  };
  static Real epsilon() { return std::numeric_limits<Real>::epsilon(); }
  static Real dummy_precision() { return Real(1e-28); }
  static Real highest() { return (std::numeric_limits<Real>::max)(); }
  static Real lowest() { return std::numeric_limits<Real>::lowest(); }
  static Real infinity() { return std::numeric_limits<Real>::infinity(); }
  static Real quiet_NaN() { return std::numeric_limits<Real>::quiet_NaN(); }
  static int digits10() { return std::numeric_limits<Real>::digits10; }
  static int digits() { return std::numeric_limits<Real>::digits; }
};

}  // namespace Eigen

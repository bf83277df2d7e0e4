#pragma once

#include <vector>

#include "palmer/system.hpp"

namespace palmer {

// Scalar x' = -a x + c e^{-t^2} arctan(x). Requires 4c <= a so the whole
// hypothesis suite is satisfiable. Ships closed-form references.
SystemDef example4(double a = 1.0, double c = 0.2);

// Pure linear system with constant diagonal A and f = 0.
SystemDef linear_diag(const std::vector<double>& diag);

// The same scalar field as example4 but entered as a plain vector field
// g(t,x) and split into A(t) = Dg(t,0), f = g - Dg(t,0) x. The split linear
// part is time varying, so this exercises the whole pipeline on a
// non-autonomous A. Requires 4 c exp(c sqrt(pi)) <= a, which keeps the split
// Lipschitz estimate below the dichotomy threshold (the true sup of the
// split |Df| is c, and the split dichotomy constant is exp(c sqrt(pi))).
SystemDef corollary_example(double a = 1.0, double c = 0.1);

// Two dimensional cross-coupled test system:
//   x1' = -a1 x1 + c e^{-t^2} arctan(x2)
//   x2' = -a2 x2 + c e^{-t^2} arctan(x1)
// Nonzero mixed second derivatives make Hessian symmetry checks meaningful.
SystemDef arctan_cross(double a1 = 1.0, double a2 = 2.0, double c = 0.2);

}  // namespace palmer

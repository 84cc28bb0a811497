#pragma once

#include <array>

namespace saefin::mackinnon {

// MacKinnon, J.G. (1994) "Approximate Asymptotic Distribution Functions for
// Unit-Root and Cointegration Tests", JBES 12(2), response surfaces for the
// tau statistic with a constant ("c"), indexed by the number of I(1) series N.
// Values as tabulated in statsmodels (tsa/adfvalues.py).
struct TauSurface {
  double tau_max;
  double tau_min;
  double tau_star;
  std::array<double, 3> small_p;  // p = Phi(c0 + c1 t + c2 t^2), t <= tau_star
  std::array<double, 4> large_p;  // p = Phi(c0 + c1 t + c2 t^2 + c3 t^3), t > tau_star
};

extern const std::array<TauSurface, 2> kConstantSurfaces;  // N = 1, 2

// MacKinnon (2010) "Critical Values for Cointegration Tests", Queen's
// Economics Department Working Paper 1227: cv(T) = b0 + b1/T + b2/T^2 + b3/T^3
// for the constant case, rows 1%, 5%, 10%.
extern const std::array<std::array<std::array<double, 4>, 3>, 2> kConstantCritical;  // [N-1][level]

}  // namespace saefin::mackinnon

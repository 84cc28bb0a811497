#include "mackinnon_tables.hpp"

namespace saefin::mackinnon {

// small_p is scaled by (1, 1, 1e-2); large_p by (1, 1e-1, 1e-1, 1e-2).
const std::array<TauSurface, 2> kConstantSurfaces{{
    {2.74, -18.83, -1.61, {2.1659, 1.4412, 3.8269e-2}, {1.7339, 0.93202, -0.12745, -0.010368}},
    {0.92, -18.86, -2.62, {2.92, 1.5012, 3.9796e-2}, {2.1945, 0.64695, -0.29198, -0.042377}},
}};

const std::array<std::array<std::array<double, 4>, 3>, 2> kConstantCritical{{
    {{{-3.43035, -6.5393, -16.786, -79.433},
      {-2.86154, -2.8903, -4.234, -40.040},
      {-2.56677, -1.5384, -2.809, 0.0}}},
    {{{-3.89644, -10.9519, -33.527, 0.0},
      {-3.33613, -6.1101, -6.823, 0.0},
      {-3.04445, -4.2412, -2.720, 0.0}}},
}};

}  // namespace saefin::mackinnon

#pragma once

// Rooms whose ceiling is tilted about the x axis: x and y wall pairs stay
// parallel, the z pair does not. Arrivals come from mirror_unfolding and are
// labelled by the walls they bounce off, giving a classification built
// outside the library.

#include <cmath>
#include <random>

#include "mirror_unfolding.hpp"
#include "roomest/reflection_classifier.hpp"

namespace oracle {

struct SlopedCase {
  P3 dims;  // z extent measured at the room centre line
  P3 source;
  P3 receiver;
  double tilt = 0.0;  // radians
  std::vector<Plane> walls;
  roomest::ClassifiedReflections cls;
};

inline SlopedCase make_sloped_case(std::mt19937_64& rng, double c, double tol) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  SlopedCase sc;
  sc.dims = {between(2.0, 4.0), between(5.0, 10.0), between(7.0, 11.0)};
  sc.tilt = between(0.08, 0.3) * (u01(rng) < 0.5 ? -1.0 : 1.0);

  std::array<double, 6> betas;
  for (double& b : betas) b = between(0.3, 1.0);
  sc.walls = shoebox(sc.dims, betas);
  // ceiling rotated about the line y = Ly/2, z = Lz
  const P3 n{0.0, -std::sin(sc.tilt), std::cos(sc.tilt)};
  sc.walls[5].normal = n;
  sc.walls[5].offset = n[1] * 0.5 * sc.dims[1] + n[2] * sc.dims[2];

  auto inside = [&](const P3& p) {
    return dot(n, p) < sc.walls[5].offset - 0.1;
  };
  auto place = [&] {
    for (;;) {
      P3 p{between(0.1, sc.dims[0] - 0.1), between(0.1, sc.dims[1] - 0.1),
           between(0.1, sc.dims[2] - 0.1)};
      if (inside(p)) return p;
    }
  };
  sc.source = place();
  sc.receiver = place();

  auto axis_of = [](int wall) { return wall / 2; };
  sc.cls.c = c;
  sc.cls.tol = tol;
  for (const Arrival& a : unfold(sc.walls, sc.source, sc.receiver)) {
    const roomest::PathEntry e{a.d, a.amplitude};
    if (a.walls.empty()) {
      sc.cls.d0 = e;
    } else if (a.walls.size() == 1) {
      sc.cls.first_order[axis_of(a.walls[0])].push_back(e);
    } else if (axis_of(a.walls[0]) == axis_of(a.walls[1])) {
      sc.cls.s2_single.push_back(e);
    } else {
      sc.cls.s2_multi.push_back(e);
    }
  }
  return sc;
}

}  // namespace oracle

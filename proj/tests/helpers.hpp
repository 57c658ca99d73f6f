#pragma once

#include <optional>

#include "fenn/space.hpp"

namespace fenn::testing {

inline DomainSpec make_domain(double width, double height, int resolution,
                              std::optional<Rect> obstacle = std::nullopt) {
  DomainSpec spec;
  spec.width = width;
  spec.height = height;
  spec.resolution = resolution;
  spec.obstacle = obstacle;
  return spec;
}

/// 5 x 5 channel with a unit obstacle at (2,2)-(3,3), the standard desk mesh.
inline DomainSpec desk_domain(int resolution = 2) {
  return make_domain(5, 5, resolution, Rect{2, 2, 3, 3});
}

inline TaylorHoodSpace desk_space(int resolution = 2) {
  return build_space(generate_structured(desk_domain(resolution)));
}

}  // namespace fenn::testing

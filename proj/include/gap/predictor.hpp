#pragma once

#include "gap/core.hpp"

namespace gap {

// Anything that maps a photon canvas to a next-photon probability map: the
// learned network, or the exact oracle over a finite prior.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual NormalizedDistribution predict(const PhotonImage& img) const = 0;
};

}  // namespace gap

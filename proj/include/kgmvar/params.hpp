#pragma once

#include <cmath>
#include <numbers>

#include "kgmvar/errors.hpp"

namespace kgmvar {

/// Mass, frequency and coupling of the standing-wave ansatz.
struct PhysicalParams {
    double m = 1.0;
    double omega = 0.0;
    double q = 0.1;

    void validate() const {
        if (!(m > 0.0) || !std::isfinite(m)) {
            throw ConfigError("params.m: must be > 0");
        }
        if (!std::isfinite(omega)) {
            throw ConfigError("params.omega: must be finite");
        }
        if (!std::isfinite(q)) {
            throw ConfigError("params.q: must be finite");
        }
    }
};

/// sqrt(4 pi), the matter-field scale of the change of variables.
inline const double sqrt_4pi = std::sqrt(4.0 * std::numbers::pi);

}  // namespace kgmvar

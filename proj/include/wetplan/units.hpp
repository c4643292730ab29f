#pragma once

#include <cmath>

// All internal quantities are watts/joules/seconds/radians; dBm conversions
// exist for the CLI boundary only.

namespace wetplan {

inline double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

inline double watts_to_dbm(double watts) { return 10.0 * std::log10(watts / 1e-3); }

}  // namespace wetplan

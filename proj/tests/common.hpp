#pragma once

#include "dcgrid/network.hpp"

namespace fixtures {

// Converter of the first node in the bundled six-node scenario.
inline dcgrid::ConverterParams converter() {
    dcgrid::ConverterParams p;
    p.inductance = 1.8e-3;
    p.resistance = 0.2;
    p.capacitance = 20e-3;
    p.v_in = 800.0;
    p.i_max = 178.7;
    p.k_p = 2.0;
    p.k_i = 500.0;
    p.v_lower = 240.0;
    p.v_upper = 800.0;
    return p;
}

inline std::string scenario(const char* file) { return std::string(DCGRID_SCENARIO_DIR) + "/" + file; }

}  // namespace fixtures

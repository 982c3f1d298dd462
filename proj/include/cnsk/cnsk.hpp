#pragma once
// Umbrella header for the whole library.

#include "cnsk/numerics.hpp"
#include "cnsk/quadrature.hpp"
#include "cnsk/params.hpp"
#include "cnsk/spectral_field.hpp"
#include "cnsk/phi_functions.hpp"
#include "cnsk/linear_propagator.hpp"
#include "cnsk/initial_data.hpp"
#include "cnsk/green_kernels.hpp"
#include "cnsk/nonlinear_solver.hpp"
#include "cnsk/decay_series.hpp"
#include "cnsk/decay_harness.hpp"
#include "cnsk/config.hpp"

namespace cnsk {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cnsk

#pragma once

// Numerical core. experiment.hpp (the run_experiment driver) is separate because it
// needs OpenSSL for manifest hashes.

#include "specrecon/config.hpp"
#include "specrecon/ensemble.hpp"
#include "specrecon/error.hpp"
#include "specrecon/gaussian_lab.hpp"
#include "specrecon/mp_reference.hpp"
#include "specrecon/parallel.hpp"
#include "specrecon/random.hpp"
#include "specrecon/reconstruct.hpp"
#include "specrecon/secular.hpp"
#include "specrecon/spectrum.hpp"
#include "specrecon/svg_plot.hpp"

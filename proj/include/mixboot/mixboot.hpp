#pragma once

// Umbrella header.

#include "mixboot/bootstrap.hpp"
#include "mixboot/config.hpp"
#include "mixboot/digest.hpp"
#include "mixboot/errors.hpp"
#include "mixboot/estimators.hpp"
#include "mixboot/io.hpp"
#include "mixboot/kernels.hpp"
#include "mixboot/mixing.hpp"
#include "mixboot/numeric.hpp"
#include "mixboot/pipeline.hpp"
#include "mixboot/random.hpp"

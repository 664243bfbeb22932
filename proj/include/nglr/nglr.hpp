#pragma once

#include "nglr/baseline.hpp"
#include "nglr/common.hpp"
#include "nglr/dataset.hpp"
#include "nglr/dimension.hpp"
#include "nglr/glr_test.hpp"
#include "nglr/kernel.hpp"
#include "nglr/null_model.hpp"
#include "nglr/rng.hpp"
#include "nglr/simulation.hpp"
#include "nglr/smoother.hpp"

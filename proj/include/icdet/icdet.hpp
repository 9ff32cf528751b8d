#pragma once

// Umbrella header for the whole toolkit.

#include "icdet/core.hpp"
#include "icdet/rng.hpp"
#include "icdet/fft.hpp"
#include "icdet/io.hpp"
#include "icdet/dsp.hpp"
#include "icdet/features.hpp"
#include "icdet/cva.hpp"
#include "icdet/classifier.hpp"
#include "icdet/decision.hpp"
#include "icdet/labeling.hpp"
#include "icdet/simgen.hpp"
#include "icdet/eval.hpp"
#include "icdet/pipeline.hpp"
#include "icdet/commands.hpp"

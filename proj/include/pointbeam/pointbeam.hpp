#pragma once

// Umbrella header: distributed-microphone beamforming with blind,
// beacon-referenced alignment, an acoustic scene simulator, and the
// evaluation experiment drivers.

#include "pointbeam/beamform.hpp"
#include "pointbeam/chirp_detect.hpp"
#include "pointbeam/coarse_align.hpp"
#include "pointbeam/error.hpp"
#include "pointbeam/experiments.hpp"
#include "pointbeam/fine_align.hpp"
#include "pointbeam/geometry.hpp"
#include "pointbeam/json_out.hpp"
#include "pointbeam/montecarlo.hpp"
#include "pointbeam/rng.hpp"
#include "pointbeam/scenario_io.hpp"
#include "pointbeam/scene.hpp"
#include "pointbeam/signal.hpp"
#include "pointbeam/wav.hpp"

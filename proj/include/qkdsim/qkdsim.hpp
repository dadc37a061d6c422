#pragma once

// Convenience umbrella: the full simulator and analysis surface.

#include "analysis.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "homodyne.hpp"
#include "keyrate.hpp"
#include "link.hpp"
#include "modulation.hpp"
#include "optics.hpp"
#include "rng.hpp"
#include "scenario.hpp"

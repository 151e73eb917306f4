#pragma once

// Umbrella header for the jmfbm pricing library.

#include "compound.hpp"   // IWYU pragma: export
#include "extendible.hpp" // IWYU pragma: export
#include "mc.hpp"         // IWYU pragma: export
#include "model.hpp"      // IWYU pragma: export
#include "normal.hpp"     // IWYU pragma: export
#include "root_finding.hpp" // IWYU pragma: export
#include "vanilla.hpp"    // IWYU pragma: export

#pragma once

#include "core.hpp"
#include "spectra.hpp"
#include "conditional.hpp"
#include "verification.hpp"
#include "trajectory.hpp"
#include "control.hpp"
#include "protocols.hpp"
#include "mqm.hpp"

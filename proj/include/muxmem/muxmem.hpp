#pragma once

#include "cavity.hpp"
#include "config.hpp"
#include "constants.hpp"
#include "ensemble.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "protocol.hpp"
#include "repeater.hpp"
#include "scenarios.hpp"
#include "timeline.hpp"

#pragma once

#include "towgame/config.hpp"
#include "towgame/domain.hpp"
#include "towgame/dpp.hpp"
#include "towgame/expansion.hpp"
#include "towgame/experiments.hpp"
#include "towgame/field.hpp"
#include "towgame/game.hpp"
#include "towgame/oracles.hpp"
#include "towgame/params.hpp"
#include "towgame/payoff.hpp"
#include "towgame/rng.hpp"
#include "towgame/vec.hpp"

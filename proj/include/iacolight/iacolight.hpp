#pragma once

#include "iacolight/core/error.hpp"
#include "iacolight/core/random.hpp"
#include "iacolight/core/text.hpp"
#include "iacolight/core/version.hpp"
#include "iacolight/sim/road_network.hpp"
#include "iacolight/sim/signal.hpp"
#include "iacolight/sim/flow.hpp"
#include "iacolight/sim/simulation.hpp"
#include "iacolight/io/network_io.hpp"
#include "iacolight/nn/params.hpp"
#include "iacolight/nn/dense.hpp"
#include "iacolight/nn/gat.hpp"
#include "iacolight/nn/q_network.hpp"
#include "iacolight/nn/adam.hpp"
#include "iacolight/nn/checkpoint.hpp"
#include "iacolight/rl/agent.hpp"
#include "iacolight/ia/shaping.hpp"
#include "iacolight/experiment/config.hpp"
#include "iacolight/experiment/metrics.hpp"
#include "iacolight/experiment/runner.hpp"
#include "iacolight/sweep/sweep.hpp"

#pragma once

// Everything in one include.

#include "esdrl/checkpoint.hpp"
#include "esdrl/ddpg.hpp"
#include "esdrl/es_control.hpp"
#include "esdrl/experiments.hpp"
#include "esdrl/hybrid.hpp"
#include "esdrl/io/config.hpp"
#include "esdrl/io/run_log.hpp"
#include "esdrl/kv_env.hpp"
#include "esdrl/kv_sim.hpp"
#include "esdrl/nnet.hpp"
#include "esdrl/ode.hpp"
#include "esdrl/optim.hpp"
#include "esdrl/reward.hpp"
#include "esdrl/train.hpp"

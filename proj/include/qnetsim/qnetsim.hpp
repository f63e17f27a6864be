#pragma once

#include "qnetsim/event_engine.hpp"
#include "qnetsim/gem.hpp"
#include "qnetsim/harness.hpp"
#include "qnetsim/link_layer.hpp"
#include "qnetsim/messages.hpp"
#include "qnetsim/network_sim.hpp"
#include "qnetsim/params.hpp"
#include "qnetsim/planner.hpp"
#include "qnetsim/qstate.hpp"
#include "qnetsim/rng.hpp"
#include "qnetsim/sim_time.hpp"
#include "qnetsim/swap_policy.hpp"
#include "qnetsim/swap_tree.hpp"
#include "qnetsim/topology.hpp"
#include "qnetsim/trace.hpp"
#include "qnetsim/transport.hpp"
#include "qnetsim/types.hpp"
#include "qnetsim/workload.hpp"

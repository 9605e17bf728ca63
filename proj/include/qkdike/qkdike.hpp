#pragma once

#include "qkdike/algo_registry.hpp"
#include "qkdike/bench.hpp"
#include "qkdike/bytes.hpp"
#include "qkdike/error.hpp"
#include "qkdike/etsi_adapter.hpp"
#include "qkdike/ike_engine.hpp"
#include "qkdike/ke_method.hpp"
#include "qkdike/kme_sim.hpp"
#include "qkdike/netsim.hpp"
#include "qkdike/proposal.hpp"
#include "qkdike/sha256.hpp"

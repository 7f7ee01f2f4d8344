#pragma once

// Umbrella header for the ISF latent-editing framework.

#include "isf/adam.hpp"
#include "isf/common.hpp"
#include "isf/config.hpp"
#include "isf/critic.hpp"
#include "isf/dataset.hpp"
#include "isf/editing.hpp"
#include "isf/evaluation.hpp"
#include "isf/handles.hpp"
#include "isf/isf_net.hpp"
#include "isf/metrics.hpp"
#include "isf/mlp.hpp"
#include "isf/objectives.hpp"
#include "isf/params_io.hpp"
#include "isf/png.hpp"
#include "isf/registry.hpp"
#include "isf/rng.hpp"
#include "isf/sha256.hpp"
#include "isf/toy.hpp"
#include "isf/trainer.hpp"
#include "isf/types.hpp"

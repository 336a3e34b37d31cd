// Umbrella header.
#pragma once

#include "leaf/agent.hpp"
#include "leaf/analysis.hpp"
#include "leaf/checkpoint.hpp"
#include "leaf/config.hpp"
#include "leaf/core.hpp"
#include "leaf/env.hpp"
#include "leaf/frontier.hpp"
#include "leaf/io.hpp"
#include "leaf/latent.hpp"
#include "leaf/nn.hpp"
#include "leaf/reachnet.hpp"

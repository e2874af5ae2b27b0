#pragma once

#include "causal_ops/error.hpp"
#include "causal_ops/geometry.hpp"
#include "causal_ops/quantum.hpp"
#include "causal_ops/hybrid.hpp"
#include "causal_ops/fv.hpp"
#include "causal_ops/causality.hpp"
#include "causal_ops/scenario.hpp"
#include "causal_ops/render.hpp"
#include "causal_ops/commands.hpp"

#pragma once
// Umbrella header for the relevance-ensemble library.

#include "relens/candidates.hpp"
#include "relens/core.hpp"
#include "relens/denoiser.hpp"
#include "relens/eval.hpp"
#include "relens/gbdt.hpp"
#include "relens/gnn.hpp"
#include "relens/graphstore.hpp"
#include "relens/pipeline.hpp"
#include "relens/selection.hpp"
#include "relens/semantic.hpp"
#include "relens/shap.hpp"
#include "relens/synth.hpp"

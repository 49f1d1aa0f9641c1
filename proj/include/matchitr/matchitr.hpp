#pragma once

// Umbrella header: individualized treatment rules for multi-arm observational
// data via matching-weighted multicategory angle-based SVM, with
// random-survival-forest imputation for right-censored outcomes.

#include "matchitr/random.hpp"
#include "matchitr/dataset.hpp"
#include "matchitr/standardize.hpp"
#include "matchitr/multinomial.hpp"
#include "matchitr/matching.hpp"
#include "matchitr/labeling.hpp"
#include "matchitr/ramsvm.hpp"
#include "matchitr/survival.hpp"
#include "matchitr/evaluation.hpp"
#include "matchitr/simulation.hpp"
#include "matchitr/pipeline.hpp"
#include "matchitr/experiment.hpp"
#include "matchitr/io_json.hpp"

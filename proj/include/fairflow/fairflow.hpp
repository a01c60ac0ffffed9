#pragma once

// Umbrella header: pulls in the whole library.

#include "fairflow/analysis.hpp"
#include "fairflow/audit.hpp"
#include "fairflow/errors.hpp"
#include "fairflow/experiment.hpp"
#include "fairflow/hyperopt.hpp"
#include "fairflow/matrix.hpp"
#include "fairflow/methods.hpp"
#include "fairflow/parquet.hpp"
#include "fairflow/prng.hpp"
#include "fairflow/render.hpp"
#include "fairflow/tabular.hpp"
#include "fairflow/yaml.hpp"

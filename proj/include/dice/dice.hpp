#pragma once

#include "dice/autograd.hpp"
#include "dice/baselines.hpp"
#include "dice/cluster.hpp"
#include "dice/cohort.hpp"
#include "dice/common.hpp"
#include "dice/csv.hpp"
#include "dice/evaluation.hpp"
#include "dice/optim.hpp"
#include "dice/pipeline.hpp"
#include "dice/report.hpp"
#include "dice/representation.hpp"
#include "dice/rng.hpp"
#include "dice/search.hpp"
#include "dice/serialize.hpp"
#include "dice/significance.hpp"
#include "dice/stats.hpp"
#include "dice/tensor.hpp"
#include "dice/trainer.hpp"

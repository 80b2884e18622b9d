#pragma once

#include "kdlab/backtest_env.hpp"
#include "kdlab/baselines.hpp"
#include "kdlab/date.hpp"
#include "kdlab/error.hpp"
#include "kdlab/evaluate.hpp"
#include "kdlab/kd_ddpg.hpp"
#include "kdlab/market_data.hpp"
#include "kdlab/markowitz.hpp"
#include "kdlab/metrics.hpp"
#include "kdlab/nn.hpp"
#include "kdlab/simplex.hpp"

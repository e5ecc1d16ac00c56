#pragma once

#include "tscn/basemodel.hpp"
#include "tscn/consensus.hpp"
#include "tscn/errors.hpp"
#include "tscn/evaluation.hpp"
#include "tscn/localization.hpp"
#include "tscn/losses.hpp"
#include "tscn/numkit.hpp"
#include "tscn/pipeline.hpp"
#include "tscn/plotting.hpp"
#include "tscn/random.hpp"
#include "tscn/run_config.hpp"
#include "tscn/synthdata.hpp"

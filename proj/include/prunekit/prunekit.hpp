#pragma once

#include "prunekit/arch.hpp"
#include "prunekit/checkpoint.hpp"
#include "prunekit/compactor.hpp"
#include "prunekit/config.hpp"
#include "prunekit/dataset.hpp"
#include "prunekit/errors.hpp"
#include "prunekit/flops.hpp"
#include "prunekit/masks.hpp"
#include "prunekit/model.hpp"
#include "prunekit/ops.hpp"
#include "prunekit/schedule.hpp"
#include "prunekit/sgd.hpp"
#include "prunekit/tensor.hpp"
#include "prunekit/trainer.hpp"

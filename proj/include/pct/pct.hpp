// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pct/errors.hpp"
#include "pct/tensor.hpp"
#include "pct/ops.hpp"
#include "pct/layers.hpp"
#include "pct/gradcheck.hpp"
#include "pct/point_cloud.hpp"
#include "pct/sampling.hpp"
#include "pct/sg_layer.hpp"
#include "pct/augment.hpp"
#include "pct/attention.hpp"
#include "pct/attention_export.hpp"
#include "pct/encoder.hpp"
#include "pct/heads.hpp"
#include "pct/losses.hpp"
#include "pct/metrics.hpp"
#include "pct/model.hpp"
#include "pct/optim.hpp"
#include "pct/checkpoint.hpp"
#include "pct/shapes.hpp"
#include "pct/point_io.hpp"
#include "pct/dataset.hpp"
#include "pct/trainer.hpp"
#include "pct/grad_suites.hpp"
#include "pct/run_config.hpp"

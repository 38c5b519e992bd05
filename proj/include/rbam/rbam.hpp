#pragma once

#include "rbam/errors.hpp"
#include "rbam/tensor.hpp"
#include "rbam/nn_ops.hpp"
#include "rbam/random.hpp"
#include "rbam/rbam_net.hpp"
#include "rbam/image.hpp"
#include "rbam/optim.hpp"
#include "rbam/checkpoint.hpp"
#include "rbam/train.hpp"
#include "rbam/metrics.hpp"
#include "rbam/datakit.hpp"
#include "rbam/config.hpp"
#include "rbam/gradcheck.hpp"
#include "rbam/synthetic.hpp"
#include "rbam/ablation.hpp"

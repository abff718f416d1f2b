#pragma once

// Convenience include for the whole library.

#include "sgm/error.hpp"
#include "sgm/rng.hpp"
#include "sgm/tensor.hpp"
#include "sgm/partition.hpp"
#include "sgm/layer.hpp"
#include "sgm/oracle.hpp"
#include "sgm/model.hpp"
#include "sgm/synthdata.hpp"
#include "sgm/train.hpp"
#include "sgm/ablation.hpp"

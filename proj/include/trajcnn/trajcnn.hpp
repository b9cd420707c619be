#pragma once

// Umbrella header.

#include "trajcnn/baselines.hpp"
#include "trajcnn/bench.hpp"
#include "trajcnn/checkpoint.hpp"
#include "trajcnn/data.hpp"
#include "trajcnn/kernels.hpp"
#include "trajcnn/metrics.hpp"
#include "trajcnn/model.hpp"
#include "trajcnn/optim.hpp"
#include "trajcnn/tensor.hpp"
#include "trajcnn/train.hpp"
#include "trajcnn/trajectory.hpp"

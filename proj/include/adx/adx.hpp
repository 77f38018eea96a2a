#pragma once

#include "adx/audio/wav.hpp"
#include "adx/core/error.hpp"
#include "adx/core/random.hpp"
#include "adx/core/tensor.hpp"
#include "adx/core/text.hpp"
#include "adx/data/io.hpp"
#include "adx/data/prepare.hpp"
#include "adx/data/sample.hpp"
#include "adx/data/synthetic.hpp"
#include "adx/nn/checkpoint.hpp"
#include "adx/nn/layers.hpp"
#include "adx/nn/model.hpp"
#include "adx/nn/params.hpp"
#include "adx/optim/adamw.hpp"
#include "adx/optim/loss.hpp"
#include "adx/pipeline/evaluate.hpp"
#include "adx/pipeline/finetune.hpp"
#include "adx/pipeline/mixed_batches.hpp"
#include "adx/pipeline/predict.hpp"
#include "adx/pipeline/pretrain.hpp"
#include "adx/pipeline/trainer.hpp"

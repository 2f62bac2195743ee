#pragma once

#include "jerx/checkpoint.hpp"
#include "jerx/config.hpp"
#include "jerx/corpus.hpp"
#include "jerx/encoder.hpp"
#include "jerx/error.hpp"
#include "jerx/eval.hpp"
#include "jerx/heatmap.hpp"
#include "jerx/jerxemb.hpp"
#include "jerx/model.hpp"
#include "jerx/ner.hpp"
#include "jerx/re.hpp"
#include "jerx/rng.hpp"
#include "jerx/synthetic.hpp"
#include "jerx/tensor.hpp"
#include "jerx/training.hpp"

#pragma once

// Umbrella header for the sufisent library: suffix-window sentence encoders
// with max-pooling, an NLI training pipeline, and the reverse-mode tape that
// drives both.

#include "sufisent/checkpoint.hpp"
#include "sufisent/data.hpp"
#include "sufisent/encoder.hpp"
#include "sufisent/eval.hpp"
#include "sufisent/gradcheck.hpp"
#include "sufisent/graph.hpp"
#include "sufisent/lstm.hpp"
#include "sufisent/model.hpp"
#include "sufisent/nli.hpp"
#include "sufisent/numarray.hpp"
#include "sufisent/rng.hpp"
#include "sufisent/train.hpp"

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "detectlab/adapters.hpp"
#include "detectlab/bridge.hpp"
#include "detectlab/detectors.hpp"
#include "detectlab/distribution.hpp"
#include "detectlab/diversity.hpp"
#include "detectlab/errors.hpp"
#include "detectlab/eval.hpp"
#include "detectlab/generate.hpp"
#include "detectlab/ngram.hpp"
#include "detectlab/parallel.hpp"
#include "detectlab/provider.hpp"
#include "detectlab/rng.hpp"
#include "detectlab/tokenizer.hpp"

#pragma once

#include "segtrain/config.hpp"
#include "segtrain/corpus.hpp"
#include "segtrain/error.hpp"
#include "segtrain/eval.hpp"
#include "segtrain/io.hpp"
#include "segtrain/pipeline.hpp"
#include "segtrain/ranking.hpp"
#include "segtrain/scorer.hpp"
#include "segtrain/selection.hpp"
#include "segtrain/synth.hpp"
#include "segtrain/training.hpp"

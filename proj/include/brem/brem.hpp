#pragma once

#include "brem/anchor_sampling.hpp"
#include "brem/dataset.hpp"
#include "brem/evaluation.hpp"
#include "brem/experiments.hpp"
#include "brem/gradcheck.hpp"
#include "brem/inference.hpp"
#include "brem/interval.hpp"
#include "brem/io.hpp"
#include "brem/losses.hpp"
#include "brem/matrix.hpp"
#include "brem/quality_maps.hpp"
#include "brem/random.hpp"
#include "brem/stats.hpp"
#include "brem/synthetic.hpp"

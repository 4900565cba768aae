#pragma once

// Graph topology identification by matching the sample covariance to the
// covariance implied by a linear structural model, for undirected, acyclic
// and cyclic directed graphs.

#include "covmatch/baseline.hpp"
#include "covmatch/directed.hpp"
#include "covmatch/errors.hpp"
#include "covmatch/experiment.hpp"
#include "covmatch/graph_gen.hpp"
#include "covmatch/gso.hpp"
#include "covmatch/io.hpp"
#include "covmatch/rng.hpp"
#include "covmatch/sem.hpp"
#include "covmatch/spectral.hpp"
#include "covmatch/undirected.hpp"

#pragma once

#include "exlasso/baselines.hpp"
#include "exlasso/design_matrix.hpp"
#include "exlasso/io.hpp"
#include "exlasso/loss.hpp"
#include "exlasso/partition.hpp"
#include "exlasso/ppdna.hpp"
#include "exlasso/problem.hpp"
#include "exlasso/prox.hpp"
#include "exlasso/sieving.hpp"
#include "exlasso/ssn.hpp"
#include "exlasso/synthetic.hpp"
#include "exlasso/types.hpp"

#pragma once

#include "activation.hpp"
#include "csv.hpp"
#include "diagnostics.hpp"
#include "experiment.hpp"
#include "matrix.hpp"
#include "network.hpp"
#include "qr_haar.hpp"
#include "quadrature.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "spectral.hpp"
#include "svg.hpp"
#include "training.hpp"

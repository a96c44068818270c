#pragma once

#include "gncpose/errors.hpp"
#include "gncpose/types.hpp"
#include "gncpose/projection.hpp"
#include "gncpose/robust_loss.hpp"
#include "gncpose/geom_weight.hpp"
#include "gncpose/random.hpp"
#include "gncpose/pnp.hpp"
#include "gncpose/gnc.hpp"
#include "gncpose/metrics.hpp"
#include "gncpose/synth.hpp"
#include "gncpose/io.hpp"
#include "gncpose/experiment.hpp"

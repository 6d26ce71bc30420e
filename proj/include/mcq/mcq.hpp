#pragma once

#include "mcq/cascade.hpp"
#include "mcq/codec.hpp"
#include "mcq/container.hpp"
#include "mcq/entropy.hpp"
#include "mcq/image.hpp"
#include "mcq/metrics.hpp"
#include "mcq/model_spec.hpp"
#include "mcq/quantizer.hpp"
#include "mcq/studies.hpp"
#include "mcq/synthetic.hpp"
#include "mcq/trainer.hpp"
#include "mcq/transform.hpp"

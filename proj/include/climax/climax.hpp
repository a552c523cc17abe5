#ifndef CLIMAX_CLIMAX_HPP
#define CLIMAX_CLIMAX_HPP

#include "climax/blackbox.hpp"
#include "climax/dataset.hpp"
#include "climax/evaluation.hpp"
#include "climax/explainers.hpp"
#include "climax/external_model.hpp"
#include "climax/influence.hpp"
#include "climax/pipeline.hpp"
#include "climax/surrogate.hpp"
#include "climax/svg.hpp"

#endif  // CLIMAX_CLIMAX_HPP

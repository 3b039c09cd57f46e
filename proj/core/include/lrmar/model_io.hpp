#ifndef LRMAR_MODEL_IO_HPP
#define LRMAR_MODEL_IO_HPP

#include <string>

#include "lrmar/posteriors.hpp"
#include "lrmar/wcca.hpp"

namespace lrmar
{

// JSON persistence for fitted models. Numbers survive a save/load round
// trip exactly and key order is fixed, so rewriting an unchanged model is
// byte-identical. Files carry a format tag ("lrmar-model-v1",
// "lrmar-wcca-v1"); loading anything else fails fast with a
// ValidationError. The latent trajectory is not stored: transform()
// recomputes it from the saved parameters.

void save_model(const std::string& path, const FittedModel& model);
FittedModel load_model(const std::string& path);

void save_wcca_model(const std::string& path, const wcca::WccaModel& model);
wcca::WccaModel load_wcca_model(const std::string& path);

// Peeks at the format tag of a model file ("" when absent).
std::string model_format(const std::string& path);

} // namespace lrmar

#endif

#pragma once

#include <string>

#include "han/model.hpp"

namespace han {

// Versioned JSON checkpoint: config, vocabulary, label inventories, and
// every parameter as {rows, cols, row-major data}. Round-trip stable
// (save(load(x)) is byte-identical to x).
std::string checkpoint_to_string(const Model& model);
void save_checkpoint(const Model& model, const std::string& path);

Model checkpoint_from_string(const std::string& text, const std::string& origin);
Model load_checkpoint(const std::string& path);

}  // namespace han

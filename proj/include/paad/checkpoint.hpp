#pragma once

#include <string>

#include "paad/model.hpp"

namespace paad {

// Model weights with the full architecture description embedded, so a
// reload rebuilds the exact network and reproduces profiles bit for bit.
// Optimizer moments are not persisted; resuming restarts Adam.

void save_checkpoint(const ModelT<float>& m, const std::string& path);  // IoError

// IoError on magic/version/truncation; ConfigError when the embedded
// architecture is invalid or the tensor table does not match it;
// DimensionError on a shape mismatch. The returned model is in training
// mode, matching a freshly built one.
ModelT<float> load_checkpoint(const std::string& path);

}  // namespace paad

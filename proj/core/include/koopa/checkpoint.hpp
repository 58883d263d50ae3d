#pragma once

#include "koopa/model.hpp"

#include <cstdint>
#include <string>

namespace koopa {

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Serialises config, spectrum mask, scaler and every parameter. The byte
/// layout is documented in docs/checkpoint-format.md.
std::string serialize_model(const KoopaModel& model);
/// Throws IoError on a bad magic, unsupported version, truncated or
/// missing section, or inconsistent tensor shapes.
KoopaModel deserialize_model(const std::string& bytes);

void save_checkpoint(const KoopaModel& model, const std::string& path);
KoopaModel load_checkpoint(const std::string& path);

} // namespace koopa

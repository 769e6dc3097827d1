#pragma once

#include "czhash/encoder.hpp"

#include <nlohmann/json.hpp>

namespace czhash {

nlohmann::json encoder_to_json(const EncoderParams& params);
EncoderParams encoder_from_json(const nlohmann::json& j);

}  // namespace czhash

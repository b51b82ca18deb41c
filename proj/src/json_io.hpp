#pragma once

// Internal JSON helpers shared by the checkpoint writers.

#include <json.hpp>

#include "ppgcn/nn.hpp"

namespace ppgcn::detail {

using ojson = nlohmann::ordered_json;

ojson gcn_json(const GcnParams& params);
GcnParams gcn_from_json_value(const ojson& j);

}  // namespace ppgcn::detail

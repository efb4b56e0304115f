#pragma once

#include "nudgenet/datagen.hpp"
#include "nudgenet/dynamics.hpp"

#include <json.hpp>

namespace nudgenet {

using json = nlohmann::json;

json system_to_json(const SystemSpec& s);
SystemSpec system_from_json(const json& j);

json dataset_meta_to_json(const DatasetMeta& m);
DatasetMeta dataset_meta_from_json(const json& j);

}  // namespace nudgenet

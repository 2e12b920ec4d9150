#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "confgate/json_io.hpp"

namespace confgate::numeric {

// {"format_version":1, "kind":"mlp2"|"bilinear", "shapes":{...},
//  "params":{name: [f32, ...]}, "seed":N, "hyperparams":{...}}
// Parameter arrays are row-major and stored as 32-bit floats.
struct Checkpoint {
    std::string kind;
    FloatJson shapes = FloatJson::object();
    std::vector<std::pair<std::string, std::vector<double>>> params;
    std::uint64_t seed = 0;
    FloatJson hyperparams = FloatJson::object();

    const std::vector<double>& param(std::string_view name) const;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view text);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

} // namespace confgate::numeric

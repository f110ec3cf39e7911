#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "esir/fitline.hpp"
#include "esir/geometry.hpp"

namespace esir {

/// Pose given directly as control-point offsets from the rectified layout.
struct ControlParams {
    int segment_count = 0;    // L
    std::vector<Vec2> delta;  // size 2L

    void validate() const;
};

/// A parameter document in either pose space.
using ParamsFile = std::variant<FitLineParams, ControlParams>;

/// Parses {"space":"fitline", K, L, poly, segments} or
/// {"space":"control", L, delta:[[dx,dy],...]}. A document without "space"
/// that carries the fitline fields is read as fitline.
ParamsFile params_from_json(std::string_view text);

/// Serializes with an explicit "space" field first; fitline payloads keep
/// the K, L, poly, segments field order.
std::string to_json(const ParamsFile& params);

ParamsFile load_params_file(const std::filesystem::path& path);
void save_params_file(const std::filesystem::path& path, const ParamsFile& params);

/// Segment count of either representation.
int segment_count_of(const ParamsFile& params);

/// The 2L control-point offsets this document encodes: control payloads
/// carry them verbatim, fitline payloads are converted through
/// control_offsets.
std::vector<Vec2> control_offsets_of(const ParamsFile& params);

}  // namespace esir

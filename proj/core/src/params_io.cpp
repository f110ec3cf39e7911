#include "esir/params_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "esir/error.hpp"

namespace esir {

namespace {

ControlParams control_from_json(const nlohmann::json& doc) {
    ControlParams p;
    try {
        p.segment_count = doc.at("L").get<int>();
        for (const auto& row : doc.at("delta")) {
            if (!row.is_array() || row.size() != 2)
                throw ArgumentError("each delta entry must be a [dx, dy] pair");
            p.delta.push_back({row[0].get<double>(), row[1].get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(std::string("params JSON: ") + e.what());
    }
    p.validate();
    return p;
}

}  // namespace

void ControlParams::validate() const {
    if (segment_count < 2) throw ArgumentError("control params need L >= 2");
    if (delta.size() != static_cast<std::size_t>(2) * segment_count)
        throw ArgumentError("control params: delta length " + std::to_string(delta.size()) +
                            " does not equal 2L = " + std::to_string(2 * segment_count));
    for (Vec2 d : delta)
        if (!std::isfinite(d.x) || !std::isfinite(d.y))
            throw ArgumentError("control params: non-finite offset");
}

ParamsFile params_from_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("params JSON: ") + e.what(), e.byte);
    }
    if (!doc.is_object()) throw ArgumentError("params JSON: document must be an object");

    std::string space;
    if (doc.contains("space")) {
        try {
            space = doc.at("space").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ArgumentError(std::string("params JSON: ") + e.what());
        }
    } else if (doc.contains("poly") && doc.contains("segments")) {
        space = "fitline";
    } else {
        throw ArgumentError("params JSON: missing \"space\" field");
    }

    if (space == "fitline") return fitline_params_from_json(text);
    if (space == "control") return control_from_json(doc);
    throw ArgumentError("params JSON: unknown space \"" + space + "\"");
}

std::string to_json(const ParamsFile& params) {
    nlohmann::ordered_json doc;
    if (const auto* fl = std::get_if<FitLineParams>(&params)) {
        doc["space"] = "fitline";
        nlohmann::ordered_json body = nlohmann::ordered_json::parse(to_json(*fl));
        for (auto& [key, value] : body.items()) doc[key] = std::move(value);
    } else {
        const auto& cp = std::get<ControlParams>(params);
        doc["space"] = "control";
        doc["L"] = cp.segment_count;
        auto rows = nlohmann::ordered_json::array();
        for (Vec2 d : cp.delta) rows.push_back({d.x, d.y});
        doc["delta"] = std::move(rows);
    }
    return doc.dump();
}

ParamsFile load_params_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return params_from_json(buf.str());
}

void save_params_file(const std::filesystem::path& path, const ParamsFile& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    std::string text = to_json(params) + "\n";
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

int segment_count_of(const ParamsFile& params) {
    if (const auto* fl = std::get_if<FitLineParams>(&params)) return fl->segment_count();
    return std::get<ControlParams>(params).segment_count;
}

std::vector<Vec2> control_offsets_of(const ParamsFile& params) {
    if (const auto* fl = std::get_if<FitLineParams>(&params)) return control_offsets(*fl);
    return std::get<ControlParams>(params).delta;
}

}  // namespace esir

#include "tiledrop/config.hpp"
#include "tiledrop/errors.hpp"
#include "tiledrop/worldgen.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace tiledrop {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json world_body(const World& world)
{
    const auto& cfg = world.config;
    ordered_json doc;
    doc["schema_version"] = kWorldSchemaVersion;
    doc["L"] = cfg.num_classes;
    doc["S"] = cfg.num_subtiles;
    doc["F"] = cfg.num_features;
    doc["G"] = cfg.grid;
    doc["N"] = cfg.num_clusters;
    doc["seed"] = world.seed;
    doc["w_star"] = cfg.w_star;
    doc["gen_config"] = to_json(cfg);
    ordered_json clusters = ordered_json::array();
    for (const auto& cl : world.clusters) {
        ordered_json jc;
        jc["id"] = cl.id;
        jc["lat"] = cl.lat;
        jc["lon"] = cl.lon;
        jc["jitter_km"] = cl.jitter_km;
        jc["y"] = cl.y;
        jc["proxy"] = cl.proxy_layer;
        ordered_json tiles = ordered_json::array();
        for (const auto& t : cl.tiles) {
            ordered_json jt;
            jt["row"] = t.row;
            jt["col"] = t.col;
            jt["lr"] = t.lr_features;
            ordered_json counts = ordered_json::array();
            for (const auto& st : t.subtiles) {
                counts.push_back(st.truth.values);
            }
            jt["counts"] = std::move(counts);
            tiles.push_back(std::move(jt));
        }
        jc["tiles"] = std::move(tiles);
        clusters.push_back(std::move(jc));
    }
    doc["clusters"] = std::move(clusters);
    return doc;
}

template <typename T>
T field(const ordered_json& j, const char* key)
{
    if (!j.contains(key)) {
        throw SchemaError(std::string("world file: missing field '") + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("world file: bad field '") + key + "': " + e.what());
    }
}

}  // namespace

std::string serialize_world(const World& world)
{
    ordered_json doc = world_body(world);
    const std::string canonical = doc.dump();
    doc["crc32"] = crc32_hex(canonical);
    return doc.dump() + "\n";
}

World parse_world(const std::string& text)
{
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("world file: parse error: ") + e.what());
    }
    if (!doc.is_object()) {
        throw SchemaError("world file: top level must be an object");
    }
    if (field<int>(doc, "schema_version") != kWorldSchemaVersion) {
        throw SchemaError("world file: unsupported schema_version");
    }
    const auto stored_crc = field<std::string>(doc, "crc32");
    doc.erase("crc32");
    if (crc32_hex(doc.dump()) != stored_crc) {
        throw SchemaError("world file: checksum mismatch");
    }

    World world;
    try {
        world.config = gen_config_from_json(json::parse(doc.at("gen_config").dump()));
    } catch (const ConfigError& e) {
        throw ValidationError(std::string("world file: ") + e.what());
    }
    world.config = world.config.resolved();
    world.seed = field<std::uint64_t>(doc, "seed");
    const auto& cfg = world.config;
    if (field<int>(doc, "L") != cfg.num_classes || field<int>(doc, "S") != cfg.num_subtiles ||
        field<int>(doc, "F") != cfg.num_features || field<int>(doc, "G") != cfg.grid ||
        field<int>(doc, "N") != cfg.num_clusters) {
        throw ValidationError("world file: header dimensions disagree with gen_config");
    }
    if (field<std::vector<double>>(doc, "w_star") != cfg.w_star) {
        throw ValidationError("world file: w_star disagrees with gen_config");
    }

    for (const auto& jc : doc.at("clusters")) {
        Cluster cl;
        cl.id = field<int>(jc, "id");
        cl.lat = field<double>(jc, "lat");
        cl.lon = field<double>(jc, "lon");
        cl.jitter_km = field<double>(jc, "jitter_km");
        cl.y = field<double>(jc, "y");
        cl.grid = cfg.grid;
        cl.proxy_layer = field<std::vector<double>>(jc, "proxy");
        for (const auto& jt : jc.at("tiles")) {
            Tile t;
            t.cluster_id = cl.id;
            t.row = field<int>(jt, "row");
            t.col = field<int>(jt, "col");
            t.lr_features = field<std::vector<double>>(jt, "lr");
            for (auto& counts : field<std::vector<std::vector<Count>>>(jt, "counts")) {
                t.subtiles.push_back(SubTile{ClassCounts(std::move(counts))});
            }
            cl.tiles.push_back(std::move(t));
        }
        world.clusters.push_back(std::move(cl));
    }
    validate_world(world);
    return world;
}

void save_world(const World& world, const std::filesystem::path& path)
{
    const std::string text = serialize_world(world);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open for writing: " + path.string());
    }
    out << text;
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

World load_world(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open for reading: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_world(buf.str());
}

}  // namespace tiledrop

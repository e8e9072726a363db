#include "dcsep/checkpoint.hpp"

#include <fstream>

#include "dcsep/error.hpp"

namespace dcsep::nn {

using nlohmann::json;

void save_checkpoint(const std::string& stem, const Graph& g, const json& meta) {
  std::ofstream bin(stem + ".bin", std::ios::binary | std::ios::trunc);
  if (!bin) throw IoError("cannot open " + stem + ".bin for writing");

  json manifest;
  manifest["format"] = "dcsep-checkpoint-v1";
  manifest["meta"] = meta;
  json entries = json::array();
  std::uint64_t offset = 0;
  for (NodeId id : g.parameters()) {
    const Node& p = g.node(id);
    json e;
    e["name"] = p.name;
    e["shape"] = p.value.shape();
    e["offset"] = offset;
    entries.push_back(std::move(e));
    bin.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(sizeof(double) * p.value.size()));
    offset += sizeof(double) * static_cast<std::uint64_t>(p.value.size());
  }
  manifest["params"] = std::move(entries);
  manifest["total_bytes"] = offset;
  if (!bin) throw IoError("short write to " + stem + ".bin");
  bin.close();

  std::ofstream mf(stem + ".json", std::ios::trunc);
  if (!mf) throw IoError("cannot open " + stem + ".json for writing");
  mf << manifest.dump(2) << "\n";
}

json read_checkpoint_meta(const std::string& stem) {
  std::ifstream mf(stem + ".json");
  if (!mf) throw IoError("cannot open manifest " + stem + ".json");
  json manifest = json::parse(mf);
  if (manifest.value("format", "") != "dcsep-checkpoint-v1")
    throw IoError(stem + ".json is not a checkpoint manifest");
  return manifest.value("meta", json::object());
}

json load_checkpoint(const std::string& stem, Graph& g) {
  std::ifstream mf(stem + ".json");
  if (!mf) throw IoError("cannot open manifest " + stem + ".json");
  json manifest = json::parse(mf);
  if (manifest.value("format", "") != "dcsep-checkpoint-v1")
    throw IoError(stem + ".json is not a checkpoint manifest");

  std::ifstream bin(stem + ".bin", std::ios::binary);
  if (!bin) throw IoError("cannot open " + stem + ".bin");

  const json& entries = manifest.at("params");
  const std::vector<NodeId>& params = g.parameters();
  if (entries.size() != params.size())
    throw IoError("checkpoint holds " + std::to_string(entries.size()) + " parameters, graph has " +
                  std::to_string(params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    Node& p = g.node(params[i]);
    const json& e = entries[i];
    if (e.at("name").get<std::string>() != p.name)
      throw IoError("checkpoint parameter " + std::to_string(i) + " is '" +
                    e.at("name").get<std::string>() + "', graph expects '" + p.name + "'");
    const auto shape = e.at("shape").get<std::vector<Eigen::Index>>();
    if (shape != p.value.shape())
      throw IoError("checkpoint parameter '" + p.name + "' shape mismatch");
    bin.seekg(static_cast<std::streamoff>(e.at("offset").get<std::uint64_t>()));
    bin.read(reinterpret_cast<char*>(p.value.data()),
             static_cast<std::streamsize>(sizeof(double) * p.value.size()));
    if (!bin) throw IoError("short read from " + stem + ".bin at parameter '" + p.name + "'");
  }
  return manifest.value("meta", json::object());
}

}  // namespace dcsep::nn

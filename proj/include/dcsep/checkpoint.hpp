#pragma once

#include <string>

#include <json.hpp>

#include "dcsep/graph.hpp"

namespace dcsep::nn {

// Weights live in `<stem>.bin` as raw doubles; `<stem>.json` lists each
// parameter's name, shape and byte offset plus caller metadata under "meta".
void save_checkpoint(const std::string& stem, const Graph& g, const nlohmann::json& meta);

// Loads weights into an already built graph; parameter names and shapes
// must match the manifest exactly. Returns the stored metadata.
nlohmann::json load_checkpoint(const std::string& stem, Graph& g);

// Reads only the manifest (for rebuilding a model before loading weights).
nlohmann::json read_checkpoint_meta(const std::string& stem);

}  // namespace dcsep::nn

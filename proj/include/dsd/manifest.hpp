// manifest.hpp - per-run record of resolved settings, paths and timings.
#pragma once

#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "dsd/io.hpp"
#include "dsd/version.hpp"

namespace dsd {

/// Everything needed to reproduce a run: the subcommand, resolved
/// parameters (post config-file/flag merging), seeds, file paths, library
/// version, timings and the final status. Serializes to JSON losslessly.
struct RunManifest {
  std::string command;
  std::string library_version = version_string;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::map<std::string, std::string> params; // resolved, stringified
  double wall_ms = 0.0;
  std::string status = "ok"; // "ok" or "error"
  std::string error;

  nlohmann::json to_json() const {
    return nlohmann::json{{"command", command},
                          {"library_version", library_version},
                          {"inputs", inputs},
                          {"outputs", outputs},
                          {"params", params},
                          {"wall_ms", wall_ms},
                          {"status", status},
                          {"error", error}};
  }

  static RunManifest from_json(const nlohmann::json& j) {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.library_version = j.at("library_version").get<std::string>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.params = j.at("params").get<std::map<std::string, std::string>>();
    m.wall_ms = j.at("wall_ms").get<double>();
    m.status = j.at("status").get<std::string>();
    m.error = j.at("error").get<std::string>();
    return m;
  }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw io_error("cannot create " + path);
    os << to_json().dump(2) << "\n";
    if (!os) throw io_error("manifest: write failed");
  }

  static RunManifest load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open " + path);
    nlohmann::json j;
    is >> j;
    return from_json(j);
  }

  friend bool operator==(const RunManifest& a, const RunManifest& b) {
    return a.to_json() == b.to_json();
  }
};

} // namespace dsd

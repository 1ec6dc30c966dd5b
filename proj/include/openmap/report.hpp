#pragma once

#include <string>

#include "openmap/config.hpp"

namespace openmap {

// Subcommand drivers.  Each validates nothing beyond its own computation
// (config validation happens at parse time), writes its tables, plot data,
// report.json and manifest.json under out_dir, and returns the process exit
// code: 0 success, 2 computational failure, 3 check failed (cmd_check only).
int cmd_check(const RunConfig& cfg, const std::string& out_dir);
int cmd_tower(const RunConfig& cfg, const std::string& out_dir);
int cmd_accim(const RunConfig& cfg, const std::string& out_dir);
int cmd_escape(const RunConfig& cfg, const std::string& out_dir);
int cmd_shrink(const RunConfig& cfg, const std::string& out_dir);

// FNV-1a 64-bit content digest, hex-encoded; used in the manifest and CSV
// headers.
std::string fnv1a_hex(const std::string& content);

}  // namespace openmap

#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "t2vqa/codec.hpp"
#include "t2vqa/csv.hpp"
#include "t2vqa/error.hpp"

#ifndef T2VQA_VERSION
#define T2VQA_VERSION "0.0.0"
#endif

namespace t2vqa {

// Provenance stamped into every output file.
struct RunMeta {
  std::string tool_version = T2VQA_VERSION;
  std::uint64_t seed = 42;
  std::string config_hash;  // hex BLAKE2b of the canonical run configuration

  nlohmann::ordered_json to_json() const {
    return {{"tool_version", tool_version}, {"seed", seed}, {"config_hash", config_hash}};
  }
};

inline std::string config_hash(const nlohmann::ordered_json& canonical_config) {
  const auto d = codec::blake2b(canonical_config.dump());
  return codec::hex(std::span(d.data(), 16));
}

inline void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.close();
  if (!out) throw IoError("cannot write " + path.string());
}

// CSV text whose first record is a `# meta: {...}` comment line.
class CsvBuilder {
 public:
  CsvBuilder(const nlohmann::ordered_json& meta, const std::vector<std::string>& header) {
    text_ = "# meta: " + meta.dump() + "\n" + csv::join_row(header);
  }
  void row(const std::vector<std::string>& fields) { text_ += csv::join_row(fields); }
  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

inline std::string num(double v) { return codec::format_double(v); }

}  // namespace t2vqa

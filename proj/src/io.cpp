#include "multibox/io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "multibox/error.hpp"

namespace multibox {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InfeasibleMatch: return "InfeasibleMatch";
    case ErrorCode::MissingPriors: return "MissingPriors";
    case ErrorCode::TooFewBoxes: return "TooFewBoxes";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::DuplicateClassInTopK: return "DuplicateClassInTopK";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

void write_scenes(std::ostream& meta, std::ostream& raster, std::span<const Scene> scenes) {
  raster << "multibox-raster v1 count=" << scenes.size() << '\n';
  for (const auto& s : scenes) {
    nlohmann::json objects = nlohmann::json::array();
    for (const auto& o : s.objects) {
      objects.push_back({o.class_label, o.box.xmin, o.box.ymin, o.box.xmax, o.box.ymax});
    }
    const nlohmann::ordered_json rec = {{"format", "multibox-scenes"}, {"version", 1},
                                        {"image_id", s.image_id},      {"width", s.image.width},
                                        {"height", s.image.height},    {"objects", objects}};
    meta << rec.dump() << '\n';
    raster.write(reinterpret_cast<const char*>(s.image.pixels.data()),
                 static_cast<std::streamsize>(s.image.pixels.size()));
  }
  if (!meta || !raster) throw Error(ErrorCode::IoError, "failed writing scenes");
}

std::vector<Scene> read_scenes(std::istream& meta, std::istream& raster) {
  std::string header;
  if (!std::getline(raster, header)) throw Error(ErrorCode::IoError, "raster file is empty");
  std::istringstream hs(header);
  std::string magic, version, count;
  hs >> magic >> version >> count;
  if (magic != "multibox-raster" || version != "v1" || count.rfind("count=", 0) != 0) {
    throw Error(ErrorCode::IoError, "bad raster header: " + header);
  }

  std::vector<Scene> scenes;
  std::string line;
  while (std::getline(meta, line)) {
    if (line.empty()) continue;
    Scene s;
    try {
      const auto rec = nlohmann::json::parse(line);
      if (rec.at("format") != "multibox-scenes" || rec.at("version") != 1) {
        throw Error(ErrorCode::IoError, "unsupported scenes record: " + line);
      }
      s.image_id = rec.at("image_id").get<std::uint64_t>();
      s.image.width = rec.at("width").get<int>();
      s.image.height = rec.at("height").get<int>();
      for (const auto& o : rec.at("objects")) {
        s.objects.push_back({o.at(0).get<int>(), {o.at(1).get<double>(), o.at(2).get<double>(),
                                                   o.at(3).get<double>(), o.at(4).get<double>()}});
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::IoError, std::string("bad scenes record: ") + e.what());
    }
    if (s.image.width <= 0 || s.image.height <= 0) throw Error(ErrorCode::IoError, "scene has empty raster");
    s.image.pixels.resize(static_cast<std::size_t>(s.image.width) * s.image.height);
    if (!raster.read(reinterpret_cast<char*>(s.image.pixels.data()),
                     static_cast<std::streamsize>(s.image.pixels.size()))) {
      throw Error(ErrorCode::IoError, "raster file is truncated");
    }
    scenes.push_back(std::move(s));
  }
  if (std::to_string(scenes.size()) != count.substr(6)) {
    throw Error(ErrorCode::IoError, "raster count " + count.substr(6) + " differs from " +
                                        std::to_string(scenes.size()) + " scene records");
  }
  return scenes;
}

void save_scenes(const std::string& meta_path, const std::string& raster_path, std::span<const Scene> scenes) {
  std::ofstream meta(meta_path, std::ios::binary);
  std::ofstream raster(raster_path, std::ios::binary);
  if (!meta || !raster) throw Error(ErrorCode::IoError, "cannot write " + meta_path + " / " + raster_path);
  write_scenes(meta, raster, scenes);
}

std::vector<Scene> load_scenes(const std::string& meta_path, const std::string& raster_path) {
  std::ifstream meta(meta_path, std::ios::binary);
  std::ifstream raster(raster_path, std::ios::binary);
  if (!meta || !raster) throw Error(ErrorCode::IoError, "cannot read " + meta_path + " / " + raster_path);
  return read_scenes(meta, raster);
}

std::map<std::string, std::string> read_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, "config line " + std::to_string(lineno) + " has no '='");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

}  // namespace multibox

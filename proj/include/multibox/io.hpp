#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "multibox/datagen.hpp"

namespace multibox {

/// Scenes are stored as a JSON-lines metadata file, one object per scene:
///   {"format":"multibox-scenes","version":1,"image_id":7,"width":64,
///    "height":64,"objects":[[class,xmin,ymin,xmax,ymax],...]}
/// plus a raster sidecar: the line "multibox-raster v1 count=<N>" followed by
/// each scene's width*height bytes, row-major, in metadata order.
void write_scenes(std::ostream& meta, std::ostream& raster, std::span<const Scene> scenes);
std::vector<Scene> read_scenes(std::istream& meta, std::istream& raster);

void save_scenes(const std::string& meta_path, const std::string& raster_path, std::span<const Scene> scenes);
std::vector<Scene> load_scenes(const std::string& meta_path, const std::string& raster_path);

/// `key = value` lines; '#' starts a comment. Keys are returned verbatim.
std::map<std::string, std::string> read_key_values(std::istream& in);

}  // namespace multibox

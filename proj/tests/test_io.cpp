#include <doctest.h>

#include <sstream>

#include "multibox/datagen.hpp"
#include "multibox/error.hpp"
#include "multibox/io.hpp"

using namespace multibox;

TEST_CASE("scenes round trip") {
  SceneConfig c;
  c.n_scenes = 12;
  c.seed = 6;
  const auto scenes = generate_scenes(c);
  std::stringstream meta, raster;
  write_scenes(meta, raster, scenes);
  const std::string text = meta.str();
  CHECK(text.find("\"format\":\"multibox-scenes\"") != std::string::npos);
  CHECK(raster.str().rfind("multibox-raster v1 count=12\n", 0) == 0);
  const auto back = read_scenes(meta, raster);
  CHECK(back == scenes);
}

TEST_CASE("empty scenes file") {
  std::stringstream meta, raster;
  write_scenes(meta, raster, std::vector<Scene>{});
  CHECK(read_scenes(meta, raster).empty());
}

TEST_CASE("corrupt scenes are rejected") {
  SceneConfig c;
  c.n_scenes = 2;
  const auto scenes = generate_scenes(c);
  std::stringstream meta, raster;
  write_scenes(meta, raster, scenes);
  std::string bytes = raster.str();
  bytes.resize(bytes.size() - 10);
  std::stringstream short_raster(bytes);
  std::stringstream meta2(meta.str());
  CHECK_THROWS_AS(read_scenes(meta2, short_raster), Error);

  std::stringstream junk("{not json\n"), empty_raster("multibox-raster v1 count=1\n");
  CHECK_THROWS_AS(read_scenes(junk, empty_raster), Error);
  CHECK_THROWS_AS(load_scenes("/nonexistent/a.jsonl", "/nonexistent/b.bin"), Error);
}

TEST_CASE("key value config") {
  std::stringstream in("# comment\nalpha = 0.3\n\nsteps=100\n  name =  x y \n");
  const auto kv = read_key_values(in);
  CHECK(kv.at("alpha") == "0.3");
  CHECK(kv.at("steps") == "100");
  CHECK(kv.at("name") == "x y");
  std::stringstream bad("novalue\n");
  CHECK_THROWS_AS(read_key_values(bad), Error);
}

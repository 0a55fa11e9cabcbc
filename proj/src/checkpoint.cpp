#include "treebridge/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "treebridge/errors.hpp"

namespace treebridge {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

void save_checkpoint(const std::string& path, const NetArch& arch,
                     const std::vector<double>& params, long step, double ema_decay) {
  nlohmann::json header = {
      {"d", arch.d},
      {"time_features", arch.time_features},
      {"spatial_hidden", arch.spatial_hidden},
      {"time_hidden", arch.time_hidden},
      {"embed_dim", arch.embed_dim},
      {"trunk_hidden", arch.trunk_hidden},
      {"step", step},
      {"ema_decay", ema_decay},
      {"params", params.size()},
  };
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("FileOpen", "cannot write " + path);
  f << header.dump() << '\n';
  f.write(reinterpret_cast<const char*>(params.data()),
          static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!f) throw IoError("FileWrite", "short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("FileOpen", "cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw IoError("FileRead", "missing header in " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("BadHeader", path + ": " + e.what());
  }
  Checkpoint ck;
  try {
    ck.arch.d = header.at("d").get<int>();
    ck.arch.time_features = header.at("time_features").get<int>();
    ck.arch.spatial_hidden = header.at("spatial_hidden").get<std::vector<int>>();
    ck.arch.time_hidden = header.at("time_hidden").get<std::vector<int>>();
    ck.arch.embed_dim = header.at("embed_dim").get<int>();
    ck.arch.trunk_hidden = header.at("trunk_hidden").get<std::vector<int>>();
    ck.step = header.at("step").get<long>();
    ck.ema_decay = header.at("ema_decay").get<double>();
    ck.params.resize(header.at("params").get<size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError("BadHeader", path + ": " + e.what());
  }
  if (static_cast<int>(ck.params.size()) != ck.arch.param_count())
    throw IoError("BadHeader", path + ": parameter count does not match architecture");
  f.read(reinterpret_cast<char*>(ck.params.data()),
         static_cast<std::streamsize>(ck.params.size() * sizeof(double)));
  if (f.gcount() != static_cast<std::streamsize>(ck.params.size() * sizeof(double)))
    throw IoError("FileRead", "truncated parameter block in " + path);
  return ck;
}

}  // namespace treebridge

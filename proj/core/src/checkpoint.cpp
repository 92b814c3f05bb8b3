#include "ipp/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace ipp {

namespace {

constexpr const char* kFormat = "ipp-checkpoint";
constexpr int kFormatVersion = 1;

nlohmann::json to_json(const NetConfig& c) {
  return {{"input_planes", c.input_planes},
          {"action_levels", c.action_levels},
          {"channels", c.channels},
          {"encoder_blocks", c.encoder_blocks},
          {"pooling_bias_interval", c.pooling_bias_interval},
          {"global_pooling_bias", c.global_pooling_bias},
          {"head_channels", c.head_channels},
          {"head_blocks", c.head_blocks}};
}

NetConfig net_config_from_json(const nlohmann::json& j) {
  NetConfig c;
  c.input_planes = j.at("input_planes").get<int>();
  c.action_levels = j.at("action_levels").get<int>();
  c.channels = j.at("channels").get<int>();
  c.encoder_blocks = j.at("encoder_blocks").get<int>();
  c.pooling_bias_interval = j.at("pooling_bias_interval").get<int>();
  c.global_pooling_bias = j.at("global_pooling_bias").get<bool>();
  c.head_channels = j.at("head_channels").get<int>();
  c.head_blocks = j.at("head_blocks").get<int>();
  return c;
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big)
    v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const Network& net, int grid_dim,
                     int training_iteration) {
  std::filesystem::create_directories(dir);
  const CheckpointManifest m{net.config(), grid_dim, kPlaneLayoutVersion, training_iteration,
                             net.parameter_count(), "params.bin"};
  const nlohmann::json manifest = {{"format", kFormat},
                                   {"format_version", kFormatVersion},
                                   {"architecture", to_json(m.architecture)},
                                   {"grid_dim", m.grid_dim},
                                   {"plane_layout_version", m.plane_layout_version},
                                   {"training_iteration", m.training_iteration},
                                   {"parameter_count", m.parameter_count},
                                   {"blob", m.blob}};
  {
    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed to write " + (dir / "manifest.json").string());
  }
  std::ofstream blob(dir / m.blob, std::ios::binary);
  for (float w : net.parameters()) {
    const std::uint32_t bits = to_little_endian(std::bit_cast<std::uint32_t>(w));
    blob.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!blob) throw std::runtime_error("failed to write " + (dir / m.blob).string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir,
                                 std::optional<int> expected_grid_dim,
                                 const NetConfig* expected_architecture) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw CheckpointMismatch("no checkpoint manifest at " + (dir / "manifest.json").string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointMismatch(fmt::format("malformed checkpoint manifest: {}", e.what()));
  }

  CheckpointManifest m;
  try {
    if (j.at("format").get<std::string>() != kFormat ||
        j.at("format_version").get<int>() != kFormatVersion)
      throw CheckpointMismatch("unsupported checkpoint format");
    m.architecture = net_config_from_json(j.at("architecture"));
    m.grid_dim = j.at("grid_dim").get<int>();
    m.plane_layout_version = j.at("plane_layout_version").get<int>();
    m.training_iteration = j.at("training_iteration").get<int>();
    m.parameter_count = j.at("parameter_count").get<std::size_t>();
    m.blob = j.at("blob").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointMismatch(fmt::format("malformed checkpoint manifest: {}", e.what()));
  }

  if (m.plane_layout_version != kPlaneLayoutVersion)
    throw CheckpointMismatch(fmt::format("checkpoint plane layout version {} != supported {}",
                                         m.plane_layout_version, kPlaneLayoutVersion));
  if (expected_grid_dim && *expected_grid_dim != m.grid_dim)
    throw CheckpointMismatch(fmt::format("checkpoint was trained on a {0}x{0} grid but the "
                                         "configuration uses a {1}x{1} grid",
                                         m.grid_dim, *expected_grid_dim));
  if (expected_architecture && !(*expected_architecture == m.architecture))
    throw CheckpointMismatch("checkpoint architecture differs from the configured network");

  LoadedCheckpoint out{m, Network(m.architecture)};
  if (out.net.parameter_count() != m.parameter_count)
    throw CheckpointMismatch(fmt::format("manifest declares {} parameters, architecture has {}",
                                         m.parameter_count, out.net.parameter_count()));
  std::ifstream blob(dir / m.blob, std::ios::binary | std::ios::ate);
  if (!blob) throw CheckpointMismatch("missing parameter blob " + (dir / m.blob).string());
  const auto bytes = static_cast<std::size_t>(blob.tellg());
  if (bytes != m.parameter_count * sizeof(float))
    throw CheckpointMismatch(fmt::format("parameter blob has {} bytes, expected {}", bytes,
                                         m.parameter_count * sizeof(float)));
  blob.seekg(0);
  auto params = out.net.parameters();
  for (auto& w : params) {
    std::uint32_t bits = 0;
    blob.read(reinterpret_cast<char*>(&bits), sizeof bits);
    w = std::bit_cast<float>(to_little_endian(bits));
  }
  return out;
}

}  // namespace ipp

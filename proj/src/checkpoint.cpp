#include "paad/checkpoint.hpp"

#include <fstream>

#include "paad/config.hpp"
#include "wire.hpp"

namespace paad {

namespace {
constexpr char kMagic[4] = {'P', 'A', 'A', 'D'};
constexpr uint16_t kVersion = 1;
}  // namespace

void save_checkpoint(const ModelT<float>& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint file: " + path);

  nlohmann::json header{
      {"model", to_json(m.cfg)}, {"camera", to_json(m.camera)}, {"bev", to_json(m.bev)}};
  const std::string text = header.dump();

  out.write(kMagic, 4);
  wire::put_u16(out, kVersion);
  wire::put_u32(out, static_cast<uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));

  wire::put_u32(out, static_cast<uint32_t>(m.params.items.size()));
  for (const auto& [name, p] : m.params.items) {  // map order: sorted by name
    wire::put_u16(out, static_cast<uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    wire::put_u8(out, static_cast<uint8_t>(p.value.shape.size()));
    for (int d : p.value.shape) wire::put_u32(out, static_cast<uint32_t>(d));
    for (float v : p.value.data) wire::put_f32(out, v);
  }
  out.flush();
  if (!out) throw IoError("short write to checkpoint file: " + path);
}

ModelT<float> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint file: " + path);
  char magic[4];
  wire::get_raw(in, magic, 4, "checkpoint magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw IoError("not a checkpoint file: " + path);
  const uint16_t version = wire::get_u16(in, "checkpoint version");
  if (version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));

  const uint32_t text_len = wire::get_u32(in, "header length");
  std::string text(text_len, '\0');
  wire::get_raw(in, text.data(), text_len, "architecture header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  if (!header.contains("model") || !header.contains("camera") || !header.contains("bev"))
    throw ConfigError("checkpoint header is missing an architecture section");

  const PaadConfig cfg = paad_config_from_json(header.at("model"));
  const CameraModel camera = camera_from_json(header.at("camera"));
  const BevConfig bev = bev_from_json(header.at("bev"));
  ModelT<float> m = build_model<float>(cfg, camera, bev, 0);

  const uint32_t tensors = wire::get_u32(in, "tensor count");
  if (tensors != m.params.items.size())
    throw ConfigError("checkpoint holds " + std::to_string(tensors) + " tensors, model has " +
                      std::to_string(m.params.items.size()));
  for (uint32_t i = 0; i < tensors; ++i) {
    const uint16_t name_len = wire::get_u16(in, "tensor name length");
    std::string name(name_len, '\0');
    wire::get_raw(in, name.data(), name_len, "tensor name");
    auto it = m.params.items.find(name);
    if (it == m.params.items.end())
      throw ConfigError("checkpoint tensor not in the model: " + name);
    TensorT<float>& value = it->second.value;
    const uint8_t ndim = wire::get_u8(in, "tensor rank");
    if (ndim != value.shape.size())
      throw DimensionError("tensor rank mismatch for " + name);
    for (size_t d = 0; d < ndim; ++d) {
      const uint32_t dim = wire::get_u32(in, "tensor dims");
      if (static_cast<int>(dim) != value.shape[d])
        throw DimensionError("tensor shape mismatch for " + name);
    }
    for (float& v : value.data) v = wire::get_f32(in, name.c_str());
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw IoError("trailing bytes after the tensor table: " + path);
  return m;
}

}  // namespace paad

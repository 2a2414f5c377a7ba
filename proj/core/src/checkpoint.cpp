#include "susl/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "susl/errors.hpp"

namespace susl {

namespace {

constexpr char kMagic[8] = {'S', 'U', 'S', 'L', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("checkpoint truncated");
  return v;
}

void write_config(std::ostream& os, const ModelConfig& c) {
  for (int v : {c.channels, c.length, c.n_known_classes, c.n_augmented_classes, c.latent_dim, c.layers, c.filters,
                c.units, c.kernel_size, c.variant == Variant::conv ? 0 : 1})
    write_pod<int32_t>(os, v);
}

ModelConfig read_config(std::istream& is) {
  ModelConfig c;
  c.channels = read_pod<int32_t>(is);
  c.length = read_pod<int32_t>(is);
  c.n_known_classes = read_pod<int32_t>(is);
  c.n_augmented_classes = read_pod<int32_t>(is);
  c.latent_dim = read_pod<int32_t>(is);
  c.layers = read_pod<int32_t>(is);
  c.filters = read_pod<int32_t>(is);
  c.units = read_pod<int32_t>(is);
  c.kernel_size = read_pod<int32_t>(is);
  c.variant = read_pod<int32_t>(is) == 0 ? Variant::conv : Variant::mlp;
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const Parameters& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof(kMagic));
  write_pod<uint32_t>(os, kVersion);
  write_config(os, cfg);

  uint32_t count = 0;
  params.for_each([&count](const std::string&, const Array&) { ++count; });
  write_pod<uint32_t>(os, count);
  params.for_each([&os](const std::string& name, const Array& a) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint32_t>(os, static_cast<uint32_t>(a.rank()));
    for (int d : a.shape()) write_pod<int32_t>(os, d);
    os.write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
  });
  if (!os) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read checkpoint " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError(path.string() + " is not a model checkpoint");
  const uint32_t version = read_pod<uint32_t>(is);
  if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.config = read_config(is);
  ckpt.config.validate();
  ckpt.params = init_parameters(ckpt.config, 0);

  std::map<std::string, Array> tensors;
  const uint32_t count = read_pod<uint32_t>(is);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_pod<uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const uint32_t rank = read_pod<uint32_t>(is);
    std::vector<int> shape(rank);
    for (uint32_t r = 0; r < rank; ++r) shape[r] = read_pod<int32_t>(is);
    std::vector<double> values(static_cast<size_t>(shape_size(shape)));
    is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!is) throw DataError("checkpoint truncated in tensor " + name);
    tensors.emplace(name, Array(std::move(shape), std::move(values)));
  }

  ckpt.params.for_each([&tensors, &path](const std::string& name, Array& a) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("checkpoint " + path.string() + " is missing tensor " + name);
    if (!it->second.same_shape(a))
      throw DataError("checkpoint tensor " + name + " has shape " + shape_str(it->second.shape()) + ", expected " +
                      shape_str(a.shape()));
    a = std::move(it->second);
  });
  return ckpt;
}

}  // namespace susl

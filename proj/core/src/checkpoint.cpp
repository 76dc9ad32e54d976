#include "fasvit/checkpoint.hpp"

#include "fasvit/binio.hpp"
#include "fasvit/image_io.hpp"

namespace fasvit {

namespace {

void write_config(ByteWriter& w, const ModelConfig& cfg) {
  w.i32(cfg.image_size);
  w.i32(cfg.patch_size);
  w.i32(cfg.depth);
  w.i32(cfg.embed_dim);
  w.i32(cfg.heads);
  w.f64(cfg.mlp_ratio);
  w.f64(cfg.alpha);
  w.i32(cfg.score_tap);
  w.i32(cfg.loss_tap);
  w.i32(cfg.n_classes);
}

ModelConfig read_config(ByteReader& r) {
  ModelConfig cfg;
  cfg.image_size = r.i32("config.image_size");
  cfg.patch_size = r.i32("config.patch_size");
  cfg.depth = r.i32("config.depth");
  cfg.embed_dim = r.i32("config.embed_dim");
  cfg.heads = r.i32("config.heads");
  cfg.mlp_ratio = r.f64("config.mlp_ratio");
  cfg.alpha = r.f64("config.alpha");
  cfg.score_tap = r.i32("config.score_tap");
  cfg.loss_tap = r.i32("config.loss_tap");
  cfg.n_classes = r.i32("config.n_classes");
  return cfg;
}

}  // namespace

template <typename T>
std::vector<std::uint8_t> serialize_checkpoint(const ModelConfig& cfg,
                                               const ModelParams<T>& params) {
  ByteWriter w;
  w.raw("FASV", 4);
  w.u16(kCheckpointVersion);
  write_config(w, cfg);

  std::uint32_t count = 0;
  for_each_tensor(params, [&count](const std::string&, const Mat<T>&) { ++count; });
  w.u32(count);
  for_each_tensor(params, [&w](const std::string& name, const Mat<T>& m) {
    w.str(name);
    w.u32(2);
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) w.f32(static_cast<float>(m(i, j)));
  });
  return w.take();
}

template <typename T>
std::pair<ModelConfig, ModelParams<T>> parse_checkpoint(const std::vector<std::uint8_t>& bytes,
                                                        const std::string& what) {
  ByteReader r(bytes, what);
  char magic[4];
  r.raw(magic, 4, "magic");
  if (std::string(magic, 4) != "FASV") r.fail("bad magic, not a model checkpoint");
  const std::uint16_t version = r.u16("version");
  if (version != kCheckpointVersion)
    r.fail("unsupported checkpoint version " + std::to_string(version));
  ModelConfig cfg = read_config(r);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    r.fail(std::string("invalid stored config: ") + e.what());
  }

  ModelParams<T> params = make_params<T>(cfg);
  std::uint32_t expected = 0;
  for_each_tensor(params, [&expected](const std::string&, const Mat<T>&) { ++expected; });
  const std::uint32_t count = r.u32("tensor_count");
  if (count != expected)
    r.fail("tensor count " + std::to_string(count) + ", config implies " +
           std::to_string(expected));

  for_each_tensor(params, [&r](const std::string& name, Mat<T>& m) {
    const std::string stored = r.str("tensor name");
    if (stored != name)
      r.fail("tensor '" + stored + "' where '" + name + "' was expected");
    const std::uint32_t rank = r.u32((name + " rank").c_str());
    if (rank != 2) r.fail("tensor '" + name + "' has rank " + std::to_string(rank));
    const std::uint32_t rows = r.u32("rows");
    const std::uint32_t cols = r.u32("cols");
    if (rows != static_cast<std::uint32_t>(m.rows()) ||
        cols != static_cast<std::uint32_t>(m.cols()))
      r.fail("tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
             std::to_string(cols) + ", config implies " + std::to_string(m.rows()) + "x" +
             std::to_string(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        m(i, j) = static_cast<T>(r.f32((name + " payload").c_str()));
  });
  if (!r.done()) r.fail("trailing bytes after the tensor table");
  return {cfg, std::move(params)};
}

template <typename T>
void save_checkpoint(const ModelConfig& cfg, const ModelParams<T>& params,
                     const std::string& path) {
  write_file(path, serialize_checkpoint(cfg, params));
}

template <typename T>
std::pair<ModelConfig, ModelParams<T>> load_checkpoint(const std::string& path) {
  return parse_checkpoint<T>(read_file(path), path);
}

std::uint64_t file_fingerprint(const std::string& path) {
  const auto bytes = read_file(path);
  return fnv1a64(bytes.data(), bytes.size());
}

template std::vector<std::uint8_t> serialize_checkpoint<float>(const ModelConfig&,
                                                               const ModelParams<float>&);
template std::vector<std::uint8_t> serialize_checkpoint<double>(const ModelConfig&,
                                                                const ModelParams<double>&);
template std::pair<ModelConfig, ModelParams<float>> parse_checkpoint<float>(
    const std::vector<std::uint8_t>&, const std::string&);
template std::pair<ModelConfig, ModelParams<double>> parse_checkpoint<double>(
    const std::vector<std::uint8_t>&, const std::string&);
template void save_checkpoint<float>(const ModelConfig&, const ModelParams<float>&,
                                     const std::string&);
template void save_checkpoint<double>(const ModelConfig&, const ModelParams<double>&,
                                      const std::string&);
template std::pair<ModelConfig, ModelParams<float>> load_checkpoint<float>(const std::string&);
template std::pair<ModelConfig, ModelParams<double>> load_checkpoint<double>(const std::string&);

}  // namespace fasvit

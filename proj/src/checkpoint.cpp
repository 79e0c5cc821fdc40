#include "otoc/checkpoint.hpp"

#include "binio.hpp"
#include "otoc/error.hpp"

namespace otoc {

namespace {
constexpr std::uint32_t kVersion = 1;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  ckpt.model.validate();
  detail::ByteWriter w;
  w.magic("OTNN");
  w.u32(kVersion);
  const auto& sizes = ckpt.model.layer_sizes();
  w.u32(static_cast<std::uint32_t>(sizes.size()));
  for (int s : sizes) w.u32(static_cast<std::uint32_t>(s));
  const Eigen::VectorXd flat = ckpt.model.flat_parameters();
  for (Eigen::Index i = 0; i < flat.size(); ++i) w.f64(flat[i]);
  if (ckpt.bank) {
    const auto& b = *ckpt.bank;
    w.u32(static_cast<std::uint32_t>(b.num_categories()));
    w.u32(static_cast<std::uint32_t>(b.dim()));
    for (Eigen::Index c = 0; c < b.keys.rows(); ++c)
      for (Eigen::Index d = 0; d < b.keys.cols(); ++d) w.f64(b.keys(c, d));
    w.f64(b.temperature);
    w.f64(b.momentum);
  } else {
    w.u32(0);
    w.u32(0);
  }
  detail::write_file(path, w.bytes());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes);
  r.expect_magic("OTNN");
  r.expect_version(kVersion);
  const std::uint32_t num_sizes = r.u32();
  if (num_sizes < 2 || num_sizes > 64) throw FormatError("implausible layer count");
  std::vector<int> sizes(num_sizes);
  for (auto& s : sizes) {
    s = static_cast<int>(r.u32());
    if (s <= 0 || s > (1 << 20)) throw FormatError("implausible layer size");
  }
  Checkpoint ckpt;
  ckpt.model = Mlp(sizes);
  Eigen::VectorXd flat(static_cast<Eigen::Index>(ckpt.model.num_parameters()));
  r.need(static_cast<std::size_t>(flat.size()) * 8);
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] = r.f64();
  ckpt.model.set_flat_parameters(flat);
  ckpt.model.validate();

  const std::uint32_t c = r.u32();
  const std::uint32_t d = r.u32();
  if (c > 0 && d > 0) {
    MemoryBank bank;
    r.need(static_cast<std::size_t>(c) * d * 8 + 16);
    bank.keys.resize(c, d);
    for (std::uint32_t i = 0; i < c; ++i)
      for (std::uint32_t j = 0; j < d; ++j) bank.keys(i, j) = r.f64();
    bank.temperature = r.f64();
    bank.momentum = r.f64();
    bank.validate();
    ckpt.bank = std::move(bank);
  } else if (c != 0 || d != 0) {
    throw FormatError("memory bank with a zero dimension");
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes in checkpoint");
  return ckpt;
}

}  // namespace otoc

#include "otoc/scene.hpp"

#include <cmath>
#include <string>

#include "binio.hpp"
#include "otoc/error.hpp"

namespace otoc {

namespace {

constexpr std::uint32_t kVersion = 1;

std::uint8_t to_u8(double c) {
  const double v = std::round(c * 255.0);
  return static_cast<std::uint8_t>(v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v));
}

}  // namespace

void Scene::validate() const {
  const auto n = points.size();
  if (n == 0) throw ValidationError("scene has no points");
  if (colors.size() != n || gt_semantic.size() != n || gt_instance.size() != n)
    throw ValidationError("scene sequences have unequal lengths");
  if (num_categories <= 0) throw ValidationError("num_categories must be positive");
  for (std::size_t i = 0; i < n; ++i) {
    if (!points[i].allFinite()) throw ValidationError("non-finite coordinate at point " + std::to_string(i));
    const auto& s = gt_semantic[i];
    if (s && (*s < 0 || *s >= num_categories))
      throw ValidationError("semantic label out of range at point " + std::to_string(i));
    if (gt_instance[i] && !s) throw ValidationError("instance without semantic label at point " + std::to_string(i));
  }
}

std::vector<std::uint8_t> encode_scene(const Scene& scene) {
  scene.validate();
  detail::ByteWriter w;
  w.magic("OTOC");
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(scene.size()));
  w.u32(static_cast<std::uint32_t>(scene.num_categories));
  for (std::size_t i = 0; i < scene.size(); ++i) {
    for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(scene.points[i][a]));
    for (int a = 0; a < 3; ++a) w.u8(to_u8(scene.colors[i][a]));
    w.i32(to_file_label(scene.gt_semantic[i]));
    w.i32(to_file_label(scene.gt_instance[i]));
  }
  return w.bytes();
}

Scene decode_scene(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic("OTOC");
  r.expect_version(kVersion);
  const std::uint32_t n = r.u32();
  Scene scene;
  scene.num_categories = static_cast<int>(r.u32());
  r.need(static_cast<std::size_t>(n) * 23);
  scene.points.reserve(n);
  scene.colors.reserve(n);
  scene.gt_semantic.reserve(n);
  scene.gt_instance.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Eigen::Vector3d p;
    for (int a = 0; a < 3; ++a) p[a] = r.f32();
    Eigen::Vector3d c;
    for (int a = 0; a < 3; ++a) c[a] = r.u8() / 255.0;
    scene.points.push_back(p);
    scene.colors.push_back(c);
    const std::int32_t sem = r.i32();
    const std::int32_t inst = r.i32();
    if (sem < kUnlabeled || inst < kUnlabeled) throw ValidationError("negative label other than -1 at record " + std::to_string(i));
    scene.gt_semantic.push_back(from_file_label(sem));
    scene.gt_instance.push_back(from_file_label(inst));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after scene records");
  scene.validate();
  return scene;
}

Scene load_scene(const std::filesystem::path& path) { return decode_scene(detail::read_file(path)); }

void save_scene(const Scene& scene, const std::filesystem::path& path) {
  detail::write_file(path, encode_scene(scene));
}

}  // namespace otoc

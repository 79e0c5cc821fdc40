#include "otoc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>

#include "otoc/error.hpp"
#include "otoc/rng.hpp"

namespace otoc {

namespace {

struct Footprint {
  double x0, y0, x1, y1;
  bool overlaps(const Footprint& o, double gap) const {
    return x0 - gap < o.x1 && o.x0 - gap < x1 && y0 - gap < o.y1 && o.y0 - gap < y1;
  }
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

class Builder {
 public:
  Builder(const SynthSpec& spec, CounterRng& rng) : spec_(spec), rng_(rng) {}

  int points_for_area(double area) {
    const int n = static_cast<int>(std::lround(area * spec_.point_density));
    return std::clamp(n, spec_.points_per_object.min, spec_.points_per_object.max);
  }

  Eigen::Vector3d instance_color(int cat) {
    Eigen::Vector3d c = spec_.color_mean[static_cast<std::size_t>(cat)];
    for (int a = 0; a < 3; ++a) c[a] += rng_.normal(0.0, spec_.color_instance_noise);
    return c;
  }

  void add(const Eigen::Vector3d& p, const Eigen::Vector3d& base_color, int cat) {
    Eigen::Vector3d q = p;
    Eigen::Vector3d c = base_color;
    for (int a = 0; a < 3; ++a) {
      q[a] += rng_.normal(0.0, spec_.coord_noise);
      c[a] = std::clamp(c[a] + rng_.normal(0.0, spec_.color_noise), 0.0, 1.0);
    }
    // Quantize the color the way the file stores it so generated scenes round-trip exactly.
    for (int a = 0; a < 3; ++a) {
      c[a] = std::round(c[a] * 255.0) / 255.0;
      q[a] = static_cast<double>(static_cast<float>(q[a]));
    }
    scene.points.push_back(q);
    scene.colors.push_back(c);
    scene.gt_semantic.push_back(cat);
    scene.gt_instance.push_back(next_instance_);
  }

  int begin_instance() { return next_instance_; }
  void end_instance(std::size_t first_point) {
    if (scene.points.size() > first_point) ++next_instance_;
  }

  // Axis-aligned rectangle in a coordinate plane: origin + s*u + t*v, s,t in [0,1].
  void sample_rect(const Eigen::Vector3d& origin, const Eigen::Vector3d& u, const Eigen::Vector3d& v, int count,
                   const Eigen::Vector3d& color, int cat, const std::vector<Footprint>* holes = nullptr) {
    for (int k = 0; k < count; ++k) {
      const Eigen::Vector3d p = origin + rng_.uniform() * u + rng_.uniform() * v;
      if (holes != nullptr) {
        bool hidden = false;
        for (const auto& h : *holes) hidden = hidden || h.contains(p.x(), p.y());
        if (hidden) continue;
      }
      add(p, color, cat);
    }
  }

  // Five visible faces of a box standing on z = base.
  void sample_box(const Footprint& fp, double base, double height, int cat) {
    const std::size_t first = scene.points.size();
    const Eigen::Vector3d color = instance_color(cat);
    const double w = fp.x1 - fp.x0, d = fp.y1 - fp.y0;
    const double areas[5] = {w * d, w * height, w * height, d * height, d * height};
    double total = 0.0;
    for (double a : areas) total += a;
    const int count = points_for_area(total);
    const Eigen::Vector3d o(fp.x0, fp.y0, base);
    const Eigen::Vector3d ex(w, 0, 0), ey(0, d, 0), ez(0, 0, height);
    const std::array<std::array<Eigen::Vector3d, 3>, 5> faces{{
        {o + ez, ex, ey},
        {o, ex, ez},
        {o + ey, ex, ez},
        {o, ey, ez},
        {o + ex, ey, ez},
    }};
    for (std::size_t f = 0; f < faces.size(); ++f) {
      const int n = static_cast<int>(std::lround(count * areas[f] / total));
      sample_rect(faces[f][0], faces[f][1], faces[f][2], std::max(n, 1), color, cat);
    }
    end_instance(first);
  }

  void sample_sphere(const Eigen::Vector3d& center, double radius, double support_z, int cat) {
    const std::size_t first = scene.points.size();
    const Eigen::Vector3d color = instance_color(cat);
    const int count = points_for_area(4.0 * std::numbers::pi * radius * radius);
    for (int k = 0; k < count; ++k) {
      Eigen::Vector3d dir(rng_.normal(), rng_.normal(), rng_.normal());
      if (dir.norm() < 1e-12) continue;
      const Eigen::Vector3d p = center + radius * dir.normalized();
      if (p.z() < support_z) continue;
      add(p, color, cat);
    }
    end_instance(first);
  }

  Scene scene;

 private:
  const SynthSpec& spec_;
  CounterRng& rng_;
  int next_instance_ = 0;
};

int draw(const IntRange& r, CounterRng& rng) {
  return r.min + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(r.max - r.min + 1)));
}

}  // namespace

void SynthSpec::validate() const {
  if (num_categories != category::kCount) throw ValidationError("the generator emits exactly 6 categories");
  for (const auto& r : objects)
    if (r.min < 0 || r.max < r.min) throw ValidationError("object count range is empty");
  if (objects[category::kFloor].max > 1) throw ValidationError("at most one floor");
  if (objects[category::kWall].max > 4) throw ValidationError("at most four walls");
  if (points_per_object.min < 1 || points_per_object.max < points_per_object.min)
    throw ValidationError("points per object range is empty");
  if (!(point_density > 0.0)) throw ValidationError("point density must be positive");
  if (!(room_extent_min > 0.0) || room_extent_max < room_extent_min) throw ValidationError("room extent range is empty");
  if (!(wall_height > 0.0)) throw ValidationError("wall height must be positive");
  if (color_noise < 0.0 || color_instance_noise < 0.0 || coord_noise < 0.0) throw ValidationError("noise must be non-negative");
}

Scene generate_scene(const SynthSpec& spec) {
  spec.validate();
  CounterRng rng(spec.seed);
  Builder b(spec, rng);
  b.scene.num_categories = spec.num_categories;

  const double lx = rng.uniform(spec.room_extent_min, spec.room_extent_max);
  const double ly = rng.uniform(spec.room_extent_min, spec.room_extent_max);
  int counts[category::kCount];
  for (int c = 0; c < category::kCount; ++c) counts[c] = draw(spec.objects[static_cast<std::size_t>(c)], rng);

  // Lay out box footprints first so the floor can leave them out.
  const double margin = 0.3, gap = 0.35;
  struct Box {
    Footprint fp;
    double height;
    int cat;
  };
  std::vector<Box> boxes;
  std::vector<Footprint> taken;
  auto place = [&](double w, double d) -> std::optional<Footprint> {
    if (w + 2 * margin > lx || d + 2 * margin > ly) return std::nullopt;
    for (int attempt = 0; attempt < 60; ++attempt) {
      const double x = rng.uniform(margin, lx - margin - w);
      const double y = rng.uniform(margin, ly - margin - d);
      const Footprint fp{x, y, x + w, y + d};
      if (std::none_of(taken.begin(), taken.end(), [&](const Footprint& o) { return fp.overlaps(o, gap); })) {
        taken.push_back(fp);
        return fp;
      }
    }
    return std::nullopt;
  };
  for (int k = 0; k < counts[category::kCabinet]; ++k)
    if (auto fp = place(rng.uniform(0.5, 1.2), rng.uniform(0.4, 0.6)))
      boxes.push_back({*fp, rng.uniform(1.0, 2.0), category::kCabinet});
  for (int k = 0; k < counts[category::kTable]; ++k)
    if (auto fp = place(rng.uniform(0.8, 1.6), rng.uniform(0.6, 1.0)))
      boxes.push_back({*fp, rng.uniform(0.70, 0.80), category::kTable});
  for (int k = 0; k < counts[category::kChair]; ++k)
    if (auto fp = place(rng.uniform(0.40, 0.55), rng.uniform(0.40, 0.55)))
      boxes.push_back({*fp, rng.uniform(0.40, 0.50), category::kChair});

  if (counts[category::kFloor] > 0) {
    const std::size_t first = b.scene.points.size();
    const Eigen::Vector3d color = b.instance_color(category::kFloor);
    b.sample_rect({0, 0, 0}, {lx, 0, 0}, {0, ly, 0}, b.points_for_area(lx * ly), color, category::kFloor, &taken);
    b.end_instance(first);
  }
  // Walls on sides x=0, y=0, x=lx, y=ly in that order.
  const double h = spec.wall_height;
  const std::array<std::array<Eigen::Vector3d, 3>, 4> walls{{
      {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(0, ly, 0), Eigen::Vector3d(0, 0, h)},
      {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(lx, 0, 0), Eigen::Vector3d(0, 0, h)},
      {Eigen::Vector3d(lx, 0, 0), Eigen::Vector3d(0, ly, 0), Eigen::Vector3d(0, 0, h)},
      {Eigen::Vector3d(0, ly, 0), Eigen::Vector3d(lx, 0, 0), Eigen::Vector3d(0, 0, h)},
  }};
  for (int k = 0; k < counts[category::kWall]; ++k) {
    const auto& w = walls[static_cast<std::size_t>(k)];
    const std::size_t first = b.scene.points.size();
    const Eigen::Vector3d color = b.instance_color(category::kWall);
    b.sample_rect(w[0], w[1], w[2], b.points_for_area(w[1].norm() * h), color, category::kWall);
    b.end_instance(first);
  }
  for (const auto& box : boxes) b.sample_box(box.fp, 0.0, box.height, box.cat);

  // Clutter rests on a table top when one exists, otherwise on the floor.
  std::vector<const Box*> tables;
  for (const auto& box : boxes)
    if (box.cat == category::kTable) tables.push_back(&box);
  std::vector<Eigen::Vector4d> spheres;  // center, radius
  auto clear_of_spheres = [&](const Eigen::Vector3d& c, double r) {
    for (const auto& o : spheres)
      if ((o.head<3>() - c).norm() < o[3] + r + 0.1) return false;
    return true;
  };
  for (int k = 0; k < counts[category::kClutter]; ++k) {
    const double r = rng.uniform(0.1, 0.2);
    if (!tables.empty()) {
      const Box& t = *tables[static_cast<std::size_t>(rng.uniform_below(tables.size()))];
      const double w = t.fp.x1 - t.fp.x0, d = t.fp.y1 - t.fp.y0;
      if (w < 2 * r || d < 2 * r) continue;
      for (int attempt = 0; attempt < 30; ++attempt) {
        const double x = rng.uniform(t.fp.x0 + r, t.fp.x1 - r), y = rng.uniform(t.fp.y0 + r, t.fp.y1 - r);
        const Eigen::Vector3d c(x, y, t.height + r);
        if (!clear_of_spheres(c, r)) continue;
        spheres.emplace_back(c.x(), c.y(), c.z(), r);
        b.sample_sphere(c, r, t.height + 0.01, category::kClutter);
        break;
      }
    } else if (auto fp = place(2 * r, 2 * r)) {
      b.sample_sphere({fp->x0 + r, fp->y0 + r, r}, r, 0.01, category::kClutter);
    }
  }

  if (b.scene.points.empty()) throw ValidationError("spec generated an empty scene");
  b.scene.validate();
  return std::move(b.scene);
}

std::vector<std::filesystem::path> generate_corpus(const SynthSpec& spec, int count,
                                                   const std::filesystem::path& out_dir) {
  std::vector<std::filesystem::path> files;
  if (count <= 0) return files;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  for (int k = 0; k < count; ++k) {
    SynthSpec s = spec;
    s.seed = spec.seed + static_cast<std::uint64_t>(k);
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04d.otoc", k);
    const auto path = out_dir / name;
    save_scene(generate_scene(s), path);
    files.push_back(path);
  }
  return files;
}

}  // namespace otoc

#include "otoc/annotate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "binio.hpp"
#include "otoc/error.hpp"
#include "otoc/rng.hpp"

namespace otoc {

namespace {

// Partial Fisher-Yates: the first `count` entries become a uniform sample without replacement.
template <typename T>
void sample_prefix(std::vector<T>& items, std::size_t count, CounterRng& rng) {
  for (std::size_t i = 0; i < count && i + 1 < items.size(); ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_below(items.size() - i));
    std::swap(items[i], items[j]);
  }
}

}  // namespace

double PseudoLabels::coverage() const {
  if (entries.empty()) return 0.0;
  const auto labeled = std::count_if(entries.begin(), entries.end(), [](const PseudoLabel& e) { return e.label.has_value(); });
  return static_cast<double>(labeled) / static_cast<double>(entries.size());
}

void PseudoLabels::validate() const {
  for (std::size_t j = 0; j < entries.size(); ++j) {
    const auto& e = entries[j];
    const bool ok = e.provenance == Provenance::kAbsent ? !e.label.has_value() : e.label.has_value();
    if (!ok) throw ValidationError("pseudo label " + std::to_string(j) + ": provenance and label disagree");
    if (e.provenance == Provenance::kSeed && e.confidence != 1.0f)
      throw ValidationError("seed entry " + std::to_string(j) + " must have confidence 1");
    if (!(e.confidence >= 0.0f && e.confidence <= 1.0f))
      throw ValidationError("confidence out of [0,1] at entry " + std::to_string(j));
  }
}

ClickSet simulate_clicks(const Scene& scene, std::uint64_t seed, int clicks_per_thing, double thing_fraction) {
  if (clicks_per_thing < 1) throw ValidationError("clicks_per_thing must be >= 1");
  if (!(thing_fraction > 0.0 && thing_fraction <= 1.0)) throw ValidationError("thing_fraction must lie in (0, 1]");

  // std::map keeps instances in ascending id order.
  std::map<std::int32_t, std::vector<int>> instances;
  for (std::size_t i = 0; i < scene.size(); ++i)
    if (scene.gt_instance[i]) instances[*scene.gt_instance[i]].push_back(static_cast<int>(i));
  if (instances.empty()) throw ValidationError("scene has no instances to click");

  std::vector<const std::vector<int>*> order;
  for (const auto& [id, pts] : instances) order.push_back(&pts);

  CounterRng rng(seed);
  const auto chosen = static_cast<std::size_t>(std::ceil(thing_fraction * static_cast<double>(order.size()) - 1e-9));
  sample_prefix(order, chosen, rng);
  order.resize(chosen);

  ClickSet set;
  set.rng_seed = seed;
  set.clicks_per_thing = clicks_per_thing;
  set.thing_fraction = thing_fraction;
  for (const auto* pts : order) {
    std::vector<int> candidates = *pts;
    const auto take = std::min(candidates.size(), static_cast<std::size_t>(clicks_per_thing));
    sample_prefix(candidates, take, rng);
    for (std::size_t a = 0; a < take; ++a) {
      const int p = candidates[a];
      set.clicks.push_back({p, *scene.gt_semantic[static_cast<std::size_t>(p)]});
    }
  }
  return set;
}

PseudoLabels expand_clicks(const ClickSet& clicks, const SuperVoxelPartition& part) {
  PseudoLabels out;
  out.entries.resize(part.num_supervoxels());
  std::vector<bool> conflicted(part.num_supervoxels(), false);
  for (const auto& c : clicks.clicks) {
    if (c.point < 0 || static_cast<std::size_t>(c.point) >= part.num_points())
      throw ValidationError("click index out of range");
    const auto sv = static_cast<std::size_t>(part.id_of(static_cast<std::size_t>(c.point)));
    if (conflicted[sv]) continue;
    auto& e = out.entries[sv];
    if (e.label && *e.label != c.category) {
      e = PseudoLabel{};
      conflicted[sv] = true;
      ++out.conflicts;
      continue;
    }
    e = PseudoLabel{c.category, 1.0f, Provenance::kSeed};
  }
  return out;
}

namespace {
constexpr std::uint32_t kLabelVersion = 1;
}

PseudoLabels load_pseudo_labels(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes);
  r.expect_magic("OTPL");
  r.expect_version(kLabelVersion);
  const std::uint32_t m = r.u32();
  r.need(static_cast<std::size_t>(m) * 9);
  PseudoLabels out;
  out.entries.resize(m);
  for (auto& e : out.entries) {
    const std::int32_t label = r.i32();
    if (label < kUnlabeled) throw ValidationError("invalid label in pseudo-label file");
    e.label = from_file_label(label);
    e.confidence = r.f32();
    const std::uint8_t prov = r.u8();
    if (prov > 2) throw FormatError("invalid provenance byte");
    e.provenance = static_cast<Provenance>(prov);
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after pseudo-label records");
  out.validate();
  return out;
}

void save_pseudo_labels(const PseudoLabels& labels, const std::filesystem::path& path) {
  labels.validate();
  detail::ByteWriter w;
  w.magic("OTPL");
  w.u32(kLabelVersion);
  w.u32(static_cast<std::uint32_t>(labels.size()));
  for (const auto& e : labels.entries) {
    w.i32(to_file_label(e.label));
    w.f32(e.confidence);
    w.u8(static_cast<std::uint8_t>(e.provenance));
  }
  detail::write_file(path, w.bytes());
}

}  // namespace otoc

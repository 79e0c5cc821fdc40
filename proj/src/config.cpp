#include "otoc/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "otoc/error.hpp"
#include "otoc/rng.hpp"

namespace otoc {

void TrainConfig::validate() const {
  if (embed_dim < 1) throw ValidationError("embed_dim must be positive");
  // A threshold above 1 is accepted and simply lets nothing through the gate.
  if (!(confidence_threshold > 0.0) || !std::isfinite(confidence_threshold))
    throw ValidationError("confidence_threshold must be positive");
  if (samples_per_category < 1) throw ValidationError("samples_per_category must be positive");
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  if (!(key_momentum >= 0.0 && key_momentum <= 1.0)) throw ValidationError("key_momentum must lie in [0, 1]");
  pairwise.validate();
  if (self_train_iterations < 0) throw ValidationError("self_train_iterations must be non-negative");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(sgd_momentum >= 0.0 && sgd_momentum < 1.0)) throw ValidationError("sgd_momentum must lie in [0, 1)");
  if (epochs < 1 || batch_size < 1) throw ValidationError("epochs and batch_size must be positive");
  if (max_points_per_epoch < 0) throw ValidationError("max_points_per_epoch must be non-negative");
  for (int h : unary_hidden)
    if (h < 1) throw ValidationError("hidden widths must be positive");
  for (int h : relation_hidden)
    if (h < 1) throw ValidationError("hidden widths must be positive");
  if (relation_steps < 1) throw ValidationError("relation_steps must be positive");
  if (relation_points_per_sv < 0) throw ValidationError("relation_points_per_sv must be non-negative");
  if (mean_field_iterations < 1) throw ValidationError("mean_field_iterations must be positive");
  if (graph_keep_nearest < 0) throw ValidationError("graph_keep_nearest must be non-negative");
  if (k_neighbors < 3) throw ValidationError("k_neighbors must be at least 3");
  partition.validate();
  if (early_stop_delta < 0.0) throw ValidationError("early_stop_delta must be non-negative");
  if (clicks_per_thing < 1) throw ValidationError("clicks_per_thing must be positive");
  if (!(thing_fraction > 0.0 && thing_fraction <= 1.0)) throw ValidationError("thing_fraction must lie in (0, 1]");
}

const char* mode_name(PropagationMode mode) {
  switch (mode) {
    case PropagationMode::kUnaryOnly:
      return "unary";
    case PropagationMode::kGraph:
      return "graph";
    case PropagationMode::kGraphRelation:
      return "graph_relation";
  }
  return "?";
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ValidationError("bad value for " + key + ": '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ValidationError("bad value for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("bad boolean for " + key + ": '" + v + "'");
}

std::vector<int> parse_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  if (out.empty()) throw ValidationError("empty list for " + key);
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string num(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

// One entry per configurable field: how to set it and how to print it.
struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Proj>
Field int_field(Proj proj) {
  return {[proj](RunConfig& c, const std::string& k, const std::string& v) { proj(c) = parse_number<int>(k, v); },
          [proj](const RunConfig& c) { return std::to_string(proj(c)); }};
}
template <typename Proj>
Field double_field(Proj proj) {
  return {[proj](RunConfig& c, const std::string& k, const std::string& v) { proj(c) = parse_double(k, v); },
          [proj](const RunConfig& c) { return num(proj(c)); }};
}
template <typename Proj>
Field bool_field(Proj proj) {
  return {[proj](RunConfig& c, const std::string& k, const std::string& v) { proj(c) = parse_bool(k, v); },
          [proj](const RunConfig& c) { return std::string(proj(c) ? "true" : "false"); }};
}
template <typename Proj>
Field list_field(Proj proj) {
  return {[proj](RunConfig& c, const std::string& k, const std::string& v) { proj(c) = parse_list(k, v); },
          [proj](const RunConfig& c) { return join(proj(c)); }};
}

#define OTOC_T(member) [](auto& c) -> auto& { return c.train.member; }
#define OTOC_S(member) [](auto& c) -> auto& { return c.synth.member; }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    f["seed"] = {[](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_number<std::uint64_t>(k, v); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }};
    f["rng_algorithm"] = {[](RunConfig&, const std::string&, const std::string& v) {
                            if (v != CounterRng::kAlgorithm)
                              throw ValidationError("unsupported rng_algorithm '" + v + "'");
                          },
                          [](const RunConfig&) { return std::string(CounterRng::kAlgorithm); }};
    f["propagation"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                          if (v == "unary")
                            c.train.mode = PropagationMode::kUnaryOnly;
                          else if (v == "graph")
                            c.train.mode = PropagationMode::kGraph;
                          else if (v == "graph_relation")
                            c.train.mode = PropagationMode::kGraphRelation;
                          else
                            throw ValidationError("propagation must be unary, graph or graph_relation");
                        },
                        [](const RunConfig& c) { return std::string(mode_name(c.train.mode)); }};

    f["embed_dim"] = int_field(OTOC_T(embed_dim));
    f["confidence_threshold"] = double_field(OTOC_T(confidence_threshold));
    f["samples_per_category"] = int_field(OTOC_T(samples_per_category));
    f["temperature"] = double_field(OTOC_T(temperature));
    f["key_momentum"] = double_field(OTOC_T(key_momentum));
    f["lambda_c"] = double_field(OTOC_T(pairwise.lambda_c));
    f["lambda_p"] = double_field(OTOC_T(pairwise.lambda_p));
    f["lambda_u"] = double_field(OTOC_T(pairwise.lambda_u));
    f["lambda_f"] = double_field(OTOC_T(pairwise.lambda_f));
    f["sigma_c"] = double_field(OTOC_T(pairwise.sigma_c));
    f["sigma_p"] = double_field(OTOC_T(pairwise.sigma_p));
    f["sigma_u"] = double_field(OTOC_T(pairwise.sigma_u));
    f["sigma_f"] = double_field(OTOC_T(pairwise.sigma_f));
    f["self_train_iterations"] = int_field(OTOC_T(self_train_iterations));
    f["learning_rate"] = double_field(OTOC_T(learning_rate));
    f["sgd_momentum"] = double_field(OTOC_T(sgd_momentum));
    f["epochs"] = int_field(OTOC_T(epochs));
    f["batch_size"] = int_field(OTOC_T(batch_size));
    f["max_points_per_epoch"] = int_field(OTOC_T(max_points_per_epoch));
    f["unary_hidden"] = list_field(OTOC_T(unary_hidden));
    f["relation_hidden"] = list_field(OTOC_T(relation_hidden));
    f["relation_steps"] = int_field(OTOC_T(relation_steps));
    f["relation_points_per_sv"] = int_field(OTOC_T(relation_points_per_sv));
    f["mean_field_iterations"] = int_field(OTOC_T(mean_field_iterations));
    f["graph_keep_nearest"] = int_field(OTOC_T(graph_keep_nearest));
    f["k_neighbors"] = int_field(OTOC_T(k_neighbors));
    f["warm_start"] = bool_field(OTOC_T(warm_start));
    f["early_stop_delta"] = double_field(OTOC_T(early_stop_delta));
    f["clicks_per_thing"] = int_field(OTOC_T(clicks_per_thing));
    f["thing_fraction"] = double_field(OTOC_T(thing_fraction));

    f["partition_k_neighbors"] = int_field(OTOC_T(partition.k_neighbors));
    f["normal_angle_max"] = double_field(OTOC_T(partition.normal_angle_max));
    f["color_dist_max"] = double_field(OTOC_T(partition.color_dist_max));
    f["min_size"] = int_field(OTOC_T(partition.min_size));
    f["max_size"] = int_field(OTOC_T(partition.max_size));

    const char* names[] = {"floors", "walls", "tables", "chairs", "cabinets", "clutter"};
    for (std::size_t c = 0; c < 6; ++c) {
      f[std::string(names[c]) + "_min"] = int_field([c](auto& r) -> auto& { return r.synth.objects[c].min; });
      f[std::string(names[c]) + "_max"] = int_field([c](auto& r) -> auto& { return r.synth.objects[c].max; });
    }
    f["point_density"] = double_field(OTOC_S(point_density));
    f["points_per_object_min"] = int_field(OTOC_S(points_per_object.min));
    f["points_per_object_max"] = int_field(OTOC_S(points_per_object.max));
    f["color_instance_noise"] = double_field(OTOC_S(color_instance_noise));
    f["color_noise"] = double_field(OTOC_S(color_noise));
    f["coord_noise"] = double_field(OTOC_S(coord_noise));
    f["room_extent_min"] = double_field(OTOC_S(room_extent_min));
    f["room_extent_max"] = double_field(OTOC_S(room_extent_max));
    f["wall_height"] = double_field(OTOC_S(wall_height));
    return f;
  }();
  return table;
}

#undef OTOC_T
#undef OTOC_S

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ValidationError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end()) throw ValidationError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    it->second.set(cfg, key, value);
  }
  cfg.train.validate();
  cfg.synth.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(config) + "\n";
  return out;
}

}  // namespace otoc

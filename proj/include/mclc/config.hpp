#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>

#include <json.hpp>

#include "mclc/clustering.hpp"
#include "mclc/errors.hpp"
#include "mclc/mclc.hpp"
#include "mclc/metrics.hpp"
#include "mclc/noise.hpp"
#include "mclc/refine.hpp"

namespace mclc {

using Json = nlohmann::json;

struct MetricsConfig {
  double match_radius = kDefaultMatchRadius;
  friend bool operator==(const MetricsConfig&, const MetricsConfig&) = default;
};

/// Everything a run needs besides the manifest. An absent `crf` disables
/// refinement.
struct RunConfig {
  MclcParams mclc;
  std::optional<CrfParams> crf = CrfParams{};
  MetricsConfig metrics;
  std::filesystem::path output_dir = "out";
  int jobs = 1;

  void validate() const {
    mclc.validate();
    if (crf) {
      crf->validate();
    }
    if (!(metrics.match_radius >= 0.0)) {
      throw InvalidParams("match_radius must be non-negative");
    }
    if (jobs < 1) {
      throw InvalidParams("jobs must be at least 1");
    }
  }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

inline void require_object(const Json& j, const char* what, std::initializer_list<const char*> keys) {
  if (!j.is_object()) {
    throw InvalidParams(std::string(what) + " must be a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : keys) {
      known = known || key == k;
    }
    if (!known) {
      throw InvalidParams("unknown key '" + key + "' in " + what);
    }
  }
}

template <typename T>
void read_field(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) {
    return;
  }
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidParams(std::string("bad value for '") + key + "': " + e.what());
  }
}

} // namespace detail

inline Json to_json(const ClusterParams& p) {
  return Json{{"n_clusters", p.n_clusters},
              {"mu_c", p.mu_c},
              {"mu_s", p.mu_s ? Json(*p.mu_s) : Json(nullptr)},
              {"conv_threshold", p.conv_threshold},
              {"max_iters", p.max_iters},
              {"backend", to_string(p.backend)},
              {"min_segment_fraction", p.min_segment_fraction}};
}

inline ClusterParams cluster_params_from_json(const Json& j) {
  detail::require_object(j, "cluster",
                         {"n_clusters", "mu_c", "mu_s", "conv_threshold", "max_iters", "backend",
                          "min_segment_fraction"});
  ClusterParams p;
  detail::read_field(j, "n_clusters", p.n_clusters);
  detail::read_field(j, "mu_c", p.mu_c);
  if (j.contains("mu_s") && !j.at("mu_s").is_null()) {
    double v = 0.0;
    detail::read_field(j, "mu_s", v);
    p.mu_s = v;
  }
  detail::read_field(j, "conv_threshold", p.conv_threshold);
  detail::read_field(j, "max_iters", p.max_iters);
  if (j.contains("backend")) {
    std::string b;
    detail::read_field(j, "backend", b);
    p.backend = backend_from_string(b);
  }
  detail::read_field(j, "min_segment_fraction", p.min_segment_fraction);
  return p;
}

inline Json to_json(const NoiseSpec& n) {
  return Json{{"kind", to_string(n.kind)}, {"intensity", n.intensity}, {"seed", n.seed}};
}

inline NoiseSpec noise_from_json(const Json& j) {
  detail::require_object(j, "noise", {"kind", "intensity", "seed"});
  NoiseSpec n;
  if (j.contains("kind")) {
    std::string k;
    detail::read_field(j, "kind", k);
    n.kind = noise_kind_from_string(k);
  }
  detail::read_field(j, "intensity", n.intensity);
  detail::read_field(j, "seed", n.seed);
  return n;
}

inline Json to_json(const MclcParams& p) {
  return Json{{"cluster", to_json(p.cluster)},
              {"noise", to_json(p.noise)},
              {"max_runs", p.max_runs},
              {"outer_threshold", p.outer_threshold},
              {"check_interval", p.check_interval},
              {"binarize_threshold", p.binarize_threshold},
              {"patch_radius", p.patch_radius}};
}

inline MclcParams mclc_params_from_json(const Json& j) {
  detail::require_object(j, "mclc",
                         {"cluster", "noise", "max_runs", "outer_threshold", "check_interval",
                          "binarize_threshold", "patch_radius"});
  MclcParams p;
  if (j.contains("cluster")) {
    p.cluster = cluster_params_from_json(j.at("cluster"));
  }
  if (j.contains("noise")) {
    p.noise = noise_from_json(j.at("noise"));
  }
  detail::read_field(j, "max_runs", p.max_runs);
  detail::read_field(j, "outer_threshold", p.outer_threshold);
  detail::read_field(j, "check_interval", p.check_interval);
  detail::read_field(j, "binarize_threshold", p.binarize_threshold);
  detail::read_field(j, "patch_radius", p.patch_radius);
  return p;
}

inline Json to_json(const CrfParams& p) {
  return Json{{"window_radius", p.window_radius}, {"iters", p.iters},
              {"w_appearance", p.w_appearance},   {"w_smoothness", p.w_smoothness},
              {"theta_alpha", p.theta_alpha},     {"theta_beta", p.theta_beta},
              {"theta_gamma", p.theta_gamma},     {"unary_epsilon", p.unary_epsilon}};
}

inline CrfParams crf_params_from_json(const Json& j) {
  detail::require_object(j, "crf",
                         {"window_radius", "iters", "w_appearance", "w_smoothness", "theta_alpha", "theta_beta",
                          "theta_gamma", "unary_epsilon"});
  CrfParams p;
  detail::read_field(j, "window_radius", p.window_radius);
  detail::read_field(j, "iters", p.iters);
  detail::read_field(j, "w_appearance", p.w_appearance);
  detail::read_field(j, "w_smoothness", p.w_smoothness);
  detail::read_field(j, "theta_alpha", p.theta_alpha);
  detail::read_field(j, "theta_beta", p.theta_beta);
  detail::read_field(j, "theta_gamma", p.theta_gamma);
  detail::read_field(j, "unary_epsilon", p.unary_epsilon);
  return p;
}

inline Json to_json(const RunConfig& c) {
  return Json{{"mclc", to_json(c.mclc)},
              {"crf", c.crf ? to_json(*c.crf) : Json(nullptr)},
              {"metrics", Json{{"match_radius", c.metrics.match_radius}}},
              {"output_dir", c.output_dir.generic_string()},
              {"jobs", c.jobs}};
}

/// Missing keys keep their defaults; unknown keys are rejected so typos do
/// not silently fall back to defaults.
inline RunConfig run_config_from_json(const Json& j) {
  detail::require_object(j, "config", {"mclc", "crf", "metrics", "output_dir", "jobs"});
  RunConfig c;
  if (j.contains("mclc")) {
    c.mclc = mclc_params_from_json(j.at("mclc"));
  }
  if (j.contains("crf")) {
    if (j.at("crf").is_null()) {
      c.crf.reset();
    } else {
      c.crf = crf_params_from_json(j.at("crf"));
    }
  }
  if (j.contains("metrics")) {
    detail::require_object(j.at("metrics"), "metrics", {"match_radius"});
    detail::read_field(j.at("metrics"), "match_radius", c.metrics.match_radius);
  }
  if (j.contains("output_dir")) {
    std::string dir;
    detail::read_field(j, "output_dir", dir);
    c.output_dir = dir;
  }
  detail::read_field(j, "jobs", c.jobs);
  c.validate();
  return c;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "'");
  }
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline void write_json_file(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write '" + path.string() + "'");
  }
  out << j.dump(2) << '\n';
  if (!out) {
    throw IoError("write failed for '" + path.string() + "'");
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path) { return run_config_from_json(read_json_file(path)); }

} // namespace mclc

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mclc/config.hpp"
#include "mclc/image.hpp"
#include "mclc/png_io.hpp"

namespace mclc {

/// One image of a dataset. Paths are relative to the manifest root.
struct ManifestEntry {
  std::string id;
  std::filesystem::path image_path;
  std::vector<PointAnnotation> annotations;
  std::optional<std::filesystem::path> gt_mask_path;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::filesystem::path root = ".";
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : root / p; }

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Relative paths serialize with forward slashes; annotations as integer
/// pixel coordinates with the origin at the top-left corner.
inline Json to_json(const DatasetManifest& m) {
  Json entries = Json::array();
  for (const auto& e : m.entries) {
    Json annos = Json::array();
    for (const auto& a : e.annotations) {
      annos.push_back(Json{{"x", a.x}, {"y", a.y}, {"category", to_string(a.category)}});
    }
    Json je{{"id", e.id}, {"image", e.image_path.generic_string()}, {"annotations", annos}};
    je["gt_mask"] = e.gt_mask_path ? Json(e.gt_mask_path->generic_string()) : Json(nullptr);
    entries.push_back(std::move(je));
  }
  return Json{{"root", m.root.generic_string()}, {"entries", entries}};
}

inline DatasetManifest manifest_from_json(const Json& j) {
  detail::require_object(j, "manifest", {"root", "entries"});
  DatasetManifest m;
  if (j.contains("root")) {
    std::string root;
    detail::read_field(j, "root", root);
    m.root = root;
  }
  if (!j.contains("entries") || !j.at("entries").is_array()) {
    throw InvalidSpec("manifest needs an 'entries' array");
  }
  for (const auto& je : j.at("entries")) {
    detail::require_object(je, "manifest entry", {"id", "image", "annotations", "gt_mask"});
    ManifestEntry e;
    std::string image;
    detail::read_field(je, "image", image);
    if (image.empty()) {
      throw InvalidSpec("manifest entry without an image path");
    }
    e.image_path = image;
    e.id = e.image_path.stem().string();
    detail::read_field(je, "id", e.id);
    if (je.contains("gt_mask") && !je.at("gt_mask").is_null()) {
      std::string gt;
      detail::read_field(je, "gt_mask", gt);
      e.gt_mask_path = gt;
    }
    if (je.contains("annotations")) {
      if (!je.at("annotations").is_array()) {
        throw InvalidSpec("annotations of '" + e.id + "' must be an array");
      }
      for (const auto& ja : je.at("annotations")) {
        detail::require_object(ja, "annotation", {"x", "y", "category"});
        if (!ja.contains("x") || !ja.contains("y")) {
          throw InvalidSpec("annotation of '" + e.id + "' needs x and y");
        }
        PointAnnotation a;
        a.image_id = e.id;
        detail::read_field(ja, "x", a.x);
        detail::read_field(ja, "y", a.y);
        if (ja.contains("category")) {
          std::string c;
          detail::read_field(ja, "category", c);
          a.category = category_from_string(c);
        }
        e.annotations.push_back(a);
      }
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

/// Parses a manifest file; a relative root is taken relative to the file's
/// directory.
inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  DatasetManifest m = manifest_from_json(read_json_file(path));
  if (m.root.is_relative()) {
    m.root = (path.parent_path() / m.root).lexically_normal();
  }
  return m;
}

/// Checks one entry against the filesystem: image (and gt, if named) must
/// load and every annotation must lie inside the image. Returns the loaded
/// image on success.
inline InfraredImage check_entry(const DatasetManifest& m, const ManifestEntry& e) {
  const auto image_path = m.resolve(e.image_path);
  if (!std::filesystem::exists(image_path)) {
    throw IoError("missing image '" + image_path.string() + "'");
  }
  InfraredImage img = load_image(image_path);
  for (const auto& a : e.annotations) {
    if (!img.in_bounds(a.x, a.y)) {
      throw OutOfBounds("annotation (" + std::to_string(a.x) + ", " + std::to_string(a.y) + ") outside '" +
                        image_path.string() + "'");
    }
  }
  if (e.gt_mask_path && !std::filesystem::exists(m.resolve(*e.gt_mask_path))) {
    throw IoError("missing ground-truth mask '" + m.resolve(*e.gt_mask_path).string() + "'");
  }
  return img;
}

} // namespace mclc

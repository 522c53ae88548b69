#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reldet/matching/matching.hpp"
#include "reldet/numeric/tensor.hpp"

namespace reldet::data {

/// Ordered class names; index size() is the null class.
struct ClassCatalog {
  std::vector<std::string> names;

  static ClassCatalog defaults();
  std::size_t size() const { return names.size(); }
  std::size_t null_class() const { return names.size(); }
  /// Throws ContractError if empty or names repeat.
  void validate() const;

  friend bool operator==(const ClassCatalog&, const ClassCatalog&) = default;
};

struct Scene {
  numeric::Tensor image;  // [3×H×W] in [0,1]
  std::vector<matching::GroundTruth> objects;
};

struct SceneConfig {
  std::size_t image_size = 32;
  std::size_t max_objects = 4;
  ClassCatalog catalog = ClassCatalog::defaults();
};

/// Extent range of generated boxes (normalized).
inline constexpr double kMinBoxExtent = 0.1;
inline constexpr double kMaxBoxExtent = 0.4;

/// RGB color used for a class, both when rendering scenes and when drawing
/// predicted boxes.
struct Color {
  double r = 0.0, g = 0.0, b = 0.0;
};
Color class_color(std::size_t class_id);

/// Pure function of (seed, config): 1..max_objects objects, each a filled
/// class-specific primitive in a class-specific color over a noisy background.
Scene generate_scene(std::uint64_t seed, const SceneConfig& config);

struct AnnotatedObject {
  std::size_t class_id = 0;
  std::string class_name;
  geometry::Box box;
  std::optional<double> confidence;
};

/// Mirrors the annotation JSON document.
struct Annotation {
  std::string image;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<AnnotatedObject> objects;
};

/// Inclusive pixel bounds covered by a normalized box, clamped to the image.
struct PixelRect {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};
PixelRect box_pixels(const geometry::Box& box, std::size_t width, std::size_t height);

/// Copy of `image` [3×H×W] with a one-pixel outline in the class color
/// around every object's box.
numeric::Tensor draw_box_outlines(const numeric::Tensor& image,
                                  const std::vector<AnnotatedObject>& objects);

std::string encode_annotation(const Annotation& annotation);
/// Throws ParseError on malformed JSON or missing/ill-typed fields.
Annotation parse_annotation(std::string_view text);

/// Writes <stem>.ppm and <stem>.json into `dir`.
void save_scene(const Scene& scene, const ClassCatalog& catalog, const std::filesystem::path& dir,
                const std::string& stem);
/// Loads from an annotation JSON path; the image path is resolved relative to
/// the JSON file. Scenes without objects, with class ids outside the catalog,
/// or whose image size disagrees with the annotation are rejected with ParseError.
Scene load_scene(const std::filesystem::path& annotation_path, const ClassCatalog& catalog);

}  // namespace reldet::data

#include "reldet/data/scene.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "reldet/data/image_io.hpp"
#include "reldet/errors.hpp"
#include "reldet/random.hpp"

namespace reldet::data {

namespace nm = reldet::numeric;
using json = nlohmann::json;

ClassCatalog ClassCatalog::defaults() {
  return {{"transformer", "insulator", "bushing", "robot", "uav"}};
}

void ClassCatalog::validate() const {
  if (names.empty()) throw ContractError("class catalog is empty");
  const std::set<std::string> unique(names.begin(), names.end());
  if (unique.size() != names.size()) throw ContractError("class catalog has duplicate names");
}

Color class_color(std::size_t class_id) {
  // Red, purple, yellow, blue, green for the default catalog.
  static constexpr Color kPalette[] = {{0.90, 0.10, 0.10}, {0.60, 0.15, 0.80}, {0.95, 0.85, 0.10},
                                       {0.10, 0.25, 0.90}, {0.10, 0.80, 0.25}};
  constexpr std::size_t kCount = sizeof(kPalette) / sizeof(kPalette[0]);
  if (class_id < kCount) return kPalette[class_id];
  // Spread further classes around the hue circle at full saturation.
  const double hue = std::fmod(0.13 + 0.618033988749895 * static_cast<double>(class_id), 1.0);
  const auto channel = [hue](double offset) {
    const double t = std::fmod(hue + offset, 1.0) * 6.0;
    return std::clamp(std::abs(t - 3.0) - 1.0, 0.0, 1.0) * 0.85 + 0.05;
  };
  return {channel(0.0), channel(2.0 / 3.0), channel(1.0 / 3.0)};
}

namespace {

enum class Primitive { kRectangle, kEllipse, kTriangle };

Primitive primitive_for(std::size_t class_id) {
  switch (class_id % 3) {
    case 0:
      return Primitive::kRectangle;
    case 1:
      return Primitive::kEllipse;
    default:
      return Primitive::kTriangle;
  }
}

bool covers(Primitive shape, const geometry::Box& b, double px, double py) {
  const geometry::Corners c = geometry::to_corners(b);
  if (px < c.x1 || px > c.x2 || py < c.y1 || py > c.y2) return false;
  switch (shape) {
    case Primitive::kRectangle:
      return true;
    case Primitive::kEllipse: {
      const double dx = (px - b.cx) / (0.5 * b.w);
      const double dy = (py - b.cy) / (0.5 * b.h);
      return dx * dx + dy * dy <= 1.0;
    }
    case Primitive::kTriangle:
      // Apex at top-center, base along the bottom edge.
      return std::abs(px - b.cx) <= 0.5 * b.w * (py - c.y1) / b.h;
  }
  return false;
}

}  // namespace

Scene generate_scene(std::uint64_t seed, const SceneConfig& config) {
  if (config.max_objects == 0) throw ContractError("generate_scene: max_objects must be >= 1");
  if (config.image_size == 0) throw ContractError("generate_scene: image_size must be positive");
  config.catalog.validate();
  Rng rng(seed);
  const std::size_t size = config.image_size;
  Scene scene;

  const std::size_t count = rng.uniform_int(1, config.max_objects);
  for (std::size_t i = 0; i < count; ++i) {
    matching::GroundTruth gt;
    gt.class_id = rng.uniform_int(0, config.catalog.size() - 1);
    const double w = rng.uniform(kMinBoxExtent, kMaxBoxExtent);
    const double h = rng.uniform(kMinBoxExtent, kMaxBoxExtent);
    gt.box = {rng.uniform(0.5 * w, 1.0 - 0.5 * w), rng.uniform(0.5 * h, 1.0 - 0.5 * h), w, h};
    scene.objects.push_back(gt);
  }

  std::vector<double> pixels(3 * size * size);
  const Color background{0.45, 0.47, 0.43};
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double px = (static_cast<double>(x) + 0.5) / static_cast<double>(size);
      const double py = (static_cast<double>(y) + 0.5) / static_cast<double>(size);
      Color color = background;
      // Later objects are painted over earlier ones.
      for (const auto& obj : scene.objects)
        if (covers(primitive_for(obj.class_id), obj.box, px, py)) color = class_color(obj.class_id);
      const double rgb[3] = {color.r, color.g, color.b};
      for (std::size_t c = 0; c < 3; ++c)
        pixels[(c * size + y) * size + x] = std::clamp(rgb[c] + rng.uniform(-0.08, 0.08), 0.0, 1.0);
    }
  scene.image = nm::Tensor({3, size, size}, std::move(pixels));
  return scene;
}

PixelRect box_pixels(const geometry::Box& box, std::size_t width, std::size_t height) {
  const auto span = [](double lo, double hi, std::size_t extent) {
    const double n = static_cast<double>(extent);
    const double first = std::clamp(std::floor(lo * n), 0.0, n - 1.0);
    const double last = std::clamp(std::ceil(hi * n) - 1.0, first, n - 1.0);
    return std::pair{static_cast<std::size_t>(first), static_cast<std::size_t>(last)};
  };
  const geometry::Corners c = geometry::to_corners(box);
  const auto [x0, x1] = span(c.x1, c.x2, width);
  const auto [y0, y1] = span(c.y1, c.y2, height);
  return {x0, y0, x1, y1};
}

nm::Tensor draw_box_outlines(const nm::Tensor& image, const std::vector<AnnotatedObject>& objects) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw DimensionError("draw_box_outlines expects [3xHxW], got " + nm::shape_str(image.shape()));
  const std::size_t h = image.dim(1), w = image.dim(2);
  nm::Tensor out = image;
  auto px = out.mutable_data();
  for (const auto& obj : objects) {
    const PixelRect r = box_pixels(obj.box, w, h);
    const Color color = class_color(obj.class_id);
    const double rgb[3] = {color.r, color.g, color.b};
    const auto paint = [&](std::size_t x, std::size_t y) {
      for (std::size_t c = 0; c < 3; ++c) px[(c * h + y) * w + x] = rgb[c];
    };
    for (std::size_t x = r.x0; x <= r.x1; ++x) {
      paint(x, r.y0);
      paint(x, r.y1);
    }
    for (std::size_t y = r.y0; y <= r.y1; ++y) {
      paint(r.x0, y);
      paint(r.x1, y);
    }
  }
  return out;
}

std::string encode_annotation(const Annotation& annotation) {
  json objects = json::array();
  for (const auto& o : annotation.objects) {
    json entry = {{"class_id", o.class_id}, {"class_name", o.class_name}, {"cx", o.box.cx},
                  {"cy", o.box.cy},         {"w", o.box.w},               {"h", o.box.h}};
    if (o.confidence) entry["confidence"] = *o.confidence;
    objects.push_back(std::move(entry));
  }
  const json doc = {{"image", annotation.image},
                    {"width", annotation.width},
                    {"height", annotation.height},
                    {"objects", std::move(objects)}};
  return doc.dump(2) + "\n";
}

namespace {

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

}  // namespace

Annotation parse_annotation(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t byte = e.byte ? e.byte - 1 : 0;
    throw ParseError(std::string("annotation: ") + e.what(), byte, line_of(text, byte));
  }
  try {
    Annotation a;
    a.image = doc.at("image").get<std::string>();
    a.width = doc.at("width").get<std::size_t>();
    a.height = doc.at("height").get<std::size_t>();
    for (const auto& o : doc.at("objects")) {
      AnnotatedObject obj;
      obj.class_id = o.at("class_id").get<std::size_t>();
      obj.class_name = o.at("class_name").get<std::string>();
      obj.box = {o.at("cx").get<double>(), o.at("cy").get<double>(), o.at("w").get<double>(),
                 o.at("h").get<double>()};
      if (o.contains("confidence")) obj.confidence = o.at("confidence").get<double>();
      a.objects.push_back(std::move(obj));
    }
    return a;
  } catch (const json::exception& e) {
    throw ParseError(std::string("annotation: ") + e.what(), 0);
  }
}

void save_scene(const Scene& scene, const ClassCatalog& catalog, const std::filesystem::path& dir,
                const std::string& stem) {
  Annotation a;
  a.image = stem + ".ppm";
  a.height = scene.image.dim(1);
  a.width = scene.image.dim(2);
  for (const auto& gt : scene.objects)
    a.objects.push_back({gt.class_id, catalog.names.at(gt.class_id), gt.box, std::nullopt});
  write_ppm(dir / a.image, scene.image);
  write_file(dir / (stem + ".json"), encode_annotation(a));
}

Scene load_scene(const std::filesystem::path& annotation_path, const ClassCatalog& catalog) {
  const Annotation a = parse_annotation(read_file(annotation_path));
  if (a.objects.empty())
    throw ParseError("annotation '" + annotation_path.string() + "' lists no objects", 0);
  Scene scene;
  scene.image = read_ppm(annotation_path.parent_path() / a.image);
  if (scene.image.dim(1) != a.height || scene.image.dim(2) != a.width)
    throw ParseError("annotation '" + annotation_path.string() + "' size disagrees with image", 0);
  for (const auto& o : a.objects) {
    if (o.class_id >= catalog.size())
      throw ParseError("annotation '" + annotation_path.string() + "' has class id " +
                           std::to_string(o.class_id) + " outside the catalog",
                       0);
    scene.objects.push_back({o.class_id, o.box});
  }
  return scene;
}

}  // namespace reldet::data

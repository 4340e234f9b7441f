#ifndef INTRIN_RENDER_HPP
#define INTRIN_RENDER_HPP

#include <array>
#include <cstdint>
#include <string>

#include "intrin/image.hpp"
#include "intrin/util.hpp"

namespace intrin {

struct Vec3 {
  double x = 0, y = 0, z = 0;
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    const double n = norm();
    return {x / n, y / n, z / n};
  }
};

using Rgb = std::array<double, 3>;

// Equirectangular latitude-longitude radiance grid, z-up, row 0 = zenith.
struct EnvironmentMap {
  Image radiance;  // 3-channel, nonnegative

  int width() const { return radiance.w; }
  int height() const { return radiance.h; }
  Vec3 texel_dir(int row, int col) const;
  double texel_solid_angle(int row) const;  // sin(theta) * dtheta * dphi
  Rgb texel(int row, int col) const {
    return {radiance.at(col, row, 0), radiance.at(col, row, 1),
            radiance.at(col, row, 2)};
  }
  double total_solid_angle() const;  // ~4*pi
};

enum class TextureFamily { solid, checker, noise };

struct Material {
  TextureFamily family = TextureFamily::solid;
  Rgb color_a{0.8, 0.8, 0.8};
  Rgb color_b{0.2, 0.2, 0.2};
  double texture_scale = 4.0;
  std::uint64_t noise_seed = 0;
  double k_s = 0.1;   // specular albedo, (0, 0.3)
  double n_s = 50.0;  // Phong exponent, (0, 300)

  Rgb albedo_at(const Vec3& p) const;  // in [0,1]
};

enum class PrimitiveType { sphere, box, torus };

struct Primitive {
  PrimitiveType type = PrimitiveType::sphere;
  // sphere: radius = a; box: half extents (a,b,c); torus: major a, minor b
  double a = 1.0, b = 0.3, c = 1.0;

  double bounding_radius() const;
};

struct SceneSpec {
  Primitive primitive;
  Material material;
  std::string env_id;
  Vec3 view_dir{0, 0, 1};  // unit, z >= 0
  std::string category_label;
  std::uint64_t seed = 0;
};

struct IntrinsicTriple {
  Image I, A, S, R;  // 3-channel HDR
  Image M;           // 1-channel binary mask
};

// radical inverse of `index` in prime `base`
double halton(std::uint64_t index, unsigned base);

// Halton (base 2, 3) mapped uniformly (by area) onto the upper hemisphere.
Vec3 sample_viewpoint(std::uint64_t index);

Rgb shade_diffuse(const Vec3& normal, const EnvironmentMap& env);
Rgb shade_specular(const Vec3& normal, const Vec3& view_dir,
                   const EnvironmentMap& env, double n_s);

// Orthographic ray cast; at hits A from the albedo texture, S = s_d,
// R = k_s * s_s, I = A*S + R, M = 1. Misses: all layers 0, M = 0.
IntrinsicTriple render_scene(const SceneSpec& scene, const EnvironmentMap& env,
                             int resolution);

Material sample_material(Rng& rng);

// Low ambient plus n_lobes Gaussian-shaped bright lobes at random directions.
// ambient < 0 draws the ambient level randomly from [0.05, 0.3].
EnvironmentMap generate_env(Rng& rng, int width, int height, int n_lobes,
                            double ambient = -1.0);

}  // namespace intrin

#endif  // INTRIN_RENDER_HPP

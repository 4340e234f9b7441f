#include "intrin/render.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace intrin {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Vec3 EnvironmentMap::texel_dir(int row, int col) const {
  const double theta = (row + 0.5) / height() * kPi;
  const double phi = (col + 0.5) / width() * 2.0 * kPi;
  const double st = std::sin(theta);
  return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
}

double EnvironmentMap::texel_solid_angle(int row) const {
  const double theta = (row + 0.5) / height() * kPi;
  return std::sin(theta) * (kPi / height()) * (2.0 * kPi / width());
}

double EnvironmentMap::total_solid_angle() const {
  double s = 0;
  for (int r = 0; r < height(); ++r) s += texel_solid_angle(r) * width();
  return s;
}

double halton(std::uint64_t index, unsigned base) {
  if (index < 1) throw std::invalid_argument("halton: index must be >= 1");
  if (base < 2) throw std::invalid_argument("halton: base must be >= 2");
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * double(index % base);
    index /= base;
  }
  return r;
}

Vec3 sample_viewpoint(std::uint64_t index) {
  // cos(theta) uniform in [0,1) is uniform in solid angle on the hemisphere
  const double z = halton(index, 2);
  const double phi = 2.0 * kPi * halton(index, 3);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

Rgb shade_diffuse(const Vec3& normal, const EnvironmentMap& env) {
  Rgb out{0, 0, 0};
  for (int row = 0; row < env.height(); ++row) {
    const double dw = env.texel_solid_angle(row);
    for (int col = 0; col < env.width(); ++col) {
      const double cosw = normal.dot(env.texel_dir(row, col));
      if (cosw <= 0) continue;
      const double f = cosw * dw / kPi;
      const Rgb L = env.texel(row, col);
      out[0] += L[0] * f;
      out[1] += L[1] * f;
      out[2] += L[2] * f;
    }
  }
  return out;
}

Rgb shade_specular(const Vec3& normal, const Vec3& view_dir,
                   const EnvironmentMap& env, double n_s) {
  const Vec3 rv = normal * (2.0 * normal.dot(view_dir)) - view_dir;
  const double norm = (n_s + 2.0) / (2.0 * kPi);
  Rgb out{0, 0, 0};
  for (int row = 0; row < env.height(); ++row) {
    const double dw = env.texel_solid_angle(row);
    for (int col = 0; col < env.width(); ++col) {
      const Vec3 w = env.texel_dir(row, col);
      const double cosn = normal.dot(w);
      if (cosn <= 0) continue;
      const double cosa = rv.dot(w);
      if (cosa <= 0) continue;
      const double f = norm * std::pow(cosa, n_s) * cosn * dw;
      const Rgb L = env.texel(row, col);
      out[0] += L[0] * f;
      out[1] += L[1] * f;
      out[2] += L[2] * f;
    }
  }
  return out;
}

double Primitive::bounding_radius() const {
  switch (type) {
    case PrimitiveType::sphere:
      return a;
    case PrimitiveType::box:
      return std::sqrt(a * a + b * b + c * c);
    case PrimitiveType::torus:
      return a + b;
  }
  return a;
}

namespace {

// value noise on an integer lattice, trilinear interpolation
double lattice_hash(std::uint64_t seed, int x, int y, int z) {
  std::uint64_t h = mix_seed(seed, (std::uint64_t(std::uint32_t(x)) << 40) ^
                                       (std::uint64_t(std::uint32_t(y)) << 20) ^
                                       std::uint64_t(std::uint32_t(z)));
  return double(h >> 11) * 0x1.0p-53;
}

double value_noise(std::uint64_t seed, const Vec3& p) {
  const int x0 = int(std::floor(p.x)), y0 = int(std::floor(p.y)),
            z0 = int(std::floor(p.z));
  const double fx = p.x - x0, fy = p.y - y0, fz = p.z - z0;
  auto sm = [](double t) { return t * t * (3 - 2 * t); };
  const double sx = sm(fx), sy = sm(fy), sz = sm(fz);
  double acc = 0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double wgt = (dx ? sx : 1 - sx) * (dy ? sy : 1 - sy) * (dz ? sz : 1 - sz);
        acc += wgt * lattice_hash(seed, x0 + dx, y0 + dy, z0 + dz);
      }
  return acc;
}

struct Hit {
  bool hit = false;
  Vec3 p, n;
};

Hit intersect_sphere(const Vec3& o, const Vec3& d, double radius) {
  // |o + t d|^2 = r^2
  const double b = o.dot(d);
  const double c = o.dot(o) - radius * radius;
  const double disc = b * b - c;
  if (disc < 0) return {};
  const double t = -b - std::sqrt(disc);
  if (t < 0) return {};
  Hit h;
  h.hit = true;
  h.p = o + d * t;
  h.n = h.p.normalized();
  return h;
}

Hit intersect_box(const Vec3& o, const Vec3& d, double hx, double hy, double hz) {
  const double half[3] = {hx, hy, hz};
  const double orig[3] = {o.x, o.y, o.z};
  const double dir[3] = {d.x, d.y, d.z};
  double tmin = -1e30, tmax = 1e30;
  int axis = -1;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(dir[i]) < 1e-12) {
      if (std::abs(orig[i]) > half[i]) return {};
      continue;
    }
    double t0 = (-half[i] - orig[i]) / dir[i];
    double t1 = (half[i] - orig[i]) / dir[i];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > tmin) {
      tmin = t0;
      axis = i;
    }
    tmax = std::min(tmax, t1);
  }
  if (tmin > tmax || tmin < 0 || axis < 0) return {};
  Hit h;
  h.hit = true;
  h.p = o + d * tmin;
  double ncomp[3] = {0, 0, 0};
  ncomp[axis] = orig[axis] + tmin * dir[axis] > 0 ? 1.0 : -1.0;
  h.n = {ncomp[0], ncomp[1], ncomp[2]};
  return h;
}

double torus_sdf(const Vec3& p, double major, double minor) {
  const double q = std::sqrt(p.x * p.x + p.y * p.y) - major;
  return std::sqrt(q * q + p.z * p.z) - minor;
}

Hit intersect_torus(const Vec3& o, const Vec3& d, double major, double minor) {
  // sphere tracing; the ray starts outside the bounding sphere
  double t = 0;
  const double tmax = 2.0 * o.norm() + 4.0 * (major + minor);
  for (int it = 0; it < 256 && t < tmax; ++it) {
    const Vec3 p = o + d * t;
    const double dist = torus_sdf(p, major, minor);
    if (dist < 1e-7) {
      Hit h;
      h.hit = true;
      h.p = p;
      // analytic gradient of the torus distance field
      const double lxy = std::sqrt(p.x * p.x + p.y * p.y);
      if (lxy < 1e-12) return {};
      const double q = lxy - major;
      const double lq = std::sqrt(q * q + p.z * p.z);
      if (lq < 1e-12) return {};
      h.n = Vec3{p.x / lxy * q / lq, p.y / lxy * q / lq, p.z / lq}.normalized();
      return h;
    }
    t += std::max(dist, 1e-7);
  }
  return {};
}

}  // namespace

Rgb Material::albedo_at(const Vec3& p) const {
  switch (family) {
    case TextureFamily::solid:
      return color_a;
    case TextureFamily::checker: {
      const int ix = int(std::floor(p.x * texture_scale)) +
                     int(std::floor(p.y * texture_scale)) +
                     int(std::floor(p.z * texture_scale));
      return (ix & 1) ? color_b : color_a;
    }
    case TextureFamily::noise: {
      const double t = value_noise(noise_seed, p * texture_scale);
      Rgb out;
      for (int i = 0; i < 3; ++i)
        out[i] = color_a[i] * (1 - t) + color_b[i] * t;
      return out;
    }
  }
  return color_a;
}

IntrinsicTriple render_scene(const SceneSpec& scene, const EnvironmentMap& env,
                             int resolution) {
  if (resolution < 2 || (resolution & (resolution - 1)) != 0)
    throw std::invalid_argument("render_scene: resolution must be a power of two");
  const Primitive& prim = scene.primitive;
  if (prim.a <= 0 ||
      (prim.type != PrimitiveType::sphere && prim.b <= 0) ||
      (prim.type == PrimitiveType::box && prim.c <= 0))
    throw std::invalid_argument("render_scene: degenerate primitive (zero extent)");
  const Vec3 view = scene.view_dir.normalized();

  // orthonormal frame around the view direction
  Vec3 up = std::abs(view.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
  Vec3 u = Vec3{up.y * view.z - up.z * view.y, up.z * view.x - up.x * view.z,
                up.x * view.y - up.y * view.x}
               .normalized();
  Vec3 v = {view.y * u.z - view.z * u.y, view.z * u.x - view.x * u.z,
            view.x * u.y - view.y * u.x};

  const double extent = prim.bounding_radius() * 1.1;
  const double camdist = prim.bounding_radius() * 4.0;

  IntrinsicTriple tr;
  tr.I = Image(resolution, resolution, 3);
  tr.A = Image(resolution, resolution, 3);
  tr.S = Image(resolution, resolution, 3);
  tr.R = Image(resolution, resolution, 3);
  tr.M = Image(resolution, resolution, 1);

  const Vec3 rdir = view * -1.0;
  for (int y = 0; y < resolution; ++y)
    for (int x = 0; x < resolution; ++x) {
      const double sx = ((x + 0.5) / resolution * 2.0 - 1.0) * extent;
      const double sy = (1.0 - (y + 0.5) / resolution * 2.0) * extent;
      const Vec3 origin = u * sx + v * sy + view * camdist;
      Hit h;
      switch (prim.type) {
        case PrimitiveType::sphere:
          h = intersect_sphere(origin, rdir, prim.a);
          break;
        case PrimitiveType::box:
          h = intersect_box(origin, rdir, prim.a, prim.b, prim.c);
          break;
        case PrimitiveType::torus:
          h = intersect_torus(origin, rdir, prim.a, prim.b);
          break;
      }
      if (!h.hit) continue;
      if (h.n.dot(view) <= 0) continue;  // grazing/back-facing: excluded
      const Rgb a = scene.material.albedo_at(h.p);
      const Rgb sd = shade_diffuse(h.n, env);
      const Rgb ss = shade_specular(h.n, view, env, scene.material.n_s);
      tr.M.at(x, y, 0) = 1.f;
      for (int ch = 0; ch < 3; ++ch) {
        const float A = float(a[ch]);
        const float S = float(sd[ch]);
        const float R = float(scene.material.k_s * ss[ch]);
        tr.A.at(x, y, ch) = A;
        tr.S.at(x, y, ch) = S;
        tr.R.at(x, y, ch) = R;
        tr.I.at(x, y, ch) = A * S + R;
      }
    }
  return tr;
}

Material sample_material(Rng& rng) {
  Material m;
  m.k_s = rng.uniform_open(0.0, 0.3);
  m.n_s = rng.uniform_open(0.0, 300.0);
  const double fam = rng.uniform();
  m.family = fam < 1.0 / 3 ? TextureFamily::solid
             : fam < 2.0 / 3 ? TextureFamily::checker
                             : TextureFamily::noise;
  for (int i = 0; i < 3; ++i) {
    m.color_a[i] = rng.uniform(0.05, 1.0);
    m.color_b[i] = rng.uniform(0.05, 1.0);
  }
  m.texture_scale = rng.uniform(1.0, 8.0);
  m.noise_seed = rng.next_u64();
  return m;
}

EnvironmentMap generate_env(Rng& rng, int width, int height, int n_lobes,
                            double ambient) {
  if (width < 2 || height < 2)
    throw std::invalid_argument("generate_env: grid too small");
  if (n_lobes < 0) throw std::invalid_argument("generate_env: n_lobes < 0");
  if (ambient < 0) ambient = rng.uniform(0.05, 0.3);

  struct Lobe {
    Vec3 dir;
    Rgb color;
    double peak, sharp;
  };
  std::vector<Lobe> lobes;
  for (int i = 0; i < n_lobes; ++i) {
    Lobe lb;
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    lb.dir = {r * std::cos(phi), r * std::sin(phi), z};
    lb.peak = rng.uniform(5.0, 50.0);
    const double sigma = rng.uniform(0.05, 0.25);
    lb.sharp = 1.0 / (sigma * sigma);
    for (int ch = 0; ch < 3; ++ch) lb.color[ch] = rng.uniform(0.5, 1.0);
    lobes.push_back(lb);
  }

  EnvironmentMap env;
  env.radiance = Image(width, height, 3);
  for (int row = 0; row < height; ++row)
    for (int col = 0; col < width; ++col) {
      const Vec3 d = env.texel_dir(row, col);
      Rgb L{ambient, ambient, ambient};
      for (const auto& lb : lobes) {
        const double f = lb.peak * std::exp(-(1.0 - d.dot(lb.dir)) * lb.sharp);
        for (int ch = 0; ch < 3; ++ch) L[ch] += f * lb.color[ch];
      }
      for (int ch = 0; ch < 3; ++ch) env.radiance.at(col, row, ch) = float(L[ch]);
    }
  return env;
}

}  // namespace intrin

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "intrin/image.hpp"
#include "intrin/render.hpp"
#include "intrin/util.hpp"

using namespace intrin;

namespace {

constexpr double kPi = 3.14159265358979323846;

EnvironmentMap uniform_env(int w, int h, double value) {
  EnvironmentMap env;
  env.radiance = Image(w, h, 3, float(value));
  return env;
}

double max3(const Rgb& c) { return std::max({c[0], c[1], c[2]}); }

}  // namespace

TEST_CASE("halton radical inverse values") {
  CHECK(halton(1, 2) == doctest::Approx(0.5));
  CHECK(halton(2, 2) == doctest::Approx(0.25));
  CHECK(halton(3, 2) == doctest::Approx(0.75));
  CHECK(halton(1, 3) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(halton(0, 2), std::invalid_argument);
  CHECK_THROWS_AS(halton(1, 1), std::invalid_argument);
}

TEST_CASE("halton: first 2^k-1 base-2 values are a permutation of j/2^k") {
  const int k = 5, n = 1 << k;
  std::vector<double> vals;
  for (int i = 1; i < n; ++i) vals.push_back(halton(i, 2));
  std::sort(vals.begin(), vals.end());
  for (int j = 1; j < n; ++j)
    CHECK(vals[j - 1] == doctest::Approx(double(j) / n).epsilon(1e-12));
}

TEST_CASE("sample_viewpoint: unit upper-hemisphere directions") {
  for (std::uint64_t i = 1; i <= 1000; ++i) {
    const Vec3 v = sample_viewpoint(i);
    CHECK(std::abs(v.norm() - 1.0) < 1e-6);
    CHECK(v.z >= 0.0);
  }
}

TEST_CASE("sample_viewpoint: mean z over 10000 samples is 0.5") {
  double sum = 0;
  for (std::uint64_t i = 1; i <= 10000; ++i) sum += sample_viewpoint(i).z;
  CHECK(std::abs(sum / 10000 - 0.5) < 0.01);
}

TEST_CASE("environment map: solid angles sum to 4pi") {
  auto env = uniform_env(64, 32, 1.0);
  CHECK(std::abs(env.total_solid_angle() - 4 * kPi) / (4 * kPi) < 1e-3);
}

TEST_CASE("shade_diffuse: zero env, furnace identity, one-texel quadrature") {
  const Vec3 n{0, 0, 1};

  auto zero = uniform_env(32, 16, 0.0);
  const Rgb s0 = shade_diffuse(n, zero);
  CHECK(max3(s0) == 0.0);

  auto unit = uniform_env(64, 32, 1.0);
  const Rgb s1 = shade_diffuse(n, unit);
  for (double v : s1) CHECK(std::abs(v - 1.0) < 0.01);

  // single lit texel: pick one whose direction has N.w ~ 0.5, scale the check
  // to the actual cosine of the chosen texel
  EnvironmentMap env = uniform_env(64, 32, 0.0);
  int row = -1, col = 7;
  double cosine = 0;
  for (int r = 0; r < 32; ++r) {
    const double c = env.texel_dir(r, col).dot(n);
    if (std::abs(c - 0.5) < std::abs(cosine - 0.5)) {
      cosine = c;
      row = r;
    }
  }
  const double lt = 10.0;
  env.radiance.at(col, row, 0) = float(lt);
  env.radiance.at(col, row, 1) = float(lt);
  env.radiance.at(col, row, 2) = float(lt);
  const double dw = env.texel_solid_angle(row);
  const Rgb s2 = shade_diffuse(n, env);
  for (double v : s2)
    CHECK(v == doctest::Approx(lt * cosine * dw / kPi).epsilon(1e-6));
}

TEST_CASE("shade_specular: zero env and dense-quadrature oracle") {
  const Vec3 n{0, 0, 1};
  auto zero = uniform_env(32, 16, 0.0);
  const Rgb s0 = shade_specular(n, n, zero, 50.0);
  CHECK(max3(s0) == 0.0);

  // mirror-aligned view (Rv = N), uniform env: compare against a 10x finer
  // direct quadrature of ((Ns+2)/2pi) cos^Ns(theta) cos(theta) over the
  // hemisphere
  const double ns = 50.0;
  auto unit = uniform_env(64, 32, 1.0);
  const Rgb s1 = shade_specular(n, n, unit, ns);
  const int fh = 320, fw = 640;
  double ref = 0;
  for (int r = 0; r < fh; ++r) {
    const double theta = (r + 0.5) / fh * kPi;
    const double dw = std::sin(theta) * (kPi / fh) * (2 * kPi / fw);
    const double c = std::cos(theta);
    if (c <= 0) continue;
    ref += (ns + 2) / (2 * kPi) * std::pow(c, ns) * c * dw * fw;
  }
  for (double v : s1) CHECK(std::abs(v - ref) / ref < 0.03);
}

TEST_CASE("shade_specular: Ns=300 lobe dominated by a 5-degree cone") {
  const Vec3 n{0, 0, 1};
  EnvironmentMap env = uniform_env(128, 64, 0.05);
  // one bright texel at the reflection direction (zenith)
  env.radiance.at(0, 0, 0) = 500.f;
  env.radiance.at(0, 0, 1) = 500.f;
  env.radiance.at(0, 0, 2) = 500.f;

  // total response vs the response with the cone texels removed
  const Rgb full = shade_specular(n, n, env, 300.0);
  EnvironmentMap outside = env;
  const double cone = 5.0 * kPi / 180.0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 128; ++c)
      if (std::acos(std::clamp(outside.texel_dir(r, c).dot(n), -1.0, 1.0)) < cone) {
        outside.radiance.at(c, r, 0) = 0;
        outside.radiance.at(c, r, 1) = 0;
        outside.radiance.at(c, r, 2) = 0;
      }
  const Rgb rest = shade_specular(n, n, outside, 300.0);
  CHECK((full[0] - rest[0]) / full[0] > 0.95);
}

TEST_CASE("energy bound for uniform unit env") {
  // quadrature of the normalized Phong lobe times cosine stays <=
  // (Ns+2)/(Ns+1) + 1%
  const Vec3 n{0, 0, 1};
  auto unit = uniform_env(64, 32, 1.0);
  for (double ns : {1.0, 10.0, 50.0}) {
    const Rgb s = shade_specular(n, n, unit, ns);
    CHECK(s[0] <= (ns + 2) / (ns + 1) * 1.01);
  }
  // an Ns=299 lobe is narrower than a 64x32 texel; needs a finer map
  auto fine = uniform_env(512, 256, 1.0);
  const Rgb s299 = shade_specular(n, n, fine, 299.0);
  CHECK(s299[0] <= (299.0 + 2) / (299.0 + 1) * 1.01);
}

TEST_CASE("render_scene: compositing identity and furnace test") {
  Rng rng(21);
  SceneSpec scene;
  scene.primitive.type = PrimitiveType::sphere;
  scene.primitive.a = 1.0;
  scene.material.family = TextureFamily::solid;
  scene.material.color_a = {1, 1, 1};
  scene.material.k_s = 1e-9;  // k_s -> 0 limit
  scene.view_dir = {0, 0, 1};
  auto env = uniform_env(64, 32, 1.0);
  auto tr = render_scene(scene, env, 32);

  double mean_s = 0;
  int cnt = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      if (tr.M.at(x, y, 0) < 0.5f) {
        for (int c = 0; c < 3; ++c) {
          CHECK(tr.A.at(x, y, c) == 0.f);
          CHECK(tr.S.at(x, y, c) == 0.f);
          CHECK(tr.R.at(x, y, c) == 0.f);
        }
        continue;
      }
      for (int c = 0; c < 3; ++c) {
        const float recon = tr.A.at(x, y, c) * tr.S.at(x, y, c) + tr.R.at(x, y, c);
        CHECK(std::abs(tr.I.at(x, y, c) - recon) <= 1e-6f);
      }
      mean_s += tr.S.at(x, y, 0);
      ++cnt;
    }
  REQUIRE(cnt > 0);
  CHECK(std::abs(mean_s / cnt - 1.0) < 0.01);
}

TEST_CASE("render_scene: doubling radiance doubles S and R, A unchanged") {
  Rng rng(22);
  SceneSpec scene;
  scene.primitive.type = PrimitiveType::torus;
  scene.primitive.a = 0.8;
  scene.primitive.b = 0.3;
  scene.material = sample_material(rng);
  scene.view_dir = sample_viewpoint(7);
  Rng erng(23);
  auto env = generate_env(erng, 32, 16, 2);
  auto t1 = render_scene(scene, env, 32);
  EnvironmentMap env2 = env;
  for (auto& v : env2.radiance.px) v *= 2.f;
  auto t2 = render_scene(scene, env2, 32);
  for (std::size_t i = 0; i < t1.A.px.size(); ++i) {
    CHECK(t2.A.px[i] == t1.A.px[i]);
    CHECK(t2.S.px[i] == doctest::Approx(2.f * t1.S.px[i]).epsilon(1e-5));
    CHECK(t2.R.px[i] == doctest::Approx(2.f * t1.R.px[i]).epsilon(1e-5));
  }
}

TEST_CASE("render_scene rejects degenerate primitives and bad resolutions") {
  SceneSpec scene;
  scene.primitive.a = 0.0;
  auto env = uniform_env(16, 8, 1.0);
  CHECK_THROWS_AS(render_scene(scene, env, 32), std::invalid_argument);
  scene.primitive.a = 1.0;
  CHECK_THROWS_AS(render_scene(scene, env, 31), std::invalid_argument);
}

TEST_CASE("sample_material: ranges over 10000 draws, deterministic on reseed") {
  Rng rng(31);
  for (int i = 0; i < 10000; ++i) {
    const Material m = sample_material(rng);
    CHECK(m.k_s > 0.0);
    CHECK(m.k_s < 0.3);
    CHECK(m.n_s > 0.0);
    CHECK(m.n_s < 300.0);
    const Rgb a = m.albedo_at({0.3, -0.2, 0.9});
    for (double v : a) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  Rng r1(99), r2(99);
  const Material m1 = sample_material(r1), m2 = sample_material(r2);
  CHECK(m1.k_s == m2.k_s);
  CHECK(m1.n_s == m2.n_s);
  CHECK(m1.color_a == m2.color_a);
}

TEST_CASE("generate_env: constant ambient, determinism, dominant lobe") {
  Rng r0(41);
  auto flat = generate_env(r0, 16, 8, 0, 0.1);
  for (float v : flat.radiance.px) CHECK(v == doctest::Approx(0.1f));

  Rng ra(42), rb(42);
  auto e1 = generate_env(ra, 32, 16, 2);
  auto e2 = generate_env(rb, 32, 16, 2);
  CHECK(e1.radiance.px == e2.radiance.px);
  for (float v : e1.radiance.px) CHECK(v >= 0.f);

  Rng rc(43);
  auto lobed = generate_env(rc, 64, 32, 1, 0.1);
  float mx = 0, mean = 0;
  for (float v : lobed.radiance.px) {
    mx = std::max(mx, v);
    mean += v;
  }
  mean /= float(lobed.radiance.px.size());
  CHECK(mx >= 10.f * mean);
}

TEST_CASE("PFM round-trip is bit-exact for 3- and 1-channel images") {
  Rng rng(51);
  Image img(13, 7, 3);
  for (auto& v : img.px) v = float(rng.uniform(0, 40));
  const auto dir = std::filesystem::temp_directory_path() / "intrin_pfm_test";
  std::filesystem::create_directories(dir);
  write_pfm(dir / "rt.pfm", img);
  const Image back = read_pfm(dir / "rt.pfm");
  REQUIRE(back.same_size(img));
  CHECK(back.px == img.px);

  Image mono(5, 9, 1);
  for (auto& v : mono.px) v = float(rng.uniform(-2, 2));
  write_pfm(dir / "rt1.pfm", mono);
  const Image back1 = read_pfm(dir / "rt1.pfm");
  REQUIRE(back1.same_size(mono));
  CHECK(back1.px == mono.px);
  std::filesystem::remove_all(dir);
}

#include <benchmark/benchmark.h>

#include "intrin/metrics.hpp"
#include "intrin/render.hpp"
#include "intrin/tensor.hpp"
#include "intrin/util.hpp"

using namespace intrin;

static void BM_Conv2dForward(benchmark::State& state) {
  const int c = int(state.range(0));
  Rng rng(7);
  auto fill = [&](Tensor<float>& t) {
    for (auto& v : t.node()->value) v = float(rng.uniform(-1.0, 1.0));
  };
  auto x = Tensor<float>::zeros(1, c, 32, 32);
  auto w = Tensor<float>::zeros(c, c, 3, 3);
  auto b = Tensor<float>::zeros(c, 1, 1, 1);
  fill(x);
  fill(w);
  for (auto _ : state) {
    auto y = conv2d(x, w, b, 1, 1);
    benchmark::DoNotOptimize(y.node()->value.data());
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(16)->Arg(64);

static void BM_RenderScene(benchmark::State& state) {
  const int res = int(state.range(0));
  Rng rng(11);
  SceneSpec scene;
  scene.primitive.type = PrimitiveType::sphere;
  scene.primitive.a = 1.0;
  scene.material = sample_material(rng);
  scene.view_dir = sample_viewpoint(5);
  const EnvironmentMap env = generate_env(rng, 64, 32, 2);
  for (auto _ : state) {
    auto tr = render_scene(scene, env, res);
    benchmark::DoNotOptimize(tr.I.px.data());
  }
}
BENCHMARK(BM_RenderScene)->Arg(32)->Arg(64);

static void BM_Dssim(benchmark::State& state) {
  const int res = int(state.range(0));
  Rng rng(3);
  Image a(res, res, 3), b(res, res, 3), m(res, res, 1);
  for (auto& v : a.px) v = float(rng.uniform());
  for (auto& v : b.px) v = float(rng.uniform());
  for (auto& v : m.px) v = 1.0f;
  for (auto _ : state) {
    benchmark::DoNotOptimize(dssim(a, b, m));
  }
}
BENCHMARK(BM_Dssim)->Arg(64)->Arg(128);

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "mdnkit/mixture.hpp"
#include "mdnkit/nn.hpp"
#include "mdnkit/random.hpp"
#include "mdnkit/tensor.hpp"

using namespace mdnkit;

static void Matmul(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    RandomStream rng(1);
    Tensor a(Shape{n, n});
    Tensor b(Shape{n, n});
    for (auto& v : a.values()) v = rng.normal();
    for (auto& v : b.values()) v = rng.normal();
    for (auto _ : state) {
        Tensor c = matmul(a, b);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}
BENCHMARK(Matmul)->Arg(128)->Arg(256);

// One full training step (forward + backward) of the saddle-node recipe
// backbone: batch 128 through a 5x256 MLP with a K=15, d=20 head.
static void MdnTrainStep(benchmark::State& state) {
    ParamStore store;
    InitSpec init{InitSpec::Scheme::LeCunNormal, 3};
    const int k = 15, d = 20;
    MlpBackbone net = make_mlp(1, {256, 256, 256, 256, 256}, k * (1 + 2 * d), init, store);
    RandomStream rng(2);
    Tensor x(Shape{128, 1});
    Tensor y(Shape{128, d});
    for (auto& v : x.values()) v = rng.uniform(-2.0, 2.0);
    for (auto& v : y.values()) v = rng.normal();
    for (auto _ : state) {
        Tape tape;
        MixtureParams params = transform_head(net.forward(x), k, d);
        Tensor loss = mdn_nll(params, y);
        store.zero_grads();
        tape.backward(loss);
        benchmark::DoNotOptimize(loss.item());
    }
}
BENCHMARK(MdnTrainStep);

static void GruStep(benchmark::State& state) {
    ParamStore store;
    InitSpec init{InitSpec::Scheme::LeCunNormal, 4};
    GruCell cell = make_gru(3, 128, init, store);
    RandomStream rng(5);
    Tensor x(Shape{5, 3});
    Tensor h(Shape{5, 128});
    for (auto& v : x.values()) v = rng.normal();
    for (auto _ : state) {
        Tensor next = cell.step(x, h);
        benchmark::DoNotOptimize(next.data());
    }
}
BENCHMARK(GruStep);

static void MdnNllForward(benchmark::State& state) {
    RandomStream rng(6);
    const int b = 256, k = 9, d = 3;
    Tensor raw(Shape{b, k * (1 + 2 * d)});
    Tensor y(Shape{b, d});
    for (auto& v : raw.values()) v = rng.normal();
    for (auto& v : y.values()) v = rng.normal();
    MixtureParams params = transform_head(raw, k, d);
    for (auto _ : state) {
        Tensor loss = mdn_nll(params, y);
        benchmark::DoNotOptimize(loss.item());
    }
}
BENCHMARK(MdnNllForward);

BENCHMARK_MAIN();

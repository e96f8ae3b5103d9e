#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "acmf/graph.hpp"
#include "acmf/kernels.hpp"
#include "acmf/optim.hpp"
#include "acmf/rng.hpp"
#include "acmf/tensor.hpp"
#include "acmf/tensor_io.hpp"
#include "support/gradcheck.hpp"

using namespace acmf;
using acmf::testing::naive_conv2d;
using acmf::testing::random_tensor;

TEST(Tensor, RejectsRankAboveFour) { EXPECT_THROW(Tensor<float>(Shape{1, 1, 1, 1, 1}), ShapeError); }

TEST(Tensor, DataSizeMustMatchShape) {
  EXPECT_THROW(Tensor<float>(Shape{2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
}

TEST(Tensor, IndexingIsRowMajor) {
  Tensor<double> t(Shape{2, 3, 4, 5});
  t.at(1, 2, 3, 4) = 7.0;
  EXPECT_EQ(t[((1 * 3 + 2) * 4 + 3) * 5 + 4], 7.0);
}

TEST(Tensor, AllFiniteDetectsNanAndInf) {
  Tensor<float> t(Shape{8}, 1.0f);
  EXPECT_TRUE(t.all_finite());
  t[3] = std::numeric_limits<float>::infinity();
  EXPECT_FALSE(t.all_finite());
  t[3] = std::nanf("");
  EXPECT_FALSE(t.all_finite());
}

TEST(Rng, MatchesSplitmix64ReferenceSequence) {
  // First outputs of splitmix64 seeded with 0, as published with the algorithm.
  Rng rng(0);
  EXPECT_EQ(rng.next_u64(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(rng.next_u64(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(rng.next_u64(), 0x06C45D188009454FULL);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DerivedStreamsIgnoreDrawOrderElsewhere) {
  Rng parent(9);
  const auto before = Rng::derive(9, "mask", 3).next_u64();
  for (int i = 0; i < 100; ++i) parent.next_u64();
  EXPECT_EQ(Rng::derive(9, "mask", 3).next_u64(), before);
  EXPECT_NE(Rng::derive(9, "mask", 4).next_u64(), before);
  EXPECT_NE(Rng::derive(9, "other", 3).next_u64(), before);
}

TEST(Rng, BelowStaysInRangeAndCoversIt) {
  Rng rng(5);
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = rng.below(7);
    ASSERT_LT(v, 7u);
    ++seen[v];
  }
  for (int c : seen) EXPECT_GT(c, 800);
}

TEST(Rng, UniformMomentsAreSane) {
  Rng rng(11);
  double sum = 0, sq = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.01);
  EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12.0, 0.005);
}

namespace {

struct ConvCase {
  std::size_t n, c, h, w, k, ks, stride, pad;
  bool depthwise;
};

void PrintTo(const ConvCase& c, std::ostream* os) {
  *os << (c.depthwise ? "depthwise " : "") << c.n << "x" << c.c << "x" << c.h << "x" << c.w << " k" << c.k << " "
      << c.ks << "x" << c.ks << " s" << c.stride << " p" << c.pad;
}

class ConvKernels : public ::testing::TestWithParam<ConvCase> {};

}  // namespace

TEST_P(ConvKernels, ForwardMatchesNaiveOracle) {
  const ConvCase p = GetParam();
  Rng rng(p.n * 131 + p.k * 7 + p.stride);
  const std::size_t k = p.depthwise ? p.c : p.k;
  const auto x = random_tensor({p.n, p.c, p.h, p.w}, rng);
  const auto wt = random_tensor({k, p.depthwise ? 1 : p.c, p.ks, p.ks}, rng);
  const auto b = random_tensor({k}, rng);
  const auto expected = naive_conv2d(x, wt, &b, p.stride, p.pad, p.depthwise);

  const kernels::ConvGeometry g{p.n, p.c, p.h, p.w, k, p.ks, p.ks, p.stride, p.pad};
  Tensor<double> parallel(expected.shape()), serial(expected.shape());
  if (p.depthwise) {
    kernels::depthwise_forward<double>(g, x.data(), wt.data(), b.data(), parallel.data());
    kernels::serial::depthwise_forward<double>(g, x.data(), wt.data(), b.data(), serial.data());
  } else {
    kernels::conv2d_forward<double>(g, x.data(), wt.data(), b.data(), parallel.data());
    kernels::serial::conv2d_forward<double>(g, x.data(), wt.data(), b.data(), serial.data());
  }
  EXPECT_LE(max_abs_diff(parallel, expected), 1e-12);
  EXPECT_LE(max_abs_diff(serial, expected), 1e-12);
}

TEST_P(ConvKernels, BackwardMatchesSerialReference) {
  const ConvCase p = GetParam();
  Rng rng(p.c * 17 + p.h);
  const std::size_t k = p.depthwise ? p.c : p.k;
  const kernels::ConvGeometry g{p.n, p.c, p.h, p.w, k, p.ks, p.ks, p.stride, p.pad};
  const auto x = random_tensor({p.n, p.c, p.h, p.w}, rng);
  const auto wt = random_tensor({k, p.depthwise ? 1 : p.c, p.ks, p.ks}, rng);
  const auto dy = random_tensor({p.n, k, g.out_height(), g.out_width()}, rng);

  Tensor<double> dx(x.shape()), dx_ref(x.shape()), dw(wt.shape()), dw_ref(wt.shape());
  if (p.depthwise) {
    kernels::depthwise_backward_input<double>(g, dy.data(), wt.data(), dx.data());
    kernels::serial::depthwise_backward_input<double>(g, dy.data(), wt.data(), dx_ref.data());
    kernels::depthwise_backward_weight<double>(g, x.data(), dy.data(), dw.data());
    kernels::serial::depthwise_backward_weight<double>(g, x.data(), dy.data(), dw_ref.data());
  } else {
    kernels::conv2d_backward_input<double>(g, dy.data(), wt.data(), dx.data());
    kernels::serial::conv2d_backward_input<double>(g, dy.data(), wt.data(), dx_ref.data());
    kernels::conv2d_backward_weight<double>(g, x.data(), dy.data(), dw.data());
    kernels::serial::conv2d_backward_weight<double>(g, x.data(), dy.data(), dw_ref.data());
  }
  EXPECT_LE(max_abs_diff(dx, dx_ref), 1e-12);
  EXPECT_LE(max_abs_diff(dw, dw_ref), 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Shapes, ConvKernels,
                         ::testing::Values(ConvCase{2, 3, 8, 8, 4, 3, 1, 1, false},
                                           ConvCase{2, 3, 8, 8, 4, 3, 2, 1, false},
                                           ConvCase{1, 2, 7, 5, 3, 3, 2, 0, false},
                                           ConvCase{3, 4, 6, 6, 5, 1, 1, 0, false},
                                           ConvCase{3, 4, 8, 8, 5, 1, 2, 0, false},
                                           ConvCase{2, 3, 8, 8, 3, 3, 2, 1, true},
                                           ConvCase{1, 4, 9, 7, 4, 3, 1, 1, true},
                                           ConvCase{2, 2, 5, 5, 2, 1, 1, 0, true}));

TEST(Kernels, ResultsIndependentOfThreadCount) {
  Rng rng(3);
  const kernels::ConvGeometry g{4, 8, 16, 16, 8, 3, 3, 1, 1};
  const auto x = acmf::testing::random_tensor_f({4, 8, 16, 16}, rng);
  const auto w = acmf::testing::random_tensor_f({8, 8, 3, 3}, rng);
  const auto dy = acmf::testing::random_tensor_f({4, 8, 16, 16}, rng);
  Tensor<float> y1(dy.shape()), y4(dy.shape()), dw1(w.shape()), dw4(w.shape());
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  kernels::conv2d_forward<float>(g, x.data(), w.data(), {}, y1.data());
  kernels::conv2d_backward_weight<float>(g, x.data(), dy.data(), dw1.data());
  omp_set_num_threads(4);
  kernels::conv2d_forward<float>(g, x.data(), w.data(), {}, y4.data());
  kernels::conv2d_backward_weight<float>(g, x.data(), dy.data(), dw4.data());
  omp_set_num_threads(saved);
  EXPECT_EQ(y1, y4);
  EXPECT_EQ(dw1, dw4);
}

TEST(Kernels, BilinearMatchesSerialAndPreservesConstants) {
  const kernels::ResizeGeometry g{2, 4, 4, 16, 16};
  Tensor<double> x(Shape{2, 1, 4, 4}, 0.75);
  Tensor<double> y(Shape{2, 1, 16, 16}), y_ref(Shape{2, 1, 16, 16});
  kernels::bilinear_forward<double>(g, x.data(), y.data());
  kernels::serial::bilinear_forward<double>(g, x.data(), y_ref.data());
  EXPECT_EQ(y, y_ref);
  for (double v : y.values()) EXPECT_DOUBLE_EQ(v, 0.75);
}

TEST(Graph, ReluExample) {
  Graph<double> g;
  const auto x = g.input(Tensor<double>(Shape{3}, std::vector<double>{-1, 0, 2}));
  EXPECT_EQ(g.value(g.relu(x)).values(), (std::vector<double>{0, 0, 2}));
}

TEST(Graph, ShapeErrorNamesOpAndShapes) {
  Graph<double> g;
  const auto a = g.input(Tensor<double>(Shape{2, 3}));
  const auto b = g.input(Tensor<double>(Shape{3, 2}));
  try {
    g.add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("add"), std::string::npos);
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3x2]"), std::string::npos) << msg;
  }
}

TEST(Graph, NonFiniteOutputIsRejected) {
  Graph<double> g;
  const auto x = g.input(Tensor<double>(Shape{1}, 1e300));
  EXPECT_THROW(g.multiply(x, x), NumericalError);
}

TEST(Graph, BackwardRequiresScalarLoss) {
  Graph<double> g;
  const auto x = g.parameter("x", Tensor<double>(Shape{2}, 1.0));
  EXPECT_THROW(g.backward(g.relu(x)), ShapeError);
}

TEST(Graph, InputsReceiveNoGradient) {
  Graph<double> g;
  const auto x = g.input(Tensor<double>(Shape{2}, 1.0));
  const auto p = g.parameter("p", Tensor<double>(Shape{2}, 2.0));
  const auto grads = g.backward(g.sum_of_squares(g.multiply(x, p)));
  // d/dp sum((x p)^2) = 2 x^2 p
  EXPECT_EQ(grads.at(x), nullptr);
  EXPECT_EQ(grads.parameter("p").values(), (std::vector<double>{4.0, 4.0}));
}

TEST(Graph, UnreachedParametersGetZeroGradient) {
  Graph<double> g;
  const auto a = g.parameter("a", Tensor<double>(Shape{2}, 1.0));
  g.parameter("unused", Tensor<double>(Shape{3}, 1.0));
  const auto grads = g.backward(g.sum_of_squares(a));
  const auto params = grads.parameters();
  ASSERT_EQ(params.size(), 2u);
  EXPECT_EQ(params[1].first, "unused");
  EXPECT_EQ(params[1].second, Tensor<double>(Shape{3}, 0.0));
}

TEST(Graph, ReplayMatchesFreshRecomputation) {
  Rng rng(8);
  const auto x = random_tensor({2, 3, 6, 6}, rng);
  const auto w = random_tensor({4, 3, 3, 3}, rng);
  auto run = [&] {
    Graph<double> g;
    const auto y = g.relu(g.conv2d(g.input(x), g.parameter("w", w), std::nullopt, {1, 1}));
    return g.value(g.global_avg_pool(y));
  };
  EXPECT_EQ(run(), run());
}

class OpGradient : public ::testing::TestWithParam<OpKind> {};

namespace acmf {
void PrintTo(OpKind kind, std::ostream* os) { *os << op_name(kind); }
}  // namespace acmf

TEST_P(OpGradient, BackwardMatchesCentralDifferences) {
  Rng rng = Rng::derive(2024, op_name(GetParam()));
  for (int i = 0; i < 20; ++i) {
    const auto c = acmf::testing::random_case(GetParam(), rng);
    const auto r = acmf::testing::check_case(c, rng);
    ASSERT_LE(r.max_relative_error, acmf::testing::tolerance_for(GetParam()))
        << c.description << " input " << r.worst_input;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::ValuesIn(acmf::testing::checked_kinds()),
                         [](const auto& info) {
                           std::string name(op_name(info.param));
                           for (auto& ch : name)
                             if (ch == '-' || ch == ' ') ch = '_';
                           return name;
                         });

TEST(Graph, ThreeLayerConvNetGradientMatchesFiniteDifferences) {
  Rng rng(77);
  const auto x = random_tensor({2, 2, 8, 8}, rng);
  NamedTensors<double> params{{"w1", random_tensor({3, 2, 3, 3}, rng)}, {"b1", random_tensor({3}, rng)},
                              {"w2", random_tensor({4, 3, 3, 3}, rng)}, {"w3", random_tensor({2, 4}, rng)}};
  const std::vector<int> labels{0, 1};
  auto build = [&](const NamedTensors<double>& p, Graph<double>& g) {
    const auto h1 = g.relu(g.conv2d(g.input(x), g.parameter("w1", p[0].second), g.parameter("b1", p[1].second), {1, 1}));
    const auto h2 = g.relu(g.conv2d(h1, g.parameter("w2", p[2].second), std::nullopt, {2, 1}));
    const auto logits = g.dense(g.global_avg_pool(h2), g.parameter("w3", p[3].second), std::nullopt);
    return g.softmax_cross_entropy(logits, labels);
  };
  Graph<double> g;
  const auto grads = g.backward(build(params, g));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto f = [&](const Tensor<double>& v) {
      NamedTensors<double> p = params;
      p[i].second = v;
      Graph<double> h;
      return h.value(build(p, h)).item();
    };
    const auto numeric = finite_diff_grad<double>(f, params[i].second, 1e-5);
    EXPECT_LE(relative_error(grads.parameter(params[i].first), numeric), 1e-6) << params[i].first;
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // With a constant gradient g the bias-corrected moments are g and g^2, so
  // the first update is lr * g / (|g| + eps).
  const double g = 50.0;
  NamedTensors<double> params{{"p", Tensor<double>(Shape{1}, 1.0)}};
  const NamedTensors<double> grads{{"p", Tensor<double>(Shape{1}, g)}};
  auto state = AdamState<double>::zeros_like(params, AdamConfig{});
  adam_step(params, grads, state);
  const double expected = 1.0 - 1e-3 * g / (std::abs(g) + 1e-8);
  EXPECT_NEAR(params[0].second[0], expected, 1e-12);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, MatchesClosedFormOverSeveralSteps) {
  const AdamConfig cfg{0.01, 0.9, 0.995, 1e-8};
  NamedTensors<double> params{{"p", Tensor<double>(Shape{1}, 0.5)}};
  auto state = AdamState<double>::zeros_like(params, cfg);
  double p = 0.5, m = 0, v = 0;
  const double gs[] = {0.3, -1.2, 0.7, 2.0, -0.1};
  for (int t = 1; t <= 5; ++t) {
    const double grad = gs[t - 1];
    adam_step(params, NamedTensors<double>{{"p", Tensor<double>(Shape{1}, grad)}}, state);
    m = cfg.beta1 * m + (1 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1 - cfg.beta2) * grad * grad;
    const double mh = m / (1 - std::pow(cfg.beta1, t)), vh = v / (1 - std::pow(cfg.beta2, t));
    p -= cfg.lr * mh / (std::sqrt(vh) + cfg.epsilon);
    EXPECT_NEAR(params[0].second[0], p, 1e-12) << "step " << t;
  }
}

TEST(Adam, ParameterWithoutGradientIsUntouched) {
  NamedTensors<double> params{{"a", Tensor<double>(Shape{2}, 1.0)}, {"b", Tensor<double>(Shape{2}, 1.0)}};
  auto state = AdamState<double>::zeros_like(params, AdamConfig{});
  adam_step(params, NamedTensors<double>{{"a", Tensor<double>(Shape{2}, 1.0)}}, state);
  EXPECT_EQ(params[1].second, Tensor<double>(Shape{2}, 1.0));
  EXPECT_NE(params[0].second, Tensor<double>(Shape{2}, 1.0));
}

TEST(FiniteDiff, QuadraticIsExact) {
  const Tensor<double> x(Shape{3}, std::vector<double>{1, -2, 0.5});
  const auto grad = finite_diff_grad<double>(
      [](const Tensor<double>& t) { return t[0] * t[0] + 3 * t[1] * t[1] + t[2] * t[2]; }, x, 1e-4);
  EXPECT_NEAR(grad[0], 2.0, 1e-9);
  EXPECT_NEAR(grad[1], -12.0, 1e-9);
  EXPECT_NEAR(grad[2], 1.0, 1e-9);
}

TEST(TensorIo, RoundTripIsBitIdentical) {
  Rng rng(1);
  const auto t = acmf::testing::random_tensor_f({2, 3, 4}, rng);
  std::stringstream ss;
  write_tensor(ss, t);
  EXPECT_EQ(read_tensor<float>(ss), t);
}

TEST(TensorIo, ScalarRoundTrip) {
  std::stringstream ss;
  write_tensor(ss, Tensor<double>::scalar(2.5));
  const auto back = read_tensor<double>(ss);
  EXPECT_EQ(back.rank(), 0u);
  EXPECT_EQ(back.item(), 2.5);
}

TEST(TensorIo, DistinctErrors) {
  Rng rng(2);
  std::stringstream ss;
  write_tensor(ss, acmf::testing::random_tensor_f({4, 4}, rng));
  const std::string good = ss.str();
  auto kind_of = [](const std::string& bytes) {
    std::istringstream is(bytes);
    try {
      read_tensor<float>(is);
    } catch (const FormatError& e) {
      return e.kind();
    }
    return FormatErrorKind::kIo;
  };
  EXPECT_EQ(kind_of("NOT-A-TENSOR\n"), FormatErrorKind::kBadMagic);
  EXPECT_EQ(kind_of("ACMF-TENSOR v2\ndtype=f32\nshape=1\n\n0000"), FormatErrorKind::kVersionMismatch);
  EXPECT_EQ(kind_of(good.substr(0, good.size() - 5)), FormatErrorKind::kTruncated);
  EXPECT_EQ(kind_of("ACMF-TENSOR v1\ndtype=i8\nshape=1\n\n0"), FormatErrorKind::kMalformed);
}

TEST(TensorIo, AtomicWriteLeavesNoTemporaries) {
  const auto dir = std::filesystem::temp_directory_path() / "acmf_io_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  save_tensor(Tensor<float>(Shape{2}, 1.0f), dir / "t.tensor");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++files;
  EXPECT_EQ(files, 1u);
  EXPECT_EQ(load_tensor<float>(dir / "t.tensor"), Tensor<float>(Shape{2}, 1.0f));
  std::filesystem::remove_all(dir);
}

TEST(Graph, CenteredIdentityKernelReproducesImage) {
  Rng rng(4);
  const auto x = random_tensor({1, 1, 5, 7}, rng);
  Tensor<double> w(Shape{1, 1, 3, 3});
  w[4] = 1.0;
  Graph<double> g;
  EXPECT_EQ(g.value(g.conv2d(g.input(x), g.input(w), std::nullopt, {1, 1})), x);
}

TEST(Graph, SmallConvMatchesNaiveLoops) {
  Rng rng(6);
  const auto x = random_tensor({1, 1, 4, 4}, rng);
  const auto w = random_tensor({2, 1, 3, 3}, rng);
  Graph<double> g;
  const auto& y = g.value(g.conv2d(g.input(x), g.input(w), std::nullopt, {1, 1}));
  EXPECT_LE(max_abs_diff(y, naive_conv2d(x, w, nullptr, 1, 1, false)), 1e-12);
}

TEST(Graph, SumOfSquaresGradient) {
  Graph<double> g;
  const auto p = g.parameter("p", Tensor<double>(Shape{2}, std::vector<double>{1, 2}));
  EXPECT_EQ(g.backward(g.sum_of_squares(p)).parameter("p").values(), (std::vector<double>{2, 4}));
}

TEST(Graph, DenseGradientIsInput) {
  const Tensor<double> x(Shape{1, 3}, std::vector<double>{0.5, -2, 3});
  Graph<double> g;
  const auto w = g.parameter("w", Tensor<double>(Shape{1, 3}, 0.25));
  const auto y = g.dense(g.input(x), w, std::nullopt);
  const auto loss = g.dot_constant(y, Tensor<double>(Shape{1, 1}, 1.0));
  EXPECT_EQ(g.backward(loss).parameter("w"), x);
}

TEST(FiniteDiff, SumGivesOnes) {
  Rng rng(12);
  const auto x = random_tensor({2, 3}, rng);
  const auto grad = finite_diff_grad<double>(
      [](const Tensor<double>& t) {
        double s = 0;
        for (double v : t.values()) s += v;
        return s;
      },
      x, 1e-3);
  for (double v : grad.values()) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(FiniteDiff, SquareAtThree) {
  const auto grad = finite_diff_grad<double>([](const Tensor<double>& t) { return t[0] * t[0]; },
                                             Tensor<double>(Shape{1}, 3.0), 1e-4);
  EXPECT_NEAR(grad[0], 6.0, 1e-9);
}

TEST(Adam, ZeroGradientLeavesParametersAndCountsStep) {
  NamedTensors<double> params{{"p", Tensor<double>(Shape{3}, 0.7)}};
  auto state = AdamState<double>::zeros_like(params, AdamConfig{});
  adam_step(params, NamedTensors<double>{{"p", Tensor<double>(Shape{3}, 0.0)}}, state);
  adam_step(params, NamedTensors<double>{{"p", Tensor<double>(Shape{3}, 0.0)}}, state);
  EXPECT_EQ(params[0].second, Tensor<double>(Shape{3}, 0.7));
  EXPECT_EQ(state.step, 2u);
}

TEST(Adam, DescendsOnQuadratic) {
  NamedTensors<double> params{{"w", Tensor<double>(Shape{1}, 1.0)}};
  auto state = AdamState<double>::zeros_like(params, AdamConfig{});
  double prev = 1.0;
  for (int i = 0; i < 10; ++i) {
    const double w = params[0].second[0];
    adam_step(params, NamedTensors<double>{{"w", Tensor<double>(Shape{1}, 2 * w)}}, state);
    const double f = params[0].second[0] * params[0].second[0];
    EXPECT_LT(f, prev);
    prev = f;
  }
}

TEST(Adam, ShapeMismatchIsRejected) {
  NamedTensors<double> params{{"p", Tensor<double>(Shape{3}, 0.0)}};
  auto state = AdamState<double>::zeros_like(params, AdamConfig{});
  EXPECT_THROW(adam_step(params, NamedTensors<double>{{"p", Tensor<double>(Shape{2}, 1.0)}}, state), ShapeError);
}

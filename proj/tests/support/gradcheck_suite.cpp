#include "gradcheck_suite.hpp"

#include "gradcheck.hpp"
#include "wagf/attention.hpp"
#include "wagf/fusion.hpp"
#include "wagf/model.hpp"
#include "wagf/wavelet.hpp"

namespace gradcheck {

namespace {

constexpr double kOpTolerance = 1e-5;
constexpr double kModelTolerance = 1e-4;

Tensor rand_tensor(const Shape& shape, std::uint64_t seed, Real lo = -1, Real hi = 1) {
  Rng rng(seed);
  return uniform(shape, lo, hi, rng);
}

// Values bounded away from zero so ReLU kinks stay outside the probe step.
Tensor away_from_zero(const Shape& shape, std::uint64_t seed) {
  Tensor t = rand_tensor(shape, seed, Real(0.1), Real(1));
  Rng rng(seed ^ 0x5a5a);
  std::bernoulli_distribution sign(0.5);
  for (auto& v : t.data())
    if (sign(rng)) v = -v;
  return t;
}

struct Case {
  std::string name;
  Graph graph;
  double tolerance = kOpTolerance;
  Options options{};
};

std::vector<Case> op_cases() {
  std::vector<Case> cases;
  // Each case owns its leaf tensors; the checker perturbs them in place.
  auto leaf = [](Tensor t) { return std::make_shared<Tensor>(std::move(t)); };

  {
    auto a = leaf(rand_tensor({3, 4}, 1)), b = leaf(rand_tensor({3, 4}, 2));
    cases.push_back({"add", [=](Tape& t, Leaves& l) { return project(add(l.input(t, *a), l.input(t, *b))); }});
    cases.push_back({"sub", [=](Tape& t, Leaves& l) { return project(sub(l.input(t, *a), l.input(t, *b))); }});
    cases.push_back({"mul", [=](Tape& t, Leaves& l) { return project(mul(l.input(t, *a), l.input(t, *b))); }});
    cases.push_back({"scale", [=](Tape& t, Leaves& l) { return project(scale(l.input(t, *a), Real(-1.7))); }});
    cases.push_back({"transpose2d", [=](Tape& t, Leaves& l) { return project(transpose2d(l.input(t, *a))); }});
    cases.push_back({"reshape", [=](Tape& t, Leaves& l) { return project(reshape(l.input(t, *a), {2, 6})); }});
    cases.push_back({"sum", [=](Tape& t, Leaves& l) { return scale(sum(l.input(t, *a)), Real(0.3)); }});
  }
  {
    auto x = leaf(rand_tensor({3, 4}, 3)), s = leaf(rand_tensor({1}, 4));
    cases.push_back({"mul_scalar", [=](Tape& t, Leaves& l) { return project(mul_scalar(l.input(t, *x), l.input(t, *s))); }});
  }
  {
    auto x = leaf(rand_tensor({3, 3, 2}, 5)), g = leaf(rand_tensor({3, 3, 1}, 6));
    cases.push_back({"mul_channel", [=](Tape& t, Leaves& l) { return project(mul_channel(l.input(t, *x), l.input(t, *g))); }});
  }
  {
    auto a = leaf(rand_tensor({3, 5}, 7)), b = leaf(rand_tensor({5, 2}, 8));
    cases.push_back({"matmul", [=](Tape& t, Leaves& l) { return project(matmul(l.input(t, *a), l.input(t, *b))); }});
  }
  {
    auto x = leaf(away_from_zero({4, 5}, 9));
    cases.push_back({"relu", [=](Tape& t, Leaves& l) { return project(relu(l.input(t, *x))); }});
    cases.push_back({"sigmoid", [=](Tape& t, Leaves& l) { return project(sigmoid(l.input(t, *x))); }});
    cases.push_back({"tanh", [=](Tape& t, Leaves& l) { return project(tanh(l.input(t, *x))); }});
    cases.push_back({"softmax", [=](Tape& t, Leaves& l) { return project(softmax(l.input(t, *x))); }});
  }
  {
    auto x = leaf(rand_tensor({4, 6, 3}, 10));
    cases.push_back({"global_average_pool", [=](Tape& t, Leaves& l) { return project(global_average_pool(l.input(t, *x))); }});
    cases.push_back({"center_channels", [=](Tape& t, Leaves& l) { return project(center_channels(l.input(t, *x))); }});
    cases.push_back({"avg_pool2", [=](Tape& t, Leaves& l) { return project(avg_pool2(l.input(t, *x))); }});
  }
  {
    auto x = leaf(rand_tensor({5, 4, 2}, 11)), k = leaf(rand_tensor({3, 3, 2, 3}, 12)), b = leaf(rand_tensor({3}, 13));
    cases.push_back({"conv2d", [=](Tape& t, Leaves& l) {
                       return project(conv2d(l.input(t, *x), l.input(t, *k), l.input(t, *b)));
                     }});
  }
  {
    auto x = leaf(rand_tensor({4, 5, 3}, 14)), dw = leaf(rand_tensor({3, 3, 3}, 15)),
         pw = leaf(rand_tensor({3, 2}, 16)), b = leaf(rand_tensor({2}, 17));
    cases.push_back({"separable_conv2d", [=](Tape& t, Leaves& l) {
                       return project(separable_conv2d(l.input(t, *x), l.input(t, *dw), l.input(t, *pw), l.input(t, *b)));
                     }});
  }
  {
    auto seq = leaf(rand_tensor({5, 3}, 18)), w = leaf(rand_tensor({3, 8}, 19, -0.5, 0.5)),
         u = leaf(rand_tensor({2, 8}, 20, -0.5, 0.5)), b = leaf(rand_tensor({8}, 21, -0.5, 0.5));
    cases.push_back({"lstm", [=](Tape& t, Leaves& l) {
                       return project(lstm(l.input(t, *seq), l.input(t, *w), l.input(t, *u), l.input(t, *b)));
                     }});
  }
  {
    auto logits = leaf(rand_tensor({3, 4}, 22, -2, 2));
    cases.push_back({"cross_entropy", [=](Tape& t, Leaves& l) {
                       static const int labels[] = {0, 3, 2};
                       return cross_entropy(l.input(t, *logits), labels);
                     }});
  }
  {
    auto x = leaf(rand_tensor({4, 6, 2}, 23)), bands = leaf(rand_tensor({4, 2, 3, 2}, 24));
    cases.push_back({"haar_dwt2", [=](Tape& t, Leaves& l) { return project(haar_dwt2(l.input(t, *x))); }});
    cases.push_back({"haar_idwt2", [=](Tape& t, Leaves& l) { return project(haar_idwt2(l.input(t, *bands))); }});
    cases.push_back({"boundary_features", [=](Tape& t, Leaves& l) { return project(boundary_features(l.input(t, *x))); }});
  }
  {
    auto fw = leaf(rand_tensor({2, 2, 3}, 25)), fs = leaf(rand_tensor({2, 2, 3}, 26));
    const Tensor gw = rand_tensor({2, 2, 3}, 27, 0, 1), gs = rand_tensor({2, 2, 3}, 28, 0, 1);
    cases.push_back({"fuse", [=](Tape& t, Leaves& l) { return project(fuse(l.input(t, *fw), l.input(t, *fs), gw, gs)); }});
  }
  {
    auto f = leaf(rand_tensor({4, 4, 1}, 29));
    cases.push_back({"sab", [=](Tape& t, Leaves& l) { return project(sab(l.input(t, *f))); }});
  }
  return cases;
}

// Module-level graphs with every parameter as a leaf.
std::vector<Case> module_cases() {
  std::vector<Case> cases;
  {
    auto p = std::make_shared<SoftAttentionParams>(SoftAttentionParams::make("sa", 3, 31));
    p->gamma.value[0] = Real(0.4);
    auto x = std::make_shared<Tensor>(rand_tensor({4, 4, 3}, 32));
    cases.push_back({"soft_attention", [=](Tape& t, Leaves& l) {
                       Var in = l.input(t, *x);
                       std::vector<Parameter*> ps;
                       collect_parameters(*p, ps);
                       for (auto* pp : ps) l.param(*pp);
                       return project(soft_attention(t, in, *p).f_sa);
                     }});
  }
  {
    auto p = std::make_shared<SaFAParams>(SaFAParams::make("safa", 4, 4, 3, 33));
    auto x = std::make_shared<Tensor>(rand_tensor({4, 4, 3}, 34));
    cases.push_back({"fdab", [=](Tape& t, Leaves& l) {
                       Var in = l.input(t, *x);
                       std::vector<Parameter*> ps;
                       collect_parameters(*p, ps);
                       for (auto* pp : ps)
                         if (pp->name.find(".out.") == std::string::npos) l.param(*pp);
                       return project(fdab(t, in, *p).f_lstm);
                     }});
    auto m = std::make_shared<Tensor>(rand_tensor({4, 4, 1}, 35));
    cases.push_back({"safa_map", [=](Tape& t, Leaves& l) {
                       Var in = l.input(t, *m);
                       std::vector<Parameter*> ps;
                       collect_parameters(*p, ps);
                       for (auto* pp : ps)
                         if (pp->name.find(".out.") != std::string::npos) l.param(*pp);
                       return project(safa_map(t, in, *p));
                     }});
  }
  return cases;
}

Case model_case() {
  ModelConfig cfg;
  cfg.input_height = cfg.input_width = 8;
  cfg.backbone_channels = {2, 4};
  cfg.num_classes = 3;
  cfg.seed = 41;
  auto model = std::make_shared<Model>(cfg);
  // Nonzero residual scale and uneven fusion weights so every branch matters.
  model->find("soft_attention.gamma")->value[0] = Real(0.6);
  // Zero biases put near-zero activations right on the ReLU kinks.
  std::uint64_t bias_seed = 100;
  for (auto* p : model->parameters())
    if (p->name.ends_with(".bias")) p->value = away_from_zero(p->value.shape(), bias_seed++);
  auto fusion = std::make_shared<FusionState>(model->make_fusion_state());
  fusion->g_w_ema = rand_tensor(cfg.feature_shape(), 42, 0, 1);
  fusion->g_sa_ema = rand_tensor(cfg.feature_shape(), 43, 0, 1);
  fusion->initialized = true;
  auto image = std::make_shared<Tensor>(rand_tensor(cfg.input_shape(), 44, 0, 1));
  Options opt;
  opt.max_elements = 12;
  return {"model_end_to_end", [=](Tape& t, Leaves& l) {
            for (auto* p : model->parameters()) l.param(*p);
            auto pass = model->forward(t, *image, *fusion);
            static const int label[] = {1};
            return cross_entropy(pass.logits, label);
          },
          kModelTolerance, opt};
}

}  // namespace

std::vector<CaseResult> run_suite() {
  std::vector<Case> cases = op_cases();
  for (auto& c : module_cases()) cases.push_back(std::move(c));
  cases.push_back(model_case());
  std::vector<CaseResult> out;
  for (const auto& c : cases) out.push_back({c.name, max_relative_error(c.graph, c.options), c.tolerance});
  return out;
}

}  // namespace gradcheck

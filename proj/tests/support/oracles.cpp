#include "oracles.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "lnrel/phantom.h"

namespace lnrel::oracle {

DistanceMap brute_force_edt(const BinaryMask& mask) {
  std::vector<Index3> fg;
  for (int z = 0; z < mask.shape[0]; ++z)
    for (int y = 0; y < mask.shape[1]; ++y)
      for (int x = 0; x < mask.shape[2]; ++x)
        if (mask.at(z, y, x)) fg.push_back({z, y, x});
  DistanceMap out(mask.shape, mask.spacing, 0.0);
  for (int z = 0; z < mask.shape[0]; ++z) {
    for (int y = 0; y < mask.shape[1]; ++y) {
      for (int x = 0; x < mask.shape[2]; ++x) {
        double best = std::numeric_limits<double>::infinity();
        for (const Index3& p : fg) {
          const double dz = (z - p[0]) * mask.spacing[0];
          const double dy = (y - p[1]) * mask.spacing[1];
          const double dx = (x - p[2]) * mask.spacing[2];
          best = std::min(best, dz * dz + dy * dy + dx * dx);
        }
        out.at(z, y, x) = std::sqrt(best);
      }
    }
  }
  return out;
}

BinaryMask random_mask(const Index3& shape, const Vec3& spacing, double density, Rng& rng) {
  BinaryMask mask(shape, spacing);
  std::bernoulli_distribution on(density);
  for (auto& v : mask.values) v = on(rng) ? 1 : 0;
  if (foreground_count(mask) == 0) mask.values[std::uniform_int_distribution<std::size_t>(0, mask.values.size() - 1)(rng)] = 1;
  return mask;
}

std::vector<double> naive_conv3d(const Tensor& input, const Tensor& weights, const std::vector<double>& bias,
                                 int stride, int padding) {
  const int ci_n = static_cast<int>(input.dim(0));
  const int d = static_cast<int>(input.dim(1)), h = static_cast<int>(input.dim(2)), w = static_cast<int>(input.dim(3));
  const int co_n = static_cast<int>(weights.dim(0));
  const int k = static_cast<int>(weights.dim(2));
  const int od = (d + 2 * padding - k) / stride + 1;
  const int oh = (h + 2 * padding - k) / stride + 1;
  const int ow = (w + 2 * padding - k) / stride + 1;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(co_n) * od * oh * ow);
  for (int co = 0; co < co_n; ++co)
    for (int z = 0; z < od; ++z)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          double acc = bias.empty() ? 0.0 : bias[co];
          for (int ci = 0; ci < ci_n; ++ci)
            for (int a = 0; a < k; ++a)
              for (int b = 0; b < k; ++b)
                for (int c = 0; c < k; ++c) {
                  const int iz = z * stride + a - padding, iy = y * stride + b - padding, ix = x * stride + c - padding;
                  if (iz < 0 || iy < 0 || ix < 0 || iz >= d || iy >= h || ix >= w) continue;
                  acc += weights.at((((static_cast<std::size_t>(co) * ci_n + ci) * k + a) * k + b) * k + c) *
                         input.at(((static_cast<std::size_t>(ci) * d + iz) * h + iy) * w + ix);
                }
          out.push_back(acc);
        }
  return out;
}

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheck check_gradients(const std::function<Tensor()>& loss,
                          const std::vector<std::pair<std::string, Tensor>>& inputs, double eps) {
  for (auto [name, t] : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  loss().backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& [name, t] : inputs) {
    analytic.emplace_back(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.back().begin());
  }
  GradCheck result;
  NoGradGuard no_grad;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor t = inputs[i].second;
    auto values = t.mutable_data();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + eps;
      const double up = loss().item();
      values[j] = saved - eps;
      const double down = loss().item();
      values[j] = saved;
      const double err = relative_error(analytic[i][j], (up - down) / (2.0 * eps));
      ++result.coordinates;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = inputs[i].first + "[" + std::to_string(j) + "]";
      }
    }
  }
  return result;
}

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = u(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

Tensor away_from_zero(Shape shape, Rng& rng) {
  Tensor t = random_tensor(std::move(shape), rng);
  for (double& x : t.mutable_data()) x = x < 0 ? x - 0.1 : x + 0.1;
  return t;
}

}  // namespace

std::vector<NamedGradCheck> op_gradient_suite(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<NamedGradCheck> out;
  auto run = [&](const std::string& name, const std::function<Tensor()>& loss,
                 const std::vector<std::pair<std::string, Tensor>>& inputs) {
    out.push_back({name, check_gradients(loss, inputs)});
  };
  Tensor a = away_from_zero({3, 2}, rng), b = away_from_zero({3, 2}, rng), w6 = random_tensor({3, 2}, rng);
  Tensor p23 = random_tensor({2, 3}, rng);
  run("add", [&] { return sum(mul(add(a, b), w6)); }, {{"a", a}, {"b", b}});
  run("mul", [&] { return sum(mul(mul(a, b), w6)); }, {{"a", a}, {"b", b}});
  run("scale", [&] { return sum(mul(scale(a, -1.3), w6)); }, {{"a", a}});
  run("sum", [&] { return sum(a); }, {{"a", a}});
  run("mean", [&] { return mean(mul(a, b)); }, {{"a", a}, {"b", b}});
  run("relu", [&] { return sum(mul(relu(a), w6)); }, {{"a", a}});
  run("sigmoid", [&] { return sum(mul(sigmoid(a), w6)); }, {{"a", a}});
  Tensor c = random_tensor({3, 2}, rng), d = random_tensor({3, 3}, rng);
  run("reshape", [&] { return sum(mul(reshape(a, {2, 3}), p23)); }, {{"a", a}});
  Tensor p35 = random_tensor({3, 5}, rng), p22 = random_tensor({2, 2}, rng);
  run("concat", [&] { return sum(mul(concat({c, d}, 1), p35)); }, {{"c", c}, {"d", d}});
  run("stack_select", [&] { return sum(mul(stack({select(c, 2), select(c, 0)}), p22)); }, {{"c", c}});
  Tensor x = random_tensor({4, 3}, rng), x1 = random_tensor({3}, rng), lw = random_tensor({2, 3}, rng),
         lb = random_tensor({2}, rng), probe = random_tensor({4, 2}, rng);
  run("linear", [&] { return sum(mul(linear(x, lw, lb), probe)); }, {{"x", x}, {"w", lw}, {"b", lb}});
  run("linear_vector", [&] { return sum(mul(linear(x1, lw, lb), select(probe, 0))); }, {{"x", x1}, {"w", lw}, {"b", lb}});
  Tensor m1 = random_tensor({4, 3}, rng), m2 = random_tensor({3, 4}, rng), p44 = random_tensor({4, 4}, rng);
  run("matmul", [&] { return sum(mul(matmul(m1, m2), p44)); }, {{"a", m1}, {"b", m2}});
  run("softmax_rows", [&] { return sum(mul(softmax_rows(matmul(m1, m2)), p44)); }, {{"a", m1}});
  Tensor t = random_tensor({3, 2}, rng), s = random_tensor({3, 1}, rng), p93 = random_tensor({9, 3}, rng);
  run("pairwise_concat", [&] { return sum(mul(pairwise_concat(t, s), p93)); }, {{"t", t}, {"s", s}});
  Tensor p33 = random_tensor({3, 3}, rng);
  run("block_sum", [&] { return sum(mul(block_sum(p93, 3), p33)); }, {{"x", p93}});
  Tensor in = random_tensor({2, 5, 6, 4}, rng), cw = random_tensor({3, 2, 3, 3, 3}, rng), cb = random_tensor({3}, rng);
  for (int stride : {1, 2}) {
    for (int padding : {0, 1}) {
      const Shape os = conv3d(in, cw, cb, stride, padding).shape();
      Tensor cp = random_tensor(os, rng);
      run("conv3d_s" + std::to_string(stride) + "_p" + std::to_string(padding),
          [&] { return sum(mul(conv3d(in, cw, cb, stride, padding), cp)); }, {{"in", in}, {"w", cw}, {"b", cb}});
    }
  }
  Tensor fm = random_tensor({3, 4, 5, 4}, rng), rp = random_tensor({3}, rng);
  run("roi_gap", [&] { return sum(mul(roi_gap(fm, Box3{{1, 0, 2}, {3, 4, 4}}), rp)); }, {{"x", fm}});
  Tensor pr = random_tensor({5}, rng, 0.05, 0.95);
  const Tensor labels = Tensor::from({5}, {1, 0, 0, 1, 0});
  run("bce_loss", [&] { return bce_loss(pr, labels, 1.7); }, {{"p", pr}});
  Tensor lg = random_tensor({5}, rng, -4.0, 4.0);
  run("bce_with_logits", [&] { return bce_with_logits(lg, labels, 1.7); }, {{"z", lg}});
  return out;
}

GradCheck micro_pipeline_gradients(std::uint64_t seed, double eps) {
  PhantomConfig cfg;
  cfg.volume_shape = {24, 40, 40};
  cfg.candidates_per_study = 8;
  cfg.candidates_spread = 1;
  cfg.fp_per_study = 4;
  cfg.seed = seed;
  Study study = generate_study(cfg, 0);
  // Keep one positive and two negatives when available.
  std::stable_partition(study.candidates.begin(), study.candidates.end(), [](const Candidate& c) { return c.positive(); });
  const auto negative = std::find_if(study.candidates.begin(), study.candidates.end(),
                                     [](const Candidate& c) { return !c.positive(); });
  if (negative != study.candidates.end() && negative != study.candidates.begin()) {
    std::rotate(study.candidates.begin() + 1, negative, study.candidates.end());
  }
  study.candidates.resize(3);
  const PreparedStudy prepared = prepare_study(study);
  Rng rng(seed);
  JointModel model(AppearanceConfig::scaled(64, true), GnnDims::scaled(64), GnnVariant::gnn_p, rng);
  const Tensor labels = Tensor::from({3}, prepared.labels());
  // Zero biases on exactly-zero air voxels put every pre-activation on the
  // relu kink; check at a generic point instead.
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  std::vector<std::pair<std::string, Tensor>> inputs;
  for (const NamedParameter& p : model.parameters()) {
    if (p.name.ends_with("bias")) {
      for (double& v : p.param->value.mutable_data()) v = jitter(rng);
    }
    inputs.emplace_back(p.name, p.param->value);
  }
  return check_gradients([&] { return bce_loss(model.forward_study(prepared, true, 8), labels, 2.0); }, inputs, eps);
}

namespace {

double activate(double v, Activation a) {
  switch (a) {
    case Activation::relu:
      return v > 0.0 ? v : 0.0;
    case Activation::sigmoid:
      return 1.0 / (1.0 + std::exp(-v));
    case Activation::none:
      break;
  }
  return v;
}

std::vector<double> join(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

std::vector<double> mlp_apply(const Mlp& mlp, const std::vector<double>& x) {
  std::vector<double> cur = x;
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    const Tensor& w = mlp.weight(l).value;
    const Tensor& b = mlp.bias(l).value;
    const std::size_t out_n = w.dim(0), in_n = w.dim(1);
    const Activation act = l + 1 == mlp.layer_count() ? mlp.spec().output_activation : mlp.spec().hidden_activation;
    std::vector<double> next(out_n);
    for (std::size_t o = 0; o < out_n; ++o) {
      double acc = b.at(o);
      for (std::size_t i = 0; i < in_n; ++i) acc += w.at(o * in_n + i) * cur.at(i);
      next[o] = activate(acc, act);
    }
    cur = std::move(next);
  }
  return cur;
}

std::vector<double> row(const Tensor& matrix, std::size_t r) {
  const std::size_t cols = matrix.dim(1);
  return {matrix.data().begin() + r * cols, matrix.data().begin() + (r + 1) * cols};
}

GnnReference gnn_reference(RelationGnn& gnn, const Tensor& features, const Tensor& priors) {
  const std::size_t n = features.dim(0);
  GnnReference ref;
  for (std::size_t u = 0; u < n; ++u) {
    ref.x.push_back(join(row(features, u), mlp_apply(gnn.transform(), row(priors, u))));
    ref.h.push_back(mlp_apply(gnn.phi_h(), row(features, u)));
  }
  for (std::size_t u = 0; u < n; ++u) {
    std::vector<double> m(gnn.dims().message_width, 0.0);
    if (gnn.variant() == GnnVariant::gnn_p) {
      for (std::size_t v = 0; v < n; ++v) {
        const auto e = mlp_apply(gnn.phi_e(), join(ref.x[u], ref.x[v]));
        for (std::size_t k = 0; k < m.size(); ++k) m[k] += e[k];
      }
    } else {
      std::vector<double> score(n);
      for (std::size_t v = 0; v < n; ++v) score[v] = mlp_apply(gnn.alpha_net(), join(ref.x[u], ref.x[v]))[0];
      const double top = *std::max_element(score.begin(), score.end());
      double z = 0.0;
      for (double& s : score) z += (s = std::exp(s - top));
      for (std::size_t v = 0; v < n; ++v) {
        const auto e = mlp_apply(gnn.phi_e(), ref.x[v]);
        for (std::size_t k = 0; k < m.size(); ++k) m[k] += score[v] / z * e[k];
      }
    }
    ref.messages.push_back(m);
    ref.predictions.push_back(mlp_apply(gnn.phi_y(), mlp_apply(gnn.phi_u(), join(ref.h[u], m)))[0]);
  }
  return ref;
}

EvalReference eval_reference(const std::vector<ScoredCandidate>& candidates, std::size_t study_count,
                             const std::vector<double>& fp_points) {
  std::set<double, std::greater<>> thresholds;
  std::size_t positives = 0;
  for (const auto& c : candidates) {
    thresholds.insert(c.score);
    positives += c.label;
  }
  EvalReference ref;
  // F1 = 2tp / (tp + fp + P); ties are compared exactly on the integer ratio.
  std::size_t best_num = 0, best_den = 1;
  bool have_best = false;
  for (double t : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (const auto& c : candidates) {
      if (c.score >= t) ++(c.label ? tp : fp);
    }
    ref.all_thresholds.push_back({t, static_cast<double>(fp) / study_count, static_cast<double>(tp) / positives});
    const std::size_t num = 2 * tp, den = tp + fp + positives;
    if (!have_best || num * best_den > best_num * den) {
      have_best = true;
      best_num = num;
      best_den = den;
      const double precision = static_cast<double>(tp) / (tp + fp);
      const double recall = static_cast<double>(tp) / positives;
      ref.best_f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
      ref.best_threshold = t;
    }
  }
  for (double target : fp_points) {
    double best = 0.0;
    for (const auto& p : ref.all_thresholds) {
      if (p.fp_per_study <= target) best = std::max(best, p.sensitivity);
    }
    ref.mfroc += best / fp_points.size();
  }
  return ref;
}

std::vector<ScoredCandidate> random_scored_set(Rng& rng, std::size_t max_size, std::size_t study_count) {
  const std::size_t n = std::uniform_int_distribution<std::size_t>(1, max_size)(rng);
  const bool coarse = std::bernoulli_distribution(0.5)(rng);  // coarse scores force ties
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ScoredCandidate> out;
  for (std::size_t i = 0; i < n; ++i) {
    double s = unit(rng);
    if (coarse) s = std::round(s * 8.0) / 8.0;
    out.push_back({"s" + std::to_string(i % study_count), s, std::bernoulli_distribution(0.4)(rng) ? 1 : 0});
  }
  out[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)].label = 1;
  return out;
}

}  // namespace lnrel::oracle

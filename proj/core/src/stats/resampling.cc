#include "msunet/stats/resampling.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "msunet/error.h"
#include "msunet/parallel.h"
#include "msunet/rng.h"

namespace msunet::stats {

PermutationResult PermutationTest(std::span<const double> p, std::span<const double> q,
                                  int replicates, const DivergenceConfig& config, uint64_t seed,
                                  int threads) {
  if (replicates < 1) throw ConfigError("stats.replicates", "must be >= 1");
  config.Validate();
  const size_t n0 = p.size();
  const size_t n = p.size() + q.size();

  std::vector<double> pooled(p.begin(), p.end());
  pooled.insert(pooled.end(), q.begin(), q.end());
  ApplyJitter(pooled, config.jitter_scale, config.jitter_seed);

  PermutationResult result;
  result.replicates = replicates;
  {
    std::vector<double> ps(pooled.begin(), pooled.begin() + static_cast<ptrdiff_t>(n0));
    std::vector<double> qs(pooled.begin() + static_cast<ptrdiff_t>(n0), pooled.end());
    std::sort(ps.begin(), ps.end());
    std::sort(qs.begin(), qs.end());
    result.observed = RenyiDivergenceSorted(ps, qs, config);
  }

  // Sorting once lets every replicate split the pool into two sorted
  // halves in linear time.
  std::sort(pooled.begin(), pooled.end());
  const bool pick_p = n0 <= n - n0;
  const size_t picks = pick_p ? n0 : n - n0;

  std::vector<double> stats(static_cast<size_t>(replicates));
  ParallelFor(static_cast<size_t>(replicates), threads, [&](size_t b) {
    Rng rng(DeriveSeed(seed, "permutation", b));
    std::vector<uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    std::vector<uint8_t> picked(n, 0);
    for (size_t i = 0; i < picks; ++i) {
      const size_t j = i + rng.UniformInt(n - i);
      std::swap(idx[i], idx[j]);
      picked[idx[i]] = 1;
    }
    std::vector<double> ps, qs;
    ps.reserve(n0);
    qs.reserve(n - n0);
    for (size_t i = 0; i < n; ++i) {
      const bool in_p = pick_p ? picked[i] != 0 : picked[i] == 0;
      (in_p ? ps : qs).push_back(pooled[i]);
    }
    stats[b] = RenyiDivergenceSorted(ps, qs, config);
  });

  for (double s : stats) {
    if (s >= result.observed) ++result.exceed_count;
  }
  result.p_value = (1.0 + result.exceed_count) / (replicates + 1.0);
  return result;
}

MoonSizes MoonSampleSizes(size_t n0, size_t n1, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("stats.gamma", "must lie in (0, 1]");
  if (n0 == 0 || n1 == 0) throw DegenerateInputError("degenerate pool: empty pool");
  const double alpha_n = static_cast<double>(n0) / static_cast<double>(n1);
  MoonSizes s;
  s.n_star = static_cast<long>(std::floor(std::pow(static_cast<double>(n0 + n1), gamma) + 0.5));
  s.n0_star = static_cast<long>(std::floor(alpha_n / (1.0 + alpha_n) * s.n_star + 0.5));
  s.n1_star = s.n_star - s.n0_star;
  return s;
}

std::vector<double> MoonBootstrap(std::span<const double> p, std::span<const double> q,
                                  double gamma, int replicates, const DivergenceConfig& config,
                                  uint64_t seed, int threads) {
  if (replicates < 1) throw ConfigError("stats.replicates", "must be >= 1");
  config.Validate();
  const MoonSizes sizes = MoonSampleSizes(p.size(), q.size(), gamma);
  if (sizes.n0_star <= config.k || sizes.n1_star <= config.k) {
    throw DegenerateInputError("γ too small for k: resample sizes " +
                               std::to_string(sizes.n0_star) + " and " +
                               std::to_string(sizes.n1_star) + " must exceed k=" +
                               std::to_string(config.k));
  }
  std::vector<double> out(static_cast<size_t>(replicates));
  ParallelFor(static_cast<size_t>(replicates), threads, [&](size_t b) {
    Rng rng(DeriveSeed(seed, "moon", b));
    std::vector<double> pooled(static_cast<size_t>(sizes.n_star));
    for (long i = 0; i < sizes.n0_star; ++i) pooled[static_cast<size_t>(i)] = p[rng.UniformInt(p.size())];
    for (long i = 0; i < sizes.n1_star; ++i) {
      pooled[static_cast<size_t>(sizes.n0_star + i)] = q[rng.UniformInt(q.size())];
    }
    ApplyJitter(pooled, config.jitter_scale, DeriveSeed(config.jitter_seed, "moon", b));
    const auto mid = pooled.begin() + sizes.n0_star;
    std::sort(pooled.begin(), mid);
    std::sort(mid, pooled.end());
    out[b] = RenyiDivergenceSorted(std::span<const double>(pooled.data(), static_cast<size_t>(sizes.n0_star)),
                                   std::span<const double>(pooled.data() + sizes.n0_star,
                                                           static_cast<size_t>(sizes.n1_star)),
                                   config);
  });
  return out;
}

double Quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DegenerateInputError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::pair<double, double> PercentileCi(std::span<const double> samples, double level) {
  if (samples.empty()) throw DegenerateInputError("percentile interval of an empty sample");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("stats.ci_level", "must lie in (0, 1)");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double tail = (1.0 - level) / 2.0;
  return {Quantile(s, tail), Quantile(s, 1.0 - tail)};
}

DeltaMu ComputeDeltaMu(std::span<const double> correct, std::span<const double> incorrect) {
  if (correct.empty() || incorrect.empty()) {
    throw DegenerateInputError("degenerate pool: mean of an empty pool");
  }
  DeltaMu d;
  d.mu_correct = std::accumulate(correct.begin(), correct.end(), 0.0) / correct.size();
  d.mu_incorrect = std::accumulate(incorrect.begin(), incorrect.end(), 0.0) / incorrect.size();
  d.delta = d.mu_incorrect - d.mu_correct;
  return d;
}

DivergenceReport AnalyzePools(std::span<const double> correct, std::span<const double> incorrect,
                              const DivergenceConfig& config, double gamma, int replicates,
                              double ci_level, uint64_t seed, int threads) {
  DivergenceReport r;
  r.config = config;
  r.gamma = gamma;
  r.replicates = replicates;
  r.ci_level = ci_level;
  r.n_correct = correct.size();
  r.n_incorrect = incorrect.size();
  r.delta_mu = ComputeDeltaMu(correct, incorrect);
  const PermutationResult perm =
      PermutationTest(correct, incorrect, replicates, config, DeriveSeed(seed, "perm-test"), threads);
  r.estimate = perm.observed;
  r.p_value = perm.p_value;
  r.bootstrap = MoonBootstrap(correct, incorrect, gamma, replicates, config,
                              DeriveSeed(seed, "moon-bootstrap"), threads);
  std::tie(r.ci_lo, r.ci_hi) = PercentileCi(r.bootstrap, ci_level);
  return r;
}

std::string DivergenceReportToJson(const DivergenceReport& r) {
  nlohmann::json j;
  j["estimate"] = r.estimate;
  j["p_value"] = r.p_value;
  j["replicates"] = r.replicates;
  j["gamma"] = r.gamma;
  j["ci"] = {{"level", r.ci_level}, {"lo", r.ci_lo}, {"hi", r.ci_hi}};
  j["delta_mu"] = {{"mu_correct", r.delta_mu.mu_correct},
                   {"mu_incorrect", r.delta_mu.mu_incorrect},
                   {"delta", r.delta_mu.delta}};
  j["n_correct"] = r.n_correct;
  j["n_incorrect"] = r.n_incorrect;
  j["config"] = {{"k", r.config.k},
                 {"alpha", r.config.alpha},
                 {"jitter_scale", r.config.jitter_scale},
                 {"jitter_seed", r.config.jitter_seed}};
  return j.dump(2);
}

DivergenceReport DivergenceReportFromJson(const std::string& json) {
  DivergenceReport r;
  try {
    const nlohmann::json j = nlohmann::json::parse(json);
    r.estimate = j.at("estimate").get<double>();
    r.p_value = j.at("p_value").get<double>();
    r.replicates = j.at("replicates").get<int>();
    r.gamma = j.at("gamma").get<double>();
    r.ci_level = j.at("ci").at("level").get<double>();
    r.ci_lo = j.at("ci").at("lo").get<double>();
    r.ci_hi = j.at("ci").at("hi").get<double>();
    r.delta_mu.mu_correct = j.at("delta_mu").at("mu_correct").get<double>();
    r.delta_mu.mu_incorrect = j.at("delta_mu").at("mu_incorrect").get<double>();
    r.delta_mu.delta = j.at("delta_mu").at("delta").get<double>();
    r.n_correct = j.at("n_correct").get<size_t>();
    r.n_incorrect = j.at("n_incorrect").get<size_t>();
    r.config.k = j.at("config").at("k").get<int>();
    r.config.alpha = j.at("config").at("alpha").get<double>();
    r.config.jitter_scale = j.at("config").at("jitter_scale").get<double>();
    r.config.jitter_seed = j.at("config").at("jitter_seed").get<uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed divergence report: ") + e.what());
  }
  return r;
}

std::string BootstrapCsv(std::span<const double> samples) {
  std::ostringstream os;
  os.precision(17);
  os << "replicate,estimate\n";
  for (size_t i = 0; i < samples.size(); ++i) os << i << ',' << samples[i] << '\n';
  return os.str();
}

}  // namespace msunet::stats

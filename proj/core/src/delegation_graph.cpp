#include "fluid/delegation_graph.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace fluid {

DelegationGraph::DelegationGraph(std::vector<std::int64_t> out) : out_(std::move(out)) {
  const auto n = static_cast<std::int64_t>(out_.size());
  for (std::int64_t i = 0; i < n; ++i) {
    const auto t = out_[static_cast<std::size_t>(i)];
    if (t == i) throw std::invalid_argument("delegation graph: voter delegates to itself");
    if (t >= n || t < kVotesDirectly)
      throw std::invalid_argument("delegation graph: target out of range");
  }
}

std::size_t DelegationGraph::edge_count() const {
  return static_cast<std::size_t>(std::count_if(out_.begin(), out_.end(), [](auto t) { return t >= 0; }));
}

void DelegationGraph::set_target(std::size_t voter, std::optional<VoterId> to) {
  if (to && (*to == voter || *to >= out_.size()))
    throw std::invalid_argument("delegation graph: invalid target");
  out_[voter] = to ? static_cast<std::int64_t>(*to) : kVotesDirectly;
}

namespace detail {

TargetSampler::TargetSampler(const PairWeightFn& phi, std::span<const double> competencies,
                             std::vector<VoterId> candidates)
    : phi_(phi), p_(competencies), candidates_(std::move(candidates)), separable_(phi.separable_in_y()) {
  if (!separable_) return;
  cumulative_.resize(candidates_.size() + 1, 0.0);
  position_.assign(p_.size(), -1);
  for (std::size_t k = 0; k < candidates_.size(); ++k) {
    cumulative_[k + 1] = cumulative_[k] + phi_(0.0, p_[candidates_[k]]);
    position_[candidates_[k]] = static_cast<std::int64_t>(k);
  }
}

double TargetSampler::total_weight(VoterId from) const {
  if (separable_) {
    double total = cumulative_.back();
    if (const auto pos = position_[from]; pos >= 0)
      total -= cumulative_[pos + 1] - cumulative_[pos];
    return std::max(total, 0.0);
  }
  double total = 0.0;
  for (VoterId c : candidates_)
    if (c != from) total += phi_(p_[from], p_[c]);
  return total;
}

std::optional<VoterId> TargetSampler::draw(VoterId from, RandomStream& rng) const {
  if (separable_) {
    const double all = cumulative_.back();
    if (!(all > 0.0)) return std::nullopt;
    const auto pos = position_[from];
    const double own = pos >= 0 ? cumulative_[pos + 1] - cumulative_[pos] : 0.0;
    // Rejection of self is exact and cheap unless self holds most of the mass.
    if ((all - own) > 1e-3 * all) {
      for (;;) {
        const double u = rng.uniform() * all;
        auto it = std::upper_bound(cumulative_.begin() + 1, cumulative_.end(), u);
        if (it == cumulative_.end()) --it;
        const auto k = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
        if (candidates_[k] != from) return candidates_[k];
      }
    }
  }
  double total = 0.0;
  for (VoterId c : candidates_)
    if (c != from) total += phi_(p_[from], p_[c]);
  if (!(total > 0.0)) return std::nullopt;
  const double u = rng.uniform() * total;
  double acc = 0.0;
  std::optional<VoterId> last;
  for (VoterId c : candidates_) {
    if (c == from) continue;
    const double w = phi_(p_[from], p_[c]);
    if (w <= 0.0) continue;
    acc += w;
    last = c;
    if (u < acc) return c;
  }
  return last;
}

}  // namespace detail

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_voters(std::span<const double> competencies) {
  if (competencies.empty()) throw std::invalid_argument("sample_graph: need at least one voter");
  for (double p : competencies)
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("sample_graph: competencies must lie in [0, 1]");
}

std::vector<VoterId> all_voters(std::size_t n) {
  std::vector<VoterId> v(n);
  std::iota(v.begin(), v.end(), VoterId{0});
  return v;
}

}  // namespace

DelegationGraph sample_graph(const MechanismSpec& mech, std::span<const double> competencies,
                             RandomStream& rng) {
  require_voters(competencies);
  const std::size_t n = competencies.size();
  DelegationGraph g(n);

  std::visit(
      Overloaded{
          [&](const MechanismSpec::Upward& up) {
            std::vector<VoterId> order = all_voters(n);
            std::stable_sort(order.begin(), order.end(),
                             [&](VoterId a, VoterId b) { return competencies[a] < competencies[b]; });
            std::vector<double> sorted(n);
            for (std::size_t k = 0; k < n; ++k) sorted[k] = competencies[order[k]];
            for (std::size_t i = 0; i < n; ++i) {
              if (!rng.bernoulli(up.p)) continue;
              const auto first_above = static_cast<std::size_t>(
                  std::upper_bound(sorted.begin(), sorted.end(), competencies[i]) - sorted.begin());
              const std::size_t above = n - first_above;
              if (above == 0) continue;  // nobody more competent: degenerate, votes directly
              g.set_target(i, order[first_above + rng.below(above)]);
            }
          },
          [&](const MechanismSpec::ConfidenceBased& cb) {
            for (std::size_t i = 0; i < n; ++i) {
              if (!rng.bernoulli(cb.q(competencies[i]))) continue;
              if (n == 1) continue;
              auto j = rng.below(n - 1);
              if (j >= i) ++j;
              g.set_target(i, static_cast<VoterId>(j));
            }
          },
          [&](const MechanismSpec::GeneralContinuous& gc) {
            detail::TargetSampler targets(gc.phi, competencies, all_voters(n));
            for (std::size_t i = 0; i < n; ++i) {
              if (!rng.bernoulli(gc.p)) continue;
              g.set_target(i, targets.draw(static_cast<VoterId>(i), rng));
            }
          },
      },
      mech.variant());
  return g;
}

DelegationGraph sample_graph_reference(const MechanismSpec& mech,
                                       std::span<const double> competencies, RandomStream& rng) {
  require_voters(competencies);
  const std::size_t n = competencies.size();
  DelegationGraph g(n);
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!rng.bernoulli(delegation_probability(mech, competencies[i]))) continue;
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      weights[j] = (j == i) ? 0.0 : pair_weight(mech, competencies[i], competencies[j]);
      total += weights[j];
    }
    if (!(total > 0.0)) continue;
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (weights[j] <= 0.0) continue;
      acc += weights[j];
      pick = j;
      if (u < acc) break;
    }
    g.set_target(i, static_cast<VoterId>(pick));
  }
  return g;
}

DelegationGraph sample_upward_sequential(double p, std::span<const double> competencies,
                                         RandomStream& rng) {
  require_voters(competencies);
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("sample_upward_sequential: p in (0, 1)");
  const std::size_t n = competencies.size();
  std::vector<VoterId> order = all_voters(n);
  std::stable_sort(order.begin(), order.end(),
                   [&](VoterId a, VoterId b) { return competencies[a] > competencies[b]; });
  DelegationGraph g(n);
  std::vector<VoterId> founder(n);
  for (std::size_t t = 0; t < n; ++t) {
    const VoterId v = order[t];
    founder[v] = v;
    if (t == 0 || !rng.bernoulli(p)) continue;
    // A uniformly chosen earlier voter lies in component C with probability |C| / t.
    const VoterId f = founder[order[rng.below(t)]];
    founder[v] = f;
    g.set_target(v, f);
  }
  return g;
}

WeightProfile compute_weights(const DelegationGraph& g) {
  const std::size_t n = g.size();
  const auto out = g.edges();
  enum : std::uint8_t { kUnseen = 0, kOnPath = 1, kDone = 2 };
  std::vector<std::uint8_t> color(n, kUnseen);
  WeightProfile w;
  w.is_nullified.assign(n, 0);

  // Walk forward from each unseen voter; a walk that closes on its own path
  // found a cycle, and everything on the path inherits the fate of where the
  // walk stopped.
  std::vector<std::size_t> path;
  for (std::size_t start = 0; start < n; ++start) {
    if (color[start] != kUnseen) continue;
    path.clear();
    std::size_t v = start;
    bool doomed = false;
    for (;;) {
      color[v] = kOnPath;
      path.push_back(v);
      const auto t = out[v];
      if (t < 0) break;
      const auto next = static_cast<std::size_t>(t);
      if (color[next] == kOnPath) {
        doomed = true;
        break;
      }
      if (color[next] == kDone) {
        doomed = w.is_nullified[next] != 0;
        break;
      }
      v = next;
    }
    for (std::size_t u : path) {
      color[u] = kDone;
      w.is_nullified[u] = doomed ? 1 : 0;
    }
  }

  // Surviving voters form a forest; accumulate subtree sizes leaves-first.
  std::vector<std::uint64_t> subtree(n, 1);
  std::vector<std::uint32_t> indegree(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (!w.is_nullified[i] && out[i] >= 0) ++indegree[static_cast<std::size_t>(out[i])];
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (!w.is_nullified[i] && indegree[i] == 0) ready.push_back(i);
  while (!ready.empty()) {
    const std::size_t v = ready.back();
    ready.pop_back();
    if (out[v] < 0) continue;
    const auto parent = static_cast<std::size_t>(out[v]);
    subtree[parent] += subtree[v];
    if (--indegree[parent] == 0) ready.push_back(parent);
  }

  w.dels.assign(n, 0);
  w.weight.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (w.is_nullified[i]) {
      w.nullified.push_back(static_cast<VoterId>(i));
      continue;
    }
    w.dels[i] = subtree[i] - 1;
    if (out[i] < 0) {
      w.weight[i] = subtree[i];
      w.total_weight += subtree[i];
      w.max_weight = std::max(w.max_weight, subtree[i]);
    }
  }
  return w;
}

WeightStats stats(const WeightProfile& w) {
  return {w.max_weight, w.total_weight, static_cast<std::uint64_t>(w.nullified.size())};
}

std::uint64_t ancestor_count(const DelegationGraph& g, std::size_t voter) {
  const std::size_t n = g.size();
  const auto out = g.edges();
  std::vector<std::vector<std::size_t>> incoming(n);
  for (std::size_t i = 0; i < n; ++i)
    if (out[i] >= 0) incoming[static_cast<std::size_t>(out[i])].push_back(i);
  std::vector<std::uint8_t> seen(n, 0);
  std::vector<std::size_t> stack{voter};
  seen[voter] = 1;
  std::uint64_t count = 0;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t u : incoming[v]) {
      if (seen[u]) continue;
      seen[u] = 1;
      ++count;
      stack.push_back(u);
    }
  }
  return count;
}

void write_edge_list_csv(std::ostream& os, const DelegationGraph& g) {
  os << "voter,target\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    os << i << ',';
    if (const auto t = g.target(i)) os << *t;
    os << '\n';
  }
}

std::vector<double> sample_competencies(const DistributionSpec& dist, std::size_t n,
                                        RandomStream& rng) {
  std::vector<double> p(n);
  for (auto& x : p) x = sample(dist, rng);
  return p;
}

}  // namespace fluid

#include "tpt/fmgd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <sstream>
#include <thread>

namespace tpt {

FmgdSession::FmgdSession(const GatedFactorGraph& graph) : graph_(&graph) { build(); }

int FmgdSession::lookup(const std::vector<std::map<VarId, int>>& scopes, VarId v,
                        SourceLoc loc) const {
  for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
    auto f = it->find(v);
    if (f != it->end()) return f->second;
  }
  throw TptError("fmgd-undefined",
                 "no marginal for '" + graph_->var_name[static_cast<size_t>(v)] + "'", loc);
}

int FmgdSession::alloc(Node n) {
  n.offset = arena_size_;
  arena_size_ += n.domain;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void FmgdSession::compile_gate(int gate, std::vector<std::map<VarId, int>>& scopes) {
  const GatedFactorGraph& g = *graph_;
  const Gate& gt = g.gates[static_cast<size_t>(gate)];
  for (const Gate::Item& item : gt.body) {
    if (item.kind == Gate::Item::FactorItem) {
      const Factor& f = g.factors[static_cast<size_t>(item.index)];
      const FactorTable& t = g.tables[static_cast<size_t>(f.table)];
      Node n;
      n.kind = Node::FactorProp;
      n.domain = t.out_domain;
      n.a = item.index;
      for (VarId v : f.inputs) n.inputs.push_back(lookup(scopes, v, f.loc));
      int id = alloc(std::move(n));
      if (t.leak) {
        Node r;
        r.kind = Node::Renorm;
        r.domain = t.out_domain;
        r.inputs.push_back(id);
        id = alloc(std::move(r));
      }
      scopes.back()[f.output] = id;
      site_nodes_[{f.output, gate}] = id;
    } else {
      const GateFamily& fam = g.families[static_cast<size_t>(item.index)];
      int subject_node = lookup(scopes, fam.subject, fam.loc);
      std::vector<std::map<VarId, int>> arm_maps;
      for (int arm : fam.arm_gates) {
        scopes.emplace_back();
        compile_gate(arm, scopes);
        arm_maps.push_back(std::move(scopes.back()));
        scopes.pop_back();
      }
      for (VarId v : fam.exports) {
        Node n;
        n.kind = Node::GateExit;
        n.domain = g.var_domain[static_cast<size_t>(v)];
        n.a = subject_node;
        for (size_t a = 0; a < arm_maps.size(); ++a) {
          n.inputs.push_back(arm_maps[a].at(v));
          n.values.push_back(fam.arm_values[a]);
        }
        int id = alloc(std::move(n));
        scopes.back()[v] = id;
        site_nodes_[{v, gate}] = id;
      }
      // Record in-gate definitions for introspection.
      for (size_t a = 0; a < arm_maps.size(); ++a)
        for (const auto& [v, id] : arm_maps[a]) site_nodes_.try_emplace({v, fam.arm_gates[a]}, id);
    }
  }
}

void FmgdSession::build() {
  const GatedFactorGraph& g = *graph_;
  std::vector<std::map<VarId, int>> scopes(1);

  std::map<VarId, int> pins;
  for (const auto& [v, val] : g.inputs) pins[v] = val;

  param_nodes_.assign(g.params.size(), -1);
  for (size_t i = 0; i < g.params.size(); ++i) {
    VarId p = g.params[i];
    if (pins.count(p)) continue;  // pinned parameters enter as onehot below
    Node n;
    n.kind = Node::ParamSoftmax;
    n.domain = g.var_domain[static_cast<size_t>(p)];
    n.a = static_cast<int>(i);
    int id = alloc(std::move(n));
    param_nodes_[i] = id;
    scopes[0][p] = id;
    site_nodes_[{p, 0}] = id;
  }
  for (const auto& [v, val] : g.inputs) {
    Node n;
    n.kind = Node::Onehot;
    n.domain = g.var_domain[static_cast<size_t>(v)];
    n.a = val;
    int id = alloc(std::move(n));
    scopes[0][v] = id;
    site_nodes_[{v, 0}] = id;
  }

  compile_gate(0, scopes);

  for (const auto& [v, val] : g.observations) {
    obs_nodes_.push_back(lookup(scopes, v, SourceLoc{}));
    obs_values_.push_back(val);
  }
}

double FmgdSession::forward(const Logits& logits, MarginalTape& tape) const {
  const GatedFactorGraph& g = *graph_;
  tape.values.assign(static_cast<size_t>(arena_size_), 0.0);
  double* vals = tape.values.data();

  std::vector<int> cfg;
  for (const Node& n : nodes_) {
    double* out = vals + n.offset;
    switch (n.kind) {
      case Node::Onehot:
        out[n.a] = 1.0;
        break;
      case Node::ParamSoftmax: {
        const std::vector<double>& m = logits.m[static_cast<size_t>(n.a)];
        double mx = m[0];
        for (double x : m) {
          if (!std::isfinite(x))
            throw TptError("numeric",
                           "non-finite logit for parameter '" +
                               g.var_name[static_cast<size_t>(g.params[static_cast<size_t>(n.a)])] +
                               "'");
          mx = std::max(mx, x);
        }
        double z = 0;
        for (int x = 0; x < n.domain; ++x) {
          out[x] = std::exp(m[static_cast<size_t>(x)] - mx);
          z += out[x];
        }
        for (int x = 0; x < n.domain; ++x) out[x] /= z;
        break;
      }
      case Node::FactorProp: {
        const Factor& f = g.factors[static_cast<size_t>(n.a)];
        const FactorTable& t = g.tables[static_cast<size_t>(f.table)];
        size_t configs = t.config_count();
        size_t m = t.in_domains.size();
        cfg.assign(m, 0);
        for (size_t k = 0; k < configs; ++k) {
          double w = 1.0;
          for (size_t i = 0; i < m; ++i)
            w *= vals[nodes_[static_cast<size_t>(n.inputs[i])].offset + cfg[i]];
          int y = t.table[k];
          if (y != kOutOfRange && w != 0.0) out[y] += w;
          // Advance the row-major odometer.
          for (size_t i = m; i-- > 0;) {
            if (++cfg[i] < t.in_domains[i]) break;
            cfg[i] = 0;
          }
        }
        break;
      }
      case Node::Renorm: {
        const Node& raw = nodes_[static_cast<size_t>(n.inputs[0])];
        double z = 0;
        for (int x = 0; x < n.domain; ++x) z += vals[raw.offset + x];
        if (z > 0)
          for (int x = 0; x < n.domain; ++x) out[x] = vals[raw.offset + x] / z;
        break;
      }
      case Node::GateExit: {
        const Node& subject = nodes_[static_cast<size_t>(n.a)];
        for (size_t a = 0; a < n.inputs.size(); ++a) {
          double s = vals[subject.offset + n.values[a]];
          if (s == 0.0) continue;
          const Node& child = nodes_[static_cast<size_t>(n.inputs[a])];
          for (int x = 0; x < n.domain; ++x) out[x] += s * vals[child.offset + x];
        }
        break;
      }
    }
  }

  double loss = 0;
  for (size_t o = 0; o < obs_nodes_.size(); ++o) {
    double p = vals[nodes_[static_cast<size_t>(obs_nodes_[o])].offset + obs_values_[o]];
    loss += -std::log(std::max(p, epsilon));
  }
  if (!std::isfinite(loss)) throw TptError("numeric", "non-finite loss");
  return loss;
}

double FmgdSession::gradient(const Logits& logits, MarginalTape& tape,
                             std::vector<std::vector<double>>& grad) const {
  return gradient_with_entropy(logits, 0.0, tape, grad);
}

double FmgdSession::gradient_with_entropy(const Logits& logits, double rho, MarginalTape& tape,
                                          std::vector<std::vector<double>>& grad) const {
  const GatedFactorGraph& g = *graph_;
  double loss = forward(logits, tape);
  tape.grads.assign(static_cast<size_t>(arena_size_), 0.0);
  double* vals = tape.values.data();
  double* grads = tape.grads.data();

  for (size_t o = 0; o < obs_nodes_.size(); ++o) {
    const Node& n = nodes_[static_cast<size_t>(obs_nodes_[o])];
    double p = vals[n.offset + obs_values_[o]];
    if (p > epsilon) grads[n.offset + obs_values_[o]] += -1.0 / p;
  }

  // Entropy bonus on parameter softmax outputs: the minimized objective is
  // loss - rho * sum_p H(mu_p).
  if (rho != 0.0) {
    for (int id : param_nodes_) {
      if (id < 0) continue;
      const Node& n = nodes_[static_cast<size_t>(id)];
      for (int x = 0; x < n.domain; ++x) {
        double mu = vals[n.offset + x];
        grads[n.offset + x] += rho * (std::log(std::max(mu, epsilon)) + (mu > epsilon ? 1.0 : 0.0));
      }
    }
  }

  grad.assign(g.params.size(), {});
  for (size_t i = 0; i < g.params.size(); ++i)
    grad[i].assign(static_cast<size_t>(g.var_domain[static_cast<size_t>(g.params[i])]), 0.0);

  std::vector<int> cfg;
  std::vector<double> pre, suf;
  for (size_t ni = nodes_.size(); ni-- > 0;) {
    const Node& n = nodes_[ni];
    const double* gout = grads + n.offset;
    switch (n.kind) {
      case Node::Onehot:
        break;
      case Node::ParamSoftmax: {
        double dot = 0;
        for (int x = 0; x < n.domain; ++x) dot += gout[x] * vals[n.offset + x];
        std::vector<double>& gm = grad[static_cast<size_t>(n.a)];
        for (int x = 0; x < n.domain; ++x)
          gm[static_cast<size_t>(x)] += vals[n.offset + x] * (gout[x] - dot);
        break;
      }
      case Node::FactorProp: {
        const Factor& f = g.factors[static_cast<size_t>(n.a)];
        const FactorTable& t = g.tables[static_cast<size_t>(f.table)];
        size_t m = t.in_domains.size();
        if (m == 0) break;
        size_t configs = t.config_count();
        cfg.assign(m, 0);
        pre.assign(m + 1, 1.0);
        suf.assign(m + 1, 1.0);
        for (size_t k = 0; k < configs; ++k) {
          int y = t.table[k];
          if (y != kOutOfRange) {
            double gbar = gout[y];
            if (gbar != 0.0) {
              for (size_t i = 0; i < m; ++i)
                pre[i + 1] =
                    pre[i] * vals[nodes_[static_cast<size_t>(n.inputs[i])].offset + cfg[i]];
              suf[m] = 1.0;
              for (size_t i = m; i-- > 0;)
                suf[i] = suf[i + 1] * vals[nodes_[static_cast<size_t>(n.inputs[i])].offset + cfg[i]];
              for (size_t i = 0; i < m; ++i) {
                double gi = gbar * pre[i] * suf[i + 1];
                if (gi != 0.0)
                  grads[nodes_[static_cast<size_t>(n.inputs[i])].offset + cfg[i]] += gi;
              }
            }
          }
          for (size_t i = m; i-- > 0;) {
            if (++cfg[i] < t.in_domains[i]) break;
            cfg[i] = 0;
          }
        }
        break;
      }
      case Node::Renorm: {
        const Node& raw = nodes_[static_cast<size_t>(n.inputs[0])];
        double z = 0;
        for (int x = 0; x < n.domain; ++x) z += vals[raw.offset + x];
        if (z <= 0) break;
        double dot = 0;
        for (int x = 0; x < n.domain; ++x) dot += gout[x] * vals[n.offset + x];
        for (int x = 0; x < n.domain; ++x) grads[raw.offset + x] += (gout[x] - dot) / z;
        break;
      }
      case Node::GateExit: {
        const Node& subject = nodes_[static_cast<size_t>(n.a)];
        for (size_t a = 0; a < n.inputs.size(); ++a) {
          const Node& child = nodes_[static_cast<size_t>(n.inputs[a])];
          double s = vals[subject.offset + n.values[a]];
          double sdot = 0;
          for (int x = 0; x < n.domain; ++x) {
            if (s != 0.0) grads[child.offset + x] += gout[x] * s;
            sdot += gout[x] * vals[child.offset + x];
          }
          grads[subject.offset + n.values[a]] += sdot;
        }
        break;
      }
    }
  }
  return loss;
}

std::vector<double> FmgdSession::marginal_of(const MarginalTape& tape, VarId v, int gate) const {
  for (int gi = gate; gi != -1; gi = graph_->gates[static_cast<size_t>(gi)].parent) {
    auto it = site_nodes_.find({v, gi});
    if (it != site_nodes_.end()) {
      const Node& n = nodes_[static_cast<size_t>(it->second)];
      return std::vector<double>(tape.values.begin() + n.offset,
                                 tape.values.begin() + n.offset + n.domain);
    }
  }
  throw TptError("fmgd-site",
                 "no marginal recorded for '" + graph_->var_name[static_cast<size_t>(v)] + "'");
}

Logits init_params(const GatedFactorGraph& graph, double alpha, uint64_t seed) {
  if (alpha <= 0) throw TptError("fmgd-alpha", "Dirichlet concentration must be positive");
  Rng rng(seed);
  Logits logits;
  logits.m.resize(graph.params.size());
  for (size_t i = 0; i < graph.params.size(); ++i) {
    int domain = graph.var_domain[static_cast<size_t>(graph.params[i])];
    logits.m[i].resize(static_cast<size_t>(domain));
    for (int x = 0; x < domain; ++x) logits.m[i][static_cast<size_t>(x)] = std::log(rng.gamma(alpha));
  }
  return logits;
}

Logits saturated_logits(const GatedFactorGraph& graph,
                        const std::vector<std::vector<double>>& marginals, double gap) {
  Logits logits;
  logits.m.resize(graph.params.size());
  for (size_t i = 0; i < graph.params.size(); ++i) {
    int domain = graph.var_domain[static_cast<size_t>(graph.params[i])];
    const std::vector<double>& mu = marginals[i];
    std::vector<double>& m = logits.m[i];
    m.assign(static_cast<size_t>(domain), 0.0);
    for (int x = 0; x < domain; ++x) {
      // .5 entries keep equal logits; saturated entries get the full gap.
      m[static_cast<size_t>(x)] = mu[static_cast<size_t>(x)] >= 1.0   ? gap
                                  : mu[static_cast<size_t>(x)] <= 0.0 ? 0.0
                                                                      : gap * 0.5;
    }
  }
  return logits;
}

ParamAssignment discretize(const GatedFactorGraph& graph, const Logits& logits) {
  std::map<VarId, int> pins;
  for (const auto& [v, val] : graph.inputs)
    if (graph.var_is_param[static_cast<size_t>(v)]) pins[v] = val;
  ParamAssignment a;
  a.values.assign(graph.params.size(), 0);
  for (size_t i = 0; i < graph.params.size(); ++i) {
    auto pin = pins.find(graph.params[i]);
    if (pin != pins.end()) {
      a.values[i] = pin->second;
      continue;
    }
    const std::vector<double>& m = logits.m[i];
    int best = 0;
    for (size_t x = 1; x < m.size(); ++x)
      if (m[x] > m[static_cast<size_t>(best)]) best = static_cast<int>(x);
    a.values[i] = best;
  }
  return a;
}

TrainResult train(const GatedFactorGraph& graph, const FmgdHyperparams& hp, uint64_t seed) {
  FmgdSession session(graph);
  return train(session, hp, seed);
}

TrainResult train(const FmgdSession& session, const FmgdHyperparams& hp, uint64_t seed) {
  const GatedFactorGraph& graph = session.graph();
  TrainResult result;
  result.logits = init_params(graph, hp.alpha, seed);
  Rng noise_rng(mix_seed(seed, 0x6e6f697365ull));

  FmgdSession sess = session;  // session is cheap to copy; epsilon may differ
  sess.epsilon = hp.epsilon;

  MarginalTape tape;
  std::vector<std::vector<double>> grad;
  std::vector<std::vector<double>> rms_acc;

  auto finish = [&](TrainStatus status, double loss, int epochs) {
    result.status = status;
    result.final_loss = loss;
    result.epochs = epochs;
    result.assignment = discretize(graph, result.logits);
    result.consistent = check_consistency(graph, result.assignment);
    if (status != TrainStatus::Converged && result.consistent && loss < hp.loss_threshold)
      result.status = TrainStatus::Converged;
    return result;
  };

  double loss = 0;
  for (int t = 0; t < hp.max_epochs; ++t) {
    double rho_t = hp.entropy_rho * std::pow(hp.entropy_decay, t);
    try {
      loss = sess.gradient_with_entropy(result.logits, rho_t, tape, grad);
    } catch (const TptError& e) {
      result.error = e.what();
      return finish(TrainStatus::NumericError, std::nan(""), t);
    }

    double norm_sq = 0;
    for (size_t i = 0; i < grad.size(); ++i)
      for (double gx : grad[i]) norm_sq += gx * gx;
    double norm = std::sqrt(norm_sq);
    result.trace.push_back(TrainResult::TracePoint{t, loss, norm});

    if (loss < hp.loss_threshold) {
      ParamAssignment a = discretize(graph, result.logits);
      if (check_consistency(graph, a)) return finish(TrainStatus::Converged, loss, t);
    }
    if (norm < 1e-12 && hp.noise_eta == 0.0) return finish(TrainStatus::Stalled, loss, t);

    if (hp.clip_norm > 0 && norm > hp.clip_norm) {
      double scale = hp.clip_norm / norm;
      for (auto& gp : grad)
        for (double& gx : gp) gx *= scale;
    }
    if (hp.noise_eta > 0) {
      double sigma = std::sqrt(hp.noise_eta / std::pow(1.0 + t, hp.noise_gamma));
      for (auto& gp : grad)
        for (double& gx : gp) gx += sigma * noise_rng.normal();
    }

    if (hp.optimizer == FmgdHyperparams::Opt::RMSProp && rms_acc.empty()) {
      rms_acc.resize(grad.size());
      for (size_t i = 0; i < grad.size(); ++i) rms_acc[i].assign(grad[i].size(), 0.0);
    }
    for (size_t i = 0; i < grad.size(); ++i) {
      std::vector<double>& m = result.logits.m[i];
      for (size_t x = 0; x < grad[i].size(); ++x) {
        double gx = grad[i][x];
        if (hp.optimizer == FmgdHyperparams::Opt::SGD) {
          m[x] -= hp.learning_rate * gx;
        } else {
          double& acc = rms_acc[i][x];
          acc = hp.rms_decay * acc + (1.0 - hp.rms_decay) * gx * gx;
          m[x] -= hp.learning_rate * gx / (std::sqrt(acc) + hp.rms_eps);
        }
      }
    }
  }

  try {
    loss = sess.forward(result.logits, tape);
  } catch (const TptError& e) {
    result.error = e.what();
    return finish(TrainStatus::NumericError, std::nan(""), hp.max_epochs);
  }
  return finish(TrainStatus::EpochLimit, loss, hp.max_epochs);
}

std::string trace_to_csv(const TrainResult& r) {
  std::ostringstream os;
  os << "epoch,loss,grad_norm\n";
  for (const auto& p : r.trace) os << p.epoch << "," << p.loss << "," << p.grad_norm << "\n";
  return os.str();
}

FmgdHyperparams HyperDistribution::sample(Rng& rng) const {
  FmgdHyperparams hp;
  hp.learning_rate = std::pow(10.0, rng.uniform(lr_log10_lo, lr_log10_hi));
  hp.alpha = alphas[static_cast<size_t>(rng.pick(static_cast<int>(alphas.size())))];
  hp.optimizer = optimizers[static_cast<size_t>(rng.pick(static_cast<int>(optimizers.size())))];
  hp.clip_norm = clip_norms[static_cast<size_t>(rng.pick(static_cast<int>(clip_norms.size())))];
  hp.noise_eta = noise_etas[static_cast<size_t>(rng.pick(static_cast<int>(noise_etas.size())))];
  hp.noise_gamma = noise_gammas[static_cast<size_t>(rng.pick(static_cast<int>(noise_gammas.size())))];
  hp.entropy_rho = entropy_rhos[static_cast<size_t>(rng.pick(static_cast<int>(entropy_rhos.size())))];
  hp.entropy_decay =
      entropy_decays[static_cast<size_t>(rng.pick(static_cast<int>(entropy_decays.size())))];
  hp.epsilon = epsilon;
  hp.max_epochs = max_epochs;
  hp.loss_threshold = loss_threshold;
  return hp;
}

HyperDistribution HyperDistribution::defaults() { return HyperDistribution{}; }

namespace {

// Runs fn(i) for i in [0, n) on `jobs` workers; results must be written to
// pre-sized slots so the output is identical to serial execution.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  workers.reserve(static_cast<size_t>(jobs));
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        int i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& t : workers) t.join();
}

}  // namespace

std::vector<bool> run_restarts(const GatedFactorGraph& graph, const FmgdHyperparams& hp,
                               int n_seeds, uint64_t master_seed, int jobs) {
  FmgdSession session(graph);
  std::vector<bool> ok(static_cast<size_t>(n_seeds), false);
  parallel_for(n_seeds, jobs, [&](int i) {
    TrainResult r = train(session, hp, mix_seed(master_seed, kVanillaStream, static_cast<uint64_t>(i)));
    ok[static_cast<size_t>(i)] = r.status == TrainStatus::Converged;
  });
  return ok;
}

SearchReport random_search(const GatedFactorGraph& graph, const HyperDistribution& dist,
                           int n_settings, int n_seeds_per_setting, uint64_t master_seed, int jobs) {
  SearchReport report;
  report.settings.resize(static_cast<size_t>(n_settings));
  for (int s = 0; s < n_settings; ++s) {
    Rng rng(mix_seed(master_seed, 0x73657474696e67ull, static_cast<uint64_t>(s)));
    report.settings[static_cast<size_t>(s)].hypers = dist.sample(rng);
    report.settings[static_cast<size_t>(s)].runs = n_seeds_per_setting;
  }

  FmgdSession session(graph);
  int total = n_settings * n_seeds_per_setting;
  std::vector<char> success(static_cast<size_t>(total), 0);
  parallel_for(total, jobs, [&](int i) {
    int s = i / n_seeds_per_setting;
    int k = i % n_seeds_per_setting;
    TrainResult r = train(session, report.settings[static_cast<size_t>(s)].hypers,
                          mix_seed(master_seed, static_cast<uint64_t>(s), static_cast<uint64_t>(k)));
    success[static_cast<size_t>(i)] = r.status == TrainStatus::Converged ? 1 : 0;
  });

  int total_successes = 0;
  for (int s = 0; s < n_settings; ++s) {
    int n = 0;
    for (int k = 0; k < n_seeds_per_setting; ++k)
      n += success[static_cast<size_t>(s * n_seeds_per_setting + k)];
    report.settings[static_cast<size_t>(s)].successes = n;
    total_successes += n;
    if (report.best_index < 0 ||
        report.settings[static_cast<size_t>(s)].fraction() > report.best_fraction) {
      report.best_index = s;
      report.best_fraction = report.settings[static_cast<size_t>(s)].fraction();
    }
  }
  report.average_fraction = total ? static_cast<double>(total_successes) / total : 0.0;
  return report;
}

}  // namespace tpt

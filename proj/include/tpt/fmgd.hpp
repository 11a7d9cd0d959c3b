#pragma once

#include <cstdint>
#include <optional>

#include "tpt/interp.hpp"
#include "tpt/rng.hpp"

namespace tpt {

// Log parameters, one vector per parameter cell (parallel to graph.params).
// Pinned cells keep a vector too but are propagated as onehot inputs and
// receive zero gradient.
struct Logits {
  std::vector<std::vector<double>> m;
};

struct FmgdHyperparams {
  double alpha = 1.0;  // Dirichlet concentration for initialization
  enum class Opt { SGD, RMSProp };
  Opt optimizer = Opt::RMSProp;
  double learning_rate = 0.1;
  double clip_norm = 0.0;  // 0 disables clipping
  double noise_eta = 0.0;
  double noise_gamma = 0.55;
  double entropy_rho = 0.0;
  double entropy_decay = 0.999;  // per-epoch rate r; rho_t = rho * r^t
  double epsilon = 1e-12;        // log clamp
  int max_epochs = 1000;
  double loss_threshold = 1e-6;
  double rms_decay = 0.9;
  double rms_eps = 1e-8;
};

// Forward-pass recording: per-site marginal vectors in one arena, reused for
// the reverse sweep.
struct MarginalTape {
  std::vector<double> values;
  std::vector<double> grads;
};

// Graph compiled to a forward-marginal program: parameter softmax and onehot
// sources, factor contractions (with leak renormalization), and
// gate-marginal averages at family exits.
class FmgdSession {
 public:
  explicit FmgdSession(const GatedFactorGraph& graph);

  const GatedFactorGraph& graph() const { return *graph_; }

  // Cross-entropy loss of the observations, marginals recorded on the tape.
  double forward(const Logits& logits, MarginalTape& tape) const;

  // Loss plus exact reverse-mode gradient with respect to every logit.
  double gradient(const Logits& logits, MarginalTape& tape,
                  std::vector<std::vector<double>>& grad) const;

  // Gradient of (loss - rho * sum of parameter softmax entropies).
  double gradient_with_entropy(const Logits& logits, double rho, MarginalTape& tape,
                               std::vector<std::vector<double>>& grad) const;

  // Marginal of a variable visible in `gate` (climbing to enclosing scopes),
  // as computed by the last forward pass.
  std::vector<double> marginal_of(const MarginalTape& tape, VarId v, int gate = 0) const;

  double epsilon = 1e-12;

 private:
  struct Node {
    enum Kind { Onehot, ParamSoftmax, FactorProp, Renorm, GateExit } kind;
    int domain = 0;
    int offset = 0;
    // ParamSoftmax: param slot; Onehot: pinned value.
    int a = 0;
    // FactorProp: factor index; inputs in factor order.
    std::vector<int> inputs;
    // GateExit: inputs = child nodes per arm, a = subject node,
    // arm values in `values`.
    std::vector<int> values;
  };

  void build();
  int alloc(Node n);
  int lookup(const std::vector<std::map<VarId, int>>& scopes, VarId v, SourceLoc loc) const;
  void compile_gate(int gate, std::vector<std::map<VarId, int>>& scopes);

  const GatedFactorGraph* graph_;
  std::vector<Node> nodes_;
  std::vector<int> obs_nodes_;
  std::vector<int> obs_values_;
  std::vector<int> param_nodes_;  // per param slot, -1 when pinned
  std::map<std::pair<VarId, int>, int> site_nodes_;
  int arena_size_ = 0;

  friend class FmgdIntrospection;
};

// exp(m_p) ~ Dirichlet(alpha, ..., alpha) independently per parameter cell.
Logits init_params(const GatedFactorGraph& graph, double alpha, uint64_t seed);

// Onehot-at-value logits with the given gap (used for saturated realizations).
Logits saturated_logits(const GatedFactorGraph& graph, const std::vector<std::vector<double>>& marginals,
                        double gap);

// Per cell argmax of softmax; ties break toward the smallest value. Pinned
// cells take their pinned value.
ParamAssignment discretize(const GatedFactorGraph& graph, const Logits& logits);

enum class TrainStatus { Converged, Stalled, EpochLimit, NumericError };

struct TrainResult {
  TrainStatus status = TrainStatus::EpochLimit;
  double final_loss = 0;
  int epochs = 0;
  struct TracePoint {
    int epoch;
    double loss;
    double grad_norm;
  };
  std::vector<TracePoint> trace;
  Logits logits;
  ParamAssignment assignment;
  bool consistent = false;
  std::string error;
};

TrainResult train(const GatedFactorGraph& graph, const FmgdHyperparams& hp, uint64_t seed);
TrainResult train(const FmgdSession& session, const FmgdHyperparams& hp, uint64_t seed);

// Loss trace as CSV (epoch,loss,grad_norm).
std::string trace_to_csv(const TrainResult& r);

// Sampling ranges for random hyperparameter search; the shipped defaults are
// version "v1".
struct HyperDistribution {
  std::string version = "v1";
  double lr_log10_lo = -3.0, lr_log10_hi = 0.0;
  std::vector<double> alphas{0.2, 1.0, 5.0};
  std::vector<FmgdHyperparams::Opt> optimizers{FmgdHyperparams::Opt::SGD,
                                               FmgdHyperparams::Opt::RMSProp};
  std::vector<double> clip_norms{0.0, 1.0, 10.0};
  std::vector<double> noise_etas{0.0, 0.01, 0.1};
  std::vector<double> noise_gammas{0.55};
  std::vector<double> entropy_rhos{0.0, 0.01, 0.1};
  std::vector<double> entropy_decays{0.999, 0.9999};
  double epsilon = 1e-12;
  int max_epochs = 1000;
  double loss_threshold = 1e-6;

  FmgdHyperparams sample(Rng& rng) const;
  static HyperDistribution defaults();
};

struct SearchReport {
  struct Setting {
    FmgdHyperparams hypers;
    int successes = 0;
    int runs = 0;
    double fraction() const { return runs ? static_cast<double>(successes) / runs : 0.0; }
  };
  std::vector<Setting> settings;
  int best_index = -1;
  double best_fraction = 0;
  double average_fraction = 0;
};

// Reproducible given master_seed: run seeds derive from
// (master_seed, setting index, seed index) regardless of job count.
SearchReport random_search(const GatedFactorGraph& graph, const HyperDistribution& dist,
                           int n_settings, int n_seeds_per_setting, uint64_t master_seed,
                           int jobs = 1);

// Repeated vanilla-style training over seeds derived from
// (master_seed, kVanillaStream, seed index); returns per-seed success flags.
std::vector<bool> run_restarts(const GatedFactorGraph& graph, const FmgdHyperparams& hp,
                               int n_seeds, uint64_t master_seed, int jobs = 1);

constexpr uint64_t kVanillaStream = 0xffffffffull;

}  // namespace tpt
